//! Artifact writers. CSV and JSON are byte-deterministic; SVG carries one
//! generator comment line.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde_json::{Map, Value};

use crate::spectra::Spectrum2;

/// Scenario name and config hash stamped into every artifact.
#[derive(Debug, Clone, Copy)]
pub struct Provenance<'a> {
    pub scenario: &'a str,
    pub hash: &'a str,
}

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv<I>(
    path: &Path,
    prov: Provenance,
    comments: &[String],
    header: &[&str],
    rows: I,
) -> io::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut buf = Vec::new();
    {
        use std::io::Write;
        writeln!(buf, "# scenario: {}", prov.scenario)?;
        writeln!(buf, "# config_sha256: {}", prov.hash)?;
        for c in comments {
            writeln!(buf, "# {c}")?;
        }
    }
    let mut w = csv::WriterBuilder::new().from_writer(buf);
    w.write_record(header).map_err(io::Error::other)?;
    for row in rows {
        w.write_record(&row).map_err(io::Error::other)?;
    }
    let buf = w
        .into_inner()
        .map_err(|e| io::Error::other(e.to_string()))?;
    fs::write(path, buf)
}

/// Writes `body` (an object) with provenance keys added; keys come out sorted.
pub fn write_json(path: &Path, prov: Provenance, body: Value) -> io::Result<()> {
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    map.insert("scenario".into(), Value::from(prov.scenario));
    map.insert("config_sha256".into(), Value::from(prov.hash));
    let mut text = serde_json::to_string_pretty(&Value::Object(map)).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        Self {
            x: pad(x),
            y: pad(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str, prov: Provenance) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        "<!-- generator: {} {} -->",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(
        out,
        "<!-- scenario: {} config_sha256: {} -->",
        escape(prov.scenario),
        prov.hash
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#
    );
    let label = |out: &mut String, x: f64, y: f64, anchor: &str, text: String| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="{anchor}" font-family="sans-serif">{text}</text>"#
        );
    };
    label(out, x0, y0 + 16.0, "middle", format!("{:.4}", frame.x.0));
    label(out, x1, y0 + 16.0, "middle", format!("{:.4}", frame.x.1));
    label(out, x0 - 4.0, y0, "end", format!("{:.3e}", frame.y.0));
    label(out, x0 - 4.0, y1 + 4.0, "end", format!("{:.3e}", frame.y.1));
    label(out, WIDTH / 2.0, HEIGHT - 12.0, "middle", escape(xlabel));
    label(out, 14.0, HEIGHT / 2.0, "middle", escape(ylabel));
}

/// One polyline per series, shared axes.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    prov: Provenance,
) -> String {
    let finite = series
        .iter()
        .flat_map(|(_, pts)| pts.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut xr, mut yr) = (
        (f64::INFINITY, f64::NEG_INFINITY),
        (f64::INFINITY, f64::NEG_INFINITY),
    );
    for &(x, y) in finite {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y), yr.1.max(y));
    }
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    let frame = Frame::new(xr, yr);
    let mut out = String::new();
    header(&mut out, title, prov);
    axes(&mut out, &frame, xlabel, ylabel);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        for &(x, y) in pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(path, "{:.2},{:.2} ", frame.px(x), frame.py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.4"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}" font-family="sans-serif">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Iso-lines of a 2D grid at fractions of its maximum (marching squares).
pub fn contour_plot(title: &str, grid: &Spectrum2, fractions: &[f64], prov: Provenance) -> String {
    // coarse view of large grids keeps file sizes bounded
    let stride_y = grid.y.len.div_ceil(240).max(1);
    let stride_z = grid.z.len.div_ceil(240).max(1);
    let ys: Vec<usize> = (0..grid.y.len).step_by(stride_y).collect();
    let zs: Vec<usize> = (0..grid.z.len).step_by(stride_z).collect();
    let peak = grid.values.iter().cloned().fold(0.0, f64::max);
    let frame = Frame::new((grid.y.start, grid.y.end()), (grid.z.start, grid.z.end()));
    let mut out = String::new();
    header(&mut out, title, prov);
    axes(&mut out, &frame, "y", "z");
    if peak > 0.0 {
        for (k, &f) in fractions.iter().enumerate() {
            let level = f * peak;
            let color = COLORS[k % COLORS.len()];
            let mut d = String::new();
            for a in 0..ys.len().saturating_sub(1) {
                for b in 0..zs.len().saturating_sub(1) {
                    let corner = |da: usize, db: usize| {
                        let (i, j) = (ys[a + da], zs[b + db]);
                        (grid.y.point(i), grid.z.point(j), grid.at(i, j))
                    };
                    let c = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                    for (p, q) in cell_segments(&c, level) {
                        let _ = write!(
                            d,
                            "M{:.2} {:.2}L{:.2} {:.2}",
                            frame.px(p.0),
                            frame.py(p.1),
                            frame.px(q.0),
                            frame.py(q.1)
                        );
                    }
                }
            }
            let _ = writeln!(
                out,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}" font-family="sans-serif">{f} of max</text>"#,
                WIDTH - MARGIN - 90.0,
                MARGIN + 14.0 * (k as f64 + 1.0)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

type Point = (f64, f64);

/// Segments where the bilinear cell crosses `level`; corners counter-clockwise.
fn cell_segments(c: &[(f64, f64, f64); 4], level: f64) -> Vec<(Point, Point)> {
    let mut hits = Vec::with_capacity(4);
    for e in 0..4 {
        let (a, b) = (c[e], c[(e + 1) % 4]);
        if (a.2 >= level) != (b.2 >= level) {
            let t = (level - a.2) / (b.2 - a.2);
            hits.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    match hits.len() {
        2 => vec![(hits[0], hits[1])],
        4 => {
            let centre = 0.25 * c.iter().map(|p| p.2).sum::<f64>();
            if (centre >= level) == (c[0].2 >= level) {
                vec![(hits[0], hits[3]), (hits[1], hits[2])]
            } else {
                vec![(hits[0], hits[1]), (hits[2], hits[3])]
            }
        }
        _ => Vec::new(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Axis;

    const PROV: Provenance = Provenance {
        scenario: "t",
        hash: "abc",
    };

    #[test]
    fn numbers_have_twelve_significant_digits() {
        assert_eq!(num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(num(-2.5e-7), "-2.50000000000e-7");
    }

    #[test]
    fn csv_has_provenance_comments_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(
            &p,
            PROV,
            &["note".into()],
            &["a", "b"],
            vec![vec![num(1.0), "m".into()]],
        )
        .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# scenario: t");
        assert_eq!(lines[1], "# config_sha256: abc");
        assert_eq!(lines[2], "# note");
        assert_eq!(lines[3], "a,b");
        assert_eq!(lines[4], "1.00000000000e0,m");
    }

    #[test]
    fn json_keys_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_json(&p, PROV, serde_json::json!({"zeta": 1, "alpha": 2})).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let pos = |k: &str| text.find(k).unwrap();
        assert!(pos("alpha") < pos("config_sha256"));
        assert!(pos("config_sha256") < pos("scenario"));
        assert!(pos("scenario") < pos("zeta"));
    }

    #[test]
    fn contour_of_a_cone_is_drawn() {
        let axis = Axis::new(-1.0, 0.1, 21).unwrap();
        let values = (0..21)
            .flat_map(|i| {
                (0..21).map(move |j| (1.0 - (axis.point(i).hypot(axis.point(j)))).max(0.0))
            })
            .collect();
        let grid = Spectrum2 {
            y: axis,
            z: axis,
            values,
            mass: 0.0,
        };
        let svg = contour_plot("cone", &grid, &[0.5], PROV);
        assert!(svg.starts_with("<svg"));
        assert!(svg.matches('M').count() > 10);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn saddle_cells_give_two_segments() {
        let c = [
            (0.0, 0.0, 1.0),
            (1.0, 0.0, 0.0),
            (1.0, 1.0, 1.0),
            (0.0, 1.0, 0.0),
        ];
        assert_eq!(cell_segments(&c, 0.5).len(), 2);
        let flat = [
            (0.0, 0.0, 1.0),
            (1.0, 0.0, 1.0),
            (1.0, 1.0, 1.0),
            (0.0, 1.0, 1.0),
        ];
        assert!(cell_segments(&flat, 0.5).is_empty());
    }
}

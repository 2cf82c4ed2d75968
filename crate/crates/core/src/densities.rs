//! Coupling spectral densities: the degeneracy-summed squared transition
//! matrix elements as a function of emitted-quantum energy.
//!
//! Every family is clipped to zero for negative energies inside
//! [`SpectralDensity::evaluate`], so callers may integrate over any range.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_semi_infinite, Tolerance, Window};

/// Upper bound on the total weight accepted at construction.
pub const MAX_TOTAL_WEIGHT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum DensityFamily {
    /// `v0` on `[a, b]`, zero elsewhere.
    FlatWindow { v0: f64, a: f64, b: f64 },
    /// `g2 * w * exp(-w / cutoff)`.
    OhmicExp { g2: f64, cutoff: f64 },
    /// `amplitude / pi * width / (width^2 + (w - center)^2)` on `w >= 0`.
    ShiftedLorentzian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Piecewise-linear interpolation of `(w, value)` nodes, zero outside.
    Tabulated { nodes: Vec<(f64, f64)> },
}

impl DensityFamily {
    /// Reads a two-column CSV `(w, value)` with a one-line header.
    pub fn tabulated_from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::InvalidDensity(format!("{}: {e}", path.display())))?;
        let mut nodes = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::InvalidDensity(format!("{}: {e}", path.display())))?;
            if record.len() != 2 {
                return Err(Error::InvalidDensity(format!(
                    "{}: row {} has {} columns, expected 2",
                    path.display(),
                    line + 2,
                    record.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::InvalidDensity(format!("{}: row {}: {e}", path.display(), line + 2))
                })
            };
            nodes.push((parse(&record[0])?, parse(&record[1])?));
        }
        Ok(DensityFamily::Tabulated { nodes })
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDensity(msg));
        match self {
            DensityFamily::FlatWindow { v0, a, b } => {
                if !(v0.is_finite() && *v0 >= 0.0) {
                    return bad(format!(
                        "flat window height must be finite and >= 0, got {v0}"
                    ));
                }
                if !(a.is_finite() && b.is_finite() && *a >= 0.0 && a < b) {
                    return bad(format!("flat window needs 0 <= a < b, got [{a}, {b}]"));
                }
            }
            DensityFamily::OhmicExp { g2, cutoff } => {
                if !(g2.is_finite() && *g2 >= 0.0) {
                    return bad(format!("ohmic coupling must be finite and >= 0, got {g2}"));
                }
                if !(cutoff.is_finite() && *cutoff > 0.0) {
                    return bad(format!("ohmic cutoff must be positive, got {cutoff}"));
                }
            }
            DensityFamily::ShiftedLorentzian {
                amplitude,
                center,
                width,
            } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad(format!(
                        "lorentzian amplitude must be >= 0, got {amplitude}"
                    ));
                }
                if !center.is_finite() {
                    return bad(format!("lorentzian center must be finite, got {center}"));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return bad(format!("lorentzian width must be positive, got {width}"));
                }
            }
            DensityFamily::Tabulated { nodes } => {
                if nodes.len() < 2 {
                    return bad("tabulated density needs at least two nodes".into());
                }
                for (i, &(w, v)) in nodes.iter().enumerate() {
                    if !(w.is_finite() && v.is_finite()) {
                        return bad(format!("tabulated node {i} is not finite"));
                    }
                    if v < 0.0 {
                        return bad(format!("tabulated value at w = {w} is negative"));
                    }
                }
                if nodes[0].0 < 0.0 {
                    return bad(format!(
                        "tabulated grid starts at negative energy {}",
                        nodes[0].0
                    ));
                }
                if nodes.windows(2).any(|p| p[1].0 <= p[0].0) {
                    return bad("tabulated grid must be strictly increasing".into());
                }
            }
        }
        Ok(())
    }
}

/// A validated, immutable spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    family: DensityFamily,
    cutoff_scale: f64,
    total_weight: f64,
}

impl SpectralDensity {
    pub fn new(family: DensityFamily) -> Result<Self> {
        family.validate()?;
        let cutoff_scale = match &family {
            DensityFamily::FlatWindow { b, .. } => *b,
            DensityFamily::OhmicExp { cutoff, .. } => *cutoff,
            DensityFamily::ShiftedLorentzian { center, width, .. } => center.max(0.0) + width,
            DensityFamily::Tabulated { nodes } => nodes[nodes.len() - 1].0,
        };
        let mut density = SpectralDensity {
            family,
            cutoff_scale,
            total_weight: 0.0,
        };
        let total = density.integrated_weight(&Tolerance::default())?;
        if !(total.is_finite() && total <= MAX_TOTAL_WEIGHT) {
            return Err(Error::NonIntegrable(format!(
                "total weight {total:e} exceeds {MAX_TOTAL_WEIGHT:e}"
            )));
        }
        density.total_weight = total;
        Ok(density)
    }

    /// The identically vanishing density.
    pub fn zero() -> Self {
        SpectralDensity {
            family: DensityFamily::FlatWindow {
                v0: 0.0,
                a: 0.0,
                b: 1.0,
            },
            cutoff_scale: 1.0,
            total_weight: 0.0,
        }
    }

    pub fn family(&self) -> &DensityFamily {
        &self.family
    }

    pub fn cutoff_scale(&self) -> f64 {
        self.cutoff_scale
    }

    pub fn evaluate(&self, w: f64) -> f64 {
        if !(w >= 0.0) {
            return 0.0;
        }
        match &self.family {
            DensityFamily::FlatWindow { v0, a, b } => {
                if w >= *a && w <= *b {
                    *v0
                } else {
                    0.0
                }
            }
            DensityFamily::OhmicExp { g2, cutoff } => g2 * w * (-w / cutoff).exp(),
            DensityFamily::ShiftedLorentzian {
                amplitude,
                center,
                width,
            } => {
                let d = w - center;
                amplitude / PI * width / (width * width + d * d)
            }
            DensityFamily::Tabulated { nodes } => interpolate(nodes, w),
        }
    }

    /// `∫_0^inf V(w) dw`, computed at construction.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Recomputes the total weight with the given tolerance.
    pub fn integrated_weight(&self, tol: &Tolerance) -> Result<f64> {
        integrate_semi_infinite(|w| self.evaluate(w), &Window::for_density(self), tol)
            .map(|r| r.value)
            .map_err(|e| Error::NonIntegrable(e.to_string()))
    }

    /// Points where the density has a kink or a jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            DensityFamily::FlatWindow { a, b, .. } => vec![*a, *b],
            DensityFamily::OhmicExp { .. } => Vec::new(),
            DensityFamily::ShiftedLorentzian { center, .. } if *center > 0.0 => vec![*center],
            DensityFamily::ShiftedLorentzian { .. } => Vec::new(),
            DensityFamily::Tabulated { nodes } => nodes.iter().map(|n| n.0).collect(),
        }
    }

    /// Points where the density is discontinuous.
    pub fn jumps(&self) -> Vec<f64> {
        match &self.family {
            DensityFamily::FlatWindow { v0, a, b } if *v0 > 0.0 => vec![*a, *b],
            DensityFamily::FlatWindow { .. } => Vec::new(),
            DensityFamily::OhmicExp { .. } => Vec::new(),
            DensityFamily::ShiftedLorentzian { amplitude, .. } if *amplitude > 0.0 => vec![0.0],
            DensityFamily::ShiftedLorentzian { .. } => Vec::new(),
            DensityFamily::Tabulated { nodes } => {
                let mut j = Vec::new();
                let first = nodes[0];
                let last = nodes[nodes.len() - 1];
                if first.1 > 0.0 {
                    j.push(first.0);
                }
                if last.1 > 0.0 {
                    j.push(last.0);
                }
                j
            }
        }
    }

    /// Characteristic width of the density in energy.
    pub fn width(&self) -> f64 {
        match &self.family {
            DensityFamily::FlatWindow { a, b, .. } => b - a,
            DensityFamily::OhmicExp { cutoff, .. } => *cutoff,
            DensityFamily::ShiftedLorentzian { width, .. } => *width,
            DensityFamily::Tabulated { nodes } => nodes[nodes.len() - 1].0 - nodes[0].0,
        }
    }

    /// Supremum of the density over `w >= 0`.
    pub fn sup(&self) -> f64 {
        match &self.family {
            DensityFamily::FlatWindow { v0, .. } => *v0,
            DensityFamily::OhmicExp { g2, cutoff } => g2 * cutoff / std::f64::consts::E,
            DensityFamily::ShiftedLorentzian { center, .. } => self.evaluate(center.max(0.0)),
            DensityFamily::Tabulated { nodes } => nodes.iter().map(|n| n.1).fold(0.0, f64::max),
        }
    }

    /// Smallest interval `[lo, hi]` outside of which the density vanishes,
    /// or `None` for densities with unbounded support.
    pub fn support(&self) -> Option<(f64, f64)> {
        match &self.family {
            DensityFamily::FlatWindow { a, b, .. } => Some((*a, *b)),
            DensityFamily::Tabulated { nodes } => Some((nodes[0].0, nodes[nodes.len() - 1].0)),
            _ => None,
        }
    }

    /// The same density multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidDensity(format!(
                "scale factor must be >= 0, got {c}"
            )));
        }
        let family = match &self.family {
            DensityFamily::FlatWindow { v0, a, b } => DensityFamily::FlatWindow {
                v0: c * v0,
                a: *a,
                b: *b,
            },
            DensityFamily::OhmicExp { g2, cutoff } => DensityFamily::OhmicExp {
                g2: c * g2,
                cutoff: *cutoff,
            },
            DensityFamily::ShiftedLorentzian {
                amplitude,
                center,
                width,
            } => DensityFamily::ShiftedLorentzian {
                amplitude: c * amplitude,
                center: *center,
                width: *width,
            },
            DensityFamily::Tabulated { nodes } => DensityFamily::Tabulated {
                nodes: nodes.iter().map(|&(w, v)| (w, c * v)).collect(),
            },
        };
        SpectralDensity::new(family)
    }
}

fn interpolate(nodes: &[(f64, f64)], w: f64) -> f64 {
    let first = nodes[0];
    let last = nodes[nodes.len() - 1];
    if w < first.0 || w > last.0 {
        return 0.0;
    }
    // index of the first node strictly greater than w
    let i = nodes.partition_point(|n| n.0 <= w);
    if i == 0 {
        return first.1;
    }
    if i == nodes.len() {
        return last.1;
    }
    let (x0, y0) = nodes[i - 1];
    let (x1, y1) = nodes[i];
    if w == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (w - x0) / (x1 - x0)
}

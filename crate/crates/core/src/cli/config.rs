//! Scenario files: flat TOML sections, one per module.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::densities::{DensityFamily, SpectralDensity};
use crate::quadrature::Tolerance;
use crate::rates::{default_tolerance, CascadeSystem};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSection,
    pub density_y: DensitySection,
    pub density_z: DensitySection,
    #[serde(default)]
    pub tolerance: ToleranceSection,
    pub evolve: Option<EvolveSection>,
    pub spectra: Option<SpectraSection>,
    pub oracle: Option<OracleSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega01: f64,
    pub omega12: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySection {
    FlatWindow {
        v0: f64,
        a: f64,
        b: f64,
    },
    OhmicExp {
        g2: f64,
        cutoff: f64,
    },
    ShiftedLorentzian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Either inline `nodes = [[w, value], ...]` or a two-column CSV `file`
    /// relative to the scenario file.
    Tabulated {
        nodes: Option<Vec<[f64; 2]>>,
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub rtol: f64,
    pub atol: f64,
    pub max_subdivisions: usize,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let t = default_tolerance();
        Self {
            rtol: t.rtol,
            atol: t.atol,
            max_subdivisions: t.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub step: f64,
    /// Defaults to `3 / lambda_tilde0`.
    pub t_end: Option<f64>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Start of the comparison window; defaults to `10 / |omega01|`.
    pub t_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraSection {
    /// Defaults to `min(lambda_tilde0, lambda1) / 5`.
    pub step: Option<f64>,
    pub range_y: Option<[f64; 2]>,
    pub range_z: Option<[f64; 2]>,
    #[serde(default = "default_true")]
    pub write_joint: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub n_y: usize,
    pub n_z: usize,
    pub range_y: [f64; 2],
    pub range_z: [f64; 2],
    /// Defaults to 0.45 of the recurrence time.
    pub t_end: Option<f64>,
    /// Defaults to half the largest stable step.
    pub dt: Option<f64>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub write_joint: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda1_min: f64,
    pub lambda1_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
        }
    }
}

fn default_sample_every() -> usize {
    10
}

fn default_threshold() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// A parsed scenario with its system built and its source hashed.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub system: CascadeSystem,
    pub hash: String,
}

impl Loaded {
    pub fn tolerance(&self) -> Tolerance {
        let t = self.scenario.tolerance;
        Tolerance {
            rtol: t.rtol,
            atol: t.atol,
            max_subdivisions: t.max_subdivisions,
        }
    }
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse(&text, base).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

/// Parses scenario text; relative `file` entries resolve against `base`.
pub fn parse(text: &str, base: &Path) -> Result<Loaded, ConfigError> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
    validate(&scenario)?;
    let density_y = build_density(&scenario.density_y, base, "density_y")?;
    let density_z = build_density(&scenario.density_z, base, "density_z")?;
    let system = CascadeSystem::new(
        scenario.system.omega01,
        scenario.system.omega12,
        density_y,
        density_z,
    )
    .map_err(|e| ConfigError(format!("system: {e}")))?;
    Ok(Loaded {
        scenario,
        system,
        hash: sha256_hex(text.as_bytes()),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn build_density(
    section: &DensitySection,
    base: &Path,
    key: &str,
) -> Result<SpectralDensity, ConfigError> {
    let family = match section {
        DensitySection::FlatWindow { v0, a, b } => DensityFamily::FlatWindow {
            v0: *v0,
            a: *a,
            b: *b,
        },
        DensitySection::OhmicExp { g2, cutoff } => DensityFamily::OhmicExp {
            g2: *g2,
            cutoff: *cutoff,
        },
        DensitySection::ShiftedLorentzian {
            amplitude,
            center,
            width,
        } => DensityFamily::ShiftedLorentzian {
            amplitude: *amplitude,
            center: *center,
            width: *width,
        },
        DensitySection::Tabulated { nodes, file } => match (nodes, file) {
            (Some(nodes), None) => DensityFamily::Tabulated {
                nodes: nodes.iter().map(|n| (n[0], n[1])).collect(),
            },
            (None, Some(file)) => {
                let path = base.join(file);
                if !path.is_file() {
                    return Err(ConfigError(format!(
                        "{key}: tabulated file {} does not exist",
                        path.display()
                    )));
                }
                DensityFamily::tabulated_from_csv(&path)
                    .map_err(|e| ConfigError(format!("{key}: {e}")))?
            }
            _ => {
                return Err(ConfigError(format!(
                    "{key}: tabulated density needs exactly one of `nodes` or `file`"
                )))
            }
        },
    };
    SpectralDensity::new(family).map_err(|e| ConfigError(format!("{key}: {e}")))
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError(format!(
            "`{key}` must be positive and finite, got {v}"
        )))
    }
}

fn range(key: &str, r: [f64; 2]) -> Result<(), ConfigError> {
    if r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[1] > r[0] {
        Ok(())
    } else {
        Err(ConfigError(format!(
            "`{key}` must satisfy 0 <= lo < hi, got {r:?}"
        )))
    }
}

fn validate(s: &Scenario) -> Result<(), ConfigError> {
    let name_ok = !s.name.is_empty()
        && s.name != "."
        && s.name != ".."
        && s.name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !name_ok {
        return Err(ConfigError(format!(
            "`name` must be a plain path component of [A-Za-z0-9._-], got {:?}",
            s.name
        )));
    }
    if !s.system.omega01.is_finite() {
        return Err(ConfigError("`omega01` must be finite".into()));
    }
    positive("omega12", s.system.omega12)?;
    positive("tolerance.rtol", s.tolerance.rtol)?;
    positive("tolerance.atol", s.tolerance.atol)?;
    if s.tolerance.max_subdivisions == 0 {
        return Err(ConfigError(
            "`tolerance.max_subdivisions` must be positive".into(),
        ));
    }
    if let Some(e) = &s.evolve {
        positive("evolve.step", e.step)?;
        if let Some(t) = e.t_end {
            positive("evolve.t_end", t)?;
        }
        if let Some(t) = e.t_min {
            positive("evolve.t_min", t)?;
        }
        if e.sample_every == 0 {
            return Err(ConfigError("`evolve.sample_every` must be positive".into()));
        }
    }
    if let Some(sp) = &s.spectra {
        if let Some(h) = sp.step {
            positive("spectra.step", h)?;
        }
        if let Some(r) = sp.range_y {
            range("spectra.range_y", r)?;
        }
        if let Some(r) = sp.range_z {
            range("spectra.range_z", r)?;
        }
    }
    if let Some(o) = &s.oracle {
        if o.n_y == 0 || o.n_z == 0 || o.sample_every == 0 {
            return Err(ConfigError(
                "`oracle.n_y`, `oracle.n_z` and `oracle.sample_every` must be positive".into(),
            ));
        }
        range("oracle.range_y", o.range_y)?;
        range("oracle.range_z", o.range_z)?;
        if let Some(t) = o.t_end {
            positive("oracle.t_end", t)?;
        }
        if let Some(t) = o.dt {
            positive("oracle.dt", t)?;
        }
        positive("oracle.threshold", o.threshold)?;
    }
    if let Some(sw) = &s.sweep {
        positive("sweep.lambda1_min", sw.lambda1_min)?;
        positive("sweep.lambda1_max", sw.lambda1_max)?;
        if sw.points == 0 || sw.lambda1_max < sw.lambda1_min {
            return Err(ConfigError(
                "`sweep` needs points > 0 and lambda1_max >= lambda1_min".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "flat"
[system]
omega01 = 1.0
omega12 = 1.0
[density_y]
family = "flat_window"
v0 = 0.001
a = 0.0
b = 2.0
[density_z]
family = "flat_window"
v0 = 0.005
a = 0.0
b = 2.0
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let l = parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(l.scenario.name, "flat");
        assert_eq!(l.scenario.output.directory, PathBuf::from("out"));
        assert!(l.scenario.evolve.is_none());
        assert_eq!(l.hash.len(), 64);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("omega12 = 1.0\n", "");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.0.contains("omega12"), "{}", err.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("omega12 = 1.0", "omega12 = 1.0\nomega13 = 2.0");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert!(err.0.contains("omega13"), "{}", err.0);
    }

    #[test]
    fn bad_names_and_settings_are_rejected() {
        for bad in ["a/b", "..", ""] {
            let text = MINIMAL.replace("name = \"flat\"", &format!("name = {bad:?}"));
            assert!(parse(&text, Path::new(".")).is_err(), "{bad}");
        }
        let text = format!("{MINIMAL}[evolve]\nstep = -0.1\n");
        assert!(parse(&text, Path::new("."))
            .unwrap_err()
            .0
            .contains("evolve.step"));
    }

    #[test]
    fn tabulated_file_resolves_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("v.csv"), "w,v\n0,0.001\n2,0.001\n").unwrap();
        let text = MINIMAL.replace(
            "family = \"flat_window\"\nv0 = 0.001\na = 0.0\nb = 2.0",
            "family = \"tabulated\"\nfile = \"v.csv\"",
        );
        let l = parse(&text, dir.path()).unwrap();
        assert!((l.system.density_y.evaluate(1.0) - 0.001).abs() < 1e-15);
        let missing = text.replace("v.csv", "nope.csv");
        assert!(parse(&missing, dir.path())
            .unwrap_err()
            .0
            .contains("does not exist"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse(MINIMAL, Path::new(".")).unwrap().hash;
        let b = parse(&MINIMAL.replace("0.005", "0.006"), Path::new("."))
            .unwrap()
            .hash;
        assert_ne!(a, b);
    }
}

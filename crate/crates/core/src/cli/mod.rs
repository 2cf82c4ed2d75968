//! Command-line front end.
//!
//! `zeno-cascade <command> --config <path> [--out <dir>] [--threads N]`.
//! Exit status 0 on success, 1 for configuration or I/O problems, 2 for a
//! numerical failure; the latter also writes `error.json` naming the error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::Error;
use commands::Run;
use config::{load, parse, Loaded};

/// Shipped scenarios, in run order.
pub const PRESETS: [(&str, &str); 3] = [
    ("regime1", include_str!("../../presets/regime1.toml")),
    ("regime2", include_str!("../../presets/regime2.toml")),
    ("regime3", include_str!("../../presets/regime3.toml")),
];

#[derive(Debug, Parser)]
#[command(
    name = "zeno-cascade",
    version,
    about = "Cascade decay rates, memory-kernel dynamics and emission spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decay constants, Golden rule and corrected energies.
    Rates(CommonArgs),
    /// Volterra and exponential amplitude traces.
    Evolve(CommonArgs),
    /// Joint, marginal and sum-energy spectra.
    Spectra(CommonArgs),
    /// Discretized-continuum verification run.
    Oracle(CommonArgs),
    /// Perturbed rate as a function of lambda1.
    Sweep(CommonArgs),
    /// Runs every shipped preset end to end (or the presets in `--config <dir>`).
    Regimes(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
    Numerical { command: &'static str, error: Error },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 1,
            Failure::Numerical { .. } => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Numerical { command, error } => {
                write!(f, "{command} failed: {}: {error}", error.name())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Rates,
    Evolve,
    Spectra,
    Oracle,
    Sweep,
}

pub fn run_step(step: Step, run: &Run) -> Result<Value, Failure> {
    match step {
        Step::Rates => commands::rates(run),
        Step::Evolve => commands::evolve(run),
        Step::Spectra => commands::spectra(run),
        Step::Oracle => commands::oracle(run),
        Step::Sweep => commands::sweep(run),
    }
}

fn with_report(run: &Run, result: Result<Value, Failure>) -> Result<Value, Failure> {
    if let Err(Failure::Numerical { command, error }) = &result {
        let body =
            json!({ "command": command, "error": error.name(), "message": error.to_string() });
        let _ = output::write_json(
            &run.dir.join("error.json"),
            output::Provenance {
                scenario: &run.loaded.scenario.name,
                hash: &run.loaded.hash,
            },
            body,
        );
    }
    result
}

/// Every step whose section is present; `rates` always runs.
pub fn run_scenario(loaded: &Loaded, root: &Path) -> Result<Value, Failure> {
    let run = Run::new(loaded, root)?;
    let s = &loaded.scenario;
    let mut summary = serde_json::Map::new();
    let steps = [
        (Step::Rates, true, "rates"),
        (Step::Evolve, s.evolve.is_some(), "evolve"),
        (Step::Spectra, s.spectra.is_some(), "spectra"),
        (Step::Oracle, s.oracle.is_some(), "oracle"),
        (Step::Sweep, s.sweep.is_some(), "sweep"),
    ];
    for (step, enabled, key) in steps {
        if enabled {
            let v = with_report(&run, run_step(step, &run))?;
            summary.insert(key.into(), v);
        }
    }
    Ok(Value::Object(summary))
}

/// Runs all presets into `root/<name>/` and writes `root/regimes.json`.
pub fn run_regimes(root: &Path, preset_dir: Option<&Path>) -> Result<Value, Failure> {
    let mut scenarios = Vec::new();
    for (name, text) in PRESETS {
        let loaded = match preset_dir {
            Some(dir) => load(&dir.join(format!("{name}.toml"))),
            None => parse(text, Path::new(".")),
        }
        .map_err(|e| Failure::Config(e.0))?;
        scenarios.push(loaded);
    }
    std::fs::create_dir_all(root).map_err(|e| Failure::Io(format!("{}: {e}", root.display())))?;
    let mut summary = serde_json::Map::new();
    for loaded in &scenarios {
        let v = run_scenario(loaded, root)?;
        let pick = |step: &str, key: &str| {
            v.get(step)
                .and_then(|s| s.get(key))
                .cloned()
                .unwrap_or(Value::Null)
        };
        summary.insert(
            loaded.scenario.name.clone(),
            json!({
                "config_sha256": loaded.hash,
                "regime": pick("rates", "regime"),
                "gamma_tilde0": pick("rates", "gamma_tilde0"),
                "golden_rule": pick("rates", "golden_rule"),
                "fits": pick("spectra", "fits"),
                "joint_mass": v.get("spectra").and_then(|s| s.get("mass")).and_then(|m| m.get("joint")).cloned().unwrap_or(Value::Null),
                "oracle_joint_l1": pick("oracle", "joint_l1_distance"),
                "oracle_max_norm_drift": pick("oracle", "max_norm_drift"),
            }),
        );
    }
    let body = Value::Object(summary);
    let mut text = serde_json::to_string_pretty(&body).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    let path = root.join("regimes.json");
    std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(body)
}

/// Parses `args` (including the program name) and runs; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (step, a) = match cli.command {
        Command::Rates(a) => (Some(Step::Rates), a),
        Command::Evolve(a) => (Some(Step::Evolve), a),
        Command::Spectra(a) => (Some(Step::Spectra), a),
        Command::Oracle(a) => (Some(Step::Oracle), a),
        Command::Sweep(a) => (Some(Step::Sweep), a),
        Command::Regimes(a) => (None, a),
    };
    if let Some(n) = a.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    let result = match step {
        None => run_regimes(
            a.out.as_deref().unwrap_or(Path::new("out")),
            a.config.as_deref(),
        ),
        Some(step) => a
            .config
            .as_deref()
            .ok_or_else(|| Failure::Config("missing --config <path>".into()))
            .and_then(|path| load(path).map_err(|e| Failure::Config(e.0)))
            .and_then(|loaded| {
                let root = a
                    .out
                    .clone()
                    .unwrap_or_else(|| loaded.scenario.output.directory.clone());
                let run = Run::new(&loaded, &root)?;
                with_report(&run, run_step(step, &run))
            }),
    };
    match result {
        Ok(_) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, extra: &str) -> PathBuf {
        let text = format!(
            r#"name = "small"
[system]
omega01 = 1.0
omega12 = 1.0
[density_y]
family = "flat_window"
v0 = 0.0016
a = 0.0
b = 2.0
[density_z]
family = "flat_window"
v0 = 0.0064
a = 0.0
b = 2.0
{extra}"#
        );
        let path = dir.join("small.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    fn args(cmd: &str, config: &Path, out: &Path) -> Vec<OsString> {
        vec![
            "zeno-cascade".into(),
            cmd.into(),
            "--config".into(),
            config.into(),
            "--out".into(),
            out.into(),
        ]
    }

    #[test]
    fn presets_parse() {
        for (name, text) in PRESETS {
            let l = parse(text, Path::new(".")).unwrap();
            assert_eq!(l.scenario.name, name);
        }
    }

    #[test]
    fn rates_writes_json_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "");
        let out = dir.path().join("out");
        assert_eq!(run(args("rates", &cfg, &out)), 0);
        let text = std::fs::read_to_string(out.join("small/rates.json")).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["scenario"], "small");
        assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
        assert!(v["gamma_tilde0"]["lambda"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn missing_key_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "");
        let text = std::fs::read_to_string(&cfg)
            .unwrap()
            .replace("omega12 = 1.0\n", "");
        std::fs::write(&cfg, text).unwrap();
        assert_eq!(run(args("rates", &cfg, &dir.path().join("out"))), 1);
        let err = load(&cfg).unwrap_err();
        assert!(err.0.contains("omega12"));
    }

    #[test]
    fn numerical_failure_exits_two_with_report() {
        let dir = tempfile::tempdir().unwrap();
        // step far above the kernel resolution limit
        let cfg = write_config(dir.path(), "[evolve]\nstep = 1.0\nt_end = 10.0\n");
        let out = dir.path().join("out");
        assert_eq!(run(args("evolve", &cfg, &out)), 2);
        let v: Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("small/error.json")).unwrap())
                .unwrap();
        assert_eq!(v["error"], "InvalidStep");
        assert_eq!(v["command"], "evolve");
    }

    #[test]
    fn missing_section_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "");
        assert_eq!(run(args("sweep", &cfg, &dir.path().join("out"))), 1);
    }

    #[test]
    fn sweep_and_evolve_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "[evolve]\nstep = 0.02\nt_end = 40.0\n[sweep]\nlambda1_min = 1e-3\nlambda1_max = 10.0\npoints = 9\n",
        );
        let out = dir.path().join("out");
        assert_eq!(run(args("evolve", &cfg, &out)), 0);
        assert_eq!(run(args("sweep", &cfg, &out)), 0);
        let first = std::fs::read(out.join("small/trace.csv")).unwrap();
        let sweep = std::fs::read(out.join("small/sweep.csv")).unwrap();
        assert_eq!(run(args("evolve", &cfg, &out)), 0);
        assert_eq!(run(args("sweep", &cfg, &out)), 0);
        assert_eq!(first, std::fs::read(out.join("small/trace.csv")).unwrap());
        assert_eq!(sweep, std::fs::read(out.join("small/sweep.csv")).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("t,re_a0,im_a0,abs_a0_sq,method"));
        assert!(text.contains(",volterra") && text.contains(",markov"));
    }

    #[test]
    fn help_exits_zero_and_bad_usage_exits_one() {
        assert_eq!(run(["zeno-cascade", "--help"]), 0);
        assert_eq!(run(["zeno-cascade", "frobnicate"]), 1);
    }
}

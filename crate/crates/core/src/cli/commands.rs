//! One function per subcommand. Each writes its artifacts under the
//! scenario directory and returns a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::Loaded;
use super::output::{contour_plot, line_plot, num, write_csv, write_json, Provenance};
use super::Failure;
use crate::error::{Error, Result};
use crate::kernels::{
    build_kernel, compare_traces_between, markov_trace, solve_volterra, AmplitudeTrace,
};
use crate::oracle::{
    discretize, evolve as evolve_oracle, extract_spectra, joint_l1_distance, OracleGrid,
};
use crate::rates::{
    bare_constant, corrected_energies, golden_rule, log_space, perturbed_constant,
    perturbed_rate_direct, zeno_curve, CorrectedEnergies, PerturbedConstants,
};
use crate::spectra::{
    auto_axes, classify, first_marginal_closed, first_marginal_numeric, fit_lorentzian,
    joint_spectrum, second_marginal_closed, second_marginal_numeric, sum_energy_closed,
    sum_energy_numeric, Axis, LineParameters, Spectrum1,
};

/// Output directory and provenance for one scenario run.
pub struct Run<'a> {
    pub loaded: &'a Loaded,
    pub dir: PathBuf,
}

impl<'a> Run<'a> {
    pub fn new(loaded: &'a Loaded, root: &Path) -> std::result::Result<Self, Failure> {
        let dir = root.join(&loaded.scenario.name);
        fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { loaded, dir })
    }

    fn prov(&self) -> Provenance<'_> {
        Provenance {
            scenario: &self.loaded.scenario.name,
            hash: &self.loaded.hash,
        }
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn json(&self, file: &str, body: Value) -> std::result::Result<(), Failure> {
        write_json(&self.path(file), self.prov(), body).map_err(|e| io_failure(&self.path(file), e))
    }

    fn csv<I>(
        &self,
        file: &str,
        comments: &[String],
        header: &[&str],
        rows: I,
    ) -> std::result::Result<(), Failure>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        write_csv(&self.path(file), self.prov(), comments, header, rows)
            .map_err(|e| io_failure(&self.path(file), e))
    }

    fn svg(&self, file: &str, text: String) -> std::result::Result<(), Failure> {
        fs::write(self.path(file), text).map_err(|e| io_failure(&self.path(file), e))
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn numerical(command: &'static str) -> impl Fn(Error) -> Failure {
    move |error| Failure::Numerical { command, error }
}

fn constants(run: &Run) -> Result<(PerturbedConstants, CorrectedEnergies)> {
    let p = perturbed_constant(&run.loaded.system, &run.loaded.tolerance())?;
    let e = corrected_energies(&run.loaded.system, p.gamma_tilde0, p.gamma1);
    Ok((p, e))
}

fn decay_json(lambda: f64, mu: f64) -> Value {
    json!({ "lambda": lambda, "mu": mu, "rate": 2.0 * lambda })
}

pub fn rates(run: &Run) -> std::result::Result<Value, Failure> {
    let fail = numerical("rates");
    let sys = &run.loaded.system;
    let tol = run.loaded.tolerance();
    let gamma0 = bare_constant(&sys.density_y, sys.omega01, &tol).map_err(&fail)?;
    let (p, e) = constants(run).map_err(&fail)?;
    let direct =
        perturbed_rate_direct(&sys.density_y, sys.omega01, p.gamma1, &tol).map_err(&fail)?;
    let rate = p.gamma_tilde0.rate();
    let regime = LineParameters::new(&p, e)
        .map(|line| Value::from(classify(&line).label()))
        .unwrap_or(Value::Null);
    let body = json!({
        "omega01": sys.omega01,
        "omega12": sys.omega12,
        "gamma0": decay_json(gamma0.lambda, gamma0.mu),
        "gamma1": decay_json(p.gamma1.lambda, p.gamma1.mu),
        "gamma_tilde0": decay_json(p.gamma_tilde0.lambda, p.gamma_tilde0.mu),
        "golden_rule": golden_rule(sys, p.gamma1),
        "direct_rate": direct,
        "direct_relative_difference": (direct - rate).abs() / rate.abs().max(f64::MIN_POSITIVE),
        "corrected_energies": e,
        "regime": regime,
    });
    run.json("rates.json", body.clone())?;
    Ok(body)
}

fn trace_rows(trace: &AmplitudeTrace) -> impl Iterator<Item = Vec<String>> + '_ {
    trace.values.iter().enumerate().map(|(k, a)| {
        vec![
            num(trace.time(k)),
            num(a.re),
            num(a.im),
            num(a.norm_sqr()),
            trace.method.as_str().to_string(),
        ]
    })
}

pub fn evolve(run: &Run) -> std::result::Result<Value, Failure> {
    let fail = numerical("evolve");
    let Some(cfg) = run.loaded.scenario.evolve else {
        return Err(Failure::Config("scenario has no [evolve] section".into()));
    };
    let sys = &run.loaded.system;
    let (p, _) = constants(run).map_err(&fail)?;
    let lt = p.gamma_tilde0.lambda;
    let horizon = 3.0 / lt;
    let requested = cfg.t_end.unwrap_or(horizon);
    if !requested.is_finite() {
        return Err(fail(Error::InvalidSystem(format!(
            "lambda_tilde0 = {lt} gives no finite default horizon; set evolve.t_end"
        ))));
    }
    let h = cfg.step;
    let t_end = (requested / h).ceil() * h;
    let kernel = build_kernel(&sys.density_y, sys.omega01, p.gamma1);
    let volterra = solve_volterra(&kernel, t_end, h).map_err(&fail)?;
    let markov = markov_trace(p.gamma_tilde0, t_end, h).map_err(&fail)?;
    let t_min = cfg.t_min.unwrap_or(10.0 / sys.omega01.abs());
    let deviation = compare_traces_between(&volterra, &markov, t_min, horizon).map_err(&fail)?;

    let v = volterra.decimate(cfg.sample_every);
    let m = markov.decimate(cfg.sample_every);
    run.csv(
        "trace.csv",
        &[
            format!("step: {}", num(h)),
            format!("t_end: {}", num(t_end)),
        ],
        &["t", "re_a0", "im_a0", "abs_a0_sq", "method"],
        trace_rows(&v).chain(trace_rows(&m)),
    )?;
    let points = |t: &AmplitudeTrace| {
        t.probabilities()
            .into_iter()
            .enumerate()
            .map(|(k, pr)| (t.time(k), pr))
            .collect::<Vec<_>>()
    };
    run.svg(
        "trace.svg",
        line_plot(
            "|a0(t)|^2",
            "t",
            "probability",
            &[("volterra", points(&v)), ("markov", points(&m))],
            run.prov(),
        ),
    )?;
    let body = json!({
        "step": h,
        "t_end": t_end,
        "lambda_tilde0": lt,
        "deviation": deviation,
    });
    run.json("evolve.json", body.clone())?;
    Ok(body)
}

fn lattice_axis(lo: f64, hi: f64, step: f64) -> Result<Axis> {
    let lo = (lo / step).floor() * step;
    let n = ((hi - lo) / step).ceil() as usize + 1;
    Axis::new(lo.max(0.0), step, n)
}

fn fit_json(s: &Spectrum1) -> Value {
    match fit_lorentzian(s) {
        Ok(fit) => json!({ "fit": fit }),
        Err(e) => json!({ "error": e.name(), "message": e.to_string() }),
    }
}

fn spectrum_rows<'s>(a: &'s Spectrum1, b: &'s Spectrum1) -> impl Iterator<Item = Vec<String>> + 's {
    (0..a.axis.len).map(move |k| vec![num(a.axis.point(k)), num(a.values[k]), num(b.values[k])])
}

pub fn spectra(run: &Run) -> std::result::Result<Value, Failure> {
    let fail = numerical("spectra");
    let Some(cfg) = run.loaded.scenario.spectra else {
        return Err(Failure::Config("scenario has no [spectra] section".into()));
    };
    let sys = &run.loaded.system;
    let (p, e) = constants(run).map_err(&fail)?;
    let line = LineParameters::new(&p, e).map_err(&fail)?;
    let (auto_y, auto_z) = auto_axes(sys, &line).map_err(&fail)?;
    let step = cfg.step.unwrap_or(auto_y.step);
    let ry = cfg.range_y.unwrap_or([auto_y.start, auto_y.end()]);
    let rz = cfg.range_z.unwrap_or([auto_z.start, auto_z.end()]);
    let y = lattice_axis(ry[0], ry[1], step).map_err(&fail)?;
    let z = lattice_axis(rz[0], rz[1], step).map_err(&fail)?;

    let joint = joint_spectrum(sys, &line, y, z).map_err(&fail)?;
    let first_n = first_marginal_numeric(&joint);
    let second_n = second_marginal_numeric(&joint);
    let sum_n = sum_energy_numeric(&joint).map_err(&fail)?;
    let first_c = first_marginal_closed(sys, &line, y);
    let second_c = second_marginal_closed(sys, &line, z);
    let sum_c =
        sum_energy_closed(sys, &line, sum_n.axis, &run.loaded.tolerance()).map_err(&fail)?;

    let header = [format!("step: {}", num(step))];
    run.csv(
        "first.csv",
        &header,
        &["y", "numeric", "closed"],
        spectrum_rows(&first_n, &first_c),
    )?;
    run.csv(
        "second.csv",
        &header,
        &["z", "numeric", "closed"],
        spectrum_rows(&second_n, &second_c),
    )?;
    run.csv(
        "sum.csv",
        &header,
        &["omega", "numeric", "closed"],
        spectrum_rows(&sum_n, &sum_c),
    )?;
    if cfg.write_joint {
        let rows = (0..y.len).flat_map(|i| {
            let joint = &joint;
            (0..z.len).map(move |j| vec![num(y.point(i)), num(z.point(j)), num(joint.at(i, j))])
        });
        run.csv("joint.csv", &header, &["y", "z", "p"], rows)?;
    }
    let curve = |s: &Spectrum1| {
        (0..s.axis.len)
            .map(|k| (s.axis.point(k), s.values[k]))
            .collect::<Vec<_>>()
    };
    run.svg(
        "marginals.svg",
        line_plot(
            "marginal spectra",
            "energy",
            "density",
            &[
                ("p_y closed", curve(&first_c)),
                ("p_z closed", curve(&second_c)),
                ("p_y numeric", curve(&first_n)),
                ("p_z numeric", curve(&second_n)),
            ],
            run.prov(),
        ),
    )?;
    run.svg(
        "sum.svg",
        line_plot(
            "sum energy",
            "omega",
            "density",
            &[("closed", curve(&sum_c)), ("numeric", curve(&sum_n))],
            run.prov(),
        ),
    )?;
    run.svg(
        "joint.svg",
        contour_plot("joint spectrum", &joint, &[0.5, 0.1, 0.01], run.prov()),
    )?;

    let l1 =
        |a: &Spectrum1, b: &Spectrum1| a.relative_l1(b).map(Value::from).unwrap_or(Value::Null);
    let fwhm = |s: &Spectrum1| s.fwhm().map(Value::from).unwrap_or(Value::Null);
    let body = json!({
        "regime": classify(&line).label(),
        "lambda_tilde0": line.lambda_tilde0,
        "lambda1": line.lambda1,
        "corrected_energies": e,
        "step": step,
        "grid": { "y": y, "z": z },
        "mass": {
            "joint": joint.mass,
            "first_numeric": first_n.mass,
            "second_numeric": second_n.mass,
            "sum_numeric": sum_n.mass,
            "first_closed": first_c.mass,
            "second_closed": second_c.mass,
            "sum_closed": sum_c.mass,
        },
        "closed_vs_numeric_l1": {
            "first": l1(&first_c, &first_n),
            "second": l1(&second_c, &second_n),
            "sum": l1(&sum_c, &sum_n),
        },
        "fits": {
            "first": fit_json(&first_c),
            "second": fit_json(&second_c),
            "sum": fit_json(&sum_c),
        },
        "fwhm": {
            "first": fwhm(&first_c),
            "second": fwhm(&second_c),
            "sum": fwhm(&sum_c),
        },
    });
    run.json("spectra.json", body.clone())?;
    Ok(body)
}

pub fn oracle(run: &Run) -> std::result::Result<Value, Failure> {
    let fail = numerical("oracle");
    let Some(cfg) = run.loaded.scenario.oracle else {
        return Err(Failure::Config("scenario has no [oracle] section".into()));
    };
    let sys = &run.loaded.system;
    let (p, e) = constants(run).map_err(&fail)?;
    let lt = p.gamma_tilde0.lambda;
    let grid = OracleGrid {
        n_y: cfg.n_y,
        n_z: cfg.n_z,
        range_y: (cfg.range_y[0], cfg.range_y[1]),
        range_z: (cfg.range_z[0], cfg.range_z[1]),
    };
    let model = discretize(sys, lt, &grid).map_err(&fail)?;
    let t_rec = model.recurrence_time();
    let t_end = cfg.t_end.unwrap_or(0.45 * t_rec);
    if t_end >= 0.5 * t_rec {
        return Err(fail(Error::RecurrenceGuard(format!(
            "t_end = {t_end} is not below half the recurrence time {t_rec}"
        ))));
    }
    let dt = cfg.dt.unwrap_or(0.5 * model.max_step());
    let ev = evolve_oracle(&model, t_end, dt, cfg.sample_every).map_err(&fail)?;
    let spectra = extract_spectra(&ev, &model, cfg.threshold).map_err(&fail)?;

    let t_min = 10.0 / sys.omega01.abs();
    let window_end = 3.0 / lt;
    let a0_deviation = ev
        .samples
        .iter()
        .filter(|s| s.time >= t_min && s.time <= window_end)
        .map(|s| {
            let m = (-2.0 * lt * s.time).exp();
            (s.a0.norm_sqr() - m).abs() / m
        })
        .fold(0.0, f64::max);
    let l1 = LineParameters::new(&p, e)
        .map(|line| Value::from(joint_l1_distance(&spectra, sys, &line)))
        .unwrap_or(Value::Null);
    // emitted energies carrying visible weight
    let peak = spectra.joint.values.iter().cloned().fold(0.0, f64::max);
    let mut min_y = f64::INFINITY;
    let mut min_z = f64::INFINITY;
    for i in 0..spectra.joint.y.len {
        for j in 0..spectra.joint.z.len {
            if spectra.joint.at(i, j) > 1e-6 * peak {
                min_y = min_y.min(spectra.joint.y.point(i));
                min_z = min_z.min(spectra.joint.z.point(j));
            }
        }
    }
    let populations: Vec<Value> = ev
        .samples
        .iter()
        .map(|s| {
            json!({
                "t": s.time,
                "a0_sq": s.a0.norm_sqr(),
                "first": s.first,
                "second": s.second,
                "norm": s.norm,
            })
        })
        .collect();
    if cfg.write_joint {
        let j = &spectra.joint;
        let rows = (0..j.y.len).flat_map(|a| {
            (0..j.z.len).map(move |b| vec![num(j.y.point(a)), num(j.z.point(b)), num(j.at(a, b))])
        });
        run.csv("oracle_joint.csv", &[], &["y", "z", "p"], rows)?;
    }
    let body = json!({
        "modes": { "n_y": cfg.n_y, "n_z": cfg.n_z, "dimension": model.dimension() },
        "recurrence_time": t_rec,
        "t_end": ev.final_time(),
        "dt": ev.step,
        "max_norm_drift": ev.max_norm_drift,
        "lambda_tilde0": lt,
        "a0_window": [t_min, window_end],
        "a0_relative_deviation": a0_deviation,
        "joint_l1_distance": l1,
        "joint_mass": spectra.joint.mass,
        "residual_initial": spectra.residual_initial,
        "residual_intermediate": spectra.residual_intermediate,
        "emitted_energy_min": { "y": min_y, "z": min_z },
        "populations": populations,
    });
    run.json("oracle.json", body.clone())?;
    Ok(body)
}

pub fn sweep(run: &Run) -> std::result::Result<Value, Failure> {
    let fail = numerical("sweep");
    let Some(cfg) = run.loaded.scenario.sweep else {
        return Err(Failure::Config("scenario has no [sweep] section".into()));
    };
    let values = log_space(cfg.lambda1_min, cfg.lambda1_max, cfg.points);
    let curve = zeno_curve(&run.loaded.system, &values, &run.loaded.tolerance()).map_err(&fail)?;
    run.csv(
        "sweep.csv",
        &[],
        &["lambda1", "rate", "mu_tilde0", "golden_rule"],
        curve.iter().map(|z| {
            vec![
                num(z.lambda1),
                num(z.rate),
                num(z.mu_tilde0),
                num(z.golden_rule),
            ]
        }),
    )?;
    let pts = curve.iter().map(|z| (z.lambda1.log10(), z.rate)).collect();
    run.svg(
        "sweep.svg",
        line_plot(
            "Zeno suppression",
            "log10 lambda1",
            "rate",
            &[("rate", pts)],
            run.prov(),
        ),
    )?;
    let body = json!({ "points": curve.len() });
    Ok(body)
}

//! Brute-force check of the analytic results: both continua are replaced by
//! finite sets of modes and the single-excitation Schrödinger equation is
//! integrated in the interaction picture.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::densities::SpectralDensity;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::rates::CascadeSystem;
use crate::spectra::{joint_density, Axis, LineParameters, Spectrum1, Spectrum2, SpectrumKind};

/// Allowed deviation of the state norm from one.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Smallest admissible `lambda_tilde0 * T_rec`.
pub const RECURRENCE_MARGIN: f64 = 20.0;
/// Largest admissible fraction of density weight outside the sampled range.
pub const RANGE_LEAKAGE: f64 = 1e-3;
pub const MIN_MODES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Modes {
    /// Midpoint energies, uniform with spacing `spacing`.
    pub energies: Vec<f64>,
    /// `sqrt(V(w_k) dw)`.
    pub couplings: Vec<f64>,
    pub spacing: f64,
}

impl Modes {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn axis(&self) -> Result<Axis> {
        Axis::new(self.energies[0], self.spacing, self.energies.len())
    }

    /// `2 pi / spacing`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing
    }

    fn sample(density: &SpectralDensity, lo: f64, hi: f64, n: usize) -> Self {
        let spacing = (hi - lo) / n as f64;
        let energies: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) * spacing).collect();
        let couplings = energies
            .iter()
            .map(|&w| (density.evaluate(w) * spacing).sqrt())
            .collect();
        Self {
            energies,
            couplings,
            spacing,
        }
    }
}

/// Finite-mode model with basis `|x0>`, `|x1, y_k>`, `|x2, y_k z_j>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteModel {
    pub omega01: f64,
    pub omega12: f64,
    pub y: Modes,
    pub z: Modes,
}

impl DiscreteModel {
    pub fn dimension(&self) -> usize {
        1 + self.y.len() + self.y.len() * self.z.len()
    }

    /// Earliest recurrence of either continuum.
    pub fn recurrence_time(&self) -> f64 {
        self.y.recurrence_time().min(self.z.recurrence_time())
    }

    /// Largest interaction-picture frequency.
    pub fn max_detuning(&self) -> f64 {
        let y = self
            .y
            .energies
            .iter()
            .map(|w| (w - self.omega01).abs())
            .fold(0.0, f64::max);
        let z = self
            .z
            .energies
            .iter()
            .map(|w| (w - self.omega12).abs())
            .fold(0.0, f64::max);
        y.max(z)
    }

    /// Largest step allowed for the given model, `0.1 / max_detuning`.
    pub fn max_step(&self) -> f64 {
        0.1 / self.max_detuning().max(f64::MIN_POSITIVE)
    }
}

/// Mode counts and energy ranges of both continua.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleGrid {
    pub n_y: usize,
    pub n_z: usize,
    pub range_y: (f64, f64),
    pub range_z: (f64, f64),
}

fn leakage(density: &SpectralDensity, lo: f64, hi: f64) -> Result<f64> {
    let total = density.total_weight();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut pts = density.breakpoints();
    pts.push(lo.max(0.0));
    let tol = Tolerance::new(1e-10, 1e-14 * total);
    let inside = if hi > lo.max(0.0) {
        integrate(|w| density.evaluate(w), lo.max(0.0), hi, &pts, &tol)?.value
    } else {
        0.0
    };
    Ok(((total - inside) / total).max(0.0))
}

pub fn discretize(
    system: &CascadeSystem,
    lambda_tilde0: f64,
    grid: &OracleGrid,
) -> Result<DiscreteModel> {
    if grid.n_y < MIN_MODES || grid.n_z < MIN_MODES {
        return Err(Error::InvalidSystem(format!(
            "oracle needs at least {MIN_MODES} modes per continuum, got {} x {}",
            grid.n_y, grid.n_z
        )));
    }
    for (name, density, (lo, hi)) in [
        ("first", &system.density_y, grid.range_y),
        ("second", &system.density_z, grid.range_z),
    ] {
        if !(hi > lo && lo >= 0.0) {
            return Err(Error::RangeTooNarrow(format!(
                "{name} range [{lo}, {hi}] must satisfy 0 <= lo < hi"
            )));
        }
        let leak = leakage(density, lo, hi)?;
        if leak > RANGE_LEAKAGE {
            return Err(Error::RangeTooNarrow(format!(
                "{name} range [{lo}, {hi}] misses a fraction {leak:e} of the density weight"
            )));
        }
    }
    let model = DiscreteModel {
        omega01: system.omega01,
        omega12: system.omega12,
        y: Modes::sample(&system.density_y, grid.range_y.0, grid.range_y.1, grid.n_y),
        z: Modes::sample(&system.density_z, grid.range_z.0, grid.range_z.1, grid.n_z),
    };
    let margin = lambda_tilde0 * model.recurrence_time();
    if !(margin > RECURRENCE_MARGIN) {
        return Err(Error::RecurrenceGuard(format!(
            "lambda_tilde0 * T_rec = {margin:.3} must exceed {RECURRENCE_MARGIN}"
        )));
    }
    Ok(model)
}

/// Sector populations at one sampled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Populations {
    pub time: f64,
    pub a0: C64,
    pub first: f64,
    pub second: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub samples: Vec<Populations>,
    /// `[a0, a1_k, a2_kj]` at the final time, `a2` row-major in `k`.
    pub state: Vec<C64>,
    pub step: f64,
    pub max_norm_drift: f64,
}

impl Evolution {
    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }
}

struct Workspace {
    phase_y: Vec<C64>,
    phase_z: Vec<C64>,
}

// Interaction-picture right-hand side.
fn derivative(model: &DiscreteModel, t: f64, x: &[C64], out: &mut [C64], ws: &mut Workspace) {
    let ny = model.y.len();
    let nz = model.z.len();
    for (p, (&w, &g)) in ws
        .phase_y
        .iter_mut()
        .zip(model.y.energies.iter().zip(&model.y.couplings))
    {
        *p = C64::from_polar(g, (w - model.omega01) * t);
    }
    for (p, (&w, &h)) in ws
        .phase_z
        .iter_mut()
        .zip(model.z.energies.iter().zip(&model.z.couplings))
    {
        *p = C64::from_polar(h, (w - model.omega12) * t);
    }
    let minus_i = C64::new(0.0, -1.0);
    let a0 = x[0];
    let a1 = &x[1..1 + ny];
    let a2 = &x[1 + ny..];
    let mut d0 = C64::default();
    for k in 0..ny {
        let gk = ws.phase_y[k];
        d0 += gk.conj() * a1[k];
        let row = &a2[k * nz..(k + 1) * nz];
        let mut s = C64::default();
        for (hz, a) in ws.phase_z.iter().zip(row) {
            s += hz.conj() * a;
        }
        out[1 + k] = minus_i * (gk * a0 + s);
        let a1k = a1[k];
        let out_row = &mut out[1 + ny + k * nz..1 + ny + (k + 1) * nz];
        for (o, hz) in out_row.iter_mut().zip(&ws.phase_z) {
            *o = minus_i * hz * a1k;
        }
    }
    out[0] = minus_i * d0;
}

fn populations(model: &DiscreteModel, t: f64, x: &[C64]) -> Populations {
    let ny = model.y.len();
    let first: f64 = x[1..1 + ny].iter().map(|a| a.norm_sqr()).sum();
    let second: f64 = x[1 + ny..].iter().map(|a| a.norm_sqr()).sum();
    Populations {
        time: t,
        a0: x[0],
        first,
        second,
        norm: x[0].norm_sqr() + first + second,
    }
}

/// Classical fourth-order Runge-Kutta from `|x0>` to `t_end`, recording
/// populations every `sample_every` steps.
pub fn evolve(
    model: &DiscreteModel,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Evolution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "step must be positive, got {dt}"
        )));
    }
    if dt > model.max_step() * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!(
            "step {dt} exceeds 0.1 / max detuning = {}",
            model.max_step()
        )));
    }
    if !(t_end >= 0.0) {
        return Err(Error::InvalidStep(format!(
            "end time must be >= 0, got {t_end}"
        )));
    }
    let t_rec = model.recurrence_time();
    if t_end >= 0.5 * t_rec {
        return Err(Error::RecurrenceGuard(format!(
            "end time {t_end} is not below half the recurrence time {t_rec}"
        )));
    }
    let steps = (t_end / dt).ceil() as usize;
    let dt = if steps == 0 { dt } else { t_end / steps as f64 };
    let sample_every = sample_every.max(1);
    let dim = model.dimension();
    let mut x = vec![C64::default(); dim];
    x[0] = C64::new(1.0, 0.0);
    let mut ws = Workspace {
        phase_y: vec![C64::default(); model.y.len()],
        phase_z: vec![C64::default(); model.z.len()],
    };
    let mut k1 = vec![C64::default(); dim];
    let mut k2 = vec![C64::default(); dim];
    let mut k3 = vec![C64::default(); dim];
    let mut k4 = vec![C64::default(); dim];
    let mut tmp = vec![C64::default(); dim];
    let mut samples = vec![populations(model, 0.0, &x)];
    let mut max_drift: f64 = 0.0;
    for n in 0..steps {
        let t = n as f64 * dt;
        derivative(model, t, &x, &mut k1, &mut ws);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        derivative(model, t + 0.5 * dt, &tmp, &mut k2, &mut ws);
        for i in 0..dim {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        derivative(model, t + 0.5 * dt, &tmp, &mut k3, &mut ws);
        for i in 0..dim {
            tmp[i] = x[i] + dt * k3[i];
        }
        derivative(model, t + dt, &tmp, &mut k4, &mut ws);
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        let last = n + 1 == steps;
        if (n + 1) % sample_every == 0 || last {
            let p = populations(model, (n + 1) as f64 * dt, &x);
            let drift = (p.norm - 1.0).abs();
            max_drift = max_drift.max(drift);
            if drift > NORM_TOLERANCE {
                return Err(Error::NormDrift {
                    drift,
                    time: p.time,
                });
            }
            samples.push(p);
        }
    }
    Ok(Evolution {
        samples,
        state: x,
        step: dt,
        max_norm_drift: max_drift,
    })
}

/// Joint spectrum `|a2_kj|^2 / (dy dz)` on the mode grid with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectra {
    pub joint: Spectrum2,
    pub first: Spectrum1,
    pub second: Spectrum1,
    /// Probability left in `|x0>` and the intermediate sector.
    pub residual_initial: f64,
    pub residual_intermediate: f64,
}

pub fn extract_spectra(
    evolution: &Evolution,
    model: &DiscreteModel,
    threshold: f64,
) -> Result<OracleSpectra> {
    let ny = model.y.len();
    let nz = model.z.len();
    let x = &evolution.state;
    let first_pop: f64 = x[1..1 + ny].iter().map(|a| a.norm_sqr()).sum();
    if first_pop > threshold {
        return Err(Error::NotConverged {
            population: first_pop,
            threshold,
        });
    }
    let cell = model.y.spacing * model.z.spacing;
    let values: Vec<f64> = x[1 + ny..].iter().map(|a| a.norm_sqr() / cell).collect();
    let mass = values.iter().sum::<f64>() * cell;
    let y_axis = model.y.axis()?;
    let z_axis = model.z.axis()?;
    let mut py = vec![0.0; ny];
    let mut pz = vec![0.0; nz];
    for k in 0..ny {
        for j in 0..nz {
            let v = values[k * nz + j];
            py[k] += v * model.z.spacing;
            pz[j] += v * model.y.spacing;
        }
    }
    let first = Spectrum1 {
        axis: y_axis,
        mass: py.iter().sum::<f64>() * model.y.spacing,
        values: py,
        kind: SpectrumKind::FirstNumeric,
    };
    let second = Spectrum1 {
        axis: z_axis,
        mass: pz.iter().sum::<f64>() * model.z.spacing,
        values: pz,
        kind: SpectrumKind::SecondNumeric,
    };
    Ok(OracleSpectra {
        joint: Spectrum2 {
            y: y_axis,
            z: z_axis,
            values,
            mass,
        },
        first,
        second,
        residual_initial: x[0].norm_sqr(),
        residual_intermediate: first_pop,
    })
}

/// Relative L1 distance `Σ|p - q| / Σ q` between the oracle joint spectrum
/// and the analytic joint density sampled at the mode energies.
pub fn joint_l1_distance(
    spectra: &OracleSpectra,
    system: &CascadeSystem,
    line: &LineParameters,
) -> f64 {
    let joint = &spectra.joint;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..joint.y.len {
        let y = joint.y.point(k);
        for j in 0..joint.z.len {
            let q = joint_density(system, line, y, joint.z.point(j));
            num += (joint.at(k, j) - q).abs();
            den += q;
        }
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::DensityFamily;
    use approx::assert_relative_eq;

    fn flat(v0: f64, a: f64, b: f64) -> SpectralDensity {
        SpectralDensity::new(DensityFamily::FlatWindow { v0, a, b }).unwrap()
    }

    fn single_mode(detuning: f64, g: f64) -> DiscreteModel {
        DiscreteModel {
            omega01: 1.0,
            omega12: 1.0,
            y: Modes {
                energies: vec![1.0 + detuning],
                couplings: vec![g],
                spacing: 1e-3,
            },
            z: Modes {
                energies: vec![1.0],
                couplings: vec![0.0],
                spacing: 1e-3,
            },
        }
    }

    #[test]
    fn resonant_rabi_oscillation() {
        let g = 0.3;
        let model = single_mode(0.0, g);
        let ev = evolve(&model, 10.0, 0.01, 10).unwrap();
        for s in &ev.samples {
            assert!((s.a0.norm_sqr() - (g * s.time).cos().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn detuned_rabi_oscillation() {
        let (g, delta): (f64, f64) = (0.2, 0.6);
        let model = single_mode(delta, g);
        let omega = (g * g + delta * delta / 4.0).sqrt();
        let ev = evolve(&model, 20.0, 0.02 / delta, 25).unwrap();
        for s in &ev.samples {
            let p0 = 1.0 - (g / omega).powi(2) * (omega * s.time).sin().powi(2);
            assert!((s.a0.norm_sqr() - p0).abs() < 1e-7, "t {}", s.time);
        }
    }

    #[test]
    fn flat_window_couplings_are_uniform() {
        let sys = CascadeSystem::new(1.0, 1.0, flat(0.01, 0.5, 1.5), flat(0.01, 0.5, 1.5)).unwrap();
        let grid = OracleGrid {
            n_y: 100,
            n_z: 50,
            range_y: (0.5, 1.5),
            range_z: (0.5, 1.5),
        };
        let m = discretize(&sys, 0.1, &grid).unwrap();
        for g in &m.y.couplings {
            assert_relative_eq!(*g, (0.01 * 1.0 / 100.0f64).sqrt(), max_relative = 1e-14);
        }
        assert_eq!(m.dimension(), 1 + 100 + 5000);
    }

    #[test]
    fn zero_density_has_zero_couplings() {
        let z = flat(0.01, 0.0, 2.0);
        let sys = CascadeSystem::new(1.0, 1.0, flat(0.0, 0.5, 1.5), z).unwrap();
        let grid = OracleGrid {
            n_y: 60,
            n_z: 60,
            range_y: (0.5, 1.5),
            range_z: (0.0, 2.0),
        };
        let m = discretize(&sys, 1.0, &grid).unwrap();
        assert!(m.y.couplings.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn riemann_sum_converges_quadratically() {
        let d = SpectralDensity::new(DensityFamily::ShiftedLorentzian {
            amplitude: 1.0,
            center: 2.0,
            width: 0.5,
        })
        .unwrap();
        let exact = d.total_weight() * (1.0 - leakage(&d, 0.0, 40.0).unwrap());
        let err = |n| {
            let m = Modes::sample(&d, 0.0, 40.0, n);
            (m.couplings.iter().map(|g| g * g).sum::<f64>() - exact).abs()
        };
        let ratio = err(200) / err(400);
        assert!(ratio > 3.5, "ratio {ratio}");
    }

    #[test]
    fn guards() {
        let sys = CascadeSystem::new(1.0, 1.0, flat(0.01, 0.5, 1.5), flat(0.01, 0.5, 1.5)).unwrap();
        let mut grid = OracleGrid {
            n_y: 60,
            n_z: 60,
            range_y: (0.6, 1.5),
            range_z: (0.5, 1.5),
        };
        assert_eq!(
            discretize(&sys, 0.03, &grid).unwrap_err().name(),
            "RangeTooNarrow"
        );
        grid.range_y = (0.5, 1.5);
        assert_eq!(
            discretize(&sys, 1e-3, &grid).unwrap_err().name(),
            "RecurrenceGuard"
        );
        let m = discretize(&sys, 0.1, &grid).unwrap();
        let half = 0.5 * m.recurrence_time();
        assert_eq!(
            evolve(&m, half, m.max_step(), 1).unwrap_err().name(),
            "RecurrenceGuard"
        );
        assert_eq!(
            evolve(&m, 1.0, 2.0 * m.max_step(), 1).unwrap_err().name(),
            "InvalidStep"
        );
        grid.n_y = 10;
        assert_eq!(
            discretize(&sys, 0.1, &grid).unwrap_err().name(),
            "InvalidSystem"
        );
    }

    #[test]
    fn unitarity_and_sector_flow() {
        let sys = CascadeSystem::new(1.0, 1.0, flat(0.02, 0.5, 1.5), flat(0.03, 0.5, 1.5)).unwrap();
        let grid = OracleGrid {
            n_y: 60,
            n_z: 60,
            range_y: (0.5, 1.5),
            range_z: (0.5, 1.5),
        };
        let m = discretize(&sys, 0.06, &grid).unwrap();
        let ev = evolve(&m, 60.0, m.max_step(), 20).unwrap();
        assert!(ev.max_norm_drift < NORM_TOLERANCE);
        let last = ev.samples.last().unwrap();
        assert!(last.second > 0.9);
        assert!(extract_spectra(&ev, &m, 1e-12).is_err());
        let spectra = extract_spectra(&ev, &m, 1e-2).unwrap();
        let total = spectra.joint.mass + spectra.residual_initial + spectra.residual_intermediate;
        assert!((total - 1.0).abs() < 1e-8);
        assert_relative_eq!(spectra.first.mass, spectra.joint.mass, max_relative = 1e-12);
        assert_relative_eq!(
            spectra.second.mass,
            spectra.joint.mass,
            max_relative = 1e-12
        );
    }
}

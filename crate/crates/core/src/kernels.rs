//! Memory kernels of the level-0 amplitude equation and a product-integration
//! solver for `a'(t) = -∫_0^t a(s) q(t - s) ds`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::densities::{DensityFamily, SpectralDensity};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_semi_infinite, Tolerance, Window};
use crate::rates::ComplexDecayConstant;

/// Kernel samples below this fraction of `|q(0)|` are treated as zero once
/// the kernel has decayed for good.
pub const KERNEL_TRUNCATION: f64 = 1e-12;

/// `∫_0^inf V(w) exp(-i w tau) dw`.
pub fn density_transform(density: &SpectralDensity, tau: f64) -> Result<C64> {
    if tau == 0.0 {
        return Ok(C64::new(density.total_weight(), 0.0));
    }
    if tau < 0.0 {
        return density_transform(density, -tau).map(|z| z.conj());
    }
    match density.family() {
        DensityFamily::FlatWindow { v0, a, b } => {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            Ok(C64::from_polar(1.0, -mid * tau) * (v0 * 2.0 * (half * tau).sin() / tau))
        }
        DensityFamily::OhmicExp { g2, cutoff } => {
            let d = C64::new(1.0, cutoff * tau);
            Ok(g2 * cutoff * cutoff / (d * d))
        }
        DensityFamily::Tabulated { nodes } => Ok(nodes
            .windows(2)
            .map(|p| linear_segment_transform(p[0], p[1], tau))
            .sum()),
        DensityFamily::ShiftedLorentzian {
            amplitude,
            center,
            width,
        } => lorentzian_transform(*amplitude, *center, *width, tau),
    }
}

// ∫_{x0}^{x1} (linear interpolant) e^{-i w tau} dw
fn linear_segment_transform((x0, y0): (f64, f64), (x1, y1): (f64, f64), tau: f64) -> C64 {
    let h = x1 - x0;
    let z = C64::new(0.0, -h * tau);
    let (e0, e1) = exp_moments(z);
    C64::from_polar(h, -x0 * tau) * (y0 * e0 + (y1 - y0) * e1)
}

// (∫_0^1 e^{zu} du, ∫_0^1 u e^{zu} du)
fn exp_moments(z: C64) -> (C64, C64) {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0, 0.0);
        let mut m0 = C64::new(0.0, 0.0);
        let mut m1 = C64::new(0.0, 0.0);
        for k in 0..24 {
            // term = z^k / k!
            m0 += term / (k + 1) as f64;
            m1 += term / (k + 2) as f64;
            term = term * z / (k + 1) as f64;
        }
        (m0, m1)
    } else {
        let ez = z.exp();
        ((ez - 1.0) / z, (ez * (z - 1.0) + 1.0) / (z * z))
    }
}

// Half-line transform of a Lorentzian. The integration ray is rotated by
// 45 degrees into the half plane where the exponential decays and no pole
// is crossed; for a centre on the positive axis the full-line transform is
// taken and the negative-energy part subtracted.
fn lorentzian_transform(amplitude: f64, center: f64, width: f64, tau: f64) -> Result<C64> {
    let lorentz = |z: C64| {
        let d = z - center;
        amplitude / PI * width / (d * d + width * width)
    };
    let ray = |dir: C64, sign: f64, f: &dyn Fn(C64) -> C64| -> Result<C64> {
        let g = |s: f64| {
            let z = dir * s;
            dir * f(z) * (C64::new(0.0, sign * tau) * z).exp()
        };
        let scale = (1.0 / tau).max(width).max(center.abs());
        let window = Window::new(scale).with_breakpoints([width, center.abs(), 1.0 / tau]);
        let tol = Tolerance {
            rtol: 1e-12,
            atol: 1e-15 * amplitude,
            max_subdivisions: 4000,
        };
        let re = integrate_semi_infinite(|s| g(s).re, &window, &tol);
        let im = integrate_semi_infinite(|s| g(s).im, &window, &tol);
        match (re, im) {
            (Ok(re), Ok(im)) => Ok(C64::new(re.value, im.value)),
            _ => Err(Error::OscillationResolution { tau }),
        }
    };
    if center > 0.0 {
        let full = C64::from_polar(amplitude, -center * tau) * (-width * tau).exp();
        let dir = C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let negative = ray(dir, 1.0, &|z| lorentz(-z))?;
        Ok(full - negative)
    } else {
        let dir = C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        ray(dir, -1.0, &lorentz)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KernelSource {
    Density {
        density: SpectralDensity,
        transition_energy: f64,
        damping: C64,
    },
    Samples {
        step: f64,
        values: Vec<C64>,
    },
}

/// `q(tau) = exp(-damping tau) exp(i E tau) ∫ V(w) exp(-i w tau) dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    source: KernelSource,
}

pub fn build_kernel(
    density: &SpectralDensity,
    transition_energy: f64,
    damping: ComplexDecayConstant,
) -> MemoryKernel {
    MemoryKernel {
        source: KernelSource::Density {
            density: density.clone(),
            transition_energy,
            damping: damping.as_complex(),
        },
    }
}

impl MemoryKernel {
    /// A kernel given only by samples `values[k] = q(k step)`; the solver
    /// must use the same step.
    pub fn from_samples(step: f64, values: Vec<C64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidStep(format!(
                "kernel step must be positive, got {step}"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidStep(
                "kernel needs at least one sample".into(),
            ));
        }
        Ok(Self {
            source: KernelSource::Samples { step, values },
        })
    }

    pub fn value(&self, tau: f64) -> Result<C64> {
        match &self.source {
            KernelSource::Density {
                density,
                transition_energy,
                damping,
            } => {
                let phase = (C64::new(0.0, *transition_energy) - damping) * tau;
                Ok(phase.exp() * density_transform(density, tau)?)
            }
            KernelSource::Samples { step, values } => {
                let k = (tau / step).round();
                if (tau - k * step).abs() > 1e-9 * step || k < 0.0 {
                    return Err(Error::GridMismatch(format!(
                        "tau = {tau} is not on the sampled grid of step {step}"
                    )));
                }
                Ok(values.get(k as usize).copied().unwrap_or_default())
            }
        }
    }

    /// Largest step that resolves the kernel's fastest oscillation.
    pub fn max_step(&self) -> f64 {
        match &self.source {
            KernelSource::Density {
                density,
                transition_energy,
                ..
            } => 0.1 / density.cutoff_scale().max(transition_energy.abs()),
            KernelSource::Samples { step, .. } => *step,
        }
    }

    /// `n` samples at `k h`, trailing samples that have decayed below
    /// `KERNEL_TRUNCATION |q(0)|` for good are dropped.
    pub fn sample(&self, h: f64, n: usize) -> Result<Vec<C64>> {
        let mut values = match &self.source {
            KernelSource::Samples { step, values } => {
                if (h - step).abs() > 1e-12 * step {
                    return Err(Error::GridMismatch(format!(
                        "kernel sampled at step {step}, solver step {h}"
                    )));
                }
                let mut v: Vec<C64> = values.iter().take(n).copied().collect();
                v.resize(n, C64::default());
                v
            }
            KernelSource::Density { .. } => (0..n)
                .map(|k| self.value(k as f64 * h))
                .collect::<Result<Vec<_>>>()?,
        };
        let floor = KERNEL_TRUNCATION * values.first().map_or(0.0, |q| q.norm());
        let keep = values
            .iter()
            .rposition(|q| q.norm() >= floor)
            .map_or(0, |i| i + 1);
        values.truncate(keep.max(1));
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMethod {
    Volterra,
    Markov,
}

impl TraceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceMethod::Volterra => "volterra",
            TraceMethod::Markov => "markov",
        }
    }
}

/// Samples `a0(k h)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrace {
    pub step: f64,
    pub values: Vec<C64>,
    pub method: TraceMethod,
}

impl AmplitudeTrace {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.values.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Every `factor`-th sample.
    pub fn decimate(&self, factor: usize) -> AmplitudeTrace {
        let factor = factor.max(1);
        AmplitudeTrace {
            step: self.step * factor as f64,
            values: self.values.iter().step_by(factor).copied().collect(),
            method: self.method,
        }
    }
}

fn steps_for(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "step must be positive, got {h}"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "end time must be >= 0, got {t_end}"
        )));
    }
    let n = (t_end / h).round();
    if (n * h - t_end).abs() > 1e-9 * t_end.max(h) {
        return Err(Error::InvalidStep(format!(
            "end time {t_end} is not a multiple of the step {h}"
        )));
    }
    Ok(n as usize)
}

/// Trapezoidal product integration of `a' = -∫_0^t a(s) q(t - s) ds`,
/// `a(0) = 1`, up to `t_end` with step `h`.
pub fn solve_volterra(kernel: &MemoryKernel, t_end: f64, h: f64) -> Result<AmplitudeTrace> {
    let n = steps_for(t_end, h)?;
    if h > kernel.max_step() * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!(
            "step {h} does not resolve the kernel (max {})",
            kernel.max_step()
        )));
    }
    let q = kernel.sample(h, n + 1)?;
    let kernel_len = q.len();
    // Kernel stored back to front so the convolution runs over two forward slices.
    let (qr, qi): (Vec<f64>, Vec<f64>) = q.iter().rev().map(|z| (z.re, z.im)).unzip();
    let at = |k: usize| if k < kernel_len { q[k] } else { C64::default() };

    let mut ar = Vec::with_capacity(n + 1);
    let mut ai = Vec::with_capacity(n + 1);
    ar.push(1.0);
    ai.push(0.0);
    // f_n = -(trapezoid of a(s) q(t_n - s))
    let mut f_prev = C64::default();
    let denom = 1.0 + 0.25 * h * h * q[0];
    for m in 1..=n {
        // Interior sum Σ_{j=1}^{m-1} a_j q_{m-j} restricted to the kernel support.
        let lo = m.saturating_sub(kernel_len - 1).max(1);
        let (sr, si) = if lo < m {
            // q_{m-j} for j = lo..m sits at kernel_len - 1 - (m - j)
            let first = kernel_len - 1 - (m - lo);
            let last = kernel_len - 1;
            dot(&ar[lo..m], &ai[lo..m], &qr[first..last], &qi[first..last])
        } else {
            (0.0, 0.0)
        };
        let interior = C64::new(sr, si) + 0.5 * at(m);
        let a_prev = C64::new(ar[m - 1], ai[m - 1]);
        let rhs = a_prev + 0.5 * h * f_prev - 0.5 * h * h * interior;
        let a_m = rhs / denom;
        f_prev = -h * (interior + 0.5 * a_m * q[0]);
        ar.push(a_m.re);
        ai.push(a_m.im);
    }
    Ok(AmplitudeTrace {
        step: h,
        values: ar
            .into_iter()
            .zip(ai)
            .map(|(r, i)| C64::new(r, i))
            .collect(),
        method: TraceMethod::Volterra,
    })
}

// Complex dot product over split real/imaginary slices of equal length.
fn dot(a_r: &[f64], a_i: &[f64], q_r: &[f64], q_i: &[f64]) -> (f64, f64) {
    const L: usize = 8;
    let mut rr = [0.0; L];
    let mut ii = [0.0; L];
    let mut ri = [0.0; L];
    let mut ir = [0.0; L];
    let chunks = a_r
        .chunks_exact(L)
        .zip(a_i.chunks_exact(L))
        .zip(q_r.chunks_exact(L).zip(q_i.chunks_exact(L)));
    for ((ar, ai), (qr, qi)) in chunks {
        for l in 0..L {
            rr[l] += ar[l] * qr[l];
            ii[l] += ai[l] * qi[l];
            ri[l] += ar[l] * qi[l];
            ir[l] += ai[l] * qr[l];
        }
    }
    let tail = a_r.len() / L * L;
    let mut sr = rr.iter().sum::<f64>() - ii.iter().sum::<f64>();
    let mut si = ri.iter().sum::<f64>() + ir.iter().sum::<f64>();
    for j in tail..a_r.len() {
        sr += a_r[j] * q_r[j] - a_i[j] * q_i[j];
        si += a_r[j] * q_i[j] + a_i[j] * q_r[j];
    }
    (sr, si)
}

/// Solves with `h` and `h / 2` and refuses when the endpoint moves by more
/// than `rtol`; returns the finer trace decimated to step `h`.
pub fn solve_volterra_checked(
    kernel: &MemoryKernel,
    t_end: f64,
    h: f64,
    rtol: f64,
) -> Result<AmplitudeTrace> {
    let coarse = solve_volterra(kernel, t_end, h)?;
    let fine = solve_volterra(kernel, t_end, 0.5 * h)?;
    let a = coarse.values[coarse.len() - 1];
    let b = fine.values[fine.len() - 1];
    let change = (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    if change > rtol {
        return Err(Error::StepTooCoarse { change, rtol });
    }
    Ok(fine.decimate(2))
}

/// Observed order of accuracy from solves at `h`, `h/2` and `h/4`, using the
/// largest change over the coarse grid.
pub fn observed_order(kernel: &MemoryKernel, t_end: f64, h: f64) -> Result<f64> {
    let t1 = solve_volterra(kernel, t_end, h)?;
    let t2 = solve_volterra(kernel, t_end, 0.5 * h)?.decimate(2);
    let t4 = solve_volterra(kernel, t_end, 0.25 * h)?.decimate(4);
    let max_diff = |x: &AmplitudeTrace, y: &AmplitudeTrace| {
        x.values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    };
    let e1 = max_diff(&t1, &t2);
    let e2 = max_diff(&t2, &t4);
    Ok((e1 / e2).log2())
}

/// `a0(t) = exp(-gamma t)`.
pub fn markov_trace(gamma: ComplexDecayConstant, t_end: f64, h: f64) -> Result<AmplitudeTrace> {
    let n = steps_for(t_end, h)?;
    let g = gamma.as_complex();
    Ok(AmplitudeTrace {
        step: h,
        values: (0..=n).map(|k| (-g * (k as f64 * h)).exp()).collect(),
        method: TraceMethod::Markov,
    })
}

/// Relative deviations of `a` from the reference `b` over `t >= t_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationReport {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub sup_modulus: f64,
    pub l2_modulus: f64,
    pub sup_probability: f64,
    pub l2_probability: f64,
}

pub fn compare_traces(
    a: &AmplitudeTrace,
    b: &AmplitudeTrace,
    t_min: f64,
) -> Result<DeviationReport> {
    compare_traces_between(a, b, t_min, f64::INFINITY)
}

pub fn compare_traces_between(
    a: &AmplitudeTrace,
    b: &AmplitudeTrace,
    t_min: f64,
    t_max: f64,
) -> Result<DeviationReport> {
    if (a.step - b.step).abs() > 1e-12 * a.step || a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "traces differ: step {} x {} vs step {} x {}",
            a.step,
            a.len(),
            b.step,
            b.len()
        )));
    }
    let mut report = DeviationReport {
        t_min,
        t_max: t_min,
        samples: 0,
        sup_modulus: 0.0,
        l2_modulus: 0.0,
        sup_probability: 0.0,
        l2_probability: 0.0,
    };
    let (mut dm, mut nm, mut dp, mut np) = (0.0, 0.0, 0.0, 0.0);
    for (k, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        let t = a.time(k);
        if t < t_min || t > t_max {
            continue;
        }
        let (mx, my) = (x.norm(), y.norm());
        let (px, py) = (mx * mx, my * my);
        report.samples += 1;
        report.t_max = t;
        report.sup_modulus = f64::max(report.sup_modulus, relative(mx, my));
        report.sup_probability = f64::max(report.sup_probability, relative(px, py));
        dm += (mx - my).powi(2);
        nm += my * my;
        dp += (px - py).powi(2);
        np += py * py;
    }
    if report.samples == 0 {
        return Err(Error::GridMismatch(format!(
            "no samples with t in [{t_min}, {t_max}]"
        )));
    }
    report.l2_modulus = ratio(dm, nm).sqrt();
    report.l2_probability = ratio(dp, np).sqrt();
    Ok(report)
}

fn relative(x: f64, reference: f64) -> f64 {
    if x == reference {
        0.0
    } else {
        (x - reference).abs() / reference.abs()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

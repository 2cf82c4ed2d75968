//! Energy distributions of the two emitted quanta: the joint spectrum, its
//! marginals and the distribution of the summed energy.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{absorptive_window, Tolerance};
use crate::rates::{CascadeSystem, CorrectedEnergies, PerturbedConstants};

/// Points `start + k step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) || len < 2 {
            return Err(Error::GridMismatch(format!(
                "axis needs a positive step and at least two points (start {start}, step {step}, len {len})"
            )));
        }
        Ok(Self { start, step, len })
    }

    /// Covers `[lo, hi]` with step at most `max_step`.
    pub fn spanning(lo: f64, hi: f64, max_step: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::GridMismatch(format!("empty range [{lo}, {hi}]")));
        }
        let intervals = ((hi - lo) / max_step).ceil().max(1.0) as usize;
        Axis::new(lo, (hi - lo) / intervals as f64, intervals + 1)
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.point(k)).collect()
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Trapezoid weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.len {
            0.5 * self.step
        } else {
            self.step
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Joint,
    FirstNumeric,
    FirstClosed,
    SecondNumeric,
    SecondClosed,
    SumNumeric,
    SumClosed,
}

impl SpectrumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumKind::Joint => "joint",
            SpectrumKind::FirstNumeric => "first_numeric",
            SpectrumKind::FirstClosed => "first_closed",
            SpectrumKind::SecondNumeric => "second_numeric",
            SpectrumKind::SecondClosed => "second_closed",
            SpectrumKind::SumNumeric => "sum_numeric",
            SpectrumKind::SumClosed => "sum_closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum1 {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Integrated total, not used to rescale `values`.
    pub mass: f64,
    pub kind: SpectrumKind,
}

impl Spectrum1 {
    fn with_trapezoid_mass(axis: Axis, values: Vec<f64>, kind: SpectrumKind) -> Self {
        let mass = values
            .iter()
            .enumerate()
            .map(|(k, v)| axis.weight(k) * v)
            .sum();
        Self {
            axis,
            values,
            mass,
            kind,
        }
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            })
            .0
    }

    /// Full width at half maximum by linear interpolation of the crossings.
    pub fn fwhm(&self) -> Result<f64> {
        let k = self.argmax();
        let half = 0.5 * self.values[k];
        if !(half > 0.0) {
            return Err(Error::NoPeak("spectrum vanishes".into()));
        }
        let left = (0..k).rev().find(|&i| self.values[i] < half);
        let right = (k + 1..self.values.len()).find(|&i| self.values[i] < half);
        let (Some(l), Some(r)) = (left, right) else {
            return Err(Error::NoPeak(
                "half maximum not reached inside the grid".into(),
            ));
        };
        let cross = |i: usize, j: usize| {
            let (vi, vj) = (self.values[i], self.values[j]);
            let (xi, xj) = (self.axis.point(i), self.axis.point(j));
            xi + (half - vi) / (vj - vi) * (xj - xi)
        };
        Ok(cross(r - 1, r) - cross(l, l + 1))
    }

    /// `∫ |self - other|` over the shared grid, relative to `∫ |other|`.
    pub fn relative_l1(&self, other: &Spectrum1) -> Result<f64> {
        if self.axis != other.axis {
            return Err(Error::GridMismatch("spectra live on different axes".into()));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..self.axis.len {
            let w = self.axis.weight(k);
            num += w * (self.values[k] - other.values[k]).abs();
            den += w * other.values[k].abs();
        }
        Ok(num / den)
    }
}

/// Row-major joint spectrum, `values[i * z.len + j] = p(y_i, z_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum2 {
    pub y: Axis,
    pub z: Axis,
    pub values: Vec<f64>,
    pub mass: f64,
}

impl Spectrum2 {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.z.len + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.z.len..(i + 1) * self.z.len]
    }

    /// `∫∫ |self - other|` relative to `∫∫ |other|`.
    pub fn relative_l1(&self, other: &Spectrum2) -> Result<f64> {
        if self.y != other.y || self.z != other.z {
            return Err(Error::GridMismatch(
                "joint spectra live on different grids".into(),
            ));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.y.len {
            for j in 0..self.z.len {
                let w = self.y.weight(i) * self.z.weight(j);
                num += w * (self.at(i, j) - other.at(i, j)).abs();
                den += w * other.at(i, j).abs();
            }
        }
        Ok(num / den)
    }
}

/// Widths and centres entering the line factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineParameters {
    pub lambda_tilde0: f64,
    pub lambda1: f64,
    pub energies: CorrectedEnergies,
}

impl LineParameters {
    pub fn new(constants: &PerturbedConstants, energies: CorrectedEnergies) -> Result<Self> {
        let lambda_tilde0 = constants.gamma_tilde0.lambda;
        let lambda1 = constants.gamma1.lambda;
        if !(lambda_tilde0 > 0.0 && lambda1 > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "spectra need positive widths, got lambda_tilde0 = {lambda_tilde0}, lambda1 = {lambda1}"
            )));
        }
        Ok(Self {
            lambda_tilde0,
            lambda1,
            energies,
        })
    }
}

/// `V(y) W(z) / ([lt0^2 + (y + z - bar02)^2] [l1^2 + (z - bar12)^2])`.
pub fn joint_density(system: &CascadeSystem, line: &LineParameters, y: f64, z: f64) -> f64 {
    let v = system.density_y.evaluate(y);
    let w = system.density_z.evaluate(z);
    if v == 0.0 || w == 0.0 {
        return 0.0;
    }
    let e = &line.energies;
    let d0 = y + z - e.bar02;
    let d1 = z - e.bar12;
    v * w / ((line.lambda_tilde0.powi(2) + d0 * d0) * (line.lambda1.powi(2) + d1 * d1))
}

/// Axes that cover the density supports and 20 half-widths around both
/// line centres with steps of `min(lambda_tilde0, lambda1) / 5`.
pub fn auto_axes(system: &CascadeSystem, line: &LineParameters) -> Result<(Axis, Axis)> {
    let step = line.lambda_tilde0.min(line.lambda1) / 5.0;
    let e = &line.energies;
    let reach_y = 20.0 * (line.lambda_tilde0 + line.lambda1);
    let reach_z = 20.0 * line.lambda1;
    let range = |support: Option<(f64, f64)>, scale: f64, center: f64, reach: f64| {
        let (lo, hi) = support.unwrap_or((0.0, 10.0 * scale));
        let lo = lo.min(center - reach).max(0.0);
        let hi = hi.max(center + reach);
        (lo, hi)
    };
    let (ylo, yhi) = range(
        system.density_y.support(),
        system.density_y.cutoff_scale(),
        e.bar01,
        reach_y,
    );
    let (zlo, zhi) = range(
        system.density_z.support(),
        system.density_z.cutoff_scale(),
        e.bar12,
        reach_z,
    );
    // snap both starts to the same lattice so anti-diagonals line up
    let ylo = (ylo / step).floor() * step;
    let zlo = (zlo / step).floor() * step;
    let ny = ((yhi - ylo) / step).ceil() as usize + 1;
    let nz = ((zhi - zlo) / step).ceil() as usize + 1;
    Ok((Axis::new(ylo, step, ny)?, Axis::new(zlo, step, nz)?))
}

pub fn joint_spectrum(
    system: &CascadeSystem,
    line: &LineParameters,
    y: Axis,
    z: Axis,
) -> Result<Spectrum2> {
    let limit = line.lambda_tilde0 / 5.0;
    // along the ridge y + z = const the spacing is set by the finer axis
    if y.step.min(z.step) > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse(format!(
            "grid step {} exceeds lambda_tilde0 / 5 = {limit}",
            y.step.min(z.step)
        )));
    }
    let values: Vec<f64> = (0..y.len)
        .into_par_iter()
        .flat_map_iter(|i| {
            let yi = y.point(i);
            (0..z.len).map(move |j| joint_density(system, line, yi, z.point(j)))
        })
        .collect();
    let mut mass = 0.0;
    for i in 0..y.len {
        let row: f64 = values[i * z.len..(i + 1) * z.len]
            .iter()
            .enumerate()
            .map(|(j, v)| z.weight(j) * v)
            .sum();
        mass += y.weight(i) * row;
    }
    Ok(Spectrum2 { y, z, values, mass })
}

/// Integrates the joint grid over the second energy.
pub fn first_marginal_numeric(joint: &Spectrum2) -> Spectrum1 {
    let values = (0..joint.y.len)
        .map(|i| {
            joint
                .row(i)
                .iter()
                .enumerate()
                .map(|(j, v)| joint.z.weight(j) * v)
                .sum()
        })
        .collect();
    Spectrum1::with_trapezoid_mass(joint.y, values, SpectrumKind::FirstNumeric)
}

/// Integrates the joint grid over the first energy.
pub fn second_marginal_numeric(joint: &Spectrum2) -> Spectrum1 {
    let mut values = vec![0.0; joint.z.len];
    for i in 0..joint.y.len {
        let w = joint.y.weight(i);
        for (acc, v) in values.iter_mut().zip(joint.row(i)) {
            *acc += w * v;
        }
    }
    Spectrum1::with_trapezoid_mass(joint.z, values, SpectrumKind::SecondNumeric)
}

/// Sums the joint grid along anti-diagonals `y_i + z_j = Omega_k`; both axes
/// must share the step. The mass is the rectangle sum over `Omega`, which
/// equals the joint trapezoid mass exactly.
pub fn sum_energy_numeric(joint: &Spectrum2) -> Result<Spectrum1> {
    let h = joint.y.step;
    if (joint.z.step - h).abs() > 1e-12 * h {
        return Err(Error::GridMismatch(format!(
            "anti-diagonal sums need equal steps, got {} and {}",
            joint.y.step, joint.z.step
        )));
    }
    let axis = Axis::new(
        joint.y.start + joint.z.start,
        h,
        joint.y.len + joint.z.len - 1,
    )?;
    let mut values = vec![0.0; axis.len];
    for i in 0..joint.y.len {
        let wy = joint.y.weight(i);
        for (j, v) in joint.row(i).iter().enumerate() {
            values[i + j] += wy * joint.z.weight(j) / h * v;
        }
    }
    let mass = values.iter().sum::<f64>() * h;
    Ok(Spectrum1 {
        axis,
        values,
        mass,
        kind: SpectrumKind::SumNumeric,
    })
}

/// `(V(y) / lt0) (lt0 + l1) / ((lt0 + l1)^2 + (y - bar01)^2)`.
pub fn first_marginal_closed(
    system: &CascadeSystem,
    line: &LineParameters,
    axis: Axis,
) -> Spectrum1 {
    let width = line.lambda_tilde0 + line.lambda1;
    let values = axis
        .points()
        .into_iter()
        .map(|y| {
            let d = y - line.energies.bar01;
            system.density_y.evaluate(y) / line.lambda_tilde0 * width / (width * width + d * d)
        })
        .collect();
    Spectrum1::with_trapezoid_mass(axis, values, SpectrumKind::FirstClosed)
}

/// `(V(bar02 - z) / lt0) l1 / (l1^2 + (z - bar12)^2)`.
pub fn second_marginal_closed(
    system: &CascadeSystem,
    line: &LineParameters,
    axis: Axis,
) -> Spectrum1 {
    let l1 = line.lambda1;
    let e = &line.energies;
    let values = axis
        .points()
        .into_iter()
        .map(|z| {
            let d = z - e.bar12;
            system.density_y.evaluate(e.bar02 - z) / line.lambda_tilde0 * l1 / (l1 * l1 + d * d)
        })
        .collect();
    Spectrum1::with_trapezoid_mass(axis, values, SpectrumKind::SecondClosed)
}

/// `S(Omega) = ∫_0^Omega V(y) (1/pi) l1 / (l1^2 + (Omega - y - bar12)^2) dy`.
pub fn sum_weight(
    system: &CascadeSystem,
    line: &LineParameters,
    omega: f64,
    tol: &Tolerance,
) -> Result<f64> {
    if omega <= 0.0 {
        return Ok(0.0);
    }
    let center = omega - line.energies.bar12;
    let r = absorptive_window(&system.density_y, center, line.lambda1, 0.0, omega, tol)?;
    Ok(r.value / PI)
}

/// `S(Omega) / (lt0^2 + (Omega - bar02)^2)`.
pub fn sum_energy_closed(
    system: &CascadeSystem,
    line: &LineParameters,
    axis: Axis,
    tol: &Tolerance,
) -> Result<Spectrum1> {
    let lt0 = line.lambda_tilde0;
    let values = axis
        .points()
        .into_par_iter()
        .map(|omega| {
            let d = omega - line.energies.bar02;
            Ok(sum_weight(system, line, omega, tol)? / (lt0 * lt0 + d * d))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Spectrum1::with_trapezoid_mass(
        axis,
        values,
        SpectrumKind::SumClosed,
    ))
}

/// Least-squares fit `amplitude hw^2 / (hw^2 + (x - center)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    /// `||model - data|| / ||data||` over the grid.
    pub residual: f64,
}

fn lorentzian(p: &[f64; 3], x: f64) -> f64 {
    let [c, w, a] = *p;
    a * w * w / (w * w + (x - c) * (x - c))
}

fn misfit(p: &[f64; 3], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (lorentzian(p, x) - y).powi(2))
        .sum()
}

pub fn fit_lorentzian(spectrum: &Spectrum1) -> Result<LorentzianFit> {
    let xs = spectrum.axis.points();
    let ys = &spectrum.values;
    let k = spectrum.argmax();
    if k == 0 || k + 1 == ys.len() {
        return Err(Error::NoPeak(format!(
            "maximum at grid boundary x = {}",
            spectrum.axis.point(k)
        )));
    }
    let peak = ys[k];
    if !(peak > 0.0) {
        return Err(Error::NoPeak("spectrum vanishes".into()));
    }
    let hw0 = spectrum
        .fwhm()
        .map(|f| 0.5 * f)
        .unwrap_or(spectrum.axis.step);
    let mut p = [xs[k], hw0.max(spectrum.axis.step), peak];
    let norm2: f64 = ys.iter().map(|y| y * y).sum();
    let mut cost = misfit(&p, &xs, ys);
    let mut damping = 1e-3;
    let mut converged = false;
    for _ in 0..200 {
        // normal equations J^T J dp = -J^T r
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        let [c, w, a] = p;
        for (&x, &y) in xs.iter().zip(ys) {
            let d = x - c;
            let den = w * w + d * d;
            let shape = w * w / den;
            let g = [
                a * shape * 2.0 * d / den,
                a * 2.0 * w * d * d / (den * den),
                shape,
            ];
            let r = a * shape - y;
            for m in 0..3 {
                jtr[m] += g[m] * r;
                for n in 0..3 {
                    jtj[m][n] += g[m] * g[n];
                }
            }
        }
        let mut improved = false;
        while damping < 1e12 {
            let mut lhs = jtj;
            for (m, row) in lhs.iter_mut().enumerate() {
                row[m] += damping * jtj[m][m].max(1e-300);
            }
            let Some(dp) = solve3(lhs, [-jtr[0], -jtr[1], -jtr[2]]) else {
                damping *= 10.0;
                continue;
            };
            let trial = [p[0] + dp[0], (p[1] + dp[1]).abs(), p[2] + dp[2]];
            let trial_cost = misfit(&trial, &xs, ys);
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = trial_cost;
                damping = (damping * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !improved || converged || cost <= 1e-30 * norm2 {
            converged = true;
            break;
        }
    }
    if !converged || !p.iter().all(|v| v.is_finite()) || p[1] == 0.0 {
        return Err(Error::NoPeak("Lorentzian fit did not converge".into()));
    }
    Ok(LorentzianFit {
        center: p[0],
        half_width: p[1],
        amplitude: p[2],
        residual: (cost / norm2).sqrt(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `lambda1 < 0.1 bar01`: separated Lorentzian lines.
    Peaked,
    /// `0.1 <= lambda1 / bar01 <= 10`: deformed lines.
    Deformed,
    /// `bar01 < 0`: the first step is uphill and the spectra are continuous.
    Uphill,
    /// `lambda1 > 10 bar01 > 0`.
    Suppressed,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Peaked => "1",
            Regime::Deformed => "2",
            Regime::Uphill => "3",
            Regime::Suppressed => "suppressed",
        }
    }
}

pub fn classify(line: &LineParameters) -> Regime {
    let bar01 = line.energies.bar01;
    if bar01 < 0.0 {
        Regime::Uphill
    } else if line.lambda1 < 0.1 * bar01 {
        Regime::Peaked
    } else if line.lambda1 <= 10.0 * bar01 {
        Regime::Deformed
    } else {
        Regime::Suppressed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{DensityFamily, SpectralDensity};
    use crate::rates::{corrected_energies, default_tolerance, perturbed_constant};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat(v0: f64, a: f64, b: f64) -> SpectralDensity {
        SpectralDensity::new(DensityFamily::FlatWindow { v0, a, b }).unwrap()
    }

    fn peaked() -> (CascadeSystem, LineParameters) {
        // lambda1 = pi * 0.0064 ~ 0.02, lambda_tilde0 ~ pi * 0.0016 ~ 0.005
        let sys =
            CascadeSystem::new(1.0, 1.0, flat(0.0016, 0.0, 2.0), flat(0.0064, 0.0, 2.0)).unwrap();
        let p = perturbed_constant(&sys, &default_tolerance()).unwrap();
        let e = corrected_energies(&sys, p.gamma_tilde0, p.gamma1);
        let line = LineParameters::new(&p, e).unwrap();
        (sys, line)
    }

    #[test]
    fn axis_weights_integrate_linear_functions() {
        let a = Axis::spanning(1.0, 3.0, 0.3).unwrap();
        assert!(a.step <= 0.3);
        assert_relative_eq!(a.end(), 3.0, epsilon = 1e-14);
        let s: f64 = (0..a.len)
            .map(|k| a.weight(k) * (2.0 * a.point(k) + 1.0))
            .sum();
        assert_relative_eq!(s, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_lorentzian_is_recovered() {
        let axis = Axis::new(-5.0, 0.01, 1001).unwrap();
        let p = [0.3, 0.2, 7.0];
        let values = axis.points().iter().map(|&x| lorentzian(&p, x)).collect();
        let s = Spectrum1::with_trapezoid_mass(axis, values, SpectrumKind::FirstClosed);
        let fit = fit_lorentzian(&s).unwrap();
        assert_relative_eq!(fit.center, 0.3, max_relative = 1e-6);
        assert_relative_eq!(fit.half_width, 0.2, max_relative = 1e-6);
        assert_relative_eq!(fit.amplitude, 7.0, max_relative = 1e-6);
        assert!(fit.residual < 1e-6);
        assert_relative_eq!(s.fwhm().unwrap(), 0.4, max_relative = 1e-3);
    }

    #[test]
    fn monotone_spectrum_has_no_peak() {
        let axis = Axis::new(0.0, 0.1, 50).unwrap();
        let values = axis.points().iter().map(|x| (-x).exp()).collect();
        let s = Spectrum1::with_trapezoid_mass(axis, values, SpectrumKind::FirstClosed);
        assert_eq!(fit_lorentzian(&s).unwrap_err().name(), "NoPeak");
    }

    #[test]
    fn joint_vanishes_outside_supports() {
        let (sys, line) = peaked();
        assert_eq!(joint_density(&sys, &line, 2.5, 1.0), 0.0);
        assert_eq!(joint_density(&sys, &line, 1.0, -0.1), 0.0);
        assert!(joint_density(&sys, &line, 1.0, 1.0) > 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let (sys, line) = peaked();
        let a = Axis::spanning(0.0, 2.0, line.lambda_tilde0).unwrap();
        let err = joint_spectrum(&sys, &line, a, a).unwrap_err();
        assert_eq!(err.name(), "GridTooCoarse");
    }

    #[test]
    fn peaked_regime_spectra() {
        let (sys, line) = peaked();
        assert_eq!(classify(&line), Regime::Peaked);
        let (y, z) = auto_axes(&sys, &line).unwrap();
        let joint = joint_spectrum(&sys, &line, y, z).unwrap();
        assert!((joint.mass - 1.0).abs() < 0.01, "mass {}", joint.mass);

        let py = first_marginal_numeric(&joint);
        let pz = second_marginal_numeric(&joint);
        let ps = sum_energy_numeric(&joint).unwrap();
        assert_relative_eq!(py.mass, joint.mass, max_relative = 1e-12);
        assert_relative_eq!(pz.mass, joint.mass, max_relative = 1e-12);
        assert_relative_eq!(ps.mass, joint.mass, max_relative = 1e-12);

        let py_closed = first_marginal_closed(&sys, &line, y);
        let pz_closed = second_marginal_closed(&sys, &line, z);
        assert!(py.relative_l1(&py_closed).unwrap() < 0.02);
        assert!(pz.relative_l1(&pz_closed).unwrap() < 0.02);
        assert!((py_closed.mass - 1.0).abs() < 0.02);

        let fy = fit_lorentzian(&py_closed).unwrap();
        assert_relative_eq!(
            fy.half_width,
            line.lambda_tilde0 + line.lambda1,
            max_relative = 0.05
        );
        assert!(fy.residual < 0.05);
        let fz = fit_lorentzian(&pz_closed).unwrap();
        assert_relative_eq!(fz.half_width, line.lambda1, max_relative = 0.05);

        let ps_closed =
            sum_energy_closed(&sys, &line, ps.axis, &Tolerance::new(1e-8, 1e-14)).unwrap();
        let peak = ps_closed.axis.point(ps_closed.argmax());
        assert!((peak - line.energies.bar02).abs() <= ps_closed.axis.step);
        assert!(ps.relative_l1(&ps_closed).unwrap() < 0.02);
        assert_eq!(ps_closed.values[0], 0.0);
    }

    #[test]
    fn summed_energy_is_narrow_when_second_level_is_short_lived() {
        let sys =
            CascadeSystem::new(1.0, 1.0, flat(0.0005, 0.0, 2.0), flat(0.05, 0.0, 2.0)).unwrap();
        let p = perturbed_constant(&sys, &default_tolerance()).unwrap();
        let e = corrected_energies(&sys, p.gamma_tilde0, p.gamma1);
        let line = LineParameters::new(&p, e).unwrap();
        assert!(line.lambda1 >= 50.0 * line.lambda_tilde0);
        let axis =
            Axis::spanning(e.bar02 - 0.05, e.bar02 + 0.05, line.lambda_tilde0 / 20.0).unwrap();
        let ps = sum_energy_closed(&sys, &line, axis, &Tolerance::new(1e-8, 1e-14)).unwrap();
        assert_relative_eq!(
            ps.fwhm().unwrap(),
            2.0 * line.lambda_tilde0,
            max_relative = 0.1
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn closed_spectra_are_nonnegative_and_supported(
            v0 in 1e-4..1e-2f64, w0 in 1e-3..5e-2f64, o01 in -0.5..1.5f64, x in -1.0..4.0f64,
        ) {
            let sys = CascadeSystem::new(o01, 1.0, flat(v0, 0.2, 2.0), flat(w0, 0.5, 1.5)).unwrap();
            let p = perturbed_constant(&sys, &default_tolerance()).unwrap();
            let e = corrected_energies(&sys, p.gamma_tilde0, p.gamma1);
            prop_assume!(p.gamma_tilde0.lambda > 0.0);
            let line = LineParameters::new(&p, e).unwrap();
            let axis = Axis::new(x, 0.01, 2).unwrap();
            let py = first_marginal_closed(&sys, &line, axis);
            let pz = second_marginal_closed(&sys, &line, axis);
            prop_assert!(py.values.iter().all(|&v| v >= 0.0));
            prop_assert!(pz.values.iter().all(|&v| v >= 0.0));
            if sys.density_y.evaluate(x) == 0.0 {
                prop_assert_eq!(py.values[0], 0.0);
            }
            let j = joint_density(&sys, &line, x, x);
            prop_assert!(j >= 0.0);
            if x <= 0.0 {
                prop_assert_eq!(j, 0.0);
            }
        }
    }
}

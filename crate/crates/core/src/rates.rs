//! Complex decay constants of the cascade levels and the corrected
//! transition energies.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::SpectralDensity;
use crate::error::{Error, Result};
use crate::quadrature::{
    integrate_from, lorentzian_convolution, principal_value, ConvolutionKind, Tolerance, Window,
};

/// Quadrature accuracy used for decay constants unless a caller overrides it.
pub fn default_tolerance() -> Tolerance {
    Tolerance {
        rtol: 1e-11,
        atol: 1e-16,
        max_subdivisions: 20_000,
    }
}

/// `gamma = lambda + i mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexDecayConstant {
    pub lambda: f64,
    pub mu: f64,
}

impl ComplexDecayConstant {
    pub const ZERO: ComplexDecayConstant = ComplexDecayConstant {
        lambda: 0.0,
        mu: 0.0,
    };

    pub fn new(lambda: f64, mu: f64) -> Self {
        Self { lambda, mu }
    }

    /// Decay probability per unit time, `2 lambda`.
    pub fn rate(&self) -> f64 {
        2.0 * self.lambda
    }

    pub fn as_complex(&self) -> C64 {
        C64::new(self.lambda, self.mu)
    }
}

/// Three levels `x0 -> x1 -> x2` coupled to two continua.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSystem {
    pub omega01: f64,
    pub omega12: f64,
    pub density_y: SpectralDensity,
    pub density_z: SpectralDensity,
}

impl CascadeSystem {
    pub fn new(
        omega01: f64,
        omega12: f64,
        density_y: SpectralDensity,
        density_z: SpectralDensity,
    ) -> Result<Self> {
        if !omega01.is_finite() {
            return Err(Error::InvalidSystem(format!(
                "omega01 must be finite, got {omega01}"
            )));
        }
        if !(omega12.is_finite() && omega12 > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "omega12 must be positive, got {omega12}"
            )));
        }
        if !(density_z.evaluate(omega12) > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "second-stage density vanishes at omega12 = {omega12}; level 1 would be stable"
            )));
        }
        Ok(Self {
            omega01,
            omega12,
            density_y,
            density_z,
        })
    }

    pub fn omega02(&self) -> f64 {
        self.omega01 + self.omega12
    }
}

/// Centers of the spectral line factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectedEnergies {
    pub bar01: f64,
    pub bar12: f64,
    pub bar02: f64,
}

/// Perturbed constant of level 0 together with the constant of level 1 it
/// was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbedConstants {
    pub gamma_tilde0: ComplexDecayConstant,
    pub gamma1: ComplexDecayConstant,
}

/// `lambda = pi V(E)`, `mu = -P ∫ V(w) / (w - E) dw`.
pub fn bare_constant(
    density: &SpectralDensity,
    transition_energy: f64,
    tol: &Tolerance,
) -> Result<ComplexDecayConstant> {
    let lambda = PI * density.evaluate(transition_energy);
    let pv = principal_value(
        |w| density.evaluate(w),
        transition_energy,
        &Window::for_density(density),
        &density.jumps(),
        tol,
    )?;
    Ok(ComplexDecayConstant::new(lambda, -pv.value))
}

/// Decay constant of level 0 when the final level 1 decays with `gamma1`.
pub fn perturbed_with(
    density: &SpectralDensity,
    omega01: f64,
    gamma1: ComplexDecayConstant,
    tol: &Tolerance,
) -> Result<ComplexDecayConstant> {
    let center = omega01 - gamma1.mu;
    let lambda = lorentzian_convolution(
        density,
        center,
        gamma1.lambda,
        ConvolutionKind::Absorptive,
        tol,
    )?;
    let shift = lorentzian_convolution(
        density,
        center,
        gamma1.lambda,
        ConvolutionKind::Dispersive,
        tol,
    )?;
    Ok(ComplexDecayConstant::new(lambda.value, -shift.value))
}

pub fn perturbed_constant(system: &CascadeSystem, tol: &Tolerance) -> Result<PerturbedConstants> {
    let gamma1 = bare_constant(&system.density_z, system.omega12, tol)?;
    let gamma_tilde0 = perturbed_with(&system.density_y, system.omega01, gamma1, tol)?;
    Ok(PerturbedConstants {
        gamma_tilde0,
        gamma1,
    })
}

/// `2 pi V(omega01 - mu1)`.
pub fn golden_rule(system: &CascadeSystem, gamma1: ComplexDecayConstant) -> f64 {
    2.0 * PI * system.density_y.evaluate(system.omega01 - gamma1.mu)
}

/// Perturbed decay probability written directly as an integral over the
/// emitted energy, `2 ∫ V(w) lambda1 / (lambda1^2 + (w - omega01 + mu1)^2) dw`.
pub fn perturbed_rate_direct(
    density: &SpectralDensity,
    omega01: f64,
    gamma1: ComplexDecayConstant,
    tol: &Tolerance,
) -> Result<f64> {
    let l1 = gamma1.lambda;
    if !(l1 > 0.0 && l1.is_finite()) {
        return Err(Error::InvalidSystem(format!(
            "lambda1 must be positive, got {l1}"
        )));
    }
    let center = omega01 - gamma1.mu;
    let mut window = Window::for_density(density);
    window.breakpoints.push(center);
    let mut r = l1;
    while r < 1e3 * density.cutoff_scale().max(center.abs()) {
        window.breakpoints.push(center - r);
        window.breakpoints.push(center + r);
        r *= 4.0;
    }
    window.breakpoints.retain(|&x| x > 0.0);
    let integral = integrate_from(
        |w| {
            let d = w - center;
            density.evaluate(w) * l1 / (l1 * l1 + d * d)
        },
        0.0,
        &window,
        tol,
    )?;
    Ok(2.0 * integral.value)
}

pub fn corrected_energies(
    system: &CascadeSystem,
    gamma_tilde0: ComplexDecayConstant,
    gamma1: ComplexDecayConstant,
) -> CorrectedEnergies {
    let bar01 = system.omega01 + gamma_tilde0.mu - gamma1.mu;
    let bar12 = system.omega12 + gamma1.mu;
    CorrectedEnergies {
        bar01,
        bar12,
        bar02: bar01 + bar12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZenoPoint {
    pub lambda1: f64,
    pub rate: f64,
    pub mu_tilde0: f64,
    pub golden_rule: f64,
}

/// Perturbed constant of level 0 as `lambda1` is swept with `mu1` held at
/// its value computed from the second-stage density.
pub fn zeno_curve(
    system: &CascadeSystem,
    lambda1_values: &[f64],
    tol: &Tolerance,
) -> Result<Vec<ZenoPoint>> {
    if let Some(&bad) = lambda1_values
        .iter()
        .find(|&&l| !(l > 0.0 && l.is_finite()))
    {
        return Err(Error::InvalidSystem(format!(
            "swept lambda1 must be positive, got {bad}"
        )));
    }
    let mu1 = bare_constant(&system.density_z, system.omega12, tol)?.mu;
    let golden = golden_rule(system, ComplexDecayConstant::new(0.0, mu1));
    lambda1_values
        .par_iter()
        .map(|&lambda1| {
            let g = perturbed_with(
                &system.density_y,
                system.omega01,
                ComplexDecayConstant::new(lambda1, mu1),
                tol,
            )?;
            Ok(ZenoPoint {
                lambda1,
                rate: g.rate(),
                mu_tilde0: g.mu,
                golden_rule: golden,
            })
        })
        .collect()
}

/// `n` values spaced evenly in log between `lo` and `hi`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

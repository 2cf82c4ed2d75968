//! One-dimensional quadrature: adaptive Gauss–Kronrod on finite intervals,
//! semi-infinite integrals, Cauchy principal values and Lorentzian-kernel
//! convolutions of spectral densities.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::densities::SpectralDensity;
use crate::error::{Error, Result};

// 21-point Kronrod abscissae; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208931426237,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Relative and absolute accuracy targets for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            max_subdivisions: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.atol.max(self.rtol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    pub const ZERO: QuadratureResult = QuadratureResult {
        value: 0.0,
        error_estimate: 0.0,
        evaluations: 0,
    };

    fn combine(self, other: QuadratureResult) -> QuadratureResult {
        QuadratureResult {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    fn scaled(self, c: f64) -> QuadratureResult {
        QuadratureResult {
            value: c * self.value,
            error_estimate: c.abs() * self.error_estimate,
            evaluations: self.evaluations,
        }
    }
}

/// Where an integrand over `[0, inf)` lives: its natural energy scale and
/// the points at which it has kinks or jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub scale: f64,
    pub breakpoints: Vec<f64>,
    /// Multiple of `scale` past which the range is mapped onto `(0, 1]`.
    pub truncation: f64,
}

impl Window {
    pub fn new(scale: f64) -> Self {
        Self {
            scale,
            breakpoints: Vec::new(),
            truncation: 50.0,
        }
    }

    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    pub fn for_density(density: &SpectralDensity) -> Self {
        Window::new(density.cutoff_scale()).with_breakpoints(density.breakpoints())
    }

    fn split_point(&self, lower: f64) -> f64 {
        let max_bp = self
            .breakpoints
            .iter()
            .copied()
            .filter(|x| x.is_finite())
            .fold(lower, f64::max);
        (self.truncation * self.scale)
            .max(max_bp + self.scale)
            .max(lower + self.scale)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// Single 21-point Gauss–Kronrod panel: returns (value, error estimate).
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = WGK[10] * f_center;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let err = rescale_error(
        (res_k - res_g) * half,
        res_abs * half.abs(),
        res_asc * half.abs(),
    );
    (value, err)
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// `breakpoints` inside the interval seed the initial partition; points
/// outside `(a, b)` are ignored.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if a == b {
        return Ok(QuadratureResult::ZERO);
    }
    if b < a {
        return integrate(f, b, a, breakpoints, tol).map(|r| r.scaled(-1.0));
    }
    let mut nodes: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > a && x < b)
        .collect();
    nodes.push(a);
    nodes.push(b);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|x, y| (*x - *y).abs() <= 4.0 * f64::EPSILON * x.abs().max(y.abs()));

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in nodes.windows(2) {
        let (value, error) = gk21(&f, w[0], w[1]);
        evaluations += 21;
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    // Segments that can no longer be split are kept aside; their error is
    // part of the final estimate.
    let mut frozen_err = 0.0;
    let mut frozen_val = 0.0;
    while total_err > tol.target(total) {
        if heap.len() >= tol.max_subdivisions {
            return Err(Error::NoConvergence {
                value: total,
                error: total_err,
                subdivisions: heap.len(),
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b)
            || (seg.b - seg.a) < 1e3 * f64::EPSILON * mid.abs().max(1e-300)
        {
            frozen_err += seg.error;
            frozen_val += seg.value;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gk21(&f, seg.a, mid);
        let (v2, e2) = gk21(&f, mid, seg.b);
        evaluations += 42;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        if frozen_err > tol.target(total) {
            return Err(Error::NoConvergence {
                value: total,
                error: total_err,
                subdivisions: heap.len(),
            });
        }
    }
    // Re-sum from the segments to limit drift from incremental updates.
    let value = heap.iter().map(|s| s.value).sum::<f64>() + frozen_val;
    let error_estimate = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    if !value.is_finite() {
        return Err(Error::NoConvergence {
            value,
            error: f64::INFINITY,
            subdivisions: heap.len(),
        });
    }
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations,
    })
}

/// Integral of `f` over `[lower, inf)`.
///
/// The range is integrated adaptively up to a split point set by the window
/// scale and breakpoints; the remainder is mapped onto `(0, 1]` through
/// `x = split / u` and integrated as well.
pub fn integrate_from<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    window: &Window,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let split = window.split_point(lower);
    let mut points = window.breakpoints.clone();
    // Geometric seeds make the adaptive scheme see structure near `lower`
    // even when the window is very wide.
    let mut x = window.scale;
    while x < split {
        points.push(lower + x);
        x *= 4.0;
    }
    let half_tol = Tolerance {
        atol: 0.5 * tol.atol,
        ..*tol
    };
    let head = integrate(&f, lower, split, &points, &half_tol)?;
    let tail = integrate(
        |u: f64| {
            let x = split / u;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * split / (u * u)
            }
        },
        0.0,
        1.0,
        &[0.5, 0.25, 0.0625],
        &half_tol,
    )?;
    Ok(head.combine(tail))
}

/// Integral of `f` over `[0, inf)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    window: &Window,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    integrate_from(f, 0.0, window, tol)
}

/// Settings for principal-value integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalValueOptions {
    /// Exclusion radius relative to the pole position.
    pub radius_factor: f64,
}

impl Default for PrincipalValueOptions {
    fn default() -> Self {
        Self {
            radius_factor: 1e-3,
        }
    }
}

/// Cauchy principal value of `P ∫_0^inf f(x) / (x - pole) dx`.
///
/// Around a pole on the positive axis, `[pole - delta, pole + delta]` is
/// folded onto `[0, delta]` with the integrand `(f(pole+s) - f(pole-s)) / s`;
/// the remaining ranges are ordinary integrals. The computation is repeated
/// at `delta / 2` and the difference is folded into the error estimate.
///
/// `jumps` are discontinuities of `f`; a pole within the exclusion radius of
/// one of them makes the principal value divergent.
pub fn principal_value<F: Fn(f64) -> f64>(
    f: F,
    pole: f64,
    window: &Window,
    jumps: &[f64],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    principal_value_with(
        f,
        pole,
        window,
        jumps,
        tol,
        &PrincipalValueOptions::default(),
    )
}

pub fn principal_value_with<F: Fn(f64) -> f64>(
    f: F,
    pole: f64,
    window: &Window,
    jumps: &[f64],
    tol: &Tolerance,
    opts: &PrincipalValueOptions,
) -> Result<QuadratureResult> {
    let guard = (opts.radius_factor * pole.abs()).max(1e-12 * window.scale);
    if let Some(&d) = jumps.iter().find(|&&d| (d - pole).abs() < guard) {
        return Err(Error::PoleOnSupportBoundary {
            pole,
            discontinuity: d,
        });
    }
    if pole <= 0.0 {
        let mut w = window.clone();
        w.breakpoints.push(0.0);
        return integrate_from(|x| f(x) / (x - pole), 0.0, &w, tol);
    }
    let delta = opts.radius_factor.min(1.0) * pole;
    let coarse = folded_pv(&f, pole, delta, window, tol)?;
    let fine = folded_pv(&f, pole, 0.5 * delta, window, tol)?;
    Ok(QuadratureResult {
        value: fine.value,
        error_estimate: fine.error_estimate + (fine.value - coarse.value).abs(),
        evaluations: coarse.evaluations + fine.evaluations,
    })
}

fn folded_pv<F: Fn(f64) -> f64>(
    f: &F,
    pole: f64,
    delta: f64,
    window: &Window,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let third = Tolerance {
        atol: tol.atol / 3.0,
        ..*tol
    };
    let inner_points: Vec<f64> = window
        .breakpoints
        .iter()
        .map(|&b| (b - pole).abs())
        .filter(|&s| s > 0.0 && s < delta)
        .collect();
    let inner = integrate(
        |s: f64| (f(pole + s) - f(pole - s)) / s,
        0.0,
        delta,
        &inner_points,
        &third,
    )?;
    let mut graded = Vec::new();
    let mut r = 2.0 * delta;
    while r < pole.max(window.scale) {
        graded.push(pole - r);
        graded.push(pole + r);
        r *= 4.0;
    }
    let mut left_points = window.breakpoints.clone();
    left_points.extend(graded.iter().copied());
    let left = integrate(
        |x| f(x) / (x - pole),
        0.0,
        pole - delta,
        &left_points,
        &third,
    )?;
    let mut right_window = window.clone();
    right_window.breakpoints.extend(graded);
    let right = integrate_from(|x| f(x) / (x - pole), pole + delta, &right_window, &third)?;
    Ok(inner.combine(left).combine(right))
}

/// Which Lorentzian kernel multiplies the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionKind {
    /// `hw / (hw^2 + (x - c)^2)`
    Absorptive,
    /// `(x - c) / (hw^2 + (x - c)^2)`
    Dispersive,
}

/// `∫_0^inf V(x) K(x) dx` for a Lorentzian kernel `K` of half-width
/// `half_width` centred at `center`.
pub fn lorentzian_convolution(
    density: &SpectralDensity,
    center: f64,
    half_width: f64,
    kind: ConvolutionKind,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidDensity(format!(
            "Lorentzian half-width must be positive, got {half_width}"
        )));
    }
    match kind {
        ConvolutionKind::Absorptive => {
            absorptive_window(density, center, half_width, 0.0, f64::INFINITY, tol)
        }
        ConvolutionKind::Dispersive => dispersive(density, center, half_width, tol),
    }
}

/// `∫_lo^hi V(x) hw / (hw^2 + (x - c)^2) dx` via `x = c + hw tan(theta)`,
/// which turns the kernel into the uniform measure on `theta`.
pub fn absorptive_window(
    density: &SpectralDensity,
    center: f64,
    half_width: f64,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let lo = lo.max(0.0);
    if !(hi > lo) {
        return Ok(QuadratureResult::ZERO);
    }
    let to_theta = |x: f64| ((x - center) / half_width).atan();
    let theta_lo = to_theta(lo);
    let theta_hi = if hi.is_finite() {
        to_theta(hi)
    } else {
        FRAC_PI_2
    };

    let scale = density.cutoff_scale();
    let mut xs: Vec<f64> = density.breakpoints();
    let mut x = scale / 16.0;
    while x < 64.0 * scale {
        xs.push(x);
        x *= 2.0;
    }
    for m in [-100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0] {
        xs.push(center + m * half_width);
    }
    let thetas: Vec<f64> = xs.into_iter().filter(|&x| x >= 0.0).map(to_theta).collect();

    integrate(
        |theta: f64| {
            let x = center + half_width * theta.tan();
            if x < lo || x > hi {
                0.0
            } else {
                density.evaluate(x)
            }
        },
        theta_lo,
        theta_hi,
        &thetas,
        tol,
    )
}

fn dispersive(
    density: &SpectralDensity,
    center: f64,
    half_width: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let hw2 = half_width * half_width;
    let kernel = move |x: f64| {
        let d = x - center;
        density.evaluate(x) * d / (hw2 + d * d)
    };
    let mut window = Window::for_density(density);
    if center <= 0.0 {
        return integrate_from(kernel, 0.0, &window, tol);
    }
    // Fold [0, 2c] about the centre so the odd kernel cancels analytically.
    let half_tol = Tolerance {
        atol: 0.5 * tol.atol,
        ..*tol
    };
    let mut points: Vec<f64> = density
        .breakpoints()
        .into_iter()
        .map(|b| (b - center).abs())
        .filter(|&s| s > 0.0 && s < center)
        .collect();
    for m in [1.0, 10.0, 100.0, 1e3] {
        points.push(m * half_width);
    }
    let folded = integrate(
        |s: f64| (density.evaluate(center + s) - density.evaluate(center - s)) * s / (hw2 + s * s),
        0.0,
        center,
        &points,
        &half_tol,
    )?;
    window.breakpoints.push(2.0 * center);
    let rest = integrate_from(kernel, 2.0 * center, &window, &half_tol)?;
    Ok(folded.combine(rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::DensityFamily;
    use approx::assert_relative_eq;

    fn tol() -> Tolerance {
        Tolerance::new(1e-10, 1e-14)
    }

    #[test]
    fn kronrod_weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert_relative_eq!(k, 2.0, epsilon = 1e-14);
        assert_relative_eq!(g, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn single_panel_is_exact_for_high_degree_polynomials() {
        // Kronrod-21 integrates degree 31 exactly, Gauss-10 degree 19.
        let (v, _) = gk21(&|x: f64| x.powi(30), -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 31.0, epsilon = 1e-13);
        let (v, _) = gk21(&|x: f64| 3.0 * x * x - x + 1.0, 0.0, 2.0);
        assert_relative_eq!(v, 8.0 - 2.0 + 2.0, epsilon = 1e-13);
    }

    #[test]
    fn exponential_on_half_line() {
        let r = integrate_semi_infinite(|x: f64| (-x).exp(), &Window::new(1.0), &tol()).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-10);
        assert!(r.error_estimate >= 0.0);
    }

    #[test]
    fn algebraic_tail_is_captured() {
        // ∫_0^∞ dx / (1 + x^2) = π/2; the tail beyond any finite cutoff matters.
        let r = integrate_semi_infinite(|x: f64| 1.0 / (1.0 + x * x), &Window::new(1.0), &tol())
            .unwrap();
        assert_relative_eq!(r.value, FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn flat_window_integral() {
        let d = SpectralDensity::new(DensityFamily::FlatWindow {
            v0: 0.001,
            a: 0.5,
            b: 1.5,
        })
        .unwrap();
        let r =
            integrate_semi_infinite(|x| d.evaluate(x), &Window::for_density(&d), &tol()).unwrap();
        assert_relative_eq!(r.value, 0.001, epsilon = 1e-13);
    }

    #[test]
    fn subdivision_limit_reports_no_convergence() {
        let t = Tolerance {
            rtol: 1e-14,
            atol: 0.0,
            max_subdivisions: 3,
        };
        let err = integrate(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0, &[], &t).unwrap_err();
        assert_eq!(err.name(), "NoConvergence");
    }

    #[test]
    fn pv_of_linear_density_about_one() {
        // P∫_0^2 x/(x-1) dx = 2
        let f = |x: f64| if (0.0..=2.0).contains(&x) { x } else { 0.0 };
        let w = Window::new(2.0).with_breakpoints([2.0]);
        let r = principal_value(f, 1.0, &w, &[2.0], &tol()).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn pv_of_symmetric_window_vanishes() {
        let d = SpectralDensity::new(DensityFamily::FlatWindow {
            v0: 0.3,
            a: 0.8,
            b: 1.2,
        })
        .unwrap();
        let r = principal_value(
            |x| d.evaluate(x),
            1.0,
            &Window::for_density(&d),
            &d.jumps(),
            &tol(),
        )
        .unwrap();
        assert!(r.value.abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn pv_with_negative_pole_is_ordinary_integral() {
        // ∫_0^∞ e^{-x}/(x+1) dx = e E1(1)
        let expected = std::f64::consts::E * 0.219_383_934_395_520_3;
        let r = principal_value(|x: f64| (-x).exp(), -1.0, &Window::new(1.0), &[], &tol()).unwrap();
        assert_relative_eq!(r.value, expected, epsilon = 1e-9);
    }

    #[test]
    fn pv_on_discontinuity_is_rejected() {
        let d = SpectralDensity::new(DensityFamily::FlatWindow {
            v0: 0.3,
            a: 0.5,
            b: 1.5,
        })
        .unwrap();
        let err = principal_value(
            |x| d.evaluate(x),
            1.5,
            &Window::for_density(&d),
            &d.jumps(),
            &tol(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PoleOnSupportBoundary { .. }));
    }

    #[test]
    fn absorptive_flat_window_matches_arctan() {
        let d = SpectralDensity::new(DensityFamily::FlatWindow {
            v0: 0.001,
            a: 0.5,
            b: 1.5,
        })
        .unwrap();
        let r = lorentzian_convolution(&d, 1.0, 0.1, ConvolutionKind::Absorptive, &tol()).unwrap();
        let expected = 0.001 * 2.0 * 5.0f64.atan();
        assert_relative_eq!(r.value, expected, epsilon = 1e-12);
        assert_relative_eq!(r.value, 2.747_157e-3, epsilon = 1e-6);
    }

    #[test]
    fn dispersive_symmetric_window_vanishes() {
        let d = SpectralDensity::new(DensityFamily::FlatWindow {
            v0: 0.001,
            a: 0.5,
            b: 1.5,
        })
        .unwrap();
        let r = lorentzian_convolution(&d, 1.0, 0.1, ConvolutionKind::Dispersive, &tol()).unwrap();
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn narrow_absorptive_kernel_samples_density() {
        let d = SpectralDensity::new(DensityFamily::OhmicExp {
            g2: 0.01,
            cutoff: 10.0,
        })
        .unwrap();
        let c = 1.0;
        let r =
            lorentzian_convolution(&d, c, 1e-6 * c, ConvolutionKind::Absorptive, &tol()).unwrap();
        let expected = std::f64::consts::PI * d.evaluate(c);
        assert_relative_eq!(r.value, expected, max_relative = 1e-5);
    }

    #[test]
    fn nonpositive_half_width_is_rejected() {
        let d = SpectralDensity::new(DensityFamily::OhmicExp {
            g2: 0.01,
            cutoff: 10.0,
        })
        .unwrap();
        assert!(lorentzian_convolution(&d, 1.0, 0.0, ConvolutionKind::Absorptive, &tol()).is_err());
    }
}

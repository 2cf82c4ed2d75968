use num_complex::Complex64 as C64;
use proptest::prelude::*;

use zeno_cascade::densities::{DensityFamily, SpectralDensity};
use zeno_cascade::kernels::{build_kernel, solve_volterra, MemoryKernel};
use zeno_cascade::oracle::{discretize, evolve, OracleGrid};
use zeno_cascade::rates::{
    default_tolerance, perturbed_constant, perturbed_rate_direct, perturbed_with, CascadeSystem,
    ComplexDecayConstant,
};

fn flat(v0: f64, a: f64, b: f64) -> SpectralDensity {
    SpectralDensity::new(DensityFamily::FlatWindow { v0, a, b }).unwrap()
}

#[test]
fn lorentzian_density_convolves_in_closed_form() {
    // two Lorentzians convolve into one with the widths added; clipping at
    // zero removes ~ width / (pi center) of the weight
    let (amp, x0, w) = (0.01, 50.0, 0.05);
    let d = SpectralDensity::new(DensityFamily::ShiftedLorentzian {
        amplitude: amp,
        center: x0,
        width: w,
    })
    .unwrap();
    for (omega01, l1, mu1) in [(50.0, 0.1, 0.0), (50.3, 0.02, 0.1), (49.0, 1.0, -0.2)] {
        let g = perturbed_with(
            &d,
            omega01,
            ComplexDecayConstant::new(l1, mu1),
            &default_tolerance(),
        )
        .unwrap();
        let c = omega01 - mu1;
        let s = w + l1;
        let denom = s * s + (x0 - c) * (x0 - c);
        let lambda = amp * s / denom;
        let mu = -amp * (x0 - c) / denom;
        assert!(
            (g.lambda - lambda).abs() < 1e-3 * lambda,
            "{} vs {lambda}",
            g.lambda
        );
        assert!(
            (g.mu - mu).abs() < 1e-3 * lambda.max(mu.abs()),
            "{} vs {mu}",
            g.mu
        );
    }
}

#[test]
fn oracle_matches_volterra_with_exact_intermediate_propagator() {
    // Level-0 kernel built from the exact level-1 amplitude instead of exp(-gamma1 t)
    let sys = CascadeSystem::new(1.0, 1.0, flat(0.0064, 0.5, 1.5), flat(0.0127, 0.5, 1.5)).unwrap();
    let p = perturbed_constant(&sys, &default_tolerance()).unwrap();
    let h: f64 = 0.05;
    let t_end: f64 = 100.0;
    let n = (t_end / h).round() as usize;
    let g1 = solve_volterra(
        &build_kernel(&sys.density_z, sys.omega12, ComplexDecayConstant::ZERO),
        t_end,
        h,
    )
    .unwrap();
    let bare = build_kernel(&sys.density_y, sys.omega01, ComplexDecayConstant::ZERO);
    let values: Vec<C64> = (0..=n)
        .map(|k| bare.value(k as f64 * h).unwrap() * g1.values[k])
        .collect();
    let exact = solve_volterra(&MemoryKernel::from_samples(h, values).unwrap(), t_end, h).unwrap();

    let grid = OracleGrid {
        n_y: 200,
        n_z: 200,
        range_y: (0.5, 1.5),
        range_z: (0.5, 1.5),
    };
    let model = discretize(&sys, p.gamma_tilde0.lambda, &grid).unwrap();
    let ev = evolve(&model, t_end, h, 20).unwrap();
    let mut worst: f64 = 0.0;
    for s in &ev.samples {
        let k = (s.time / h).round() as usize;
        worst = worst.max((s.a0.norm_sqr() - exact.values[k].norm_sqr()).abs());
    }
    // discretization and step errors only
    assert!(worst < 5e-5, "max |a0|^2 difference {worst:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convolution_and_direct_forms_agree(
        v0 in 1e-4f64..1e-2,
        a in 0.0f64..0.8,
        width in 0.2f64..3.0,
        omega01 in 0.1f64..3.0,
        l1 in 1e-3f64..2.0,
        mu1 in -0.05f64..0.05,
    ) {
        let d = flat(v0, a, a + width);
        let g = ComplexDecayConstant::new(l1, mu1);
        let tol = default_tolerance();
        // a pole on a window edge is rejected by one form and fine in the other
        prop_assume!(((omega01 - mu1) - a).abs() > 1e-6 && ((omega01 - mu1) - a - width).abs() > 1e-6);
        let conv = perturbed_with(&d, omega01, g, &tol).unwrap().rate();
        let direct = perturbed_rate_direct(&d, omega01, g, &tol).unwrap();
        prop_assert!((conv - direct).abs() <= 1e-8 * conv.abs().max(1e-300));
    }

    #[test]
    fn zeno_rate_never_exceeds_total_weight_bound(
        g2 in 1e-3f64..1e-1,
        cutoff in 0.2f64..5.0,
        l1 in 1e-2f64..1e2,
    ) {
        let d = SpectralDensity::new(DensityFamily::OhmicExp { g2, cutoff }).unwrap();
        let lt = perturbed_with(&d, 1.0, ComplexDecayConstant::new(l1, 0.0), &default_tolerance()).unwrap().lambda;
        prop_assert!(lt > 0.0);
        prop_assert!(lt <= d.total_weight() / l1 * (1.0 + 1e-9));
        prop_assert!(lt <= std::f64::consts::PI * d.sup() * (1.0 + 1e-9));
    }
}

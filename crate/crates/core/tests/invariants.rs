use std::sync::Arc;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tubedyn::evolution::{propagate, DiagnosticSet, PropagatorConfig};
use tubedyn::fields::{field, gauge_transform, FnField, Library, PotentialSet, TaylorCoefficients};
use tubedyn::fit::log_log;
use tubedyn::geometry::{Mat2, SurfaceChart};
use tubedyn::grid::{DiffMatrix, GridSpec, WaveFunction};
use tubedyn::harness::RunConfig;
use tubedyn::operators::{line_operator, normal_space};

fn point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU).prop_map(|(a, b)| [a, b])
}

fn torus_params() -> impl Strategy<Value = (f64, f64)> {
    (1.5..4.0f64, 0.1..0.9f64).prop_map(|(big, frac)| (big, frac * (big - 0.2)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvature_potential_is_minus_quarter_gap_squared((big, r) in torus_params(), x in point()) {
        let c = SurfaceChart::torus(big, r).unwrap().shape_operator(x).unwrap();
        let gap = c.kappa[1] - c.kappa[0];
        prop_assert!((c.k + 0.25 * gap * gap).abs() <= 1e-10 * (1.0 + gap * gap));
        prop_assert!(c.k <= 1e-15);
    }

    #[test]
    fn flipping_the_normal_keeps_k((big, r) in torus_params(), x in point()) {
        let chart = SurfaceChart::perturbed_torus(big, r, 0.1).unwrap();
        let a = chart.shape_operator(x).unwrap();
        let b = chart.flipped().shape_operator(x).unwrap();
        prop_assert!((a.l_mat + b.l_mat).abs().max() <= 1e-12);
        prop_assert!((a.h + b.h).abs() <= 1e-12);
        prop_assert!((a.s - b.s).abs() <= 1e-12);
        prop_assert!((a.k - b.k).abs() <= 1e-12);
    }

    #[test]
    fn tube_metric_factorizes((big, r) in torus_params(), x in point(), frac in -0.9..0.9f64) {
        let chart = SurfaceChart::torus(big, r).unwrap();
        let y = frac * chart.reach_bound();
        let c = chart.shape_operator(x).unwrap();
        let one_minus = Mat2::identity() - c.l_mat * y;
        let expected = c.g_sigma * one_minus * one_minus;
        let got = chart.tube_metric(x, y).unwrap().tangential();
        prop_assert!((got - expected).abs().max() <= 1e-10 * (1.0 + expected.abs().max()));
    }

    #[test]
    fn density_ratio_matches_determinants((big, r) in torus_params(), x in point(), frac in -0.9..0.9f64) {
        let chart = SurfaceChart::torus(big, r).unwrap();
        let y = frac * chart.reach_bound();
        let direct = chart.tube_metric(x, y).unwrap().det / chart.tube_metric(x, 0.0).unwrap().det;
        let jet = chart.frame(x).unwrap().density_ratio_jet(y, [1.0, 0.0, 0.0]);
        prop_assert!((jet[0] - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn gauge_removes_the_normal_component(c in -3.0..3.0f64, a in -2.0..2.0f64, x in point(), y in -0.8..0.8f64) {
        let a3 = Arc::new(FnField::new("a3", move |x, s| c + a * x[0].sin() * s));
        let pots = PotentialSet::harmonic().with_normal_component(a3);
        let gauge = gauge_transform(&pots, 0.01);
        let residual = gauge.residual_normal_component(x, y, 1e-3).unwrap();
        prop_assert!(residual.abs() <= 1e-10 * (1.0 + c.abs() + a.abs()));
    }

    #[test]
    fn doubling_lambda_halves_cubic_and_quarters_quartic(f1 in -5.0..5.0f64, f2 in -5.0..5.0f64, y in -3.0..3.0f64, lambda in 1.0..50.0f64) {
        let cubic = TaylorCoefficients { w: 2.0, f1, f2: 0.0 };
        let quartic = TaylorCoefficients { w: 2.0, f1: 0.0, f2 };
        let scale = 1.0 + (f1.abs() + f2.abs()) * y.powi(4);
        prop_assert!((cubic.f_lambda(y, 2.0 * lambda) - 0.5 * cubic.f_lambda(y, lambda)).abs() <= 1e-14 * scale);
        prop_assert!((quartic.f_lambda(y, 2.0 * lambda) - 0.25 * quartic.f_lambda(y, lambda)).abs() <= 1e-14 * scale);
    }

    #[test]
    fn fourier_matrices_are_antisymmetric(n in 3usize..40, period in 0.5..20.0f64) {
        let d = DiffMatrix::fourier(n, period);
        for i in 0..n {
            prop_assert_eq!(d.at(i, i), 0.0);
            for j in 0..i {
                prop_assert_eq!(d.at(i, j), -d.at(j, i));
            }
        }
    }

    #[test]
    fn power_laws_are_recovered(p in -4.0..4.0f64, c in 0.01..100.0f64) {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&l: &f64| (l, c * l.powf(p))).collect();
        let fit = log_log(&pts);
        prop_assert!((fit.slope - p).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_unitary_and_reversible(coeffs in prop::collection::vec(-2.0..2.0f64, 3), shift in 0.0..1.0f64) {
        let spec = GridSpec { ny: 48, ..GridSpec::default() };
        let space = normal_space(&spec);
        let potential: Vec<f64> = space
            .y
            .iter()
            .map(|&y| 0.5 * y * y + coeffs[0] * (y).sin() + coeffs[1] * (0.5 * y).cos() + coeffs[2] * y / (1.0 + y * y))
            .collect();
        let op = line_operator(space.clone(), potential, 1.0);
        let mut psi0 = WaveFunction::from_fn(space, |_, y| C64::from_polar((-(y - shift).powi(2)).exp(), y));
        psi0.normalize();
        let fwd = PropagatorConfig { dt: 0.05, t_final: 1.0, ..PropagatorConfig::default() };
        let traj = propagate(&op, &psi0, &fwd, &DiagnosticSet::default(), true).unwrap();
        prop_assert!(traj.max_norm_drift() <= 1e-8);
        prop_assert!(traj.max_energy_drift() <= 1e-8);
        let back = PropagatorConfig { t_final: -1.0, ..fwd };
        let end = traj.states.last().unwrap().clone();
        let rev = propagate(&op, &end, &back, &DiagnosticSet::default(), true).unwrap();
        prop_assert!(rev.states.last().unwrap().distance(&psi0) <= 1e-7);
    }

    #[test]
    fn config_canonicalization_is_idempotent(
        lambdas in prop::collection::vec(1.0..64.0f64, 1..5),
        ny in 8usize..200,
        half in 2usize..20,
        seed in any::<u64>(),
        amp in -1.0..1.0f64,
        w_pick in 0usize..3,
    ) {
        let w = ["y2", "y2+y4", "y2+sextic:0.1"][w_pick];
        let doc = serde_json::json!({
            "surface": {"kind": "torus", "R": 2.0, "r": 1.0},
            "potentials": {"W": w, "A": [format!("sin_x2:{amp}"), "zero", format!("const:{amp}")]},
            "grid": {"N1": 2 * half, "N2": 2 * half, "Ny": ny},
            "run": {"lambdas": lambdas, "seed": seed},
        });
        let cfg = RunConfig::parse(&doc.to_string()).unwrap();
        let once = cfg.canonical_string();
        let twice = RunConfig::parse(&once).unwrap();
        prop_assert_eq!(&twice, &cfg);
        prop_assert_eq!(twice.canonical_string(), once);
    }
}

#[test]
fn library_fields_have_their_closed_forms() {
    let x = [0.4f64, 1.3];
    let sextic = field(Library::Y2PlusSextic(0.1));
    let y: f64 = 0.7;
    let expected = y * y + 0.1 * y.powi(6) * (1.0 + 0.5 * x[0].cos());
    assert!((sextic.value(x, y) - expected).abs() <= 1e-15);
}

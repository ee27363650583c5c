//! Property tests over randomly drawn data for the checker-level invariants.

use std::f64::consts::TAU;

use pdouglas_core::forms::{boundary_form_hdp, boundary_form_symmetrized, interior_energy_edp};
use pdouglas_core::harmonic::{fourier_project, poisson_extend_sphere};
use pdouglas_core::identities::{check_douglas, check_hardy_stein, check_p_variance, rel_diff};
use pdouglas_core::montecarlo::mc_expectation;
use pdouglas_core::quadrature::periodic_nodes;
use pdouglas_core::{
    convergence, BoundaryFunction, CheckOptions, DomainSpec, Exponent, IdentityReport, KernelSet, McConfig, QuadratureGrid, StudyKind,
};
use proptest::prelude::*;

fn p(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

/// Trigonometric polynomial of degree ≤ 3 as a `trig:` preset.
fn trig(shift: f64) -> impl Strategy<Value = BoundaryFunction> {
    (prop::collection::vec(-1.0f64..1.0, 2..=6), -0.5f64..0.5).prop_map(move |(c, a0)| {
        let mut s = format!("trig:{}", a0 + shift);
        for v in c {
            s.push_str(&format!(",{v}"));
        }
        s.parse().unwrap()
    })
}

fn interior_point(rmax: f64) -> impl Strategy<Value = [f64; 2]> {
    (0.0f64..rmax, 0.0f64..TAU).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

fn opts(level: u32) -> CheckOptions {
    CheckOptions::at_level(level)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_is_symmetric(lhs in -1e3f64..1e3, rhs in -1e3f64..1e3, tol in 0.0f64..0.5) {
        let a = IdentityReport::compare("x", "disk", None, lhs, rhs, tol);
        let b = IdentityReport::compare("x", "disk", None, rhs, lhs, tol);
        prop_assert_eq!(a.pass, b.pass);
        prop_assert_eq!(a.rel_diff, b.rel_diff);
        prop_assert_eq!(a.abs_diff, b.abs_diff);
        let s = a.swapped();
        prop_assert_eq!(s.rel_diff, b.rel_diff);
        prop_assert_eq!((s.lhs, s.rhs), (b.lhs, b.rhs));
    }

    #[test]
    fn douglas_checker_swaps_cleanly(g in trig(0.0)) {
        let r = check_douglas(&g, p(2.0), &DomainSpec::Disk, &opts(2)).unwrap();
        let s = r.swapped();
        prop_assert_eq!(rel_diff(s.lhs, s.rhs), r.rel_diff);
        prop_assert_eq!(IdentityReport::compare("d", "disk", None, s.lhs, s.rhs, r.tolerance).pass, r.pass);
    }

    #[test]
    fn douglas_holds_at_two_for_trig_data(g in trig(0.0)) {
        let r = check_douglas(&g, p(2.0), &DomainSpec::Disk, &opts(2)).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn douglas_holds_for_positive_data_above_two(g in trig(3.0), q in 2.0f64..4.0) {
        let r = check_douglas(&g, p(q), &DomainSpec::Disk, &opts(2)).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn interval_douglas_is_exact(a in -3.0f64..3.0, len in 0.1f64..4.0, c in -2.0f64..2.0, d in -2.0f64..2.0, q in 1.1f64..5.0) {
        let iv = DomainSpec::interval(a, a + len).unwrap();
        let g = BoundaryFunction::parse_for(&iv, &format!("linear:{c},{d}")).unwrap();
        let r = check_douglas(&g, p(q), &iv, &CheckOptions::default()).unwrap();
        prop_assert!(r.pass && (r.rel_diff <= 1e-12 || r.abs_diff <= 1e-12), "{r:?}");
    }

    #[test]
    fn p_variance_on_random_data(g in trig(0.0), x in interior_point(0.8), k in 0usize..3) {
        let q = [2.0, 3.0, 4.0][k];
        for r in check_p_variance(&g, p(q), &DomainSpec::Disk, &x, None, &opts(2)).unwrap() {
            prop_assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn p_variance_on_the_interval(c in -2.0f64..2.0, d in -2.0f64..2.0, t in 0.05f64..0.95, q in 1.2f64..4.0) {
        let iv = DomainSpec::interval(0.0, 1.0).unwrap();
        let g = BoundaryFunction::parse_for(&iv, &format!("linear:{c},{d}")).unwrap();
        for r in check_p_variance(&g, p(q), &iv, &[t], None, &CheckOptions::default()).unwrap() {
            prop_assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn hardy_stein_at_two_off_centre(g in trig(0.0), x in interior_point(0.7)) {
        let r = check_hardy_stein(&g, p(2.0), x, &opts(3)).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn symmetrized_and_bregman_boundary_forms_agree(g in trig(2.5), q in 2.0f64..4.0) {
        let grid = QuadratureGrid::at_level(2);
        let a = boundary_form_hdp(&g, p(q), &DomainSpec::Disk, &grid).unwrap().value;
        let b = boundary_form_symmetrized(&g, p(q), &DomainSpec::Disk, &grid).unwrap().value;
        prop_assert!(rel_diff(a, b) <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn forms_are_nonnegative_and_vanish_on_constants(g in trig(0.0), c in -5.0f64..5.0, q in 2.0f64..4.0) {
        let grid = QuadratureGrid::at_level(1);
        prop_assert!(boundary_form_hdp(&g, p(q), &DomainSpec::Disk, &grid).unwrap().value >= 0.0);
        let k: BoundaryFunction = format!("const:{c}").parse().unwrap();
        prop_assert_eq!(boundary_form_hdp(&k, p(q), &DomainSpec::Disk, &grid).unwrap().value, 0.0);
        let h = fourier_project(&k, 4).unwrap();
        prop_assert_eq!(interior_energy_edp(&h, p(q), &grid).unwrap().value, 0.0);
    }

    #[test]
    fn poisson_kernel_integrates_to_one(x in interior_point(0.95), y in -0.9f64..0.9, t in 0.0f64..TAU) {
        let ks = KernelSet::new(DomainSpec::Disk);
        let m = 4096;
        let total: f64 = periodic_nodes(m).map(|s| ks.poisson(&x, &[s.cos(), s.sin()]).unwrap()).sum::<f64>() * TAU / m as f64;
        prop_assert!((total - 1.0).abs() <= 1e-8, "disk: {total}");
        let rho = (1.0 - y * y).sqrt() * 0.9;
        let xb = [rho * t.cos(), rho * t.sin(), y * 0.9];
        let total = poisson_extend_sphere(|_| 1.0, xb).unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-8, "ball: {total}");
    }

    #[test]
    fn green_function_is_symmetric_and_positive(x in interior_point(0.95), y in interior_point(0.95)) {
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 1e-6);
        let ks = KernelSet::new(DomainSpec::Disk);
        let a = ks.green(&x, &y).unwrap();
        let b = ks.green(&y, &x).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn anchored_refinement_is_monotone(g in trig(0.0)) {
        let t = convergence(StudyKind::Douglas, &DomainSpec::Disk, &g, p(2.0), None, &[1, 2, 3]).unwrap();
        prop_assert!(t.is_monotone(), "{t:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn monte_carlo_is_deterministic_and_respects_jensen(g in trig(0.0), x in interior_point(0.8), seed in any::<u64>(), k in 0usize..3) {
        let q = [1.5, 2.0, 3.0][k];
        let cfg = McConfig::new(DomainSpec::Disk, x.to_vec(), 4000, seed);
        let a = mc_expectation(&cfg, &g, p(q)).unwrap();
        let b = mc_expectation(&cfg, &g, p(q)).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        prop_assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let u = fourier_project(&g, 8).unwrap().value_xy(x[0], x[1]);
        prop_assert!(a.mean >= u.abs().powf(q) - 4.0 * a.stderr, "{} < |u|^p = {}", a.mean, u.abs().powf(q));
    }
}

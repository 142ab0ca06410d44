mod common;

use common::{instance, size_and_seed};
use dirform::calculus::{
    quadraticity_test, sandwich_check, second_argument_linearity_check, slope_enclosure, yosida_sandwich_check,
};
use dirform::forms::{evaluate, locality_of, Family};
use dirform::prox::{LambdaSchedule, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quotients_are_ordered((n, seed) in size_and_seed()) {
        let mut it = instance(n, seed);
        let (u, v) = (it.sampler.field(), it.sampler.field());
        for form in &it.forms {
            let e0 = evaluate(form, &u).unwrap();
            let g = |s: f64| (evaluate(form, &u.axpy(s, &v)).unwrap() - e0) / s;
            let mut sigma = 1e-1;
            while sigma > 1e-6 {
                let (a, b, c, d) = (g(-sigma), g(-sigma / 2.0), g(sigma / 2.0), g(sigma));
                let slack = 1e-12 * (1.0 + e0) / sigma;
                prop_assert!(a <= b + slack && b <= c + slack && c <= d + slack, "{} at σ = {}", form.identifier(), sigma);
                sigma /= 4.0;
            }
        }
    }

    #[test]
    fn slopes_respect_bounds((n, seed) in size_and_seed()) {
        let mut it = instance(n, seed);
        let (u, v) = (it.sampler.field(), it.sampler.field());
        for form in &it.forms {
            let e = slope_enclosure(form, &u, &v, 1e-7).unwrap();
            prop_assert!(e.lower <= e.minus && e.minus <= e.plus && e.plus <= e.upper);
            let (eu, ev, env) = (
                evaluate(form, &u).unwrap(),
                evaluate(form, &v).unwrap(),
                evaluate(form, &v.scale(-1.0)).unwrap(),
            );
            prop_assert!(e.plus <= 2.0 * eu.sqrt() * ev.sqrt() + 1e-7);
            prop_assert!(e.minus >= -2.0 * eu.sqrt() * env.sqrt() - 1e-7);
            let diag = slope_enclosure(form, &u, &u, 1e-7).unwrap();
            prop_assert!(diag.certified);
            prop_assert!((diag.minus - 2.0 * eu).abs() <= 1e-7 && (diag.plus - 2.0 * eu).abs() <= 1e-7);
        }
    }

    #[test]
    fn second_argument_structure((n, seed) in size_and_seed(), lambda in 0.0f64..=1.0) {
        let mut it = instance(n, seed);
        let u = it.sampler.field();
        let (v1, v2) = (it.sampler.field(), it.sampler.field());
        for form in &it.forms {
            let r = second_argument_linearity_check(form, &u, &v1, &v2, lambda, 1e-6).unwrap();
            prop_assert!(r.passed, "{}: {:?}", form.identifier(), r);
        }
    }

    #[test]
    fn local_forms_have_local_slopes((n, seed) in size_and_seed()) {
        let mut it = instance(n, seed);
        for form in &it.forms {
            let structure = locality_of(form);
            if !structure.local {
                continue;
            }
            let Some((u, v)) = it.sampler.constant_on_support_pair(&structure) else { continue };
            let e = slope_enclosure(form, &u, &v, 1e-9).unwrap();
            prop_assert!(e.minus.abs() <= 1e-9 && e.plus.abs() <= 1e-9, "{}: {:?}", form.identifier(), e);
        }
    }

    #[test]
    fn subgradient_sandwiches((n, seed) in size_and_seed()) {
        let mut it = instance(n, seed);
        let cfg = SolverConfig::default();
        let (u, v) = (it.sampler.nonzero_field(), it.sampler.field());
        for form in &it.forms {
            let s = sandwich_check(form, &u, &v, &it.space, &cfg, 1e-5).unwrap();
            prop_assert!(s.passed, "{}: {:?}", form.identifier(), s);
            let y = yosida_sandwich_check(form, &u, &v, &LambdaSchedule::default(), &it.space, &cfg, 1e-5).unwrap();
            prop_assert!(y.passed, "{}: {:?}", form.identifier(), y);
        }
    }

    /// Quadratic families pass regularity and symmetry; whatever passes
    /// both also satisfies the parallelogram law.
    #[test]
    fn quadraticity_one_way_checks((n, seed) in size_and_seed()) {
        let mut it = instance(n, seed);
        let samples: Vec<_> = (0..6).map(|_| (it.sampler.field(), it.sampler.field())).collect();
        for form in &it.forms {
            let q = quadraticity_test(form, &samples, 1e-7).unwrap();
            let quadratic_family = matches!(form.family(), Family::QuadraticGraph { .. } | Family::QuadraticMatrix { .. })
                || matches!(form.family(), Family::PowerSumSquared { exponent, .. } if *exponent == 2.0);
            if quadratic_family {
                prop_assert!(q.regular && q.symmetry_defect <= 1e-7, "{}: {:?}", form.identifier(), q);
            }
            if q.regular && q.symmetry_defect <= 1e-8 {
                prop_assert!(q.parallelogram_defect <= 1e-6, "{}: {:?}", form.identifier(), q);
            }
        }
    }
}

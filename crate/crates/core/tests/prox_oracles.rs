//! Proximal points checked against values produced by an independent conic
//! solver (interior point on the original, non-dual problem) and frozen here.

use dirform::forms::{evaluate, FormDescriptor};
use dirform::prox::{envelope, minimal_subgradient, prox, yosida, LambdaSchedule, SolverConfig};
use dirform::space::{inner, Field, MeasureSpace};

fn f(v: &[f64]) -> Field {
    Field::new(v.to_vec()).unwrap()
}

fn assert_close(got: &Field, want: &[f64], tol: f64) {
    for (k, (a, b)) in got.iter().zip(want).enumerate() {
        assert!((a - b).abs() <= tol, "component {k}: got {a}, want {b} (tol {tol})");
    }
}

fn triangle_weights() -> MeasureSpace {
    MeasureSpace::new(vec![2.0, 5.0, 1.0]).unwrap()
}

#[test]
fn weighted_quadratic_triangle() {
    let form = FormDescriptor::quadratic_graph(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)]).unwrap();
    let r = prox(&form, &f(&[1.0, -2.0, 0.5]), 0.3, &triangle_weights(), &SolverConfig::default()).unwrap();
    assert_close(&r.minimizer, &[0.32190829087540507, -1.5296433534043516, -0.49559981472903986], 1e-12);
}

#[test]
fn weighted_anisotropic_path() {
    let form = FormDescriptor::anisotropic_graph(3, &[(0, 1, 1.0, 4.0), (1, 2, 3.0, 0.5)]).unwrap();
    let r = prox(&form, &f(&[0.3, 1.2, -0.4]), 0.2, &triangle_weights(), &SolverConfig::default()).unwrap();
    assert_close(&r.minimizer, &[0.43282828282827984, 1.0969696969696987, -0.1505050505050533], 1e-10);
}

#[test]
fn weighted_tv_squared_path() {
    let form = FormDescriptor::power_sum_squared(3, &[(0, 1, 1.0), (1, 2, 1.0)], 1.0).unwrap();
    let space = MeasureSpace::new(vec![1.0, 2.0, 3.0]).unwrap();
    let cfg = SolverConfig::default();
    let cases: [(&[f64], f64, [f64; 3]); 3] = [
        (&[0.0, 0.0, 1.0], 0.1, [1.0 / 17.0, 1.0 / 17.0, 16.0 / 17.0]),
        (&[1.0, -0.5, 2.0], 0.05, [0.7, -0.2, 1.9]),
        (&[1.0, -0.5, 2.0], 2.0, [0.7272727272729101, 0.7272727272728412, 1.272727272727136]),
    ];
    for (u, lambda, want) in cases {
        let r = prox(&form, &f(u), lambda, &space, &cfg).unwrap();
        assert_close(&r.minimizer, &want, 1e-9);
    }
}

#[test]
fn weighted_power_sum_three_halves() {
    let form = FormDescriptor::power_sum_squared(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)], 1.5).unwrap();
    let r = prox(&form, &f(&[1.0, -2.0, 0.5]), 0.1, &triangle_weights(), &SolverConfig::default()).unwrap();
    assert_close(&r.minimizer, &[0.6136801383100581, -1.694789560414695, -0.2534124745466418], 1e-7);
}

#[test]
fn yosida_and_envelope_examples() {
    let form = FormDescriptor::quadratic_graph(2, &[(0, 1, 1.0)]).unwrap();
    let one = MeasureSpace::uniform(2).unwrap();
    let cfg = SolverConfig::default();
    let u = f(&[1.0, -1.0]);
    assert_close(&yosida(&form, &u, 0.25, &one, &cfg).unwrap(), &[2.0, -2.0], 1e-13);
    // A_λ(u) = 2D/(1+4λ)·(1,-1) with D = 2, tending to the gradient (4, -4).
    for lambda in [1e-2, 1e-4, 1e-6] {
        let a = yosida(&form, &u, lambda, &one, &cfg).unwrap();
        let c = 4.0 / (1.0 + 4.0 * lambda);
        assert_close(&a, &[c, -c], 1e-12);
    }
    assert!((envelope(&form, &u, 0.25, &one, &cfg).unwrap() - 2.0).abs() < 1e-13);
    let e1 = envelope(&form, &u, 0.25, &one, &cfg).unwrap();
    let e2 = envelope(&form, &u.scale(2.0), 0.25, &one, &cfg).unwrap();
    assert!((e2 - 4.0 * e1).abs() < 1e-12);
}

#[test]
fn empty_form_yosida_vanishes() {
    let form = FormDescriptor::quadratic_graph(2, &[]).unwrap();
    let one = MeasureSpace::uniform(2).unwrap();
    let a = yosida(&form, &f(&[3.0, -7.0]), 0.5, &one, &SolverConfig::default()).unwrap();
    assert_eq!(a, Field::zeros(2));
}

/// At u = (0,0,1) on the path 0-1-2 the subdifferential of (|Δ₁| + |Δ₂|)² is
/// 2·M⁻¹(-s, s - 1, 1), s ∈ [-1, 1]. Scan s to find the least m-norm element.
#[test]
fn tv_minimal_subgradient_at_kink() {
    let form = FormDescriptor::power_sum_squared(3, &[(0, 1, 1.0), (1, 2, 1.0)], 1.0).unwrap();
    let u = f(&[0.0, 0.0, 1.0]);
    for weights in [vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]] {
        let space = MeasureSpace::new(weights.clone()).unwrap();
        let candidate = |s: f64| {
            f(&[-2.0 * s / weights[0], 2.0 * (s - 1.0) / weights[1], 2.0 / weights[2]])
        };
        let norm = |x: &Field| inner(x, x, &space).unwrap();
        let best = (0..=200_000)
            .map(|k| -1.0 + k as f64 * 1e-5)
            .min_by(|a, b| norm(&candidate(*a)).total_cmp(&norm(&candidate(*b))))
            .unwrap();
        let oracle = candidate(best);
        let xi = minimal_subgradient(&form, &u, &space, &SolverConfig::default(), &LambdaSchedule::default()).unwrap();
        assert_close(&xi, oracle.values(), 1e-4);
        let cdc2 = inner(&xi, &u, &space).unwrap();
        assert!((cdc2 - 2.0 * evaluate(&form, &u).unwrap()).abs() < 1e-6);
    }
}

//! Randomized instances of every built-in family, plus the fixed examples
//! the audit is calibrated on.

use rand::Rng;

use crate::forms::FormDescriptor;
use crate::sampling::Sampler;

/// A random connected graph: a path through a random permutation plus about
/// `size / 2` extra edges. Weights lie in `[0.5, 2]`.
pub fn random_edges(sampler: &mut Sampler) -> Vec<(usize, usize, f64)> {
    let n = sampler.size();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), sampler.rng());
    let mut edges: Vec<(usize, usize, f64)> = order
        .windows(2)
        .map(|w| (w[0], w[1], 0.0))
        .collect();
    if n > 2 {
        for _ in 0..n / 2 {
            let i = sampler.rng().random_range(0..n);
            let j = sampler.rng().random_range(0..n);
            let dup = edges
                .iter()
                .any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i));
            if i != j && !dup {
                edges.push((i, j, 0.0));
            }
        }
    }
    for e in &mut edges {
        e.2 = sampler.uniform(0.5, 2.0);
    }
    edges
}

/// One instance of each family on `sampler.size()` points: quadratic graph,
/// anisotropic graph, power sums with exponents 1, 1.5 and 2, and a dense
/// positive semidefinite matrix.
pub fn catalog(sampler: &mut Sampler) -> Vec<FormDescriptor> {
    let n = sampler.size();
    let edges = random_edges(sampler);
    let aniso: Vec<(usize, usize, f64, f64)> = edges
        .iter()
        .map(|&(i, j, w)| (i, j, w, sampler.uniform(0.25, 4.0)))
        .collect();
    let k = n.div_ceil(2);
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| sampler.uniform(-1.0, 1.0)).collect())
        .collect();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| (0..k).map(|l| b[r][l] * b[c][l]).sum())
                .collect()
        })
        .collect();
    vec![
        FormDescriptor::quadratic_graph(n, &edges).unwrap(),
        FormDescriptor::anisotropic_graph(n, &aniso).unwrap(),
        FormDescriptor::power_sum_squared(n, &edges, 1.0).unwrap(),
        FormDescriptor::power_sum_squared(n, &edges, 1.5).unwrap(),
        FormDescriptor::power_sum_squared(n, &edges, 2.0).unwrap(),
        FormDescriptor::quadratic_matrix(gram).unwrap(),
    ]
}

/// `E(u) = (u₁ + u₂)²`, convex and 2-homogeneous but not a Dirichlet form.
pub fn sum_square() -> FormDescriptor {
    FormDescriptor::quadratic_matrix(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap()
}

/// One edge with `w⁺ = 1`, `w⁻ = 4`: a Dirichlet form with `E(-u) ≠ E(u)`.
pub fn one_sided_edge() -> FormDescriptor {
    FormDescriptor::anisotropic_graph(2, &[(0, 1, 1.0, 4.0)]).unwrap()
}

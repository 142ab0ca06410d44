//! A catalog of convex, 2-homogeneous energies on a finite space.
//!
//! | family              | energy                                          | smooth? |
//! |---------------------|-------------------------------------------------|---------|
//! | `QuadraticGraph`    | `Σ w (u_i - u_j)²`                              | yes     |
//! | `AnisotropicGraph`  | `Σ w⁺ ((u_j - u_i)⁺)² + w⁻ ((u_j - u_i)⁻)²`     | C¹      |
//! | `PowerSumSquared`   | `(Σ w |u_j - u_i|^q)^{2/q}`, `q ∈ [1, 2]`       | C¹ iff `q > 1` |
//! | `QuadraticMatrix`   | `uᵀ Q u`, `Q` symmetric PSD                     | yes     |
//! | `Custom`            | caller supplied                                 | unknown |
//!
//! Gradients returned by [`analytic_gradient`] live in the `L²(m)` geometry:
//! they are the Euclidean gradient divided pointwise by the weights, so that
//! `E(u + σv) = E(u) + σ·inner(g, v) + o(σ)`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Field, MeasureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl GraphEdge {
    pub fn new(i: usize, j: usize, weight: f64) -> Self {
        Self { i, j, weight }
    }
}

/// An oriented edge: `w_plus` charges increases from `i` to `j`, `w_minus`
/// charges decreases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropicEdge {
    pub i: usize,
    pub j: usize,
    pub w_plus: f64,
    pub w_minus: f64,
}

impl AnisotropicEdge {
    pub fn new(i: usize, j: usize, w_plus: f64, w_minus: f64) -> Self {
        Self {
            i,
            j,
            w_plus,
            w_minus,
        }
    }
}

type EnergyFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A caller-supplied energy. Convexity and 2-homogeneity are claimed by the
/// caller and checked by the audit, never assumed by the solvers beyond what
/// prox needs to be well posed.
#[derive(Clone)]
pub struct CustomEnergy {
    pub name: String,
    energy: Arc<EnergyFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl CustomEnergy {
    pub fn new(name: impl Into<String>, energy: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            energy: Arc::new(energy),
            gradient: None,
        }
    }

    /// Attaches a Euclidean gradient.
    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }
}

impl fmt::Debug for CustomEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomEnergy")
            .field("name", &self.name)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    QuadraticGraph {
        edges: Vec<GraphEdge>,
    },
    AnisotropicGraph {
        edges: Vec<AnisotropicEdge>,
    },
    PowerSumSquared {
        edges: Vec<GraphEdge>,
        exponent: f64,
    },
    QuadraticMatrix {
        matrix: Vec<Vec<f64>>,
    },
    #[serde(skip)]
    Custom(CustomEnergy),
}

/// A validated energy on a space of a fixed size.
#[derive(Debug, Clone)]
pub struct FormDescriptor {
    size: usize,
    family: Family,
    matrix: Option<DMatrix<f64>>,
}

fn check_index(term: usize, index: usize, size: usize) -> Result<()> {
    if index >= size {
        return Err(Error::IndexOutOfRange { term, index, size });
    }
    Ok(())
}

fn check_weight(what: &str, term: usize, w: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{what} of term {term} must be positive and finite, got {w}"
        )));
    }
    Ok(())
}

impl FormDescriptor {
    pub fn new(size: usize, family: Family) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptySpace);
        }
        let mut matrix = None;
        match &family {
            Family::QuadraticGraph { edges } => {
                for (k, e) in edges.iter().enumerate() {
                    check_index(k, e.i, size)?;
                    check_index(k, e.j, size)?;
                    check_weight("weight", k, e.weight)?;
                }
            }
            Family::PowerSumSquared { edges, exponent } => {
                if !(1.0..=2.0).contains(exponent) {
                    return Err(Error::InvalidParameter(format!(
                        "power-sum exponent must lie in [1, 2], got {exponent}"
                    )));
                }
                for (k, e) in edges.iter().enumerate() {
                    check_index(k, e.i, size)?;
                    check_index(k, e.j, size)?;
                    check_weight("weight", k, e.weight)?;
                }
            }
            Family::AnisotropicGraph { edges } => {
                for (k, e) in edges.iter().enumerate() {
                    check_index(k, e.i, size)?;
                    check_index(k, e.j, size)?;
                    check_weight("w_plus", k, e.w_plus)?;
                    check_weight("w_minus", k, e.w_minus)?;
                }
            }
            Family::QuadraticMatrix { matrix: rows } => {
                if rows.len() != size || rows.iter().any(|r| r.len() != size) {
                    return Err(Error::InvalidParameter(format!(
                        "matrix must be {size}x{size}"
                    )));
                }
                let q = DMatrix::from_fn(size, size, |r, c| rows[r][c]);
                check_symmetric_psd(&q)?;
                matrix = Some(q);
            }
            Family::Custom(_) => {}
        }
        Ok(Self {
            size,
            family,
            matrix,
        })
    }

    pub fn quadratic_graph(size: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = edges.iter().map(|&(i, j, w)| GraphEdge::new(i, j, w)).collect();
        Self::new(size, Family::QuadraticGraph { edges })
    }

    pub fn anisotropic_graph(size: usize, edges: &[(usize, usize, f64, f64)]) -> Result<Self> {
        let edges = edges
            .iter()
            .map(|&(i, j, p, m)| AnisotropicEdge::new(i, j, p, m))
            .collect();
        Self::new(size, Family::AnisotropicGraph { edges })
    }

    pub fn power_sum_squared(size: usize, edges: &[(usize, usize, f64)], exponent: f64) -> Result<Self> {
        let edges = edges.iter().map(|&(i, j, w)| GraphEdge::new(i, j, w)).collect();
        Self::new(size, Family::PowerSumSquared { edges, exponent })
    }

    pub fn quadratic_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.len(), Family::QuadraticMatrix { matrix: rows })
    }

    pub fn custom(size: usize, energy: CustomEnergy) -> Result<Self> {
        Self::new(size, Family::Custom(energy))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Short tag used in reports.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::QuadraticGraph { .. } => "quadratic-graph",
            Family::AnisotropicGraph { .. } => "anisotropic-graph",
            Family::PowerSumSquared { .. } => "power-sum-squared",
            Family::QuadraticMatrix { .. } => "quadratic-matrix",
            Family::Custom(_) => "custom",
        }
    }

    /// Human-readable identifier including the parameters that matter.
    pub fn identifier(&self) -> String {
        match &self.family {
            Family::PowerSumSquared { exponent, edges } => {
                format!("power-sum-squared(q={exponent}, {} edges)", edges.len())
            }
            Family::QuadraticGraph { edges } => format!("quadratic-graph({} edges)", edges.len()),
            Family::AnisotropicGraph { edges } => {
                format!("anisotropic-graph({} edges)", edges.len())
            }
            Family::QuadraticMatrix { .. } => format!("quadratic-matrix({0}x{0})", self.size),
            Family::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// The symmetric matrix `Q` with `E(u) = uᵀQu`, when the form is quadratic
    /// by construction.
    pub fn quadratic_part(&self) -> Option<DMatrix<f64>> {
        match &self.family {
            Family::QuadraticGraph { edges } => Some(laplacian(self.size, edges)),
            Family::PowerSumSquared { edges, exponent } if *exponent == 2.0 => {
                Some(laplacian(self.size, edges))
            }
            Family::QuadraticMatrix { .. } => self.matrix.clone(),
            _ => None,
        }
    }

    pub(crate) fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                found: u.len(),
            });
        }
        Ok(())
    }

    /// `E(u)` without the dimension check.
    pub(crate) fn energy(&self, u: &[f64]) -> f64 {
        match &self.family {
            Family::QuadraticGraph { edges } => edges
                .iter()
                .map(|e| {
                    let d = u[e.i] - u[e.j];
                    e.weight * d * d
                })
                .sum(),
            Family::AnisotropicGraph { edges } => edges
                .iter()
                .map(|e| {
                    let t = u[e.j] - u[e.i];
                    if t > 0.0 {
                        e.w_plus * t * t
                    } else {
                        e.w_minus * t * t
                    }
                })
                .sum(),
            Family::PowerSumSquared { edges, exponent } => {
                let q = *exponent;
                if q == 1.0 {
                    let s: f64 = edges.iter().map(|e| e.weight * (u[e.j] - u[e.i]).abs()).sum();
                    s * s
                } else if q == 2.0 {
                    edges
                        .iter()
                        .map(|e| {
                            let d = u[e.j] - u[e.i];
                            e.weight * d * d
                        })
                        .sum()
                } else {
                    let s: f64 = edges
                        .iter()
                        .map(|e| e.weight * (u[e.j] - u[e.i]).abs().powf(q))
                        .sum();
                    s.powf(2.0 / q)
                }
            }
            Family::QuadraticMatrix { .. } => {
                let q = self.matrix.as_ref().unwrap();
                let mut acc = 0.0;
                for r in 0..self.size {
                    let mut row = 0.0;
                    for c in 0..self.size {
                        row += q[(r, c)] * u[c];
                    }
                    acc += u[r] * row;
                }
                acc.max(0.0)
            }
            Family::Custom(c) => (c.energy)(u),
        }
    }

    /// Euclidean gradient, when the form is differentiable at `u`.
    pub(crate) fn euclidean_gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        let n = self.size;
        let mut g = vec![0.0; n];
        match &self.family {
            Family::QuadraticGraph { edges } => {
                for e in edges {
                    let d = 2.0 * e.weight * (u[e.i] - u[e.j]);
                    g[e.i] += d;
                    g[e.j] -= d;
                }
            }
            Family::AnisotropicGraph { edges } => {
                for e in edges {
                    let t = u[e.j] - u[e.i];
                    let d = if t > 0.0 {
                        2.0 * e.w_plus * t
                    } else {
                        2.0 * e.w_minus * t
                    };
                    g[e.j] += d;
                    g[e.i] -= d;
                }
            }
            Family::PowerSumSquared { edges, exponent } => {
                let q = *exponent;
                let diffs: Vec<f64> = edges.iter().map(|e| u[e.j] - u[e.i]).collect();
                if q == 1.0 {
                    let s: f64 = edges.iter().zip(&diffs).map(|(e, d)| e.weight * d.abs()).sum();
                    if s == 0.0 {
                        return Some(g);
                    }
                    if diffs.iter().any(|&d| d == 0.0) {
                        return None;
                    }
                    for (e, d) in edges.iter().zip(&diffs) {
                        let c = 2.0 * s * e.weight * d.signum();
                        g[e.j] += c;
                        g[e.i] -= c;
                    }
                } else {
                    let s: f64 = edges
                        .iter()
                        .zip(&diffs)
                        .map(|(e, d)| e.weight * d.abs().powf(q))
                        .sum();
                    if s == 0.0 {
                        return Some(g);
                    }
                    let outer = 2.0 * s.powf(2.0 / q - 1.0);
                    for (e, d) in edges.iter().zip(&diffs) {
                        let c = outer * e.weight * d.abs().powf(q - 1.0) * d.signum();
                        g[e.j] += c;
                        g[e.i] -= c;
                    }
                }
            }
            Family::QuadraticMatrix { .. } => {
                let q = self.matrix.as_ref().unwrap();
                let x = DVector::from_column_slice(u);
                let y = 2.0 * q * x;
                g.copy_from_slice(y.as_slice());
            }
            Family::Custom(c) => return c.gradient.as_ref().map(|grad| grad(u)),
        }
        Some(g)
    }

    /// A Euclidean (generalized) Hessian for the smooth and piecewise
    /// quadratic families. Curvature that blows up at zero differences for
    /// `1 < q < 2` is capped at `1 / curvature_floor`.
    pub(crate) fn euclidean_hessian(&self, u: &[f64], curvature_floor: f64) -> Option<DMatrix<f64>> {
        let n = self.size;
        if let Some(q) = self.quadratic_part() {
            return Some(2.0 * q);
        }
        let mut h = DMatrix::zeros(n, n);
        let mut add_edge = |i: usize, j: usize, c: f64| {
            h[(i, i)] += c;
            h[(j, j)] += c;
            h[(i, j)] -= c;
            h[(j, i)] -= c;
        };
        match &self.family {
            Family::AnisotropicGraph { edges } => {
                for e in edges {
                    let t = u[e.j] - u[e.i];
                    let w = if t > 0.0 {
                        e.w_plus
                    } else if t < 0.0 {
                        e.w_minus
                    } else {
                        e.w_plus.max(e.w_minus)
                    };
                    add_edge(e.i, e.j, 2.0 * w);
                }
                Some(h)
            }
            Family::PowerSumSquared { edges, exponent } if *exponent > 1.0 => {
                let q = *exponent;
                let diffs: Vec<f64> = edges.iter().map(|e| u[e.j] - u[e.i]).collect();
                let s: f64 = edges
                    .iter()
                    .zip(&diffs)
                    .map(|(e, d)| e.weight * d.abs().powf(q))
                    .sum();
                // Near u = 0 the form behaves like the squared q-norm; use the
                // floor to keep the outer factor finite.
                let s_eff = s.max(curvature_floor.powf(q));
                let outer = 2.0 * s_eff.powf(2.0 / q - 1.0);
                let mut grad_s = DVector::zeros(n);
                for (e, d) in edges.iter().zip(&diffs) {
                    let a = d.abs().max(curvature_floor);
                    add_edge(e.i, e.j, outer * (q - 1.0) * e.weight * a.powf(q - 2.0));
                    let c = e.weight * d.abs().powf(q - 1.0) * d.signum();
                    grad_s[e.j] += c;
                    grad_s[e.i] -= c;
                }
                // Rank-one term from differentiating the outer power S^{2/q-1}.
                let rank_one = 2.0 * (2.0 - q) * s_eff.powf(2.0 / q - 2.0);
                h += rank_one * &grad_s * grad_s.transpose();
                Some(h)
            }
            _ => None,
        }
    }
}

fn laplacian(n: usize, edges: &[GraphEdge]) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    for e in edges {
        q[(e.i, e.i)] += e.weight;
        q[(e.j, e.j)] += e.weight;
        q[(e.i, e.j)] -= e.weight;
        q[(e.j, e.i)] -= e.weight;
    }
    q
}

/// Rejects asymmetric matrices and matrices with clearly negative spectrum.
pub(crate) fn check_symmetric_psd(q: &DMatrix<f64>) -> Result<()> {
    check_symmetric(q)?;
    let scale = q.amax().max(1.0);
    let eig = q.clone().symmetric_eigen();
    if let Some(&lo) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if lo < -1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "matrix is not positive semi-definite (smallest eigenvalue {lo:e})"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_symmetric(q: &DMatrix<f64>) -> Result<()> {
    if !q.is_square() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let scale = q.amax().max(1.0);
    for r in 0..q.nrows() {
        for c in (r + 1)..q.ncols() {
            let defect = (q[(r, c)] - q[(c, r)]).abs();
            if defect > 1e-12 * scale || !defect.is_finite() {
                return Err(Error::AsymmetricMatrix { row: r, col: c, defect });
            }
        }
    }
    Ok(())
}

/// `E(u)`.
pub fn evaluate(form: &FormDescriptor, u: &Field) -> Result<f64> {
    form.check(u)?;
    Ok(form.energy(u.values()))
}

/// The `L²(m)` gradient of `E` at `u`, or `None` where `E` is not differentiable
/// (or the family has no closed form).
pub fn analytic_gradient(form: &FormDescriptor, u: &Field, space: &MeasureSpace) -> Result<Option<Field>> {
    form.check(u)?;
    space.check(u)?;
    Ok(form.euclidean_gradient(u.values()).map(|g| {
        Field::from(
            g.iter()
                .zip(space.weights())
                .map(|(gi, mi)| gi / mi)
                .collect::<Vec<_>>(),
        )
    }))
}

/// Closed-form one-sided directional derivatives `(Λ⁻(u,v), Λ⁺(u,v))`.
///
/// Directional derivatives do not depend on the weights, so no space is
/// needed. Returns `None` for families without a closed form.
pub fn analytic_slopes(form: &FormDescriptor, u: &Field, v: &Field) -> Result<Option<(f64, f64)>> {
    form.check(u)?;
    form.check(v)?;
    let (u, v) = (u.values(), v.values());
    if let Family::PowerSumSquared { edges, exponent } = &form.family {
        if *exponent == 1.0 {
            let s: f64 = edges.iter().map(|e| e.weight * (u[e.j] - u[e.i]).abs()).sum();
            let mut smooth = 0.0;
            let mut kink = 0.0;
            for e in edges {
                let du = u[e.j] - u[e.i];
                let dv = v[e.j] - v[e.i];
                if du == 0.0 {
                    kink += e.weight * dv.abs();
                } else {
                    smooth += e.weight * du.signum() * dv;
                }
            }
            return Ok(Some((2.0 * s * (smooth - kink), 2.0 * s * (smooth + kink))));
        }
    }
    if matches!(form.family, Family::Custom(_)) {
        return Ok(None);
    }
    Ok(form.euclidean_gradient(u).map(|g| {
        let d: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
        (d, d)
    }))
}

/// Which points each term of the energy reads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityStructure {
    pub supports: Vec<BTreeSet<usize>>,
    /// Whether the form is additive over disjoint interaction supports.
    pub local: bool,
}

impl LocalityStructure {
    /// Points that share a term with a point of `set`, together with `set`.
    pub fn closed_neighborhood(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = set.clone();
        for s in &self.supports {
            if s.iter().any(|p| set.contains(p)) {
                out.extend(s.iter().copied());
            }
        }
        out
    }

    /// Whether some term reads a point of `a` and a point of `b`.
    pub fn couples(&self, a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> bool {
        self.supports
            .iter()
            .any(|s| s.iter().any(|p| a.contains(p)) && s.iter().any(|p| b.contains(p)))
    }
}

pub fn locality_of(form: &FormDescriptor) -> LocalityStructure {
    let pair = |i: usize, j: usize| -> BTreeSet<usize> { [i, j].into_iter().collect() };
    match &form.family {
        Family::QuadraticGraph { edges } => LocalityStructure {
            supports: edges.iter().map(|e| pair(e.i, e.j)).collect(),
            local: true,
        },
        Family::AnisotropicGraph { edges } => LocalityStructure {
            supports: edges.iter().map(|e| pair(e.i, e.j)).collect(),
            local: true,
        },
        Family::PowerSumSquared { edges, exponent } => LocalityStructure {
            supports: edges.iter().map(|e| pair(e.i, e.j)).collect(),
            local: *exponent == 2.0 || edges.len() <= 1,
        },
        Family::QuadraticMatrix { .. } => {
            let q = form.matrix.as_ref().unwrap();
            let n = form.size;
            let mut supports = Vec::new();
            for r in 0..n {
                for c in r..n {
                    if q[(r, c)] != 0.0 {
                        supports.push(pair(r, c));
                    }
                }
            }
            // A weighted graph Laplacian (zero row sums, nonpositive
            // couplings) is an edge sum; anything else couples through the
            // diagonal or through positive correlations.
            let scale = q.amax().max(1.0);
            let laplacian_like = (0..n).all(|r| {
                let row_sum: f64 = (0..n).map(|c| q[(r, c)]).sum();
                row_sum.abs() <= 1e-12 * scale && (0..n).all(|c| c == r || q[(r, c)] <= 0.0)
            });
            LocalityStructure {
                supports,
                local: laplacian_like,
            }
        }
        Family::Custom(_) => LocalityStructure {
            supports: vec![(0..form.size).collect()],
            local: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: &[f64]) -> Field {
        Field::new(v.to_vec()).unwrap()
    }

    fn one_edge() -> FormDescriptor {
        FormDescriptor::quadratic_graph(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn aniso() -> FormDescriptor {
        FormDescriptor::anisotropic_graph(2, &[(0, 1, 1.0, 4.0)]).unwrap()
    }

    fn tv_path() -> FormDescriptor {
        FormDescriptor::power_sum_squared(3, &[(0, 1, 1.0), (1, 2, 1.0)], 1.0).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(evaluate(&one_edge(), &f(&[1.0, -1.0])).unwrap(), 4.0);
        assert_eq!(evaluate(&aniso(), &f(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(evaluate(&aniso(), &f(&[1.0, 0.0])).unwrap(), 4.0);
        assert_eq!(evaluate(&tv_path(), &f(&[0.0, 0.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            FormDescriptor::quadratic_graph(2, &[(0, 2, 1.0)]),
            Err(Error::IndexOutOfRange { term: 0, index: 2, size: 2 })
        ));
        assert!(FormDescriptor::quadratic_graph(2, &[(0, 1, 0.0)]).is_err());
        assert!(FormDescriptor::power_sum_squared(2, &[(0, 1, 1.0)], 2.5).is_err());
        assert!(matches!(
            FormDescriptor::quadratic_matrix(vec![vec![1.0, 2.0], vec![0.0, 1.0]]),
            Err(Error::AsymmetricMatrix { .. })
        ));
        assert!(FormDescriptor::quadratic_matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(matches!(
            evaluate(&one_edge(), &f(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_examples() {
        let one = MeasureSpace::uniform(2).unwrap();
        let g = analytic_gradient(&one_edge(), &f(&[1.0, -1.0]), &one).unwrap().unwrap();
        assert_eq!(g, f(&[4.0, -4.0]));
        let g = analytic_gradient(&aniso(), &f(&[0.0, 1.0]), &one).unwrap().unwrap();
        assert_eq!(g, f(&[-2.0, 2.0]));
        let three = MeasureSpace::uniform(3).unwrap();
        assert!(analytic_gradient(&tv_path(), &f(&[0.0, 0.0, 1.0]), &three)
            .unwrap()
            .is_none());
    }

    #[test]
    fn gradient_is_weighted() {
        let m = MeasureSpace::new(vec![2.0, 5.0]).unwrap();
        let g = analytic_gradient(&one_edge(), &f(&[1.0, -1.0]), &m).unwrap().unwrap();
        assert_eq!(g, f(&[2.0, -0.8]));
    }

    #[test]
    fn tv_slopes_at_kink() {
        let (lo, hi) = analytic_slopes(&tv_path(), &f(&[0.0, 0.0, 1.0]), &f(&[1.0, 0.0, 0.0]))
            .unwrap()
            .unwrap();
        assert_eq!((lo, hi), (-2.0, 2.0));
    }

    #[test]
    fn smooth_slopes_coincide_with_gradient() {
        let one = MeasureSpace::new(vec![0.5, 3.0]).unwrap();
        let u = f(&[0.3, -1.2]);
        let v = f(&[2.0, 0.7]);
        for form in [one_edge(), aniso()] {
            let g = analytic_gradient(&form, &u, &one).unwrap().unwrap();
            let expected = crate::space::inner(&g, &v, &one).unwrap();
            let (lo, hi) = analytic_slopes(&form, &u, &v).unwrap().unwrap();
            assert!((lo - expected).abs() < 1e-12 && lo == hi);
        }
    }

    #[test]
    fn self_slope_is_twice_energy() {
        let u = f(&[0.2, -0.9, 1.4]);
        let form = tv_path();
        let (lo, hi) = analytic_slopes(&form, &u, &u).unwrap().unwrap();
        let e = evaluate(&form, &u).unwrap();
        assert!((lo - 2.0 * e).abs() < 1e-12 && (hi - 2.0 * e).abs() < 1e-12);
    }

    #[test]
    fn locality_flags() {
        let loc = locality_of(&FormDescriptor::quadratic_graph(3, &[(0, 1, 1.0)]).unwrap());
        assert_eq!(loc.supports, vec![[0, 1].into_iter().collect::<BTreeSet<_>>()]);
        assert!(loc.local);
        assert!(locality_of(&aniso()).local);
        assert!(!locality_of(&tv_path()).local);
        let sum_sq = FormDescriptor::quadratic_matrix(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(!locality_of(&sum_sq).local);
        let lap = FormDescriptor::quadratic_matrix(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(locality_of(&lap).local);
    }

    /// Witness for the non-locality of the q = 1 form: disjoint supports,
    /// no shared edge, yet the energy is not additive.
    #[test]
    fn tv_non_local_witness() {
        let form = FormDescriptor::power_sum_squared(4, &[(0, 1, 1.0), (2, 3, 1.0)], 1.0).unwrap();
        let u = f(&[1.0, 0.0, 0.0, 0.0]);
        let v = f(&[0.0, 0.0, 0.0, 2.0]);
        let sum = evaluate(&form, &(&u + &v)).unwrap();
        let parts = evaluate(&form, &u).unwrap() + evaluate(&form, &v).unwrap();
        assert_eq!(sum, 9.0);
        assert_eq!(parts, 5.0);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let form = FormDescriptor::power_sum_squared(4, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 1.3)], 1.5)
            .unwrap();
        let u = [0.3, -0.7, 1.1, 0.4];
        let h = form.euclidean_hessian(&u, 1e-12).unwrap();
        let step = 1e-6;
        for k in 0..4 {
            let mut up = u;
            let mut dn = u;
            up[k] += step;
            dn[k] -= step;
            let gp = form.euclidean_gradient(&up).unwrap();
            let gm = form.euclidean_gradient(&dn).unwrap();
            for r in 0..4 {
                let fd = (gp[r] - gm[r]) / (2.0 * step);
                assert!((fd - h[(r, k)]).abs() < 1e-5 * (1.0 + fd.abs()), "({r},{k}) {fd} vs {}", h[(r, k)]);
            }
        }
    }
}

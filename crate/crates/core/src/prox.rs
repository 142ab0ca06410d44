//! Proximal map, Moreau–Yosida envelope and Yosida operator in `L²(m)`.
//!
//! For `λ > 0` the proximal point of `u` is the unique minimizer of
//!
//! ```text
//! v ↦ E(v) + ‖v - u‖²_m / (2λ)
//! ```
//!
//! The solvers work with the displacement `d = u - prox(u)` rather than the
//! proximal point itself, so that `A_λ(u) = d / λ` is computed without the
//! cancellation of subtracting two nearly equal fields when `λ` is small.
//!
//! Three routes, picked by family:
//!
//! * quadratic forms: one Cholesky solve of `(M + 2λQ) A = 2Qu`;
//! * `AnisotropicGraph`, `PowerSumSquared` with `q > 1`, `Custom`: damped
//!   Newton on the displacement with Armijo backtracking;
//! * `PowerSumSquared` with `q = 1`: `E = S²` with `S` a weighted total
//!   variation. The proximal point of `S²` is the proximal point of `μS` for the
//!   unique `μ = 2λ S(prox)`, found by a monotone scalar root search; each inner
//!   problem is the dual box QP of a weighted total-variation prox, solved
//!   exactly by an active-set method.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{analytic_gradient, Family, FormDescriptor, GraphEdge};
use crate::qp::{solve_box_qp, Bound};
use crate::space::{m_norm, Field, MeasureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stationarity residual (in the `L²(m)` norm) accepted by the proximal
    /// solvers, relative to `max(1, ‖u‖∞) + ‖A_λ(u)‖_m`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    /// Relative change below which successive extrapolated Yosida values are
    /// considered converged.
    pub cauchy_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            max_iterations: 500,
            armijo: 1e-4,
            backtrack: 0.5,
            cauchy_tolerance: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        for (name, x) in [("armijo", self.armijo), ("backtrack", self.backtrack)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {x}")));
            }
        }
        if !(self.cauchy_tolerance > 0.0) {
            return Err(Error::InvalidConfig("cauchy_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxResult {
    pub minimizer: Field,
    /// `u - minimizer`.
    pub displacement: Field,
    /// `E_λ(u)`.
    pub envelope: f64,
    pub residual: f64,
    pub iterations: usize,
    pub lambda: f64,
}

impl ProxResult {
    /// `A_λ(u)`.
    pub fn yosida(&self) -> Field {
        self.displacement.scale(1.0 / self.lambda)
    }
}

fn check_inputs(form: &FormDescriptor, u: &Field, lambda: f64, space: &MeasureSpace, cfg: &SolverConfig) -> Result<()> {
    form.check(u)?;
    space.check(u)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    cfg.validate()
}

/// The proximal point of `u` for `λE` in the `L²(m)` geometry.
pub fn prox(form: &FormDescriptor, u: &Field, lambda: f64, space: &MeasureSpace, cfg: &SolverConfig) -> Result<ProxResult> {
    check_inputs(form, u, lambda, space, cfg)?;
    let m = space.weights();
    let (d, residual, iterations) = if let Some(q) = form.quadratic_part() {
        quadratic_displacement(&q, u.values(), lambda, m)?
    } else {
        match form.family() {
            Family::PowerSumSquared { edges, exponent } if *exponent == 1.0 => {
                tv_squared_displacement(edges, u.values(), lambda, m, cfg)?
            }
            _ => newton_displacement(form, u.values(), lambda, m, cfg)?,
        }
    };
    let displacement = Field::from(d);
    let minimizer = u - &displacement;
    let envelope = form.energy(minimizer.values()) + m_norm(&displacement, space).powi(2) / (2.0 * lambda);
    // Relative to the size of `u` once it exceeds 1, matching the unit-scale
    // Newton solve.
    let scale = u.sup_norm().max(1.0) + m_norm(&displacement, space) / lambda;
    let tol = effective_tolerance(form, cfg);
    if !(residual <= tol * scale + rounding_allowance(form, minimizer.values(), m)) {
        return Err(Error::NotConverged {
            best: minimizer,
            residual,
            iterations,
        });
    }
    Ok(ProxResult {
        minimizer,
        displacement,
        envelope,
        residual,
        iterations,
        lambda,
    })
}

/// Stationarity residual that rounding `v` to the nearest floats can cause on
/// its own. Only terms `|Δ|^q` with `q < 2` matter: their gradients are not
/// Lipschitz at ties, so a one-ulp change of `Δ` moves them by about `√ε`.
fn rounding_allowance(form: &FormDescriptor, v: &[f64], m: &[f64]) -> f64 {
    let Family::PowerSumSquared { edges, exponent: q } = form.family() else {
        return 0.0;
    };
    if !(*q > 1.0 && *q < 2.0) {
        return 0.0;
    }
    let s: f64 = edges.iter().map(|e| e.weight * (v[e.j] - v[e.i]).abs().powf(*q)).sum();
    if s == 0.0 {
        return 0.0;
    }
    let outer = 2.0 * s.powf(2.0 / q - 1.0);
    let mut r = vec![0.0; v.len()];
    for e in edges {
        let t = (v[e.j] - v[e.i]).abs();
        let delta = 2.0 * f64::EPSILON * (v[e.i].abs() + v[e.j].abs());
        let spread = if t <= delta {
            2.0 * (t + delta).powf(q - 1.0)
        } else {
            (t + delta).powf(q - 1.0) - (t - delta).powf(q - 1.0)
        };
        let b = outer * e.weight * spread;
        r[e.i] += b;
        r[e.j] += b;
    }
    4.0 * weighted_residual(&r, m)
}

/// Finite-difference gradients cannot reach the default tolerance.
fn effective_tolerance(form: &FormDescriptor, cfg: &SolverConfig) -> f64 {
    match form.family() {
        Family::Custom(_) if form.euclidean_gradient(&vec![0.0; form.size()]).is_none() => {
            cfg.tolerance.max(1e-6)
        }
        _ => cfg.tolerance,
    }
}

/// `A_λ(u) = (u - prox(u)) / λ`.
pub fn yosida(form: &FormDescriptor, u: &Field, lambda: f64, space: &MeasureSpace, cfg: &SolverConfig) -> Result<Field> {
    Ok(prox(form, u, lambda, space, cfg)?.yosida())
}

/// `E_λ(u) = E(prox(u)) + ‖u - prox(u)‖²_m / (2λ)`.
pub fn envelope(form: &FormDescriptor, u: &Field, lambda: f64, space: &MeasureSpace, cfg: &SolverConfig) -> Result<f64> {
    Ok(prox(form, u, lambda, space, cfg)?.envelope)
}

fn weighted_residual(r: &[f64], m: &[f64]) -> f64 {
    // ‖M⁻¹ r‖_m for a Euclidean covector r.
    r.iter().zip(m).map(|(x, w)| x * x / w).sum::<f64>().sqrt()
}

fn quadratic_displacement(q: &DMatrix<f64>, u: &[f64], lambda: f64, m: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
    let n = u.len();
    let mass = DMatrix::from_diagonal(&DVector::from_column_slice(m));
    let x = DVector::from_column_slice(u);
    let system = &mass + 2.0 * lambda * q;
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::Unsupported("M + 2λQ is not positive definite".into()))?;
    let a = chol.solve(&(2.0 * q * &x));
    let d = lambda * &a;
    let v = &x - &d;
    // Euclidean stationarity: 2Qv - M d / λ.
    let r = 2.0 * q * &v - &mass * &a;
    let residual = weighted_residual(r.as_slice(), m);
    debug_assert_eq!(d.len(), n);
    Ok((d.as_slice().to_vec(), residual, 1))
}

/// Objective of the displacement problem `F(d) = E(u - d) + dᵀMd / (2λ)`.
fn displacement_objective(form: &FormDescriptor, u: &[f64], d: &[f64], lambda: f64, m: &[f64]) -> f64 {
    let v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a - b).collect();
    let quad: f64 = d.iter().zip(m).map(|(x, w)| w * x * x).sum();
    form.energy(&v) + quad / (2.0 * lambda)
}

fn gradient_or_fd(form: &FormDescriptor, v: &[f64]) -> Vec<f64> {
    if let Some(g) = form.euclidean_gradient(v) {
        return g;
    }
    let n = v.len();
    let mut g = vec![0.0; n];
    let mut x = v.to_vec();
    for k in 0..n {
        let h = 1e-6 * (1.0 + v[k].abs());
        x[k] = v[k] + h;
        let fp = form.energy(&x);
        x[k] = v[k] - h;
        let fm = form.energy(&x);
        x[k] = v[k];
        g[k] = (fp - fm) / (2.0 * h);
    }
    g
}

fn hessian_or_fd(form: &FormDescriptor, v: &[f64], floor: f64) -> DMatrix<f64> {
    if let Some(h) = form.euclidean_hessian(v, floor) {
        return h;
    }
    let n = v.len();
    let mut h = DMatrix::zeros(n, n);
    let mut x = v.to_vec();
    for k in 0..n {
        let step = 1e-4 * (1.0 + v[k].abs());
        x[k] = v[k] + step;
        let gp = gradient_or_fd(form, &x);
        x[k] = v[k] - step;
        let gm = gradient_or_fd(form, &x);
        x[k] = v[k];
        for r in 0..n {
            h[(r, k)] = (gp[r] - gm[r]) / (2.0 * step);
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    // Project onto the PSD cone so the Newton system stays definite.
    let mut eig = sym.symmetric_eigen();
    eig.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
    eig.recompose()
}

/// Damped Newton on the displacement `d = u - v`.
/// Newton on `u / ‖u‖∞`; the displacement is 1-homogeneous in `u`, and unit
/// scale keeps the absolute floors below meaningful.
fn newton_displacement(form: &FormDescriptor, u: &[f64], lambda: f64, m: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, f64, usize)> {
    let scale = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return newton_unit(form, u, lambda, m, cfg);
    }
    let unit: Vec<f64> = u.iter().map(|x| x / scale).collect();
    let (d, residual, iters) = newton_unit(form, &unit, lambda, m, cfg)?;
    Ok((d.iter().map(|x| x * scale).collect(), residual * scale, iters))
}

fn newton_unit(form: &FormDescriptor, u: &[f64], lambda: f64, m: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, f64, usize)> {
    let n = u.len();

    // Explicit-Euler guess d = λ M⁻¹∇E(u), kept only if it beats d = 0.
    let g0 = gradient_or_fd(form, u);
    let guess: Vec<f64> = (0..n).map(|i| lambda * g0[i] / m[i]).collect();
    let zero = vec![0.0; n];
    let (first, second) = if displacement_objective(form, u, &guess, lambda, m) < displacement_objective(form, u, &zero, lambda, m) {
        (guess, zero)
    } else {
        (zero, guess)
    };
    // The curvature floor trades stability at exact ties against accuracy
    // when the solution has differences below the floor. A stalled run is
    // continued with the low floor, then retried from the other start.
    let mut best = newton_from(form, u, lambda, m, cfg, first, 1e-12)?;
    for (start, floor) in [(None, 1e-20), (Some(second), 1e-12)] {
        if best.2 < cfg.max_iterations {
            break;
        }
        let start = start.unwrap_or_else(|| best.0.clone());
        let run = newton_from(form, u, lambda, m, cfg, start, floor)?;
        if run.2 < cfg.max_iterations || run.1 < best.1 {
            best = run;
        }
    }
    Ok(best)
}

fn newton_from(
    form: &FormDescriptor,
    u: &[f64],
    lambda: f64,
    m: &[f64],
    cfg: &SolverConfig,
    start: Vec<f64>,
    floor: f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = u.len();
    let mass = DMatrix::from_diagonal(&DVector::from_column_slice(m));
    let grad_f = |d: &[f64]| -> Vec<f64> {
        let v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a - b).collect();
        let g = gradient_or_fd(form, &v);
        (0..n).map(|i| -g[i] + m[i] * d[i] / lambda).collect()
    };
    let tie_edges: Option<Vec<(usize, usize)>> = match form.family() {
        Family::PowerSumSquared { edges, exponent } if *exponent < 2.0 => Some(edges.iter().map(|e| (e.i, e.j)).collect()),
        _ => None,
    };
    let mut d = start;
    let tol = effective_tolerance(form, cfg);
    let mut grad = grad_f(&d);
    let mut residual = weighted_residual(&grad, m);
    let mut best = (d.clone(), residual);
    for iter in 0..cfg.max_iterations {
        let a_norm = d.iter().zip(m).map(|(x, w)| w * x * x).sum::<f64>().sqrt() / lambda;
        let v: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - b).collect();
        if residual <= tol * (1.0 + a_norm) + rounding_allowance(form, &v, m) {
            return Ok((d, residual, iter));
        }
        let hess = hessian_or_fd(form, &v, floor) + &mass / lambda;
        let rhs = -DVector::from_column_slice(&grad);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => DVector::from_fn(n, |i, _| rhs[i] * lambda / m[i]),
        };
        let full: Vec<f64> = d.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
        let grad_full = grad_f(&full);
        let r_full = weighted_residual(&grad_full, m);
        // Accept the plain Newton step when it makes clear progress; this is
        // also the only usable test once objective differences fall below
        // rounding, which happens early for small λ.
        // Roots of `sign(x)|x|^{1/2}`-type terms (exponents below 2 at tied
        // differences) make full steps cycle `x → -x`; a shorter step along the
        // same direction breaks the cycle.
        // Near a tie the same terms converge only linearly, since the
        // curvature blows up; merging nearly tied endpoints jumps to the tie.
        let shortened = || {
            let mut candidates: Vec<Vec<f64>> = [0.5, 0.25, 0.125]
                .iter()
                .map(|&t| d.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect())
                .collect();
            if let Some(edges) = &tie_edges {
                for base in [&d, &full] {
                    for theta in [1e-10, 1e-8, 1e-6] {
                        candidates.push(merge_ties(u, base, edges, m, theta));
                    }
                }
            }
            candidates
                .into_iter()
                .map(|x| {
                    let r = weighted_residual(&grad_f(&x), m);
                    (x, r)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .filter(|(_, r)| *r < 0.9 * residual.min(r_full))
                .map(|(x, _)| x)
        };
        let trial = if r_full <= 0.5 * residual {
            full
        } else if let Some(x) = shortened() {
            x
        } else {
            let slope: f64 = grad.iter().zip(step.iter()).map(|(g, s)| g * s).sum();
            let f0 = displacement_objective(form, u, &d, lambda, m);
            let resolvable = 1e-14 * (1.0 + f0.abs());
            let mut t = 1.0;
            let mut accepted = None;
            while t * slope.abs() > resolvable {
                let trial: Vec<f64> = d.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
                let ft = displacement_objective(form, u, &trial, lambda, m);
                if ft <= f0 + cfg.armijo * t * slope {
                    accepted = Some(trial);
                    break;
                }
                t *= cfg.backtrack;
            }
            match accepted {
                Some(x) => x,
                None if r_full < residual => full,
                None => break,
            }
        };
        d = trial;
        grad = grad_f(&d);
        residual = weighted_residual(&grad, m);
        if residual < best.1 {
            best = (d.clone(), residual);
        }
    }
    let (d, residual) = best;
    Ok((d, residual, cfg.max_iterations))
}

/// Sets `v = u - d` to its `m`-weighted mean on every cluster of points
/// joined by edges with `|v_i - v_j| ≤ θ`, and returns the new displacement.
fn merge_ties(u: &[f64], d: &[f64], edges: &[(usize, usize)], m: &[f64], theta: f64) -> Vec<f64> {
    let n = u.len();
    let v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a - b).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &(i, j) in edges {
        if (v[i] - v[j]).abs() <= theta {
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            parent[a] = b;
        }
    }
    let mut mass = vec![0.0; n];
    let mut sum = vec![0.0; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        mass[r] += m[i];
        sum[r] += m[i] * v[i];
    }
    (0..n)
        .map(|i| {
            let r = root(&mut parent, i);
            u[i] - sum[r] / mass[r]
        })
        .collect()
}

struct TvProblem<'a> {
    edges: &'a [GraphEdge],
    u: &'a [f64],
    m: &'a [f64],
    /// `D M⁻¹ Dᵀ + εI`.
    gram: DMatrix<f64>,
    /// `D u`.
    du: DVector<f64>,
}

struct TvPoint {
    mu: f64,
    z: DVector<f64>,
    pattern: Vec<Bound>,
    /// Displacement `M⁻¹ Dᵀ z`.
    d: Vec<f64>,
    /// `S(u - d)`.
    tv: f64,
}

impl<'a> TvProblem<'a> {
    fn new(edges: &'a [GraphEdge], u: &'a [f64], m: &'a [f64]) -> Self {
        let ne = edges.len();
        let mut gram = DMatrix::zeros(ne, ne);
        for (a, ea) in edges.iter().enumerate() {
            for (b, eb) in edges.iter().enumerate() {
                let mut s = 0.0;
                for p in [ea.i, ea.j] {
                    let sa = if p == ea.j { 1.0 } else { -1.0 };
                    for q in [eb.i, eb.j] {
                        if p == q {
                            let sb = if q == eb.j { 1.0 } else { -1.0 };
                            s += sa * sb / m[p];
                        }
                    }
                }
                gram[(a, b)] = s;
            }
        }
        let reg = 1e-13 * gram.diagonal().amax().max(f64::MIN_POSITIVE);
        for k in 0..ne {
            gram[(k, k)] += reg;
        }
        let du = DVector::from_fn(ne, |k, _| u[edges[k].j] - u[edges[k].i]);
        Self {
            edges,
            u,
            m,
            gram,
            du,
        }
    }

    fn tv(&self, v: &[f64]) -> f64 {
        self.edges.iter().map(|e| e.weight * (v[e.j] - v[e.i]).abs()).sum()
    }

    fn solve(&self, mu: f64, warm: Option<&TvPoint>) -> Result<TvPoint> {
        let hi = DVector::from_fn(self.edges.len(), |k, _| mu * self.edges[k].weight);
        let lo = -&hi;
        let start = warm.map(|w| if w.mu > 0.0 { &w.z * (mu / w.mu) } else { w.z.clone() });
        let sol = solve_box_qp(&self.gram, &self.du, &lo, &hi, start.as_ref())
            .ok_or_else(|| Error::Unsupported("total-variation dual QP did not terminate".into()))?;
        let n = self.u.len();
        let mut d = vec![0.0; n];
        for (k, e) in self.edges.iter().enumerate() {
            d[e.j] += sol.z[k];
            d[e.i] -= sol.z[k];
        }
        for i in 0..n {
            d[i] /= self.m[i];
        }
        let v: Vec<f64> = self.u.iter().zip(&d).map(|(a, b)| a - b).collect();
        Ok(TvPoint {
            mu,
            z: sol.z,
            pattern: sol.state,
            tv: self.tv(&v),
            d,
        })
    }
}

fn tv_squared_displacement(edges: &[GraphEdge], u: &[f64], lambda: f64, m: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, f64, usize)> {
    let n = u.len();
    let problem = TvProblem::new(edges, u, m);
    let s_u = problem.tv(u);
    if s_u == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0));
    }
    // φ(μ) = μ - 2λ S(prox_{μS}(u)) is increasing, negative at 0 and
    // nonnegative at 2λS(u); it is piecewise affine in μ.
    let phi = |p: &TvPoint| p.mu - 2.0 * lambda * p.tv;
    let mut lo = problem.solve(0.0, None)?;
    let mut hi = problem.solve(2.0 * lambda * s_u, Some(&lo))?;
    let target = 1e-15 * 2.0 * lambda * s_u;
    let mut iterations = 0;
    let mut best = if phi(&hi).abs() < phi(&lo).abs() { 1 } else { 0 };
    let mut stale = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let (flo, fhi) = (phi(&lo), phi(&hi));
        if fhi.abs() <= target {
            best = 1;
            break;
        }
        if flo.abs() <= target {
            best = 0;
            break;
        }
        let width = hi.mu - lo.mu;
        if width <= 4.0 * f64::EPSILON * hi.mu {
            best = if fhi.abs() < flo.abs() { 1 } else { 0 };
            break;
        }
        // Secant is exact when both ends share an active pattern; otherwise
        // guard it with bisection.
        let secant = lo.mu - flo * width / (fhi - flo);
        let same_piece = lo.pattern == hi.pattern;
        let mu = if same_piece || (stale < 2 && secant > lo.mu + 0.01 * width && secant < hi.mu - 0.01 * width) {
            secant.clamp(lo.mu, hi.mu)
        } else {
            0.5 * (lo.mu + hi.mu)
        };
        let p = problem.solve(mu, Some(&hi))?;
        if phi(&p) < 0.0 {
            stale = if best == 0 { stale + 1 } else { 0 };
            best = 0;
            lo = p;
        } else {
            stale = if best == 1 { stale + 1 } else { 0 };
            best = 1;
            hi = p;
        }
    }
    let point = if best == 1 { hi } else { lo };

    // Stationarity with the subgradient selection s = z / μ, evaluated at the
    // prox point: 2 S(v) Dᵀs - M d / λ.
    let mu = point.mu.max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    for (k, e) in edges.iter().enumerate() {
        let s = (point.z[k] / mu).clamp(-e.weight, e.weight);
        r[e.j] += 2.0 * point.tv * s;
        r[e.i] -= 2.0 * point.tv * s;
    }
    for i in 0..n {
        r[i] -= m[i] * point.d[i] / lambda;
    }
    let mut residual = weighted_residual(&r, m);
    // The selection is only a subgradient if free edges are (numerically)
    // merged and bound edges carry the matching sign.
    let v: Vec<f64> = u.iter().zip(&point.d).map(|(a, b)| a - b).collect();
    let mut sign_defect: f64 = 0.0;
    for (k, e) in edges.iter().enumerate() {
        let dv = v[e.j] - v[e.i];
        match point.pattern[k] {
            Bound::Free => sign_defect = sign_defect.max(dv.abs()),
            Bound::Upper => sign_defect = sign_defect.max((-dv).max(0.0)),
            Bound::Lower => sign_defect = sign_defect.max(dv.max(0.0)),
        }
    }
    let scale = 1.0 + u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if sign_defect > 1e-9 * scale {
        residual += sign_defect / lambda;
    }
    Ok((point.d, residual, iterations))
}

/// A decreasing sequence of positive regularization parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSchedule(Vec<f64>);

impl LambdaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("empty lambda schedule".into()));
        }
        if values.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("lambda schedule must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("lambda schedule must be strictly decreasing".into()));
        }
        Ok(Self(values))
    }

    /// `start, start·ratio, …` down to (and including the first value below or at) `stop`.
    pub fn geometric(start: f64, stop: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) || !(start > 0.0) || !(stop > 0.0) || stop > start {
            return Err(Error::InvalidConfig("invalid geometric schedule".into()));
        }
        let mut values = vec![start];
        let mut x = start;
        while x > stop * (1.0 + 1e-12) {
            x *= ratio;
            values.push(x);
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for LambdaSchedule {
    /// Halving from `1e-1` down to `1e-6`.
    fn default() -> Self {
        Self::geometric(1e-1, 1e-6, 0.5).unwrap()
    }
}

/// All intermediate values of the minimal-subgradient extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct SubgradientTrace {
    pub minimal: Field,
    /// `(λ, A_λ(u))` for every level visited.
    pub levels: Vec<(f64, Field)>,
    pub last_change: f64,
    pub converged: bool,
}

/// The element of least `L²(m)` norm of `∂E(u)`, as the extrapolated limit of
/// `A_λ(u)` along `schedule`.
///
/// When the extrapolation has not settled but `E` is differentiable at `u`
/// (so `∂E(u) = {∇E(u)}`), the closed-form gradient is returned provided the
/// trace agrees with it: `‖A_λ(u)‖` is nondecreasing along the schedule and
/// stays below `‖∇E(u)‖`. Near-ties in `u` can push the asymptotic range of
/// the extrapolation below the end of the schedule.
pub fn minimal_subgradient(form: &FormDescriptor, u: &Field, space: &MeasureSpace, cfg: &SolverConfig, schedule: &LambdaSchedule) -> Result<Field> {
    let trace = minimal_subgradient_trace(form, u, space, cfg, schedule)?;
    if trace.converged {
        return Ok(trace.minimal);
    }
    if let Some(g) = analytic_gradient(form, u, space)? {
        if gradient_consistent(&trace, &g, space) {
            return Ok(g);
        }
    }
    Err(Error::NonCauchy {
        last: trace.minimal,
        last_change: trace.last_change,
    })
}

fn gradient_consistent(trace: &SubgradientTrace, g: &Field, space: &MeasureSpace) -> bool {
    let gn = m_norm(g, space);
    let slack = 1e-9 * (1.0 + gn);
    if trace.levels.iter().any(|(_, a)| m_norm(a, space) > gn + slack) {
        return false;
    }
    // ‖A_λ(u)‖ increases to ‖∂⁰E(u)‖ as λ decreases.
    let norms: Vec<f64> = trace.levels.iter().map(|(_, a)| m_norm(a, space)).collect();
    norms.len() >= 4 && norms.windows(2).all(|w| w[1] >= w[0] - slack)
}

/// Like [`minimal_subgradient`] but returns the whole trace and reports a
/// missing Cauchy stop through `converged` instead of an error.
pub fn minimal_subgradient_trace(form: &FormDescriptor, u: &Field, space: &MeasureSpace, cfg: &SolverConfig, schedule: &LambdaSchedule) -> Result<SubgradientTrace> {
    let mut levels: Vec<(f64, Field)> = Vec::new();
    let mut previous: Option<Field> = None;
    let mut last_change = f64::INFINITY;
    let mut settled = 0;
    // An unsettled schedule is continued by up to six levels at its last
    // ratio: a near-tie in `u` can delay the asymptotic range.
    let values = schedule.values();
    let nominal = values.len();
    let ratio = if nominal > 1 { values[nominal - 1] / values[nominal - 2] } else { 0.5 };
    let extension = (1..=6).map(|k| values[nominal - 1] * ratio.powi(k));
    for (k, lambda) in values.iter().copied().chain(extension).enumerate() {
        if k >= nominal && settled >= 1 {
            break;
        }
        let a = yosida(form, u, lambda, space, cfg)?;
        levels.push((lambda, a));
        let extrapolated = extrapolate_fields(&levels);
        if let Some(prev) = &previous {
            last_change = m_norm(&(&extrapolated - prev), space);
            let size = m_norm(&extrapolated, space);
            // Two agreeing steps in a row, so a single lucky coincidence in
            // the pre-asymptotic range does not stop the search.
            settled = if last_change <= cfg.cauchy_tolerance * (1.0 + size) { settled + 1 } else { 0 };
            if levels.len() >= 4 && settled >= 2 {
                return Ok(SubgradientTrace {
                    minimal: extrapolated,
                    levels,
                    last_change,
                    converged: true,
                });
            }
        }
        previous = Some(extrapolated);
    }
    // At the end one settled step is all that is available.
    Ok(SubgradientTrace {
        minimal: previous.unwrap(),
        levels,
        last_change,
        converged: settled >= 1,
    })
}

/// Limit estimate for values sampled along a geometric `λ` schedule.
///
/// The sequence is accelerated by up to three passes of a vector Aitken step
/// `S'ₖ = Sₖ + ΔSₖ·ρ/(1 − ρ)` with `ρ = ‖ΔSₖ‖ / ‖ΔSₖ₋₁‖` clamped to
/// `[0, 0.9]`. With halving steps this is plain Richardson when the error is
/// linear in `λ`, and it also removes the `√λ` rate seen for power sums with
/// exponent between 1 and 2 at tied values.
pub fn extrapolate_sequence(values: &[Vec<f64>]) -> Vec<f64> {
    assert!(!values.is_empty());
    let mut seq: Vec<Vec<f64>> = values.to_vec();
    for _ in 0..3 {
        if seq.len() < 3 {
            break;
        }
        let next: Vec<Vec<f64>> = (2..seq.len())
            .map(|k| {
                let d1 = diff(&seq[k], &seq[k - 1]);
                let d0 = diff(&seq[k - 1], &seq[k - 2]);
                let (n1, n0) = (euclid(&d1), euclid(&d0));
                let rho = if n0 > 0.0 { (n1 / n0).clamp(0.0, 0.9) } else { 0.0 };
                let f = rho / (1.0 - rho);
                seq[k].iter().zip(&d1).map(|(s, d)| s + f * d).collect()
            })
            .collect();
        seq = next;
    }
    seq.pop().unwrap()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn euclid(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn extrapolate_fields(levels: &[(f64, Field)]) -> Field {
    let seq: Vec<Vec<f64>> = levels.iter().map(|(_, a)| a.values().to_vec()).collect();
    Field::from(extrapolate_sequence(&seq))
}

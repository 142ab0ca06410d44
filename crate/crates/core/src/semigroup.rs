//! The gradient-flow semigroup `T_t` of a form, approximated by implicit
//! Euler: `u_{k+1} = prox(u_k, τ)`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::forms::{check_symmetric_psd, FormDescriptor};
use crate::prox::{prox, SolverConfig};
use crate::report::{Counterexample, PropertyRecord, Tally, ToleranceClass};
use crate::space::{lp_norm, Field, MeasureSpace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub energies: Vec<f64>,
    pub step_size: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory holds the initial datum")
    }

    /// One row per `(time, point)`: `time,point,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,point,value\n");
        for (t, state) in self.times.iter().zip(&self.states) {
            for (i, x) in state.iter().enumerate() {
                writeln!(out, "{t},{i},{x}").unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }
}

/// A failed flow keeps the steps that did succeed.
#[derive(Debug, Error)]
#[error("gradient flow stopped at step {} of {planned}: {source}", .partial.states.len() - 1)]
pub struct FlowFailure {
    pub partial: Trajectory,
    pub planned: usize,
    #[source]
    pub source: Error,
}

/// Implicit Euler with `steps` equal steps up to `t_final`. `t_final = 0`
/// yields the one-state trajectory `[u0]`.
pub fn flow(
    form: &FormDescriptor,
    u0: &Field,
    t_final: f64,
    steps: usize,
    space: &MeasureSpace,
    cfg: &SolverConfig,
) -> std::result::Result<Trajectory, FlowFailure> {
    let fail_early = |source| FlowFailure {
        partial: Trajectory {
            times: vec![],
            states: vec![],
            energies: vec![],
            step_size: 0.0,
        },
        planned: steps,
        source,
    };
    if let Err(e) = form.check(u0).and_then(|_| space.check(u0)) {
        return Err(fail_early(e));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(fail_early(Error::InvalidConfig(format!(
            "final time must be nonnegative, got {t_final}"
        ))));
    }
    if steps == 0 {
        return Err(fail_early(Error::InvalidConfig("steps must be at least 1".into())));
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        energies: vec![form.energy(u0.values())],
        step_size: if t_final == 0.0 { 0.0 } else { t_final / steps as f64 },
    };
    if t_final == 0.0 {
        return Ok(traj);
    }
    let tau = traj.step_size;
    for k in 1..=steps {
        let current = traj.final_state().clone();
        match prox(form, &current, tau, space, cfg) {
            Ok(r) => {
                traj.times.push(if k == steps { t_final } else { tau * k as f64 });
                traj.energies.push(form.energy(r.minimizer.values()));
                traj.states.push(r.minimizer);
            }
            Err(source) => {
                return Err(FlowFailure {
                    partial: traj,
                    planned: steps,
                    source,
                })
            }
        }
    }
    Ok(traj)
}

/// `exp(-2t M⁻¹Q) u0`, the exact flow of `E(u) = uᵀQu` in `L²(m)`, by
/// diagonalizing the symmetric matrix `M^{-1/2} Q M^{-1/2}`.
pub fn exact_quadratic_flow(q: &DMatrix<f64>, u0: &Field, t: f64, space: &MeasureSpace) -> Result<Field> {
    space.check(u0)?;
    if q.nrows() != space.size() {
        return Err(Error::DimensionMismatch {
            expected: space.size(),
            found: q.nrows(),
        });
    }
    check_symmetric_psd(q)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidConfig(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let n = space.size();
    let root: Vec<f64> = space.weights().iter().map(|w| w.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |r, c| q[(r, c)] / (root[r] * root[c]));
    let eig = s.symmetric_eigen();
    let y = DVector::from_fn(n, |i, _| root[i] * u0[i]);
    let coeffs = eig.eigenvectors.transpose() * y;
    let decayed = DVector::from_fn(n, |k, _| coeffs[k] * (-2.0 * t * eig.eigenvalues[k].max(0.0)).exp());
    let z = &eig.eigenvectors * decayed;
    Ok(Field::from((0..n).map(|i| z[i] / root[i]).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeOptions {
    /// Implicit Euler steps used to reach each probed time.
    pub steps: usize,
    pub tolerance: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            steps: 8,
            tolerance: ToleranceClass::ProxMediated.default_tolerance(),
        }
    }
}

fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// Checks `‖T_t u - T_t v‖_p ≤ ‖u - v‖_p` for every pair, time and exponent,
/// and `T_t u ≥ T_t v` for pairs with `u ≥ v`. Returns one record per
/// exponent followed by the order-preservation record.
pub fn markov_probe(
    form: &FormDescriptor,
    pairs: &[(Field, Field)],
    t_grid: &[f64],
    p_grid: &[f64],
    space: &MeasureSpace,
    cfg: &SolverConfig,
    opts: &ProbeOptions,
) -> Vec<PropertyRecord> {
    let class = ToleranceClass::ProxMediated;
    let mut contraction: Vec<Tally> = p_grid
        .iter()
        .map(|&p| {
            let label = exponent_label(p);
            Tally::new(
                &format!("markov-contraction-p{label}"),
                &format!("‖T_t u - T_t v‖_{label} ≤ ‖u - v‖_{label}"),
                class,
                opts.tolerance,
            )
        })
        .collect();
    let mut order = Tally::new("markov-order", "u ≥ v ⇒ T_t u ≥ T_t v", class, opts.tolerance);

    for (u, v) in pairs {
        for &t in t_grid {
            let evolve = |x: &Field| -> Option<Field> {
                if t == 0.0 {
                    return Some(x.clone());
                }
                flow(form, x, t, opts.steps, space, cfg)
                    .ok()
                    .map(|tr| tr.final_state().clone())
            };
            let (tu, tv) = match (evolve(u), evolve(v)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    contraction.iter_mut().for_each(Tally::solver_failure);
                    order.solver_failure();
                    continue;
                }
            };
            let payload = |p: Option<f64>, margin: f64| {
                let mut c = Counterexample::new(margin).with_u(u).with_v(v);
                c.t = Some(t);
                c.p = p;
                c.steps = Some(opts.steps);
                c
            };
            let before_diff = u - v;
            let after_diff = &tu - &tv;
            for (tally, &p) in contraction.iter_mut().zip(p_grid) {
                let before = lp_norm(&before_diff, p, space).unwrap_or(f64::NAN);
                let after = lp_norm(&after_diff, p, space).unwrap_or(f64::NAN);
                let margin = after - before;
                tally.observe(margin, 1.0 + before, || payload(Some(p), margin));
            }
            if u.dominates(v) {
                let margin = (&tv - &tu).iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
                let scale = 1.0 + u.sup_norm().max(v.sup_norm());
                order.observe(margin, scale, || payload(None, margin));
            }
        }
    }
    let mut records: Vec<PropertyRecord> = contraction.into_iter().map(Tally::finish).collect();
    if order.violations() == 0 && order_samples(pairs) == 0 {
        order.note("no ordered pairs supplied");
    }
    records.push(order.finish());
    records
}

fn order_samples(pairs: &[(Field, Field)]) -> usize {
    pairs.iter().filter(|(u, v)| u.dominates(v)).count()
}

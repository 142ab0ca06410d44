//! Primal active-set method for small box-constrained strictly convex QPs:
//! minimize `½ zᵀGz - cᵀz` subject to `lo ≤ z ≤ hi`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bound {
    Free,
    Lower,
    Upper,
}

#[derive(Debug)]
pub(crate) struct BoxQpSolution {
    pub z: DVector<f64>,
    pub state: Vec<Bound>,
}

/// Returns `None` if the iteration cap is hit (cycling under degeneracy) or
/// a reduced system fails to factor.
pub(crate) fn solve_box_qp(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    start: Option<&DVector<f64>>,
) -> Option<BoxQpSolution> {
    let n = c.len();
    let mut z = match start {
        Some(s) => s.clone(),
        None => DVector::zeros(n),
    };
    let mut state = vec![Bound::Free; n];
    for k in 0..n {
        if z[k] <= lo[k] {
            z[k] = lo[k];
            state[k] = Bound::Lower;
        } else if z[k] >= hi[k] {
            z[k] = hi[k];
            state[k] = Bound::Upper;
        }
    }
    let scale = g.diagonal().amax().max(f64::MIN_POSITIVE);
    let max_iter = 50 * n + 100;
    for _ in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&k| state[k] == Bound::Free).collect();
        let mut target = z.clone();
        if !free.is_empty() {
            let nf = free.len();
            let gff = DMatrix::from_fn(nf, nf, |a, b| g[(free[a], free[b])]);
            let mut rhs = DVector::from_fn(nf, |a, _| c[free[a]]);
            for k in (0..n).filter(|&k| state[k] != Bound::Free) {
                for (a, &f) in free.iter().enumerate() {
                    rhs[a] -= g[(f, k)] * z[k];
                }
            }
            let y = gff.cholesky()?.solve(&rhs);
            for (a, &f) in free.iter().enumerate() {
                target[f] = y[a];
            }
        }

        // Longest feasible step toward the subspace minimizer.
        let mut alpha = 1.0;
        let mut blocking = None;
        for &f in &free {
            let p = target[f] - z[f];
            if p < 0.0 && target[f] < lo[f] {
                let a = (lo[f] - z[f]) / p;
                if a < alpha {
                    alpha = a;
                    blocking = Some((f, Bound::Lower));
                }
            } else if p > 0.0 && target[f] > hi[f] {
                let a = (hi[f] - z[f]) / p;
                if a < alpha {
                    alpha = a;
                    blocking = Some((f, Bound::Upper));
                }
            }
        }
        for &f in &free {
            z[f] += alpha.max(0.0) * (target[f] - z[f]);
        }
        if let Some((f, b)) = blocking {
            state[f] = b;
            z[f] = if b == Bound::Lower { lo[f] } else { hi[f] };
            continue;
        }

        // At the subspace minimizer: release the bound with the most
        // negative multiplier, or stop.
        let grad = g * &z - c;
        let mut worst = 0.0;
        let mut release = None;
        for k in 0..n {
            let violation = match state[k] {
                Bound::Lower => -grad[k],
                Bound::Upper => grad[k],
                Bound::Free => continue,
            };
            if violation > worst {
                worst = violation;
                release = Some(k);
            }
        }
        match release {
            Some(k) if worst > 1e-14 * scale * (1.0 + z.amax()) => state[k] = Bound::Free,
            _ => return Some(BoxQpSolution { z, state }),
        }
    }
    None
}

//! One-sided slopes `Λ±(u,v)`, regularity, quadraticity and subdifferential
//! sandwiches.
//!
//! Slopes come as enclosures. Since `σ ↦ E(u + σv)` is convex, the difference
//! quotient `g(σ) = (E(u + σv) - E(u))/σ` is nondecreasing, so
//! `g(-σ) ≤ Λ⁻(u,v) ≤ Λ⁺(u,v) ≤ g(σ)` for every `σ > 0`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::{analytic_slopes, FormDescriptor};
use crate::prox::{envelope, minimal_subgradient, yosida, LambdaSchedule, SolverConfig};
use crate::space::{inner, m_norm, Field, MeasureSpace};

/// Geometric ladder `σ_k = start · ratio^k · scale` down to `floor · scale`,
/// where `scale = ‖u‖ / ‖v‖` (or `1/‖v‖` when `u = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaLadder {
    pub start: f64,
    pub ratio: f64,
    pub floor: f64,
}

impl Default for SigmaLadder {
    fn default() -> Self {
        Self {
            start: 1e-1,
            ratio: 0.5,
            floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEnclosure {
    /// `g(-σ*)`, widened by the rounding bound.
    pub lower: f64,
    /// `g(σ*)`, widened by the rounding bound.
    pub upper: f64,
    pub minus: f64,
    pub plus: f64,
    pub sigma: f64,
    /// Bound on the floating-point error of the quotients at `σ*`.
    pub rounding: f64,
    pub certified: bool,
    /// Whether the estimates are the closed-form slopes, checked against the
    /// brackets.
    pub analytic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SlopeEnclosure {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn gap(&self) -> f64 {
        self.plus - self.minus
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.minus + self.plus)
    }

    fn zero() -> Self {
        Self {
            lower: 0.0,
            upper: 0.0,
            minus: 0.0,
            plus: 0.0,
            sigma: 0.0,
            rounding: 0.0,
            certified: true,
            analytic: false,
            note: None,
        }
    }
}

fn euclid(u: &Field) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Level {
    sigma: f64,
    gp: f64,
    gm: f64,
    err: f64,
}

/// Quotients `g(±σ)` and their rounding bounds along the ladder; `v ≠ 0`.
fn quotient_ladder(form: &FormDescriptor, u: &Field, v: &Field, ladder: &SigmaLadder) -> Vec<Level> {
    let nv = euclid(v);
    let nu = euclid(u);
    let scale = if nu > 0.0 { nu / nv } else { 1.0 / nv };
    let e0 = form.energy(u.values());
    let mut levels = Vec::new();
    let mut sigma = ladder.start * scale;
    while sigma >= ladder.floor * scale {
        let ep = form.energy(u.axpy(sigma, v).values());
        let em = form.energy(u.axpy(-sigma, v).values());
        let gp = (ep - e0) / sigma;
        let gm = (e0 - em) / sigma;
        // Convexity forbids gm > gp; an inversion is rounding the bound
        // above missed (the inputs u ± σv are rounded too), so it widens the
        // bound.
        let err = (16.0 * f64::EPSILON * (e0.abs() + ep.abs() + em.abs()) / sigma).max(gm - gp);
        levels.push(Level { sigma, gp, gm, err });
        sigma *= ladder.ratio;
    }
    levels
}

pub fn slope_enclosure(form: &FormDescriptor, u: &Field, v: &Field, tol: f64) -> Result<SlopeEnclosure> {
    slope_enclosure_with(form, u, v, tol, &SigmaLadder::default())
}

pub fn slope_enclosure_with(form: &FormDescriptor, u: &Field, v: &Field, tol: f64, ladder: &SigmaLadder) -> Result<SlopeEnclosure> {
    if !(tol > 0.0) {
        return Err(crate::Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let oracle = analytic_slopes(form, u, v)?;
    let nv = euclid(v);
    if nv == 0.0 {
        return Ok(SlopeEnclosure::zero());
    }
    let levels = quotient_ladder(form, u, v, ladder);
    let best = (0..levels.len())
        .min_by(|&a, &b| {
            let w = |l: &Level| l.gp - l.gm + 2.0 * l.err;
            w(&levels[a]).total_cmp(&w(&levels[b]))
        })
        .expect("ladder has at least one level");
    let at = &levels[best];
    let lower = at.gm - at.err;
    let upper = at.gp + at.err;
    let r = ladder.ratio;
    let (mut minus, mut plus) = if best > 0 {
        let prev = &levels[best - 1];
        ((at.gm - r * prev.gm) / (1.0 - r), (at.gp - r * prev.gp) / (1.0 - r))
    } else {
        (at.gm, at.gp)
    };
    minus = minus.clamp(lower, upper);
    plus = plus.clamp(lower, upper);
    if minus > plus {
        let mid = 0.5 * (minus + plus);
        minus = mid;
        plus = mid;
    }
    let mut out = SlopeEnclosure {
        lower,
        upper,
        minus,
        plus,
        sigma: at.sigma,
        rounding: at.err,
        certified: upper - lower < tol,
        analytic: false,
        note: None,
    };
    if let Some((am, ap)) = oracle {
        let slack = tol * (1.0 + am.abs().max(ap.abs()));
        if am >= lower - slack && ap <= upper + slack && am <= ap {
            out.minus = am;
            out.plus = ap;
            // Keep the estimates inside the reported brackets.
            out.lower = out.lower.min(am);
            out.upper = out.upper.max(ap);
            out.certified = true;
            out.analytic = true;
        } else {
            out.note = Some("closed-form slopes fall outside the brackets".into());
        }
    }
    if !out.certified && out.note.is_none() {
        out.note = Some("irregular or noisy".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub worst_gap: f64,
    pub worst_direction: Option<Field>,
    pub uncertified: usize,
    pub directions: usize,
}

/// Regular at `u` iff every direction certifies `Λ⁺ - Λ⁻ ≤ tol`.
pub fn regularity_probe(form: &FormDescriptor, u: &Field, directions: &[Field], tol: f64) -> Result<RegularityReport> {
    let mut report = RegularityReport {
        regular: true,
        worst_gap: 0.0,
        worst_direction: None,
        uncertified: 0,
        directions: directions.len(),
    };
    for v in directions {
        let e = slope_enclosure(form, u, v, tol)?;
        // An uncertified enclosure can only bound the gap by its width.
        let gap = if e.certified { e.gap() } else { e.width() };
        if !e.certified {
            report.uncertified += 1;
        }
        if gap > report.worst_gap || report.worst_direction.is_none() {
            report.worst_gap = gap;
            report.worst_direction = Some(v.clone());
        }
        if !e.certified || gap > tol {
            report.regular = false;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearityReport {
    pub regular: bool,
    /// `|Λ(u, λv₁+(1-λ)v₂) - λΛ(u,v₁) - (1-λ)Λ(u,v₂)|`, regular case only.
    pub linearity_defect: Option<f64>,
    /// `Λ⁺(u,w) - λΛ⁺(u,v₁) - (1-λ)Λ⁺(u,v₂)`; nonpositive for convex `Λ⁺`.
    pub convexity_margin: f64,
    /// `λΛ⁻(u,v₁) + (1-λ)Λ⁻(u,v₂) - Λ⁻(u,w)`; nonpositive for concave `Λ⁻`.
    pub concavity_margin: f64,
    /// Worst relative defect of positive 1-homogeneity in either argument.
    pub homogeneity_defect: f64,
    /// `|Λ⁺(u,-v₁) + Λ⁻(u,v₁)|`.
    pub reflection_defect: f64,
    pub reflection_allowance: f64,
    pub passed: bool,
}

pub fn second_argument_linearity_check(
    form: &FormDescriptor,
    u: &Field,
    v1: &Field,
    v2: &Field,
    lambda: f64,
    tol: f64,
) -> Result<LinearityReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(crate::Error::InvalidParameter(format!("λ must lie in [0, 1], got {lambda}")));
    }
    let w = v1.scale(lambda).axpy(1.0 - lambda, v2);
    let e1 = slope_enclosure(form, u, v1, tol)?;
    let e2 = slope_enclosure(form, u, v2, tol)?;
    let ew = slope_enclosure(form, u, &w, tol)?;
    let size = 1.0 + e1.plus.abs().max(e2.plus.abs()).max(ew.plus.abs());
    let regular = [&e1, &e2, &ew].iter().all(|e| e.certified && e.gap() <= tol * size);
    let linearity_defect =
        regular.then(|| (ew.midpoint() - lambda * e1.midpoint() - (1.0 - lambda) * e2.midpoint()).abs());
    let convexity_margin = ew.plus - lambda * e1.plus - (1.0 - lambda) * e2.plus;
    let concavity_margin = lambda * e1.minus + (1.0 - lambda) * e2.minus - ew.minus;

    let mut homogeneity_defect: f64 = 0.0;
    for c in [0.5, 2.0, 10.0] {
        let first = slope_enclosure(form, &u.scale(c), v1, tol)?;
        let second = slope_enclosure(form, u, &v1.scale(c), tol)?;
        for e in [&first, &second] {
            let d = (e.minus - c * e1.minus).abs().max((e.plus - c * e1.plus).abs());
            homogeneity_defect = homogeneity_defect.max(d / (1.0 + c * e1.plus.abs().max(e1.minus.abs())));
        }
    }
    let reflected = slope_enclosure(form, u, &v1.scale(-1.0), tol)?;
    let reflection_defect = (reflected.plus + e1.minus).abs();
    let reflection_allowance = if reflected.analytic && e1.analytic {
        tol * size
    } else {
        reflected.width().max(e1.width()) + tol * size
    };

    let passed = linearity_defect.is_none_or(|d| d <= tol * size)
        && convexity_margin <= tol * size
        && concavity_margin <= tol * size
        && homogeneity_defect <= tol.max(1e-6)
        && reflection_defect <= reflection_allowance;
    Ok(LinearityReport {
        regular,
        linearity_defect,
        convexity_margin,
        concavity_margin,
        homogeneity_defect,
        reflection_defect,
        reflection_allowance,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticityVerdict {
    pub quadratic: bool,
    /// Sub-verdict (a).
    pub regular: bool,
    pub regularity_gap: f64,
    /// Sub-verdict (b): `max |Λ(u,v) - Λ(v,u)|`.
    pub symmetry_defect: f64,
    pub symmetry_witness: Option<(Field, Field)>,
    /// Sub-verdict (c): `max |E(u+v) + E(u-v) - 2E(u) - 2E(v)|`.
    pub parallelogram_defect: f64,
    pub parallelogram_witness: Option<(Field, Field)>,
    /// Whether "regular and symmetric" agrees with "parallelogram law holds".
    pub agreement: bool,
    pub samples: usize,
}

pub fn quadraticity_test(form: &FormDescriptor, samples: &[(Field, Field)], tol: f64) -> Result<QuadraticityVerdict> {
    if samples.is_empty() {
        return Err(crate::Error::InvalidParameter("quadraticity test needs samples".into()));
    }
    let mut v = QuadraticityVerdict {
        quadratic: false,
        regular: true,
        regularity_gap: 0.0,
        symmetry_defect: 0.0,
        symmetry_witness: None,
        parallelogram_defect: 0.0,
        parallelogram_witness: None,
        agreement: false,
        samples: samples.len(),
    };
    // Each pair is also tried with `b` reflected: energies that weigh the two
    // signs differently can look symmetric on same-sign pairs.
    let reflected: Vec<(Field, Field)> = samples.iter().map(|(a, b)| (a.clone(), b.scale(-1.0))).collect();
    for (a, b) in samples.iter().chain(&reflected) {
        let ab = slope_enclosure(form, a, b, tol)?;
        let ba = slope_enclosure(form, b, a, tol)?;
        for e in [&ab, &ba] {
            let gap = if e.certified { e.gap() } else { e.width() };
            v.regularity_gap = v.regularity_gap.max(gap);
            if !e.certified || gap > tol {
                v.regular = false;
            }
        }
        let sym = (ab.midpoint() - ba.midpoint()).abs();
        if sym > v.symmetry_defect || v.symmetry_witness.is_none() {
            v.symmetry_defect = sym;
            v.symmetry_witness = Some((a.clone(), b.clone()));
        }
        let e = |x: &Field| form.energy(x.values());
        let par = (e(&(a + b)) + e(&(a - b)) - 2.0 * e(a) - 2.0 * e(b)).abs();
        if par > v.parallelogram_defect || v.parallelogram_witness.is_none() {
            v.parallelogram_defect = par;
            v.parallelogram_witness = Some((a.clone(), b.clone()));
        }
    }
    let symmetric = v.symmetry_defect <= tol;
    let parallelogram = v.parallelogram_defect <= tol;
    v.quadratic = v.regular && symmetric && parallelogram;
    v.agreement = (v.regular && symmetric) == parallelogram;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `inner(ξ, v)`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub enclosure: SlopeEnclosure,
    /// Distance outside `[lower, upper]`; nonpositive inside.
    pub margin: f64,
    pub passed: bool,
}

/// Checks `g(-σ*) - tol ≤ inner(ξ, v) ≤ g(σ*) + tol` for a given `ξ`.
pub fn sandwich_with(form: &FormDescriptor, xi: &Field, u: &Field, v: &Field, space: &MeasureSpace, tol: f64) -> Result<SandwichReport> {
    let enclosure = slope_enclosure(form, u, v, tol)?;
    let value = inner(xi, v, space)?;
    let margin = (enclosure.lower - value).max(value - enclosure.upper);
    Ok(SandwichReport {
        value,
        lower: enclosure.lower,
        upper: enclosure.upper,
        passed: margin <= tol,
        enclosure,
        margin,
    })
}

/// [`sandwich_with`] at the minimal subgradient.
pub fn sandwich_check(form: &FormDescriptor, u: &Field, v: &Field, space: &MeasureSpace, cfg: &SolverConfig, tol: f64) -> Result<SandwichReport> {
    let xi = minimal_subgradient(form, u, space, cfg, &LambdaSchedule::default())?;
    sandwich_with(form, &xi, u, v, space, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YosidaSandwichReport {
    /// `(λ, inner(A_λ(u), v))` along the schedule.
    pub values: Vec<(f64, f64)>,
    /// Limit of the values as `λ → 0`, that is `inner(∂⁰E(u), v)`.
    pub accumulation: f64,
    pub lower: f64,
    pub upper: f64,
    /// Whether every listed value lies in `[lower - tol, upper + tol]`.
    pub all_inside: bool,
    /// Finite-`λ` brackets: the tightest of `g(-σ) - δ_λ/σ` and
    /// `g(σ) + δ_λ/σ` over the ladder, with `δ_λ = E(u) - E_λ(u)`. They hold
    /// for every `λ` since `E_λ ≤ E` is convex with gradient `A_λ`.
    pub finite_lambda_bounds: Vec<(f64, f64)>,
    pub finite_lambda_violations: usize,
    pub regular: bool,
    pub passed: bool,
}

pub fn yosida_sandwich_check(
    form: &FormDescriptor,
    u: &Field,
    v: &Field,
    schedule: &LambdaSchedule,
    space: &MeasureSpace,
    cfg: &SolverConfig,
    tol: f64,
) -> Result<YosidaSandwichReport> {
    let enc = slope_enclosure(form, u, v, tol)?;
    let ladder = if euclid(v) > 0.0 {
        quotient_ladder(form, u, v, &SigmaLadder::default())
    } else {
        Vec::new()
    };
    let e0 = form.energy(u.values());
    let mut values = Vec::new();
    let mut bounds = Vec::new();
    let mut finite_violations = 0;
    let mut all_inside = true;
    for &lambda in schedule.values() {
        let a = yosida(form, u, lambda, space, cfg)?;
        let x = inner(&a, v, space)?;
        let deficit = (e0 - envelope(form, u, lambda, space, cfg)?).max(0.0);
        let b = ladder.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), l| {
            (lo.max(l.gm - l.err - deficit / l.sigma), hi.min(l.gp + l.err + deficit / l.sigma))
        });
        let b = if ladder.is_empty() { (0.0, 0.0) } else { b };
        let slack = tol * (1.0 + x.abs());
        if x < b.0 - slack || x > b.1 + slack {
            finite_violations += 1;
        }
        bounds.push(b);
        if x < enc.lower - tol || x > enc.upper + tol {
            all_inside = false;
        }
        values.push((lambda, x));
    }
    // `A_λ(u) → ∂⁰E(u)` in norm, so the limit of the pairings is the pairing
    // of the limit.
    let xi = minimal_subgradient(form, u, space, cfg, &LambdaSchedule::default())?;
    let accumulation = inner(&xi, v, space)?;
    let slack = tol * (1.0 + accumulation.abs());
    let regular = enc.certified && enc.gap() <= tol;
    let inside = accumulation >= enc.lower - slack && accumulation <= enc.upper + slack;
    let converges = !regular || (accumulation - enc.midpoint()).abs() <= slack;
    Ok(YosidaSandwichReport {
        values,
        accumulation,
        lower: enc.lower,
        upper: enc.upper,
        all_inside,
        finite_lambda_bounds: bounds,
        finite_lambda_violations: finite_violations,
        regular,
        passed: inside && converges && finite_violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipWitness {
    pub direction: Field,
    pub pairing: f64,
    pub minus: f64,
    pub plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub accepted: bool,
    pub directions: usize,
    /// Largest excursion of `inner(ξ, v)` outside `[Λ⁻, Λ⁺]`, relative to
    /// `1 + |Λ±|`.
    pub worst_margin: f64,
    /// The direction with the worst excursion when `ξ` is rejected.
    pub witness: Option<MembershipWitness>,
}

/// Whether `ξ dm` is an extended subgradient: `Λ⁻(u,v) ≤ inner(ξ, v) ≤
/// Λ⁺(u,v)` along every probed direction, up to `tol · (1 + |Λ±|)`.
pub fn extended_subdifferential_check(
    form: &FormDescriptor,
    u: &Field,
    xi: &Field,
    directions: &[Field],
    space: &MeasureSpace,
    tol: f64,
) -> Result<MembershipReport> {
    space.check(xi)?;
    let mut report = MembershipReport {
        accepted: true,
        directions: directions.len(),
        worst_margin: f64::NEG_INFINITY,
        witness: None,
    };
    for v in directions {
        let e = slope_enclosure(form, u, v, tol)?;
        let pairing = inner(xi, v, space)?;
        let scale = 1.0 + e.minus.abs().max(e.plus.abs());
        let margin = (e.minus - pairing).max(pairing - e.plus) / scale;
        if margin > report.worst_margin {
            report.worst_margin = margin;
            if margin > tol {
                report.witness = Some(MembershipWitness {
                    direction: v.clone(),
                    pairing,
                    minus: e.minus,
                    plus: e.plus,
                });
            }
        }
        if margin > tol {
            report.accepted = false;
        }
    }
    if directions.is_empty() {
        report.worst_margin = 0.0;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    /// Convex combinations of accepted candidates are accepted.
    pub convex: bool,
    /// `cξ` is accepted at `cu` for `c ∈ {0.5, 2, 10}`.
    pub scaling: bool,
}

/// Convexity and 1-homogeneity of the extended subdifferential, checked on
/// candidates that were accepted at `u`.
pub fn closure_check(
    form: &FormDescriptor,
    u: &Field,
    accepted: &[Field],
    directions: &[Field],
    space: &MeasureSpace,
    tol: f64,
) -> Result<ClosureReport> {
    let mut convex = true;
    for (k, a) in accepted.iter().enumerate() {
        for b in &accepted[k + 1..] {
            for t in [0.3, 0.5] {
                let mix = a.scale(t).axpy(1.0 - t, b);
                convex &= extended_subdifferential_check(form, u, &mix, directions, space, tol)?.accepted;
            }
        }
    }
    let mut scaling = true;
    for a in accepted {
        for c in [0.5, 2.0, 10.0] {
            scaling &= extended_subdifferential_check(form, &u.scale(c), &a.scale(c), directions, space, tol)?.accepted;
        }
    }
    Ok(ClosureReport { convex, scaling })
}

/// `‖a - b‖_m`.
pub fn m_distance(a: &Field, b: &Field, space: &MeasureSpace) -> f64 {
    m_norm(&(a - b), space)
}

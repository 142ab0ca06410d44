//! The Dirichlet-form audit: characterization inequalities checked on seeded
//! random and adversarial samples, aggregated into a [`PropertyReport`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calculus::{
    closure_check, extended_subdifferential_check, quadraticity_test, regularity_probe, sandwich_with,
    slope_enclosure, yosida_sandwich_check, QuadraticityVerdict,
};
use crate::error::{Error, Result};
use crate::forms::{analytic_gradient, locality_of, FormDescriptor, LocalityStructure};
use crate::prox::{envelope, minimal_subgradient, yosida, LambdaSchedule, SolverConfig};
use crate::report::{Counterexample, PropertyRecord, Tally, ToleranceClass};
use crate::sampling::{Profile, Sampler};
use crate::semigroup::{flow, markov_probe, ProbeOptions};
use crate::space::{
    apply_contraction, h_alpha, inner, lp_norm, m_norm, meet_join, Field, MeasureSpace, NormalContraction,
};

pub const HEADER: &str = "Sampled evidence, not a proof: every record reports the worst margin found on \
seeded random and adversarial samples. A pass means no violation was found, not that none exists.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditOptions {
    pub seed: u64,
    /// Pairs per lattice, contraction and homogeneity check.
    pub samples: usize,
    /// Random normal contractions in addition to the fixed ones.
    pub contractions: usize,
    /// Random pairs evolved by the flow, before adversarial ones are added.
    pub flow_pairs: usize,
    /// Points at which the subgradient calculus is checked.
    pub calculus_points: usize,
    pub closed_form_tol: f64,
    pub prox_tol: f64,
    /// Implicit Euler steps per probed time.
    pub flow_steps: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 500,
            contractions: 100,
            flow_pairs: 8,
            calculus_points: 12,
            closed_form_tol: ToleranceClass::ClosedForm.default_tolerance(),
            prox_tol: ToleranceClass::ProxMediated.default_tolerance(),
            flow_steps: 8,
        }
    }
}

impl AuditOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.calculus_points == 0 {
            return Err(Error::InvalidConfig("samples and calculus_points must be at least 1".into()));
        }
        if self.flow_steps == 0 {
            return Err(Error::InvalidConfig("flow_steps must be at least 1".into()));
        }
        for (name, t) in [("closed_form_tol", self.closed_form_tol), ("prox_tol", self.prox_tol)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub header: String,
    pub form: String,
    pub family: String,
    pub size: usize,
    pub seed: u64,
    /// One label per axis: Dirichlet, quadratic, regular, symmetric, local.
    pub verdict: Vec<String>,
    pub records: Vec<PropertyRecord>,
    /// Bug-level disagreements between results that theory ties together.
    pub findings: Vec<Finding>,
    pub solver_failures: usize,
}

impl PropertyReport {
    pub fn record(&self, property: &str) -> Option<&PropertyRecord> {
        self.records.iter().find(|r| r.property == property)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.verdict.iter().any(|l| l == label)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.header).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "form:    {}", self.form).unwrap();
        writeln!(out, "seed:    {}", self.seed).unwrap();
        writeln!(out, "verdict: {}", self.verdict.join(", ")).unwrap();
        writeln!(out).unwrap();
        for r in &self.records {
            let status = match (r.informational, r.passed) {
                (true, _) => "info",
                (false, true) => "pass",
                (false, false) => "FAIL",
            };
            writeln!(
                out,
                "{status:4}  {:<36} samples {:>5}  violations {:>5}  worst {:>12.4e}  tol {:.0e}",
                r.property, r.samples, r.violations, r.worst_margin, r.tolerance
            )
            .unwrap();
        }
        if !self.findings.is_empty() {
            writeln!(out).unwrap();
            for f in &self.findings {
                writeln!(out, "{}: {}", f.severity, f.message).unwrap();
            }
        }
        if self.solver_failures > 0 {
            writeln!(out, "\nsolver failures: {}", self.solver_failures).unwrap();
        }
        out
    }
}

fn energy(form: &FormDescriptor, u: &Field) -> f64 {
    form.energy(u.values())
}

fn energy_norm(form: &FormDescriptor, u: &Field, space: &MeasureSpace) -> f64 {
    (m_norm(u, space).powi(2) + energy(form, u)).sqrt()
}

/// `E(u∨v) + E(u∧v) - E(u) - E(v)`.
fn minmax_margin(form: &FormDescriptor, u: &Field, v: &Field) -> f64 {
    let (lo, hi) = meet_join(u, v).expect("same length");
    energy(form, &hi) + energy(form, &lo) - energy(form, u) - energy(form, v)
}

/// Symmetric and literal readings of the truncation inequality.
fn h_alpha_margins(form: &FormDescriptor, u: &Field, v: &Field, alpha: f64) -> (f64, f64) {
    let huv = energy(form, &h_alpha(u, v, alpha).expect("valid"));
    let hvu = energy(form, &h_alpha(v, u, alpha).expect("valid"));
    let rhs = energy(form, u) + energy(form, v);
    (huv + hvu - rhs, 2.0 * huv - rhs)
}

fn contraction_margin(form: &FormDescriptor, phi: &NormalContraction, u: &Field) -> f64 {
    energy(form, &apply_contraction(phi, u)) - energy(form, u)
}

fn homogeneity_margin(form: &FormDescriptor, u: &Field, nu: f64) -> f64 {
    (energy(form, &u.scale(nu)) - nu * nu * energy(form, u)).abs()
}

fn locality_margin(form: &FormDescriptor, u: &Field, v: &Field) -> f64 {
    (energy(form, &(u + v)) - energy(form, u) - energy(form, v)).abs()
}

fn triangle_margin(form: &FormDescriptor, u: &Field, v: &Field, space: &MeasureSpace) -> f64 {
    energy_norm(form, &(u + v), space) - energy_norm(form, u, space) - energy_norm(form, v, space)
}

fn norm_homogeneity_margin(form: &FormDescriptor, u: &Field, nu: f64, space: &MeasureSpace) -> f64 {
    (energy_norm(form, &u.scale(nu), space) - nu.abs() * energy_norm(form, u, space)).abs()
}

/// `E(Lφ(u)) - L²E(u)` for a normal contraction `φ`.
fn lipschitz_margin(form: &FormDescriptor, phi: &NormalContraction, l: f64, u: &Field) -> f64 {
    energy(form, &apply_contraction(phi, u).scale(l)) - l * l * energy(form, u)
}

/// Pointwise defect of `uv = ½((u+v)² - u² - v²)`; infinite if `E(uv)` is not
/// finite.
fn product_margin(form: &FormDescriptor, u: &Field, v: &Field) -> f64 {
    let uv = u.zip_map(v, |a, b| a * b);
    if !energy(form, &uv).is_finite() {
        return f64::INFINITY;
    }
    let polar = u.zip_map(v, |a, b| 0.5 * ((a + b).powi(2) - a * a - b * b));
    (&uv - &polar).sup_norm()
}

fn pairs(sampler: &mut Sampler, structure: &LocalityStructure, n: usize) -> Vec<(Field, Field)> {
    (0..n).map(|_| sampler.pair(structure)).collect()
}

/// `E(u∨v) + E(u∧v) ≤ E(u) + E(v)` on sampled pairs.
pub fn check_minmax(form: &FormDescriptor, sampler: &mut Sampler, n_samples: usize, tol: f64) -> PropertyRecord {
    let structure = locality_of(form);
    let mut t = Tally::new("minmax", "E(u∨v) + E(u∧v) ≤ E(u) + E(v)", ToleranceClass::ClosedForm, tol);
    for (u, v) in pairs(sampler, &structure, n_samples) {
        let m = minmax_margin(form, &u, &v);
        t.observe(m, 1.0 + energy(form, &u) + energy(form, &v), || Counterexample::new(m).with_u(&u).with_v(&v));
    }
    t.finish()
}

/// Both readings of the truncation inequality over `α ∈ {0, ¼d, ½d, ¾d, d}`
/// with `d = ‖u - v‖_∞`, plus one uniform `α ∈ (0, d)` per pair. Returns the
/// symmetric reading first; the literal reading is informational.
pub fn check_h_alpha(form: &FormDescriptor, sampler: &mut Sampler, n_samples: usize, tol: f64) -> [PropertyRecord; 2] {
    let structure = locality_of(form);
    let mut sym = Tally::new(
        "h-alpha-symmetric",
        "E(H_α(u,v)) + E(H_α(v,u)) ≤ E(u) + E(v)",
        ToleranceClass::ClosedForm,
        tol,
    );
    let mut lit = Tally::new("h-alpha-literal", "2 E(H_α(u,v)) ≤ E(u) + E(v)", ToleranceClass::ClosedForm, tol)
        .informational();
    lit.note("fails at α = 0 whenever E(v) > E(u); recorded for completeness, not used in the verdict");
    for (u, v) in pairs(sampler, &structure, n_samples) {
        let d = (&u - &v).sup_norm();
        let random = sampler.uniform(0.0, 1.0);
        let scale = 1.0 + energy(form, &u) + energy(form, &v);
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0, random] {
            let alpha = frac * d;
            let (ms, ml) = h_alpha_margins(form, &u, &v, alpha);
            let payload = |m: f64| {
                let mut c = Counterexample::new(m).with_u(&u).with_v(&v);
                c.alpha = Some(alpha);
                c
            };
            sym.observe(ms, scale, || payload(ms));
            lit.observe(ml, scale, || payload(ml));
        }
    }
    [sym.finish(), lit.finish()]
}

/// `E(φ(u)) ≤ E(u)` for the fixed contractions and `n_phi` random ones. The
/// first record is the symmetry inequality `E(-u) ≤ E(u)`, followed by one
/// record per class: identity, unit clamp, absolute value, positive part,
/// random.
pub fn check_normal_contraction(
    form: &FormDescriptor,
    sampler: &mut Sampler,
    n_samples: usize,
    n_phi: usize,
    tol: f64,
) -> Vec<PropertyRecord> {
    let class = ToleranceClass::ClosedForm;
    let named = [
        ("contraction-sym", "E(-u) ≤ E(u)", NormalContraction::negation()),
        ("contraction-identity", "E(φ(u)) ≤ E(u), φ = identity", NormalContraction::identity()),
        ("contraction-unit-clamp", "E(0 ∨ u ∧ 1) ≤ E(u)", NormalContraction::unit_clamp()),
        ("contraction-absolute-value", "E(|u|) ≤ E(u)", NormalContraction::absolute_value()),
        ("contraction-positive-part", "E(u⁺) ≤ E(u)", NormalContraction::positive_part()),
    ];
    let mut tallies: Vec<(Tally, NormalContraction)> = named
        .into_iter()
        .map(|(p, s, phi)| (Tally::new(p, s, class, tol), phi))
        .collect();
    let mut random = Tally::new("contraction-random", "E(φ(u)) ≤ E(u), φ random normal contraction", class, tol);
    random.note("sampled members of the contraction class corroborate the symmetry record, which is decisive");
    let fields: Vec<Field> = (0..n_samples).map(|_| sampler.field()).collect();
    for u in &fields {
        let scale = 1.0 + energy(form, u);
        for (t, phi) in &mut tallies {
            let m = contraction_margin(form, phi, u);
            t.observe(m, scale, || {
                let mut c = Counterexample::new(m).with_u(u);
                c.phi = Some(phi.clone());
                c
            });
        }
    }
    for k in 0..n_phi {
        let phi = sampler.contraction();
        // Each random contraction meets a handful of fields, cycling through
        // the pool so every field is used.
        for j in 0..5 {
            let u = &fields[(5 * k + j) % fields.len()];
            // Stretch the field so it straddles the kinks of φ.
            let u = if u.sup_norm() > 0.0 { u.scale(3.0 / u.sup_norm()) } else { u.clone() };
            let m = contraction_margin(form, &phi, &u);
            random.observe(m, 1.0 + energy(form, &u), || {
                let mut c = Counterexample::new(m).with_u(&u);
                c.phi = Some(phi.clone());
                c
            });
        }
    }
    let mut out: Vec<PropertyRecord> = tallies.into_iter().map(|(t, _)| t.finish()).collect();
    out.push(random.finish());
    out
}

const POSITIVE_ONLY: &str = "holds for ν ≥ 0, fails only for ν < 0";

/// `E(νu) = ν²E(u)` for `ν ∈ {-2, -1, 0, ½, 3}`, and `E(u + v) = E(u) + E(v)`
/// for pairs where `u` is zero or constant on the closed neighbourhood of
/// `supp(v)`.
pub fn check_homogeneity_and_locality(form: &FormDescriptor, sampler: &mut Sampler, n_samples: usize, tol: f64) -> [PropertyRecord; 2] {
    let class = ToleranceClass::ClosedForm;
    let mut hom = Tally::new("two-homogeneity", "E(νu) = ν² E(u)", class, tol);
    let mut positive_ok = true;
    for _ in 0..n_samples {
        let u = sampler.field();
        for nu in [-2.0, -1.0, 0.0, 0.5, 3.0] {
            let m = homogeneity_margin(form, &u, nu);
            if nu >= 0.0 && m > tol * (1.0 + nu * nu * energy(form, &u)) {
                positive_ok = false;
            }
            hom.observe(m, 1.0 + nu * nu * energy(form, &u), || {
                let mut c = Counterexample::new(m).with_u(&u);
                c.nu = Some(nu);
                c
            });
        }
    }
    if positive_ok && hom.violations() > 0 {
        hom.note(POSITIVE_ONLY);
    }
    let structure = locality_of(form);
    let mut loc = Tally::new("locality", "E(u + v) = E(u) + E(v) when u is constant near supp(v)", class, tol);
    for k in 0..n_samples {
        let pair = if k % 2 == 0 {
            sampler.disjoint_pair(&structure)
        } else {
            sampler.constant_on_support_pair(&structure)
        };
        if let Some((u, v)) = pair {
            let m = locality_margin(form, &u, &v);
            loc.observe(m, 1.0 + energy(form, &u) + energy(form, &v), || Counterexample::new(m).with_u(&u).with_v(&v));
        }
    }
    if !structure.local {
        loc.note("the form's terms are not additive over separated supports");
    }
    [hom.finish(), loc.finish()]
}

/// Properties of `‖u‖_E = (‖u‖²_m + E(u))^{1/2}`: triangle inequality,
/// absolute homogeneity, `E(φ(u)) ≤ L²E(u)` for `L`-Lipschitz `φ` with
/// `φ(0) = 0` (`L ∈ {½, 2, 7}`), and the polarization identity for products.
pub fn check_energy_norm(form: &FormDescriptor, sampler: &mut Sampler, space: &MeasureSpace, n_samples: usize, tol: f64) -> [PropertyRecord; 4] {
    let class = ToleranceClass::ClosedForm;
    let structure = locality_of(form);
    let mut tri = Tally::new("energy-norm-triangle", "‖u + v‖_E ≤ ‖u‖_E + ‖v‖_E", class, tol);
    let mut hom = Tally::new("energy-norm-homogeneity", "‖νu‖_E = |ν| ‖u‖_E", class, tol);
    let mut lip = Tally::new("lipschitz-action", "E(φ(u)) ≤ L² E(u) for L-Lipschitz φ, φ(0) = 0", class, tol);
    let mut alg = Tally::new("algebra-product", "E(uv) < ∞ and uv = ½((u+v)² - u² - v²)", class, tol);
    let fixed = [
        NormalContraction::identity(),
        NormalContraction::unit_clamp(),
        NormalContraction::absolute_value(),
        NormalContraction::positive_part(),
    ];
    for k in 0..n_samples {
        let (u, v) = sampler.pair(&structure);
        let nu_u = energy_norm(form, &u, space);
        let nu_v = energy_norm(form, &v, space);
        let m = triangle_margin(form, &u, &v, space);
        tri.observe(m, 1.0 + nu_u + nu_v, || Counterexample::new(m).with_u(&u).with_v(&v));
        for nu in [-2.0, -1.0, 0.5, 3.0] {
            let m = norm_homogeneity_margin(form, &u, nu, space);
            hom.observe(m, 1.0 + nu.abs() * nu_u, || {
                let mut c = Counterexample::new(m).with_u(&u);
                c.nu = Some(nu);
                c
            });
        }
        let phi = if k % 2 == 0 { fixed[(k / 2) % fixed.len()].clone() } else { sampler.contraction() };
        for l in [0.5, 2.0, 7.0] {
            let m = lipschitz_margin(form, &phi, l, &u);
            lip.observe(m, 1.0 + l * l * energy(form, &u), || {
                let mut c = Counterexample::new(m).with_u(&u);
                c.phi = Some(phi.clone());
                c.lipschitz = Some(l);
                c
            });
        }
        let m = product_margin(form, &u, &v);
        alg.observe(m, 1.0 + u.sup_norm() * v.sup_norm(), || Counterexample::new(m).with_u(&u).with_v(&v));
    }
    [tri.finish(), hom.finish(), lip.finish(), alg.finish()]
}

struct CalculusOutcome {
    records: Vec<PropertyRecord>,
    regular: bool,
    quadraticity: QuadraticityVerdict,
}

/// Subgradient calculus at sampled points: the identity `inner(∂⁰E(u), u) =
/// 2E(u)`, the norm bound, the envelope identity, slope bounds, sandwiches
/// and extended-subdifferential membership.
fn check_calculus(
    form: &FormDescriptor,
    sampler: &mut Sampler,
    space: &MeasureSpace,
    cfg: &SolverConfig,
    opts: &AuditOptions,
) -> Result<CalculusOutcome> {
    let cf = ToleranceClass::ClosedForm;
    let pm = ToleranceClass::ProxMediated;
    let structure = locality_of(form);
    let n = form.size();
    let mut cdc2 = Tally::new("cdc2", "inner(∂⁰E(u), u) = 2E(u)", pm, 1e-4);
    let mut norm_bound = Tally::new("subgradient-norm-bound", "E(u) ≤ ½ ‖∂⁰E(u)‖ ‖u‖", pm, opts.prox_tol);
    let mut env = Tally::new("envelope-identity", "E_λ(u) = ½ inner(A_λ(u), u)", pm, 1e-6);
    let mut bound = Tally::new("slope-bound", "|Λ±(u,v)| ≤ 2 √E(u) √E(v)", cf, 1e-7);
    let mut signed = Tally::new(
        "slope-bound-sublinear",
        "-2 √E(u) √E(-v) ≤ Λ⁻(u,v) ≤ Λ⁺(u,v) ≤ 2 √E(u) √E(v)",
        cf,
        1e-7,
    );
    let mut diag = Tally::new("slope-diagonal", "Λ±(u,u) = 2E(u)", cf, 1e-7);
    let mut refl = Tally::new("slope-reflection", "Λ⁺(u,-v) = -Λ⁻(u,v)", cf, opts.closed_form_tol);
    let mut loc = Tally::new("slope-locality", "Λ±(u,v) = 0 when u is constant near supp(v)", cf, 1e-9);
    let mut sand = Tally::new("sandwich", "Λ⁻(u,v) ≤ inner(∂⁰E(u), v) ≤ Λ⁺(u,v)", pm, opts.prox_tol);
    let mut ysand = Tally::new("yosida-sandwich", "Λ⁻(u,v) ≤ inner(A_λ(u), v) ≤ Λ⁺(u,v) as λ → 0", pm, opts.prox_tol);
    let mut member = Tally::new("extended-subdifferential", "∂⁰E(u) dm is an extended subgradient", pm, opts.prox_tol);
    let mut reject = Tally::new(
        "extended-subdifferential-rejection",
        "a candidate pushed past Λ⁺ along a coordinate is rejected",
        pm,
        opts.prox_tol,
    );
    let mut unique = Tally::new(
        "extended-subdifferential-uniqueness",
        "at regular points accepted candidates coincide",
        pm,
        opts.prox_tol,
    );
    let mut closure = Tally::new(
        "extended-subdifferential-closure",
        "accepted candidates are closed under convex combination and scaling",
        pm,
        opts.prox_tol,
    );
    let mut regularity = Tally::new("regularity", "Λ⁺(u,·) = Λ⁻(u,·)", cf, 1e-7).informational();
    let mut regular_everywhere = true;
    let mut quad_samples = Vec::new();
    let profiles = [Profile::Gaussian, Profile::PiecewiseConstant, Profile::Laplace, Profile::Spikes];

    for k in 0..opts.calculus_points {
        let u = {
            let mut u = sampler.field_of(profiles[k % profiles.len()]);
            while u.sup_norm() == 0.0 {
                u = sampler.field_of(profiles[k % profiles.len()]);
            }
            u
        };
        let (_, v) = sampler.pair(&structure);
        let v = if v.sup_norm() == 0.0 { sampler.nonzero_field() } else { v };
        quad_samples.push((u.clone(), v.clone()));
        let eu = energy(form, &u);
        let ev = energy(form, &v);
        let with_uv = |m: f64| Counterexample::new(m).with_u(&u).with_v(&v);

        // Closed-form slope properties.
        let e_uv = slope_enclosure(form, &u, &v, 1e-7)?;
        let m = e_uv.minus.abs().max(e_uv.plus.abs()) - 2.0 * eu.sqrt() * ev.sqrt();
        bound.observe(m, 1.0, || with_uv(m));
        // Only uses that √E is sublinear, so it also covers energies with
        // E(-v) ≠ E(v).
        let e_neg = energy(form, &v.scale(-1.0));
        let m = (e_uv.plus - 2.0 * eu.sqrt() * ev.sqrt()).max(-2.0 * eu.sqrt() * e_neg.sqrt() - e_uv.minus);
        signed.observe(m, 1.0, || with_uv(m));
        let e_uu = slope_enclosure(form, &u, &u, 1e-7)?;
        let m = (e_uu.minus - 2.0 * eu).abs().max((e_uu.plus - 2.0 * eu).abs());
        diag.observe(m, 1.0, || Counterexample::new(m).with_u(&u));
        let e_ref = slope_enclosure(form, &u, &v.scale(-1.0), 1e-7)?;
        let allowance = if e_ref.analytic && e_uv.analytic { 0.0 } else { e_ref.width().max(e_uv.width()) };
        let m = (e_ref.plus + e_uv.minus).abs() - allowance;
        refl.observe(m, 1.0 + e_uv.minus.abs(), || with_uv(m));
        if structure.local {
            if let Some((a, b)) = if k % 2 == 0 {
                sampler.disjoint_pair(&structure)
            } else {
                sampler.constant_on_support_pair(&structure)
            } {
                let e = slope_enclosure(form, &a, &b, 1e-9)?;
                let m = e.minus.abs().max(e.plus.abs());
                loc.observe(m, 1.0, || Counterexample::new(m).with_u(&a).with_v(&b));
            }
        }

        let mut directions: Vec<Field> = (0..n)
            .flat_map(|i| [Field::basis(n, i, 1.0), Field::basis(n, i, -1.0)])
            .collect();
        directions.extend((0..20).map(|_| sampler.nonzero_field()));
        let reg = regularity_probe(form, &u, &directions, 1e-7)?;
        regular_everywhere &= reg.regular;
        let gap = reg.worst_gap;
        regularity.observe(if reg.regular { 0.0 } else { gap }, 1.0, || {
            let mut c = Counterexample::new(gap).with_u(&u);
            c.v = reg.worst_direction.clone();
            c
        });

        for lambda in [1e-1, 1e-2, 1e-3] {
            match (envelope(form, &u, lambda, space, cfg), yosida(form, &u, lambda, space, cfg)) {
                (Ok(el), Ok(a)) => {
                    let m = (el - 0.5 * inner(&a, &u, space)?).abs();
                    env.observe(m, 1.0 + eu, || Counterexample::new(m).with_u(&u));
                }
                _ => env.solver_failure(),
            }
        }

        let xi = match minimal_subgradient(form, &u, space, cfg, &LambdaSchedule::default()) {
            Ok(xi) => xi,
            Err(_) => {
                for t in [&mut cdc2, &mut norm_bound, &mut sand, &mut member, &mut reject, &mut unique, &mut closure] {
                    t.solver_failure();
                }
                continue;
            }
        };
        let m = (inner(&xi, &u, space)? - 2.0 * eu).abs();
        cdc2.observe(m, 1.0 + 2.0 * eu, || Counterexample::new(m).with_u(&u));
        let m = eu - 0.5 * m_norm(&xi, space) * m_norm(&u, space);
        norm_bound.observe(m, 1.0, || Counterexample::new(m).with_u(&u));

        let s = sandwich_with(form, &xi, &u, &v, space, opts.prox_tol)?;
        sand.observe(s.margin, 1.0, || with_uv(s.margin));
        match yosida_sandwich_check(form, &u, &v, &LambdaSchedule::default(), space, cfg, opts.prox_tol) {
            Ok(y) => {
                let acc = y.accumulation;
                let mut m = ((y.lower - acc).max(acc - y.upper)) / (1.0 + acc.abs());
                for ((_, x), (lo, hi)) in y.values.iter().zip(&y.finite_lambda_bounds) {
                    m = m.max((lo - x).max(x - hi) / (1.0 + x.abs()));
                }
                ysand.observe(m, 1.0, || with_uv(m));
            }
            Err(_) => ysand.solver_failure(),
        }

        let mr = extended_subdifferential_check(form, &u, &xi, &directions, space, opts.prox_tol)?;
        member.observe(mr.worst_margin, 1.0, || Counterexample::new(mr.worst_margin).with_u(&u).with_v(&xi));

        let i = k % n;
        let ei = Field::basis(n, i, 1.0);
        let slopes = slope_enclosure(form, &u, &ei, 1e-7)?;
        let push = 1.0 + 2.0 * slopes.minus.abs().max(slopes.plus.abs()) + inner(&xi, &ei, space)?.abs();
        let bad = xi.axpy(push / space.weights()[i], &ei);
        let rr = extended_subdifferential_check(form, &u, &bad, &directions, space, opts.prox_tol)?;
        let m = if rr.accepted { 1.0 } else { -rr.worst_margin };
        reject.observe(m, 1.0, || Counterexample::new(m).with_u(&u).with_v(&bad));

        let mut accepted = vec![xi.clone()];
        if reg.regular {
            let second = match analytic_gradient(form, &u, space)? {
                Some(g) => Some(g),
                None => minimal_subgradient(form, &u, space, cfg, &LambdaSchedule::geometric(5e-2, 1e-6, 0.4)?).ok(),
            };
            if let Some(second) = second {
                let ok = extended_subdifferential_check(form, &u, &second, &directions, space, opts.prox_tol)?;
                let dist = m_norm(&(&xi - &second), space);
                let m = if ok.accepted { dist } else { f64::INFINITY };
                unique.observe(m, 1.0 + m_norm(&xi, space), || Counterexample::new(m).with_u(&u).with_v(&second));
                if ok.accepted {
                    accepted.push(second);
                }
            }
        }
        let c = closure_check(form, &u, &accepted, &directions, space, opts.prox_tol)?;
        let m = if c.convex && c.scaling { 0.0 } else { 1.0 };
        closure.observe(m, 1.0, || Counterexample::new(m).with_u(&u));
    }

    let quadraticity = quadraticity_test(form, &quad_samples, 1e-7)?;
    let mut agree = Tally::new(
        "quadraticity-agreement",
        "regular and Λ(u,v) = Λ(v,u) ⇔ parallelogram law",
        cf,
        1e-7,
    );
    let m = if quadraticity.agreement { 0.0 } else { 1.0 };
    agree.observe(m, 1.0, || {
        let mut c = Counterexample::new(m);
        if let Some((a, b)) = &quadraticity.symmetry_witness {
            c = c.with_u(a).with_v(b);
        }
        c
    });

    let mut records: Vec<PropertyRecord> = vec![
        cdc2.finish(),
        norm_bound.finish(),
        env.finish(),
        bound.finish(),
        signed.finish(),
        diag.finish(),
        refl.finish(),
    ];
    if structure.local {
        records.push(loc.finish());
    }
    records.extend([
        sand.finish(),
        ysand.finish(),
        member.finish(),
        reject.finish(),
        unique.finish(),
        closure.finish(),
        regularity.finish(),
        agree.finish(),
    ]);
    Ok(CalculusOutcome {
        records,
        regular: regular_everywhere,
        quadraticity,
    })
}

/// Extra flow pairs built from lattice counterexamples, where order
/// preservation or contractivity is most likely to break.
fn adversarial_pairs(records: &[PropertyRecord]) -> Vec<(Field, Field)> {
    let mut out = Vec::new();
    for r in records {
        let Some(c) = &r.counterexample else { continue };
        match (r.property.as_str(), &c.u, &c.v) {
            ("minmax", Some(u), Some(v)) => {
                let (lo, hi) = meet_join(u, v).expect("same length");
                out.extend([(hi.clone(), u.clone()), (hi, v.clone()), (u.clone(), lo.clone()), (v.clone(), lo)]);
            }
            ("h-alpha-symmetric", Some(u), Some(v)) => out.push((u.clone(), v.clone())),
            ("contraction-unit-clamp", Some(u), _) => {
                let zero = Field::zeros(u.len());
                out.push((meet_join(u, &zero).expect("same length").1, zero));
            }
            _ => {}
        }
    }
    out
}

/// Runs every check and assembles the report. Solver failures are counted
/// per record; the audit itself only fails on invalid input.
pub fn full_audit(form: &FormDescriptor, space: &MeasureSpace, cfg: &SolverConfig, opts: &AuditOptions) -> Result<PropertyReport> {
    opts.validate()?;
    cfg.validate()?;
    if space.size() != form.size() {
        return Err(Error::DimensionMismatch {
            expected: form.size(),
            found: space.size(),
        });
    }
    let mut sampler = Sampler::new(form.size(), opts.seed);
    let tol = opts.closed_form_tol;
    let mut records = vec![check_minmax(form, &mut sampler, opts.samples, tol)];
    records.extend(check_h_alpha(form, &mut sampler, opts.samples, tol));
    records.extend(check_normal_contraction(form, &mut sampler, opts.samples, opts.contractions, tol));
    records.extend(check_homogeneity_and_locality(form, &mut sampler, opts.samples, tol));
    records.extend(check_energy_norm(form, &mut sampler, space, opts.samples, tol));

    let structure = locality_of(form);
    let mut flow_pairs: Vec<(Field, Field)> = (0..opts.flow_pairs).map(|_| sampler.pair(&structure)).collect();
    flow_pairs.push(sampler.ordered_pair());
    flow_pairs.extend(adversarial_pairs(&records));
    let probe = ProbeOptions {
        steps: opts.flow_steps,
        tolerance: opts.prox_tol,
    };
    let markov = markov_probe(
        form,
        &flow_pairs,
        &[0.01, 0.1, 1.0],
        &[1.0, 2.0, f64::INFINITY],
        space,
        cfg,
        &probe,
    );
    let markov_ok = markov.iter().all(|r| r.passed);
    records.extend(markov);

    let calc = check_calculus(form, &mut sampler, space, cfg, opts)?;
    records.extend(calc.records);

    let passed = |name: &str| records.iter().find(|r| r.property == name).is_some_and(|r| r.passed);
    let lattice_ok = passed("minmax") && passed("h-alpha-symmetric");
    let sym_ok = passed("contraction-sym");
    let phi_ok = records
        .iter()
        .filter(|r| r.property.starts_with("contraction-") && r.property != "contraction-sym")
        .all(|r| r.passed);
    let locality = records.iter().find(|r| r.property == "locality").expect("locality record");
    let local = if locality.samples > 0 { locality.passed } else { structure.local };

    let mut findings = Vec::new();
    if lattice_ok != markov_ok {
        findings.push(Finding {
            severity: "bug".into(),
            message: format!(
                "lattice inequalities {} but the flow probes {}",
                if lattice_ok { "pass" } else { "fail" },
                if markov_ok { "pass" } else { "fail" }
            ),
        });
    }
    if lattice_ok && sym_ok != phi_ok {
        findings.push(Finding {
            severity: "bug".into(),
            message: format!(
                "symmetry {} but the sampled contractions {}",
                if sym_ok { "holds" } else { "fails" },
                if phi_ok { "pass" } else { "fail" }
            ),
        });
    }
    let hom = records.iter().find(|r| r.property == "two-homogeneity").expect("homogeneity record");
    if !hom.passed {
        let message = if hom.note.as_deref() == Some(POSITIVE_ONLY) {
            "E is only positively 2-homogeneous (E(-u) ≠ E(u)); slope-bound and \
             energy-norm-homogeneity assume E(-u) = E(u)"
        } else {
            "E is not 2-homogeneous; the calculus checks are outside their hypotheses"
        };
        findings.push(Finding {
            severity: "note".into(),
            message: message.into(),
        });
    }
    let label = |ok: bool, yes: &str, no: &str| if ok { yes } else { no }.to_string();
    let verdict = vec![
        label(lattice_ok && markov_ok, "dirichlet-consistent", "not-dirichlet"),
        label(calc.quadraticity.quadratic && calc.regular, "quadratic", "non-quadratic"),
        label(calc.regular, "regular", "irregular"),
        label(sym_ok, "symmetric", "non-symmetric"),
        label(local, "local", "non-local"),
    ];
    let solver_failures = records.iter().map(|r| r.solver_failures).sum();
    Ok(PropertyReport {
        header: HEADER.into(),
        form: form.identifier(),
        family: form.family_name().into(),
        size: form.size(),
        seed: opts.seed,
        verdict,
        records,
        findings,
        solver_failures,
    })
}

/// Recomputes the margin stored in a counterexample. Returns `None` for
/// properties whose margin depends on more than the payload.
pub fn replay(form: &FormDescriptor, property: &str, c: &Counterexample, space: &MeasureSpace, cfg: &SolverConfig) -> Result<Option<f64>> {
    let need = |x: &Option<Field>| x.clone().ok_or_else(|| Error::InvalidParameter(format!("{property}: payload lacks a field")));
    let u = need(&c.u)?;
    form.check(&u)?;
    let margin = match property {
        "minmax" => minmax_margin(form, &u, &need(&c.v)?),
        "h-alpha-symmetric" => h_alpha_margins(form, &u, &need(&c.v)?, c.alpha.unwrap_or(0.0)).0,
        "h-alpha-literal" => h_alpha_margins(form, &u, &need(&c.v)?, c.alpha.unwrap_or(0.0)).1,
        p if p.starts_with("contraction-") => match &c.phi {
            Some(phi) => contraction_margin(form, phi, &u),
            None => return Ok(None),
        },
        "two-homogeneity" => homogeneity_margin(form, &u, c.nu.unwrap_or(1.0)),
        "locality" => locality_margin(form, &u, &need(&c.v)?),
        "energy-norm-triangle" => triangle_margin(form, &u, &need(&c.v)?, space),
        "energy-norm-homogeneity" => norm_homogeneity_margin(form, &u, c.nu.unwrap_or(1.0), space),
        "lipschitz-action" => match (&c.phi, c.lipschitz) {
            (Some(phi), Some(l)) => lipschitz_margin(form, phi, l, &u),
            _ => return Ok(None),
        },
        "algebra-product" => product_margin(form, &u, &need(&c.v)?),
        p if p.starts_with("markov-") => {
            let v = need(&c.v)?;
            let (Some(t), Some(steps)) = (c.t, c.steps) else { return Ok(None) };
            let evolve = |x: &Field| -> Result<Field> {
                if t == 0.0 {
                    return Ok(x.clone());
                }
                flow(form, x, t, steps, space, cfg)
                    .map(|tr| tr.final_state().clone())
                    .map_err(|e| e.source)
            };
            let (tu, tv) = (evolve(&u)?, evolve(&v)?);
            match c.p {
                Some(p) => lp_norm(&(&tu - &tv), p, space)? - lp_norm(&(&u - &v), p, space)?,
                None => (&tv - &tu).iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x)),
            }
        }
        "cdc2" => {
            let xi = minimal_subgradient(form, &u, space, cfg, &LambdaSchedule::default())?;
            (inner(&xi, &u, space)? - 2.0 * energy(form, &u)).abs()
        }
        "subgradient-norm-bound" => {
            let xi = minimal_subgradient(form, &u, space, cfg, &LambdaSchedule::default())?;
            energy(form, &u) - 0.5 * m_norm(&xi, space) * m_norm(&u, space)
        }
        "slope-bound" => {
            let v = need(&c.v)?;
            let e = slope_enclosure(form, &u, &v, 1e-7)?;
            e.minus.abs().max(e.plus.abs()) - 2.0 * energy(form, &u).sqrt() * energy(form, &v).sqrt()
        }
        "slope-bound-sublinear" => {
            let v = need(&c.v)?;
            let e = slope_enclosure(form, &u, &v, 1e-7)?;
            let su = energy(form, &u).sqrt();
            (e.plus - 2.0 * su * energy(form, &v).sqrt()).max(-2.0 * su * energy(form, &v.scale(-1.0)).sqrt() - e.minus)
        }
        _ => return Ok(None),
    };
    Ok(Some(margin))
}

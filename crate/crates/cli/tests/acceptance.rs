//! The acceptance suite: twelve criteria, one PASS/FAIL line each. Runs
//! without the libtest harness so the lines are always printed; the process
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dirform::calculus::{
    extended_subdifferential_check, quadraticity_test, regularity_probe, sandwich_with, slope_enclosure,
    yosida_sandwich_check, m_distance,
};
use dirform::catalog::{catalog, one_sided_edge, sum_square};
use dirform::checker::{check_h_alpha, check_homogeneity_and_locality, check_minmax, check_normal_contraction};
use dirform::forms::{analytic_gradient, evaluate, locality_of, FormDescriptor};
use dirform::prox::{minimal_subgradient, prox, LambdaSchedule, SolverConfig};
use dirform::sampling::Sampler;
use dirform::semigroup::{flow, markov_probe, ProbeOptions};
use dirform::space::{apply_contraction, inner, m_norm, Field, MeasureSpace, NormalContraction};

const SEED: u64 = 20261016;
const NAMES: [&str; 6] = [
    "quadratic-graph",
    "anisotropic-graph",
    "power-sum q=1",
    "power-sum q=1.5",
    "power-sum q=2",
    "quadratic-matrix",
];
const ANISO: usize = 1;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// The catalog on `n` points with non-uniform weights.
struct Instance {
    sampler: Sampler,
    space: MeasureSpace,
    forms: Vec<FormDescriptor>,
}

fn instance(n: usize, salt: u64) -> Instance {
    let mut sampler = Sampler::new(n, SEED ^ (salt << 8) ^ n as u64);
    let space = sampler.weights();
    let forms = catalog(&mut sampler);
    Instance { sampler, space, forms }
}

/// Sizes 2 to 12, one per item, cycling.
fn size_of(k: usize) -> usize {
    2 + k % 11
}

fn energy(form: &FormDescriptor, u: &Field) -> f64 {
    evaluate(form, u).unwrap()
}

fn subgradient(form: &FormDescriptor, u: &Field, space: &MeasureSpace) -> Field {
    minimal_subgradient(form, u, space, &SolverConfig::default(), &LambdaSchedule::default())
        .unwrap_or_else(|e| panic!("{}: {e}", form.identifier()))
}

/// Runs `f(form index, instance, item)` for `per_form` items per family,
/// spread over sizes 2 to 12.
fn per_form(per_form: usize, salt: u64, mut f: impl FnMut(usize, &mut Instance, usize)) {
    let mut instances: Vec<Instance> = (2..=12).map(|n| instance(n, salt)).collect();
    for k in 0..per_form {
        let inst = &mut instances[size_of(k) - 2];
        for idx in 0..NAMES.len() {
            f(idx, inst, k);
        }
    }
}

#[derive(Clone, Copy)]
struct Worst {
    value: f64,
    failures: usize,
    samples: usize,
}

impl Default for Worst {
    fn default() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            failures: 0,
            samples: 0,
        }
    }
}

impl Worst {
    fn see(&mut self, x: f64, ok: bool) {
        self.value = self.value.max(x);
        self.samples += 1;
        if !ok {
            self.failures += 1;
        }
    }
}

fn summary(worst: &[Worst]) -> String {
    NAMES
        .iter()
        .zip(worst)
        .filter(|(_, w)| w.samples > 0)
        .map(|(n, w)| format!("{n} {:.1e}{}", w.value, if w.failures > 0 { format!(" ({} bad)", w.failures) } else { String::new() }))
        .collect::<Vec<_>>()
        .join(", ")
}

fn all_ok(worst: &[Worst]) -> bool {
    worst.iter().all(|w| w.failures == 0)
}

fn criterion_1() -> Outcome {
    let mut worst = [Worst::default(); 6];
    per_form(50, 1, |idx, inst, _| {
        let form = &inst.forms[idx];
        let u = inst.sampler.field();
        let xi = subgradient(form, &u, &inst.space);
        let e = energy(form, &u);
        let err = (inner(&xi, &u, &inst.space).unwrap() - 2.0 * e).abs() / (1.0 + 2.0 * e);
        worst[idx].see(err, err <= 1e-4);
    });
    outcome(all_ok(&worst), format!("|<∂⁰E(u), u> - 2E(u)| / (1 + 2E(u)) ≤ 1e-4 on 50 fields per form: {}", summary(&worst)))
}

fn criterion_2() -> Outcome {
    let mut worst = [Worst::default(); 6];
    let cfg = SolverConfig::default();
    per_form(50, 2, |idx, inst, _| {
        let form = &inst.forms[idx];
        let u = inst.sampler.field();
        let e = energy(form, &u);
        for lambda in [1e-1, 1e-2, 1e-3] {
            let r = prox(form, &u, lambda, &inst.space, &cfg).unwrap();
            let half = 0.5 * inner(&r.yosida(), &u, &inst.space).unwrap();
            let err = (r.envelope - half).abs() / (1.0 + e);
            worst[idx].see(err, err <= 1e-6);
        }
    });
    outcome(all_ok(&worst), format!("|E_λ(u) - ½<A_λu, u>| / (1 + E(u)) ≤ 1e-6, λ ∈ {{1e-1, 1e-2, 1e-3}}: {}", summary(&worst)))
}

/// Families whose records show `E(νu) = ν²E(u)` for every real `ν`.
fn two_homogeneous() -> Vec<bool> {
    let mut inst = instance(10, 99);
    let forms = inst.forms.clone();
    forms
        .iter()
        .map(|f| check_homogeneity_and_locality(f, &mut inst.sampler, 200, 1e-8)[0].passed)
        .collect()
}

fn criterion_3() -> Outcome {
    let homogeneous = two_homogeneous();
    let mut bound = [Worst::default(); 6];
    let mut sublinear = [Worst::default(); 6];
    let mut diagonal = [Worst::default(); 6];
    per_form(500, 3, |idx, inst, k| {
        let form = &inst.forms[idx];
        let (u, v) = (inst.sampler.field(), inst.sampler.field());
        let enc = slope_enclosure(form, &u, &v, 1e-9).unwrap();
        let (eu, ev, emv) = (energy(form, &u), energy(form, &v), energy(form, &v.scale(-1.0)));
        let rhs = 2.0 * eu.sqrt() * ev.sqrt();
        let excess = enc.minus.abs().max(enc.plus.abs()) - rhs;
        bound[idx].see(excess, excess <= 1e-7);
        let excess = (enc.plus - rhs).max(-2.0 * eu.sqrt() * emv.sqrt() - enc.minus);
        sublinear[idx].see(excess, excess <= 1e-7);
        if k < 50 {
            let d = slope_enclosure(form, &u, &u, 1e-9).unwrap();
            let err = (d.minus - 2.0 * eu).abs().max((d.plus - 2.0 * eu).abs());
            diagonal[idx].see(err, d.certified && err <= 1e-7);
        }
    });
    let scoped: Vec<Worst> = bound
        .iter()
        .zip(&homogeneous)
        .map(|(w, &h)| if h { *w } else { Worst::default() })
        .collect();
    let outside: Vec<&str> = NAMES.iter().zip(&homogeneous).filter(|(_, &h)| !h).map(|(n, _)| *n).collect();
    let passed = all_ok(&scoped) && all_ok(&sublinear) && all_ok(&diagonal);
    let literal_outside: Vec<String> = outside
        .iter()
        .map(|n| {
            let i = NAMES.iter().position(|m| m == n).unwrap();
            format!("{n} {}/{} pairs exceed, worst {:.2e}", bound[i].failures, bound[i].samples, bound[i].value)
        })
        .collect();
    outcome(
        passed,
        format!(
            "|Λ±| ≤ 2√E(u)√E(v) + 1e-7 on 500 pairs per 2-homogeneous form: {}; Λ±(u,u) = 2E(u) within 1e-7 on 50 fields per form: {}; \
             only positively homogeneous ({}) meet the sublinear form -2√E(u)√E(-v) ≤ Λ⁻ ≤ Λ⁺ ≤ 2√E(u)√E(v): {}",
            summary(&scoped),
            summary(&diagonal),
            literal_outside.join(", "),
            summary(&sublinear)
        ),
    )
}

fn local_forms() -> Vec<bool> {
    let mut inst = instance(10, 98);
    let forms = inst.forms.clone();
    forms
        .iter()
        .map(|f| check_homogeneity_and_locality(f, &mut inst.sampler, 200, 1e-8)[1].passed)
        .collect()
}

fn criterion_4() -> Outcome {
    let mut reflection = [Worst::default(); 6];
    per_form(200, 4, |idx, inst, _| {
        let form = &inst.forms[idx];
        let (u, v) = (inst.sampler.field(), inst.sampler.field());
        let e = slope_enclosure(form, &u, &v, 1e-9).unwrap();
        let r = slope_enclosure(form, &u, &v.scale(-1.0), 1e-9).unwrap();
        let allowance = e.width().max(r.width()) + 1e-12 * (1.0 + e.minus.abs());
        let defect = (r.plus + e.minus).abs();
        reflection[idx].see(defect, defect <= allowance);
    });
    let local = local_forms();
    let mut zero = [Worst::default(); 6];
    let mut k = 0u64;
    while (0..6).any(|i| local[i] && zero[i].samples < 50) {
        let n = 4 + (k % 9) as usize;
        let mut inst = instance(n, 400 + k);
        k += 1;
        let open: Vec<usize> = (0..6).filter(|&i| local[i] && zero[i].samples < 50).collect();
        for idx in open {
            let structure = locality_of(&inst.forms[idx]);
            let pair = if k % 2 == 0 {
                inst.sampler.disjoint_pair(&structure)
            } else {
                inst.sampler.constant_on_support_pair(&structure)
            };
            let Some((u, v)) = pair else { continue };
            let e = slope_enclosure(&inst.forms[idx], &u, &v, 1e-9).unwrap();
            let s = e.minus.abs().max(e.plus.abs());
            zero[idx].see(s, s <= 1e-9);
        }
    }
    let locals: Vec<&str> = NAMES.iter().zip(&local).filter(|(_, &l)| l).map(|(n, _)| *n).collect();
    outcome(
        all_ok(&reflection) && all_ok(&zero),
        format!(
            "Λ⁺(u,-v) = -Λ⁻(u,v) within bracket width on 200 pairs per form: {}; Λ± = 0 within 1e-9 on 50 separated pairs per local form ({}): {}",
            summary(&reflection),
            locals.join(", "),
            summary(&zero)
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = SolverConfig::default();
    let schedule = LambdaSchedule::default();
    let mut literal = [Worst::default(); 6];
    let mut yosida = [Worst::default(); 6];
    let mut finite = [Worst::default(); 6];
    per_form(200, 5, |idx, inst, k| {
        let form = &inst.forms[idx];
        let u = inst.sampler.field();
        let v = inst.sampler.field();
        let xi = subgradient(form, &u, &inst.space);
        let s = sandwich_with(form, &xi, &u, &v, &inst.space, 1e-5).unwrap();
        literal[idx].see(s.margin, s.passed);
        // The full λ sweep is the expensive part; a quarter of the pairs
        // carry it.
        if k % 4 == 0 {
            let y = yosida_sandwich_check(form, &u, &v, &schedule, &inst.space, &cfg, 1e-5).unwrap();
            let excursion = y
                .values
                .iter()
                .map(|&(_, x)| (y.lower - x).max(x - y.upper))
                .fold(f64::NEG_INFINITY, f64::max);
            yosida[idx].see((y.accumulation - y.upper).max(y.lower - y.accumulation), y.passed);
            finite[idx].see(excursion, excursion <= 1e-5);
        }
    });
    outcome(
        all_ok(&literal) && all_ok(&yosida),
        format!(
            "g(-σ*) - 1e-5 ≤ <∂⁰E(u), v> ≤ g(σ*) + 1e-5 on 200 pairs per form: {}; Yosida values inside their finite-λ brackets and their limit inside [g(-σ*), g(σ*)] on 50 pairs per form: {}; \
             (finite λ against the σ* interval itself, informational: {})",
            summary(&literal),
            summary(&yosida),
            summary(&finite)
        ),
    )
}

fn markov_pairs(sampler: &mut Sampler, form: &FormDescriptor, n: usize) -> Vec<(Field, Field)> {
    let structure = locality_of(form);
    let mut pairs: Vec<(Field, Field)> = (0..n).map(|_| sampler.pair(&structure)).collect();
    pairs.extend((0..n).map(|_| sampler.ordered_pair()));
    pairs
}

fn criterion_6() -> Outcome {
    let cfg = SolverConfig::default();
    let probe = ProbeOptions::default();
    let t_grid = [0.01, 0.1, 1.0];
    let p_grid = [1.0, 2.0, f64::INFINITY];
    let mut lines = Vec::new();
    let mut passed = true;
    let inst = instance(7, 6);
    let mut subjects = vec![
        ("quadratic-graph", inst.forms[0].clone(), inst.space.clone()),
        ("anisotropic-graph", inst.forms[ANISO].clone(), inst.space.clone()),
    ];
    subjects.push(("one-sided edge", one_sided_edge(), MeasureSpace::new(vec![1.0, 2.5]).unwrap()));
    for (name, form, space) in &subjects {
        let mut sampler = Sampler::new(form.size(), SEED + 6);
        let minmax = check_minmax(form, &mut sampler, 500, 1e-8);
        let [h, _] = check_h_alpha(form, &mut sampler, 500, 1e-8);
        let pairs = markov_pairs(&mut sampler, form, 12);
        let records = markov_probe(form, &pairs, &t_grid, &p_grid, space, &cfg, &probe);
        let markov = records.iter().all(|r| r.passed);
        passed &= minmax.passed && h.passed && markov;
        lines.push(format!(
            "{name}: minmax {} (worst {:.1e}), H_α {} (worst {:.1e}), {} Markov records {}",
            minmax.passed,
            minmax.worst_margin,
            h.passed,
            h.worst_margin,
            records.len(),
            if markov { "pass" } else { "FAIL" }
        ));
    }
    let control = sum_square();
    let u = Field::from(vec![2.0, -2.0]);
    let clamped = apply_contraction(&NormalContraction::unit_clamp(), &u);
    let (before, after) = (energy(&control, &u), energy(&control, &clamped));
    let witness = clamped.values() == [1.0, 0.0] && before == 0.0 && after == 1.0;
    let mut sampler = Sampler::new(2, SEED + 60);
    let clamp = check_normal_contraction(&control, &mut sampler, 500, 0, 1e-8)
        .into_iter()
        .find(|r| r.property == "contraction-unit-clamp")
        .unwrap();
    let pairs = markov_pairs(&mut sampler, &control, 12);
    let space = MeasureSpace::uniform(2).unwrap();
    let failing: Vec<String> = markov_probe(&control, &pairs, &t_grid, &p_grid, &space, &cfg, &probe)
        .into_iter()
        .filter(|r| !r.passed)
        .map(|r| r.property)
        .collect();
    passed &= witness && !clamp.passed && !failing.is_empty();
    lines.push(format!(
        "(u₁+u₂)²: E(clamp(2,-2)) = {after} > {before} = E(2,-2), clamp check {} with {} violations, failing Markov records [{}]",
        if clamp.passed { "passed" } else { "failed" },
        clamp.violations,
        failing.join(", ")
    ));
    outcome(passed, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let form = one_sided_edge();
    let u = Field::from(vec![0.0, 1.0]);
    let margin = energy(&form, &u.scale(-1.0)) - energy(&form, &u);
    let mut sampler = Sampler::new(2, SEED + 7);
    let records = check_normal_contraction(&form, &mut sampler, 500, 100, 1e-8);
    let sym = &records[0];
    let mut passed = (margin - 3.0).abs() < 1e-12 && !sym.passed;
    let mut lines = vec![format!(
        "w⁺=1, w⁻=4: E(-u) - E(u) = {margin} at u=(0,1), negation check {} (worst {:.2})",
        if sym.passed { "passed" } else { "failed" },
        sym.worst_margin
    )];
    // The implication is a statement about Dirichlet forms: catalog forms
    // whose lattice inequalities hold.
    let mut checked = Vec::new();
    for n in [3, 6, 9, 12] {
        let mut inst = instance(n, 7);
        let forms = inst.forms.clone();
        for (idx, form) in forms.iter().enumerate() {
            let lattice = check_minmax(form, &mut inst.sampler, 500, 1e-8).passed
                && check_h_alpha(form, &mut inst.sampler, 500, 1e-8)[0].passed;
            if !lattice {
                continue;
            }
            let records = check_normal_contraction(form, &mut inst.sampler, 500, 100, 1e-8);
            let sym_ok = records[0].passed;
            let random = records.iter().find(|r| r.property == "contraction-random").unwrap();
            if sym_ok {
                passed &= random.passed;
                checked.push(format!("{}@{n}{}", NAMES[idx], if random.passed { "" } else { " FAIL" }));
            }
        }
    }
    lines.push(format!("Dirichlet-consistent forms passing the symmetry check also pass 100 random φ: [{}]", checked.join(", ")));
    outcome(passed && !checked.is_empty(), lines.join("; "))
}

fn criterion_8() -> Outcome {
    let mut inst = instance(6, 8);
    let samples: Vec<(Field, Field)> = (0..20).map(|_| (inst.sampler.field(), inst.sampler.field())).collect();
    let q = quadraticity_test(&inst.forms[0], &samples, 1e-7).unwrap();
    let qg = q.quadratic && q.regularity_gap <= 1e-7 && q.symmetry_defect <= 1e-7 && q.parallelogram_defect <= 1e-7;
    let a = quadraticity_test(&inst.forms[ANISO], &samples, 1e-7).unwrap();
    let ag = !a.quadratic && a.regular && a.symmetry_defect >= 0.1;
    let edge = one_sided_edge();
    let pair = vec![(Field::from(vec![0.0, 1.0]), Field::from(vec![1.0, 0.0]))];
    let e = quadraticity_test(&edge, &pair, 1e-7).unwrap();
    let one = !e.quadratic && e.regular && e.symmetry_defect >= 0.1;
    outcome(
        qg && ag && one,
        format!(
            "quadratic-graph: quadratic {}, gaps {:.1e}/{:.1e}/{:.1e}; anisotropic-graph: quadratic {}, regular {}, symmetry defect {:.3}; \
             one-sided edge at ((0,1),(1,0)): quadratic {}, regular {}, symmetry defect {:.3}",
            q.quadratic, q.regularity_gap, q.symmetry_defect, q.parallelogram_defect, a.quadratic, a.regular, a.symmetry_defect,
            e.quadratic, e.regular, e.symmetry_defect
        ),
    )
}

fn criterion_9() -> Outcome {
    let form = FormDescriptor::quadratic_graph(2, &[(0, 1, 1.0)]).unwrap();
    let space = MeasureSpace::uniform(2).unwrap();
    let u0 = Field::from(vec![1.0, -1.0]);
    let exact = Field::from(vec![(-1f64).exp(), -(-1f64).exp()]);
    let errors: Vec<f64> = [64, 128, 256, 512, 1024]
        .iter()
        .map(|&steps| {
            let t = flow(&form, &u0, 0.25, steps, &space, &SolverConfig::default()).unwrap();
            (t.final_state() - &exact).sup_norm()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let passed = ratios.iter().all(|r| (1.6..=2.4).contains(r)) && errors[4] <= 1e-3;
    outcome(
        passed,
        format!(
            "errors {} for 64..1024 steps, ratios {}",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut worst = [Worst::default(); 6];
    per_form(100, 10, |idx, inst, _| {
        let form = &inst.forms[idx];
        let u = inst.sampler.field();
        let xi = subgradient(form, &u, &inst.space);
        let excess = energy(form, &u) - 0.5 * m_norm(&xi, &inst.space) * m_norm(&u, &inst.space);
        worst[idx].see(excess, excess <= 1e-5);
    });
    outcome(all_ok(&worst), format!("E(u) - ½‖∂⁰E(u)‖‖u‖ ≤ 1e-5 on 100 fields per form, worst excess: {}", summary(&worst)))
}

fn criterion_11() -> Outcome {
    let tol = 1e-6;
    let other = LambdaSchedule::geometric(5e-2, 1e-6, 0.6).unwrap();
    let cfg = SolverConfig::default();
    let mut accepted = [Worst::default(); 6];
    let mut rejected = [Worst::default(); 6];
    let mut unique = [Worst::default(); 6];
    per_form(100, 11, |idx, inst, _| {
        let form = &inst.forms[idx];
        let space = &inst.space;
        let u = inst.sampler.field();
        let mut directions = inst.sampler.directions(4);
        directions.extend(directions.clone().iter().map(|d| d.scale(-1.0)));
        let xi = subgradient(form, &u, space);
        let m = extended_subdifferential_check(form, &u, &xi, &directions, space, tol).unwrap();
        accepted[idx].see(m.worst_margin, m.accepted);

        // Push ξ far enough along w that the pairing with w leaves [Λ⁻, Λ⁺].
        let w = inst.sampler.nonzero_field();
        let e = slope_enclosure(form, &u, &w, 1e-9).unwrap();
        let room = e.plus.abs() + inner(&xi, &w, space).unwrap().abs() + 1.0;
        let perturbed = xi.axpy(2.0 * room / m_norm(&w, space).powi(2), &w);
        let mut probe = directions.clone();
        probe.push(w);
        let r = extended_subdifferential_check(form, &u, &perturbed, &probe, space, tol).unwrap();
        rejected[idx].see(0.0, !r.accepted && r.witness.is_some());

        if regularity_probe(form, &u, &directions, 1e-7).unwrap().regular {
            let mut candidates = vec![minimal_subgradient(form, &u, space, &cfg, &other).unwrap()];
            candidates.extend(analytic_gradient(form, &u, space).unwrap());
            for c in &candidates {
                let ok = extended_subdifferential_check(form, &u, c, &directions, space, tol).unwrap().accepted;
                let d = m_distance(c, &xi, space);
                unique[idx].see(d, ok && d <= 1e-5);
            }
        }
    });
    outcome(
        all_ok(&accepted) && all_ok(&rejected) && all_ok(&unique),
        format!(
            "∂⁰E(u) accepted on 100 fields per form, worst relative margin: {}; perturbed candidates rejected with a witness: {}; \
             accepted candidates at regular points within 1e-5 of ∂⁰E(u): {}",
            summary(&accepted),
            NAMES.iter().zip(&rejected).map(|(n, w)| format!("{n} {}/{}", w.samples - w.failures, w.samples)).collect::<Vec<_>>().join(", "),
            summary(&unique)
        ),
    )
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dirform");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/one_sided_edge.toml");
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin)
            .args(["audit", "--seed", "12", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status;
        reports.push((status.code(), std::fs::read(out.join("report.json")).unwrap_or_default()));
    }
    let same = !reports[0].1.is_empty() && reports[0].1 == reports[1].1;
    outcome(
        same && reports.iter().all(|r| r.0 == Some(0)),
        format!("two `dirform audit --seed 12` runs: exit codes {:?}/{:?}, report.json {} bytes, identical {same}", reports[0].0, reports[1].0, reports[0].1.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("cdc2 identity", criterion_1),
        ("envelope identity", criterion_2),
        ("slope bound and sharpness", criterion_3),
        ("reflection and locality of slopes", criterion_4),
        ("subgradient sandwich", criterion_5),
        ("lattice inequalities vs Markov semigroup", criterion_6),
        ("symmetry vs normal contractions", criterion_7),
        ("quadraticity", criterion_8),
        ("implicit Euler convergence", criterion_9),
        ("energy bound by the minimal subgradient", criterion_10),
        ("extended subdifferential", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name} ({:.1}s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} of 12 criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}

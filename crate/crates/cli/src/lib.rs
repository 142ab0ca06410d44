//! Library side of the `dirform` binary: config parsing and the three
//! commands, each writing its artifacts into an output directory.

pub mod config;

use std::fmt::Write as _;
use std::path::Path;

use dirform::calculus::{quadraticity_test, regularity_probe, slope_enclosure, QuadraticityVerdict, RegularityReport, SlopeEnclosure};
use dirform::checker::full_audit;
use dirform::forms::{evaluate, locality_of};
use dirform::sampling::Sampler;
use dirform::semigroup::{flow, Trajectory};
use dirform::space::Field;
use serde::Serialize;

use crate::config::{field, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// What a command printed and the exit status it asks for.
#[derive(Debug)]
pub struct Outcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            status: EXIT_OK,
            stdout: String::new(),
            stderr: String::new(),
        }
    }

    fn fail(status: i32, message: impl std::fmt::Display) -> Self {
        Self {
            status,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::write(dir.join(name), contents)
}

fn prepare(out: &Path) -> Result<(), Outcome> {
    std::fs::create_dir_all(out).map_err(|e| Outcome::fail(EXIT_USAGE, format!("cannot create {}: {e}", out.display())))
}

fn io_failure(e: std::io::Error) -> Outcome {
    Outcome::fail(EXIT_USAGE, format!("cannot write output: {e}"))
}

/// Runs the audit and writes `report.json` and `report.txt`. Exit 3 when a
/// label in `expect` is missing from the verdict, 2 when solves failed.
pub fn cmd_audit(config: &ExperimentConfig, out: &Path) -> Outcome {
    let exp = match config.experiment() {
        Ok(e) => e,
        Err(e) => return Outcome::fail(EXIT_USAGE, e),
    };
    if let Err(o) = prepare(out) {
        return o;
    }
    let report = match full_audit(&exp.form, &exp.space, &config.solver, &config.audit_options()) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(EXIT_SOLVER, e),
    };
    let text = report.to_text();
    if let Err(e) = write(out, "report.json", &report.to_json()).and_then(|_| write(out, "report.txt", &text)) {
        return io_failure(e);
    }
    let mut o = Outcome::new();
    o.stdout = text;
    let missing: Vec<&str> = config
        .expect
        .iter()
        .filter(|l| !report.has_label(l))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        o.status = EXIT_MISMATCH;
        writeln!(
            o.stderr,
            "expectation not met: verdict is [{}], missing [{}]",
            report.verdict.join(", "),
            missing.join(", ")
        )
        .unwrap();
    } else if report.solver_failures > 0 {
        o.status = EXIT_SOLVER;
        writeln!(o.stderr, "{} proximal solves failed; see report.txt", report.solver_failures).unwrap();
    }
    o
}

fn write_trajectory(out: &Path, t: &Trajectory) -> std::io::Result<()> {
    write(out, "trajectory.csv", &t.to_csv())?;
    write(out, "trajectory.json", &t.to_json())
}

/// Implicit Euler from `flow.u0`; writes `trajectory.csv` and
/// `trajectory.json`, keeping the partial trajectory when a step fails.
pub fn cmd_flow(config: &ExperimentConfig, out: &Path) -> Outcome {
    let Some(spec) = &config.flow else {
        return Outcome::fail(EXIT_USAGE, "flow: the config has no [flow] section");
    };
    let exp = match config.experiment() {
        Ok(e) => e,
        Err(e) => return Outcome::fail(EXIT_USAGE, e),
    };
    let u0 = match field("flow.u0", &spec.u0, config.space.size) {
        Ok(u) => u,
        Err(e) => return Outcome::fail(EXIT_USAGE, e),
    };
    if let Err(o) = prepare(out) {
        return o;
    }
    let (traj, failure) = match flow(&exp.form, &u0, spec.t_final, spec.steps, &exp.space, &config.solver) {
        Ok(t) => (t, None),
        Err(f) => (f.partial.clone(), Some(f)),
    };
    if let Err(e) = write_trajectory(out, &traj) {
        return io_failure(e);
    }
    let mut o = Outcome::new();
    writeln!(o.stdout, "time energy").unwrap();
    for (t, e) in traj.times.iter().zip(&traj.energies) {
        writeln!(o.stdout, "{t:.6e} {e:.12e}").unwrap();
    }
    if let Some(f) = failure {
        o.status = EXIT_SOLVER;
        writeln!(o.stderr, "error: {f}").unwrap();
    }
    o
}

#[derive(Debug, Serialize)]
pub struct PairEnclosure {
    pub u: Field,
    pub v: Field,
    pub energy_u: f64,
    pub energy_v: f64,
    pub enclosure: SlopeEnclosure,
}

/// Contents of `enclosures.json`.
#[derive(Debug, Serialize)]
pub struct Enclosures {
    pub form: String,
    pub seed: u64,
    pub tol: f64,
    pub pairs: Vec<PairEnclosure>,
    /// Probed at the `u` of the first pair.
    pub regularity: RegularityReport,
    pub quadraticity: QuadraticityVerdict,
}

pub fn slopes(config: &ExperimentConfig) -> Result<Enclosures, Outcome> {
    let Some(spec) = &config.slopes else {
        return Err(Outcome::fail(EXIT_USAGE, "slopes: the config has no [slopes] section"));
    };
    let usage = |e: config::ConfigError| Outcome::fail(EXIT_USAGE, e);
    let solver = |e: dirform::Error| Outcome::fail(EXIT_SOLVER, e);
    let exp = config.experiment().map_err(usage)?;
    let n = config.space.size;
    let mut pairs = Vec::new();
    if let (Some(u), Some(v)) = (&spec.u, &spec.v) {
        pairs.push((field("slopes.u", u, n).map_err(usage)?, field("slopes.v", v, n).map_err(usage)?));
    }
    let mut sampler = Sampler::new(n, config.seed);
    let structure = locality_of(&exp.form);
    pairs.extend((0..spec.samples).map(|_| sampler.pair(&structure)));

    let mut out = Vec::with_capacity(pairs.len());
    for (u, v) in &pairs {
        out.push(PairEnclosure {
            u: u.clone(),
            v: v.clone(),
            energy_u: evaluate(&exp.form, u).map_err(solver)?,
            energy_v: evaluate(&exp.form, v).map_err(solver)?,
            enclosure: slope_enclosure(&exp.form, u, v, spec.tol).map_err(solver)?,
        });
    }
    let directions = sampler.directions(spec.directions);
    let regularity = regularity_probe(&exp.form, &pairs[0].0, &directions, spec.tol).map_err(solver)?;
    let quadraticity = quadraticity_test(&exp.form, &pairs, spec.tol).map_err(solver)?;
    Ok(Enclosures {
        form: exp.form.identifier(),
        seed: config.seed,
        tol: spec.tol,
        pairs: out,
        regularity,
        quadraticity,
    })
}

/// Slope enclosures for the configured pairs, plus regularity and
/// quadraticity verdicts, written to `enclosures.json`.
pub fn cmd_slopes(config: &ExperimentConfig, out: &Path) -> Outcome {
    let result = match slopes(config) {
        Ok(r) => r,
        Err(o) => return o,
    };
    if let Err(o) = prepare(out) {
        return o;
    }
    let mut json = serde_json::to_string_pretty(&result).expect("enclosures serialize");
    json.push('\n');
    if let Err(e) = write(out, "enclosures.json", &json) {
        return io_failure(e);
    }
    let mut o = Outcome::new();
    for p in &result.pairs {
        let e = &p.enclosure;
        writeln!(
            o.stdout,
            "E(u) = {:.10e}  Λ⁻ = {:.10e}  Λ⁺ = {:.10e}  bracket [{:.10e}, {:.10e}]  {}",
            p.energy_u,
            e.minus,
            e.plus,
            e.lower,
            e.upper,
            if e.certified { "certified" } else { "uncertified" }
        )
        .unwrap();
    }
    let q = &result.quadraticity;
    writeln!(
        o.stdout,
        "regular at u: {}  quadratic: {}  symmetry defect {:.3e}  parallelogram defect {:.3e}",
        result.regularity.regular, q.quadratic, q.symmetry_defect, q.parallelogram_defect
    )
    .unwrap();
    o
}

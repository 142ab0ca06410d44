//! The experiment config: one TOML document describing the space, the form,
//! solver settings and the parameters of each command.

use std::path::{Path, PathBuf};

use dirform::checker::AuditOptions;
use dirform::forms::{Family, FormDescriptor};
use dirform::prox::SolverConfig;
use dirform::space::{Field, MeasureSpace};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Verdict labels the audit must produce, e.g. `"not-dirichlet"`.
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<String>,
    pub space: SpaceSpec,
    pub form: Family,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<SlopesSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub size: usize,
    /// Uniform weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// [`AuditOptions`] without the seed, which is set at the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub samples: usize,
    pub contractions: usize,
    pub flow_pairs: usize,
    pub calculus_points: usize,
    pub closed_form_tol: f64,
    pub prox_tol: f64,
    pub flow_steps: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        let d = AuditOptions::default();
        Self {
            samples: d.samples,
            contractions: d.contractions,
            flow_pairs: d.flow_pairs,
            calculus_points: d.calculus_points,
            closed_form_tol: d.closed_form_tol,
            prox_tol: d.prox_tol,
            flow_steps: d.flow_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub u0: Vec<f64>,
    pub t_final: f64,
    pub steps: usize,
}

/// Either explicit `u` and `v`, or `samples` random pairs drawn from the
/// seed, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    pub samples: usize,
    pub tol: f64,
    /// Random directions added to the coordinate ones in the regularity probe.
    pub directions: usize,
}

impl Default for SlopesSection {
    fn default() -> Self {
        Self {
            u: None,
            v: None,
            samples: 0,
            tol: 1e-8,
            directions: 4,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

pub const LABELS: [&str; 10] = [
    "dirichlet-consistent",
    "not-dirichlet",
    "quadratic",
    "non-quadratic",
    "regular",
    "irregular",
    "symmetric",
    "non-symmetric",
    "local",
    "non-local",
];

/// A config turned into library objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub space: MeasureSpace,
    pub form: FormDescriptor,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn audit_options(&self) -> AuditOptions {
        let a = &self.audit;
        AuditOptions {
            seed: self.seed,
            samples: a.samples,
            contractions: a.contractions,
            flow_pairs: a.flow_pairs,
            calculus_points: a.calculus_points,
            closed_form_tol: a.closed_form_tol,
            prox_tol: a.prox_tol,
            flow_steps: a.flow_steps,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.experiment()?;
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        self.audit_options().validate().map_err(|e| invalid("audit", e))?;
        for label in &self.expect {
            if !LABELS.contains(&label.as_str()) {
                return Err(invalid("expect", format!("unknown label {label:?}; known labels: {}", LABELS.join(", "))));
            }
        }
        let n = self.space.size;
        if let Some(f) = &self.flow {
            field("flow.u0", &f.u0, n)?;
            if !(f.t_final >= 0.0 && f.t_final.is_finite()) {
                return Err(invalid("flow.t_final", format!("must be nonnegative, got {}", f.t_final)));
            }
            if f.steps == 0 {
                return Err(invalid("flow.steps", "must be at least 1"));
            }
        }
        if let Some(s) = &self.slopes {
            match (&s.u, &s.v) {
                (Some(u), Some(v)) => {
                    field("slopes.u", u, n)?;
                    field("slopes.v", v, n)?;
                }
                (None, None) if s.samples > 0 => {}
                (None, None) => return Err(invalid("slopes", "needs u and v, or samples > 0")),
                _ => return Err(invalid("slopes", "u and v must be given together")),
            }
            if !(s.tol > 0.0 && s.tol.is_finite()) {
                return Err(invalid("slopes.tol", format!("must be positive, got {}", s.tol)));
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<Experiment, ConfigError> {
        let n = self.space.size;
        if n == 0 {
            return Err(invalid("space.size", "must be at least 1"));
        }
        let space = match &self.space.weights {
            Some(w) if w.len() != n => {
                return Err(invalid("space.weights", format!("has {} entries, space.size is {n}", w.len())))
            }
            Some(w) => MeasureSpace::new(w.clone()),
            None => MeasureSpace::uniform(n),
        }
        .map_err(|e| invalid("space.weights", e))?;
        let form = FormDescriptor::new(n, self.form.clone()).map_err(|e| invalid("form", e))?;
        Ok(Experiment { space, form })
    }
}

pub fn field(name: &str, values: &[f64], n: usize) -> Result<Field, ConfigError> {
    if values.len() != n {
        return Err(invalid(name, format!("has {} entries, space.size is {n}", values.len())));
    }
    Field::new(values.to_vec()).map_err(|e| invalid(name, e))
}

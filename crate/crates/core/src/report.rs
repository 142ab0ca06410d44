//! Per-property pass/fail records shared by the flow probes and the audit.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::space::{Field, NormalContraction};

/// Which default tolerance a record was judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceClass {
    /// Direct energy evaluations.
    ClosedForm,
    /// Quantities computed through proximal solves.
    ProxMediated,
}

impl ToleranceClass {
    pub fn default_tolerance(self) -> f64 {
        match self {
            ToleranceClass::ClosedForm => 1e-8,
            ToleranceClass::ProxMediated => 1e-5,
        }
    }
}

/// Everything needed to recompute a violation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterexample {
    pub u: Option<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<NormalContraction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_exponent",
        deserialize_with = "de_exponent"
    )]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub margin: f64,
}

impl Counterexample {
    pub fn new(margin: f64) -> Self {
        Self {
            margin,
            ..Self::default()
        }
    }

    pub fn with_u(mut self, u: &Field) -> Self {
        self.u = Some(u.clone());
        self
    }

    pub fn with_v(mut self, v: &Field) -> Self {
        self.v = Some(v.clone());
        self
    }
}

/// JSON has no infinity; the sup-norm exponent is written as `"inf"`.
fn ser_exponent<S: Serializer>(p: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match p {
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

fn de_exponent<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(x)) => Ok(Some(x)),
        Some(Raw::Str(s)) if s == "inf" => Ok(Some(f64::INFINITY)),
        Some(Raw::Str(s)) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    /// Stable machine-readable key.
    pub property: String,
    /// The inequality or identity, written out.
    pub statement: String,
    pub tolerance: f64,
    pub tolerance_class: ToleranceClass,
    pub samples: usize,
    pub violations: usize,
    /// Largest observed margin; positive margins point in the violating
    /// direction.
    pub worst_margin: f64,
    pub passed: bool,
    /// The worst violation, if any.
    pub counterexample: Option<Counterexample>,
    pub solver_failures: usize,
    /// Informational records do not enter any verdict.
    pub informational: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Running accumulator behind a [`PropertyRecord`].
#[derive(Debug)]
pub struct Tally {
    property: String,
    statement: String,
    tolerance: f64,
    class: ToleranceClass,
    samples: usize,
    violations: usize,
    worst: f64,
    worst_violation: Option<Counterexample>,
    solver_failures: usize,
    informational: bool,
    note: Option<String>,
}

impl Tally {
    pub fn new(property: &str, statement: &str, class: ToleranceClass, tolerance: f64) -> Self {
        Self {
            property: property.into(),
            statement: statement.into(),
            tolerance,
            class,
            samples: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
            worst_violation: None,
            solver_failures: 0,
            informational: false,
            note: None,
        }
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.note = Some(note.into());
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Records one sample. `scale` multiplies the tolerance (use `1 + size of
    /// the quantities compared`); the payload is only built for violations.
    pub fn observe(&mut self, margin: f64, scale: f64, payload: impl FnOnce() -> Counterexample) -> bool {
        self.samples += 1;
        if margin > self.worst || self.worst.is_nan() {
            self.worst = margin;
        }
        let violated = !(margin <= self.tolerance * scale);
        if violated {
            self.violations += 1;
            let better = self
                .worst_violation
                .as_ref()
                .map_or(true, |c| margin > c.margin);
            if better {
                let mut c = payload();
                c.margin = margin;
                self.worst_violation = Some(c);
            }
        }
        violated
    }

    pub fn solver_failure(&mut self) {
        self.solver_failures += 1;
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn finish(self) -> PropertyRecord {
        PropertyRecord {
            passed: self.violations == 0 && self.samples > 0,
            worst_margin: if self.samples == 0 { 0.0 } else { self.worst },
            property: self.property,
            statement: self.statement,
            tolerance: self.tolerance,
            tolerance_class: self.class,
            samples: self.samples,
            violations: self.violations,
            counterexample: self.worst_violation,
            solver_failures: self.solver_failures,
            informational: self.informational,
            note: self.note,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_exponent_round_trips() {
        let mut c = Counterexample::new(0.5);
        c.p = Some(f64::INFINITY);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"p\":\"inf\""), "{json}");
        let back: Counterexample = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn tally_keeps_worst_violation() {
        let mut t = Tally::new("x", "x <= 0", ToleranceClass::ClosedForm, 1e-8);
        t.observe(-1.0, 1.0, || unreachable!());
        t.observe(0.5, 1.0, || Counterexample::new(0.0).with_u(&Field::zeros(1)));
        t.observe(2.0, 1.0, || Counterexample::new(0.0));
        t.observe(1.0, 1.0, || Counterexample::new(0.0));
        let r = t.finish();
        assert_eq!((r.samples, r.violations, r.worst_margin), (4, 3, 2.0));
        assert_eq!(r.counterexample.unwrap().margin, 2.0);
        assert!(!r.passed);
    }
}

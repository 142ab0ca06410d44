//! Finite measure spaces, fields on them, and the pointwise maps the
//! characterization inequalities are stated with.
//!
//! Every quantity that involves integration carries the weights of the
//! [`MeasureSpace`] explicitly; nothing here assumes unit weights.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set `{0, .., n-1}` with strictly positive point masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSpace {
    weights: Vec<f64>,
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        Ok(Self { weights })
    }

    /// `n` points of unit mass.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                found: u.len(),
            });
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for MeasureSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            weights: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        MeasureSpace::new(raw.weights).map_err(serde::de::Error::custom)
    }
}

/// A real function on the points of a measure space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    /// Builds a field, rejecting NaN and infinite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    /// The indicator of point `i` scaled by `c`.
    pub fn basis(n: usize, i: usize, c: f64) -> Self {
        let mut v = vec![0.0; n];
        v[i] = c;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|x| c * x)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &Field) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scale(self)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|x| -x)
    }
}

fn check_pair(u: &Field, v: &Field) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `sum_i m_i u_i v_i`.
pub fn inner(u: &Field, v: &Field, space: &MeasureSpace) -> Result<f64> {
    space.check(u)?;
    space.check(v)?;
    Ok(weighted_dot(u.values(), v.values(), space.weights()))
}

pub(crate) fn weighted_dot(u: &[f64], v: &[f64], m: &[f64]) -> f64 {
    u.iter().zip(v).zip(m).map(|((a, b), w)| w * a * b).sum()
}

/// The `L^2(m)` norm; shorthand for `lp_norm(u, 2.0, space)` without the error path.
pub fn m_norm(u: &Field, space: &MeasureSpace) -> f64 {
    weighted_dot(u.values(), u.values(), space.weights()).sqrt()
}

/// Weighted `L^p` norm for `p` in `[1, inf]`; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(u: &Field, p: f64, space: &MeasureSpace) -> Result<f64> {
    space.check(u)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(u.sup_norm());
    }
    let m = space.weights();
    if p == 1.0 {
        return Ok(u.iter().zip(m).map(|(x, w)| w * x.abs()).sum());
    }
    if p == 2.0 {
        return Ok(m_norm(u, space));
    }
    // Rescale by the sup norm so large p does not overflow.
    let s = u.sup_norm();
    if s == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = u.iter().zip(m).map(|(x, w)| w * (x.abs() / s).powf(p)).sum();
    Ok(s * sum.powf(1.0 / p))
}

/// Pointwise `(u ∧ v, u ∨ v)`.
pub fn meet_join(u: &Field, v: &Field) -> Result<(Field, Field)> {
    check_pair(u, v)?;
    Ok((u.zip_map(v, f64::min), u.zip_map(v, f64::max)))
}

/// Pointwise clamp to `[0, 1]`.
pub fn unit_contraction(u: &Field) -> Field {
    u.map(|x| x.clamp(0.0, 1.0))
}

/// The truncation `H_α(u, v) = v + clamp(u - v, -α, α)`: `u` moved toward `v`
/// until it is within `α` of it.
pub fn h_alpha(u: &Field, v: &Field, alpha: f64) -> Result<Field> {
    check_pair(u, v)?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    // `b + (a - b)` need not round back to `a`; pass `a` through untouched
    // where the clamp is inactive.
    Ok(u.zip_map(v, |a, b| {
        let d = a - b;
        if d.abs() <= alpha {
            a
        } else {
            b + d.clamp(-alpha, alpha)
        }
    }))
}

/// A piecewise-linear 1-Lipschitz map with `φ(0) = 0`.
///
/// `slopes[k]` is the slope on the `k`-th interval cut out by `breakpoints`,
/// so there is one more slope than breakpoints (the two unbounded pieces
/// included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalContraction {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    #[serde(skip)]
    knot_values: Vec<f64>,
}

impl NormalContraction {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidContraction("no breakpoints".into()));
        }
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidContraction(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidContraction("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidContraction(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if !breakpoints.contains(&0.0) {
            return Err(Error::InvalidContraction("0 must be a breakpoint".into()));
        }
        if let Some(s) = slopes.iter().find(|s| !(s.abs() <= 1.0)) {
            return Err(Error::InvalidContraction(format!("slope {s} outside [-1, 1]")));
        }
        let zero = breakpoints.iter().position(|&b| b == 0.0).unwrap();
        let mut knot_values = vec![0.0; breakpoints.len()];
        for k in (zero + 1)..breakpoints.len() {
            knot_values[k] = knot_values[k - 1] + slopes[k] * (breakpoints[k] - breakpoints[k - 1]);
        }
        for k in (0..zero).rev() {
            knot_values[k] =
                knot_values[k + 1] - slopes[k + 1] * (breakpoints[k + 1] - breakpoints[k]);
        }
        Ok(Self {
            breakpoints,
            slopes,
            knot_values,
        })
    }

    pub fn identity() -> Self {
        Self::new(vec![0.0], vec![1.0, 1.0]).unwrap()
    }

    pub fn negation() -> Self {
        Self::new(vec![0.0], vec![-1.0, -1.0]).unwrap()
    }

    /// `t ↦ 0 ∨ t ∧ 1`.
    pub fn unit_clamp() -> Self {
        Self::new(vec![0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap()
    }

    pub fn absolute_value() -> Self {
        Self::new(vec![0.0], vec![-1.0, 1.0]).unwrap()
    }

    pub fn positive_part() -> Self {
        Self::new(vec![0.0], vec![0.0, 1.0]).unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn eval(&self, t: f64) -> f64 {
        let b = &self.breakpoints;
        // Index of the first breakpoint strictly greater than t.
        let k = b.partition_point(|&x| x <= t);
        if k == 0 {
            self.knot_values[0] + self.slopes[0] * (t - b[0])
        } else {
            self.knot_values[k - 1] + self.slopes[k] * (t - b[k - 1])
        }
    }
}

/// Pointwise composition `φ ∘ u`.
pub fn apply_contraction(phi: &NormalContraction, u: &Field) -> Field {
    u.map(|x| phi.eval(x))
}

#![allow(dead_code)]

use dirform::catalog::catalog;
use dirform::forms::FormDescriptor;
use dirform::sampling::Sampler;
use dirform::space::{Field, MeasureSpace};
use proptest::prelude::*;

/// A weighted space, the six catalog forms on it and a sampler to draw
/// fields from, all determined by `(size, seed)`.
pub struct Instance {
    pub space: MeasureSpace,
    pub forms: Vec<FormDescriptor>,
    pub sampler: Sampler,
}

pub fn instance(size: usize, seed: u64) -> Instance {
    let mut sampler = Sampler::new(size, seed);
    let space = sampler.weights();
    let forms = catalog(&mut sampler);
    Instance { space, forms, sampler }
}

pub fn size_and_seed() -> impl Strategy<Value = (usize, u64)> {
    (2usize..=8, any::<u64>())
}

pub fn field(n: usize) -> impl Strategy<Value = Field> {
    proptest::collection::vec(-5.0f64..5.0, n).prop_map(Field::from)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

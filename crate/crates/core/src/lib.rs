pub mod calculus;
pub mod catalog;
pub mod checker;
pub mod error;
pub mod forms;
pub mod prox;
mod qp;
pub mod report;
pub mod sampling;
pub mod semigroup;
pub mod space;

pub use error::{Error, Result};

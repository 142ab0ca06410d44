//! The book in `book/src`, one module per chapter, so that `cargo test`
//! runs every Rust block in it.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/spaces-and-forms.md")]
pub mod spaces_and_forms {}
#[doc = include_str!("../../../book/src/proximal.md")]
pub mod proximal {}
#[doc = include_str!("../../../book/src/flows.md")]
pub mod flows {}
#[doc = include_str!("../../../book/src/slopes.md")]
pub mod slopes {}
#[doc = include_str!("../../../book/src/audits.md")]
pub mod audits {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

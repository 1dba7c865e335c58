//! The guide in `book/src`, one module per chapter, so that `cargo test`
//! runs every Rust snippet in it as a doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/curve.md")]
pub mod curve {}
#[doc = include_str!("../../../book/src/orders.md")]
pub mod orders {}
#[doc = include_str!("../../../book/src/mechanisms.md")]
pub mod mechanisms {}
#[doc = include_str!("../../../book/src/audits.md")]
pub mod audits {}
#[doc = include_str!("../../../book/src/constructions.md")]
pub mod constructions {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

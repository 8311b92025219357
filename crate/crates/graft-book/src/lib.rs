//! Doc-tested code listings for the guide in `book/`.
//!
//! Each chapter is included as module documentation so `cargo test --doc`
//! compiles and runs every Rust code block in the book. A failing listing
//! names its chapter module.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/sparse.md")]
pub mod sparse {}

#[doc = include_str!("../../../book/src/feedback.md")]
pub mod feedback {}

#[doc = include_str!("../../../book/src/dense.md")]
pub mod dense {}

#[doc = include_str!("../../../book/src/learned.md")]
pub mod learned {}

#[doc = include_str!("../../../book/src/fusion.md")]
pub mod fusion {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/tuning.md")]
pub mod tuning {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

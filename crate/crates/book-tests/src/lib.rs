//! Runs the Rust listings of the guide in `book/` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/encodings.md")]
pub mod encodings {}

#[doc = include_str!("../../../book/src/genetic-algorithm.md")]
pub mod genetic_algorithm {}

#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}

#[doc = include_str!("../../../book/src/energy-budget.md")]
pub mod energy_budget {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

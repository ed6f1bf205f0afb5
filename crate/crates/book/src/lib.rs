//! The guide's chapters, pulled in as rustdoc so `cargo test` runs every
//! listing. mdbook alone cannot test listings that depend on workspace crates.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/survey-data.md")]
pub mod survey_data {}
#[doc = include_str!("../../../book/src/indices.md")]
pub mod indices {}
#[doc = include_str!("../../../book/src/gap.md")]
pub mod gap {}
#[doc = include_str!("../../../book/src/inference.md")]
pub mod inference {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

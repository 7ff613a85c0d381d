//! The guide in `book/` cannot run its listings against this workspace with
//! `mdbook test`, so every chapter is pulled in here as module docs and
//! `cargo test --doc` runs the listings instead. One module per chapter keeps
//! failures traceable to their file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../../book/src/continuation.md")]
pub mod continuation {}
#[doc = include_str!("../../../book/src/refinement.md")]
pub mod refinement {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

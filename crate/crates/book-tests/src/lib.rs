//! Compiles and runs every Rust block of the guide in `book/src`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spectra.md")]
pub mod spectra {}

#[doc = include_str!("../../../book/src/gaps.md")]
pub mod gaps {}

#[doc = include_str!("../../../book/src/control.md")]
pub mod control {}

#[doc = include_str!("../../../book/src/observability.md")]
pub mod observability {}

#[doc = include_str!("../../../book/src/concentration.md")]
pub mod concentration {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

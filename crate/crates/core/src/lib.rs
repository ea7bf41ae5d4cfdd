//! Fault-tolerant auto-scaling of web applications on heterogeneous spot
//! instances.
//!
//! The crate has three layers:
//!
//! - capacity and market primitives ([`capacity`], [`market`]),
//! - the provision model and the scaling policies ([`provision`], [`policy`]),
//! - a deterministic discrete-event simulator with trace ingestion and
//!   reporting ([`sim`], [`trace_io`], [`experiment`]).
//!
//! The guide under `book/` walks through each concept with runnable
//! snippets; those snippets are compiled and run as doc-tests of this crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod error;
pub mod experiment;
pub mod market;
pub mod policy;
pub mod provision;
pub mod sim;
pub mod trace_io;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/capacity.md")]
    mod capacity {}
    #[doc = include_str!("../../../book/src/market.md")]
    mod market {}
    #[doc = include_str!("../../../book/src/provision.md")]
    mod provision {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}

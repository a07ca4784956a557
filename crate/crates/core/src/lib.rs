//! Sound output abstractions for safety verification of stable linear and
//! periodically switched systems.
//!
//! A model is balanced and truncated, the output mismatch between the model
//! and its abstraction is bounded by `δ`, the specification is tightened by
//! `δ`, and reachability runs on the small model only. See [`verifier::verify`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balancing;
pub mod benchmarks;
pub mod bounds;
pub mod error;
pub mod generate;
pub mod gramians;
mod linalg;
pub mod model;
pub mod reach;
pub mod spectransform;
pub mod verifier;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/balancing.md")]
    mod balancing {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/spectransform.md")]
    mod spectransform {}
    #[doc = include_str!("../../../book/src/reach.md")]
    mod reach {}
    #[doc = include_str!("../../../book/src/verifier.md")]
    mod verifier {}
}

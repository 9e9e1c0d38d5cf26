//! Green-roof potential, priority and benefit assessment from classified
//! point clouds and city rasters.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benefits;
pub mod config;
pub mod error;
pub mod geocore;
pub mod indicators;
pub mod ingest;
pub mod interp;
pub mod pipeline;
pub mod priority;
pub mod roofs;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/roofs.md")]
    mod roofs {}
    #[doc = include_str!("../../../book/src/interpolation.md")]
    mod interpolation {}
    #[doc = include_str!("../../../book/src/indicators.md")]
    mod indicators {}
    #[doc = include_str!("../../../book/src/priority.md")]
    mod priority {}
    #[doc = include_str!("../../../book/src/benefits.md")]
    mod benefits {}
}

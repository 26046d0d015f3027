//! Rebalancing of arousal/valence-labeled facial expression coefficient
//! datasets by blending coefficient sequences.
//!
//! The pipeline has three stages:
//!
//! 1. cluster videos by their mean (arousal, valence) and pick *source*
//!    videos from the emptiest clusters ([`avspace`], [`selection`]);
//! 2. pick *target* videos for every source ([`selection`]);
//! 3. blend each (source, target) pair into a new labeled sequence
//!    ([`blending`]).
//!
//! [`dataset`] holds the data model and file formats, [`metrics`] the
//! evaluation stack (RMSE, PCC, CCC), and [`synthgen`] generates corpora with
//! exactly known labels for testing.

pub mod avspace;
pub mod blending;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod seed;
pub mod selection;
pub mod synthgen;

pub use error::{Error, Result};

// Book chapters are compiled as doc-tests so their snippets track the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/av-space.md")]
    mod av_space {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/blending.md")]
    mod blending {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/synthetic-corpora.md")]
    mod synthetic_corpora {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

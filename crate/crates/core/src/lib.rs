//! Two-stage token pruning for volumetric inputs to vision-language models.
//!
//! Slices are first thinned by anchor-based filtering ([`iaf`]). Each kept
//! slice is then scored by multi-head attention saliency ([`saliency`]), its
//! most important tokens are kept up to a cumulative mass threshold ([`dins`]),
//! and the rest are folded into a few contextual tokens ([`merge`]).
//! [`pipeline`] ties the stages together and reports the retention rate.

pub mod cli;
pub mod config;
pub mod dins;
pub mod error;
pub mod iaf;
pub mod merge;
pub mod pipeline;
pub mod report;
pub mod saliency;
pub mod synth;
pub mod tensor_io;
pub mod types;

pub use config::{validate_config, PruneConfig};
pub use dins::{fixed_ratio_select, nucleus_select};
pub use error::{Error, FormatError, Result};
pub use iaf::{iaf_filter, slice_l1_distance};
pub use merge::{bipartite_merge, MergeOutcome};
pub use pipeline::{
    compare_baselines, prune_volume, run_ablation, tau_sweep, uniform_slice_sample, SweepPoint,
    VariantStats,
};
pub use saliency::{
    aggregate_importance, head_attention, temperature_softmax, toy_encode, HeadStack,
    TokenFeatures, ToyEncoder,
};
pub use types::{
    Cluster, ImportanceVector, PrimarySet, PruneResult, SlicePrune, SliceSelection, StageTimings,
    Volume,
};

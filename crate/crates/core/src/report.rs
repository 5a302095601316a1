//! JSON result documents.
//!
//! Floats are rounded to 12 significant digits before serialization so that
//! output is stable and compact. Contextual token vectors go to a sibling
//! MPRC file named in `contextual_tokens_file`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PruneConfig;
use crate::error::Result;
use crate::tensor_io::write_contextual;
use crate::types::{Cluster, PruneResult, StageTimings};

pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub slice_index: usize,
    pub primary_indices: Vec<usize>,
    pub primary_mass: f64,
    pub clusters: Vec<Cluster>,
    pub contextual_dim: usize,
}

/// On-disk form of a [`PruneResult`]. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub config: PruneConfig,
    pub original_depth: usize,
    pub tokens_per_slice: usize,
    pub retained_slices: Vec<usize>,
    pub per_slice: Vec<SliceRecord>,
    pub original_tokens: usize,
    pub retained_tokens: usize,
    pub r_rate: f64,
    /// `None` when timings were not requested, keeping output reproducible.
    pub timings_ms: Option<StageTimings>,
    pub contextual_tokens_file: Option<String>,
}

fn rounded_config(cfg: &PruneConfig) -> PruneConfig {
    PruneConfig {
        gamma: round_sig12(cfg.gamma),
        tau: round_sig12(cfg.tau),
        temperature: round_sig12(cfg.temperature),
        contextual_ratio: round_sig12(cfg.contextual_ratio),
        ..*cfg
    }
}

fn rounded_timings(t: &StageTimings) -> StageTimings {
    StageTimings {
        iaf: round_sig12(t.iaf),
        saliency: round_sig12(t.saliency),
        dins: round_sig12(t.dins),
        merge: round_sig12(t.merge),
        total: round_sig12(t.total),
    }
}

impl ResultDocument {
    pub fn from_result(res: &PruneResult, include_timings: bool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: rounded_config(&res.config),
            original_depth: res.slice_selection.original_depth(),
            tokens_per_slice: res.tokens_per_slice,
            retained_slices: res.slice_selection.retained().to_vec(),
            per_slice: res
                .slices
                .iter()
                .map(|s| SliceRecord {
                    slice_index: s.slice_index,
                    primary_indices: s.primary.indices.clone(),
                    primary_mass: round_sig12(s.primary.cumulative_mass),
                    clusters: s.clusters.clone(),
                    contextual_dim: s.contextual_tokens.first().map_or(0, Vec::len),
                })
                .collect(),
            original_tokens: res.original_tokens,
            retained_tokens: res.retained_tokens,
            r_rate: round_sig12(res.r_rate),
            timings_ms: include_timings.then(|| rounded_timings(&res.timings)),
            contextual_tokens_file: None,
        }
    }
}

/// Sibling path for the contextual token file: `out.json` -> `out.ctx.bin`.
pub fn contextual_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("ctx.bin")
}

/// Writes `res` as JSON to `path` and its contextual tokens next to it.
pub fn write_result_json(
    res: &PruneResult,
    path: impl AsRef<Path>,
    include_timings: bool,
) -> Result<ResultDocument> {
    let path = path.as_ref();
    let ctx_path = contextual_path(path);
    let tokens: Vec<Vec<f64>> = res
        .slices
        .iter()
        .flat_map(|s| s.contextual_tokens.iter().cloned())
        .collect();
    write_contextual(&tokens, &ctx_path)?;

    let mut doc = ResultDocument::from_result(res, include_timings);
    doc.contextual_tokens_file = ctx_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned());
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(doc)
}

pub fn read_result_json(path: impl AsRef<Path>) -> Result<ResultDocument> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

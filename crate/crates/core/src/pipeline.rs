//! End-to-end pruning: slice filtering, saliency, nucleus selection and
//! merging, plus the baseline and ablation drivers built on the same stages.
//!
//! Token counts are always reported against the unfiltered volume, so slice
//! filtering counts toward the retention rate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PruneConfig;
use crate::dins::{fixed_ratio_select, nucleus_select};
use crate::error::{Error, Result};
use crate::iaf::iaf_filter;
use crate::merge::bipartite_merge;
use crate::saliency::{slice_importance, HeadStack, TokenFeatures, ToyEncoder};
use crate::types::{
    ImportanceVector, PrimarySet, PruneResult, SlicePrune, SliceSelection, StageTimings, Volume,
};

/// Features and normalized importance of one slice.
#[derive(Debug, Clone)]
struct ScoredSlice {
    slice_index: usize,
    features: TokenFeatures,
    importance: ImportanceVector,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Validates `cfg` against `vol` and external attention against both.
fn check_inputs(vol: &Volume, cfg: &PruneConfig, attention: Option<&[HeadStack]>) -> Result<()> {
    cfg.validate_for(vol).map_err(|e| e.in_stage("config"))?;
    if let Some(stacks) = attention {
        let fail = |msg: String| Err(Error::Invalid(msg).in_stage("attention"));
        if stacks.len() < vol.depth() {
            return fail(format!(
                "attention covers {} slices, volume has {}",
                stacks.len(),
                vol.depth()
            ));
        }
        let m = cfg.tokens_per_slice(vol);
        if let Some((i, s)) = stacks.iter().enumerate().find(|(_, s)| s.tokens() != m) {
            return fail(format!(
                "attention block {i} has {} tokens, patch grid gives {m}",
                s.tokens()
            ));
        }
    }
    Ok(())
}

/// Features plus importance for each slice in `indices`. External attention is
/// indexed by original slice index; features always come from the patch
/// encoder.
fn score_slices(
    vol: &Volume,
    cfg: &PruneConfig,
    attention: Option<&[HeadStack]>,
    indices: &[usize],
) -> Result<Vec<ScoredSlice>> {
    let encoder = ToyEncoder::new(cfg);
    indices
        .par_iter()
        .map(|&i| {
            let pixels = vol.slice(i);
            let (features, importance) = match attention {
                Some(stacks) => {
                    let features = encoder.features(pixels, vol.height(), vol.width())?;
                    (features, slice_importance(&stacks[i], cfg.temperature)?)
                }
                None => {
                    let (features, stack) = encoder.encode(pixels, vol.height(), vol.width())?;
                    (features, slice_importance(&stack, cfg.temperature)?)
                }
            };
            Ok(ScoredSlice {
                slice_index: i,
                features,
                importance,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("saliency"))
}

fn redundant_indices(m: usize, primary: &PrimarySet) -> Vec<usize> {
    let mut keep = vec![false; m];
    for &i in &primary.indices {
        keep[i] = true;
    }
    (0..m).filter(|&i| !keep[i]).collect()
}

fn merge_slice(scored: &ScoredSlice, primary: PrimarySet, contextual_ratio: f64) -> SlicePrune {
    let redundant = redundant_indices(scored.importance.token_count(), &primary);
    let merged = bipartite_merge(
        &redundant,
        &scored.importance,
        &scored.features,
        contextual_ratio,
    );
    SlicePrune {
        slice_index: scored.slice_index,
        primary,
        clusters: merged.clusters,
        contextual_tokens: merged.contextual_tokens,
    }
}

/// Nucleus selection then merging over already-scored slices.
fn token_stage(
    scored: &[ScoredSlice],
    tau: f64,
    contextual_ratio: f64,
    timings: &mut StageTimings,
) -> Result<Vec<SlicePrune>> {
    let start = Instant::now();
    let primaries = scored
        .par_iter()
        .map(|s| nucleus_select(&s.importance, tau))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("dins"))?;
    timings.dins += elapsed_ms(start);

    let start = Instant::now();
    let slices = scored
        .par_iter()
        .zip(primaries)
        .map(|(s, p)| merge_slice(s, p, contextual_ratio))
        .collect();
    timings.merge += elapsed_ms(start);
    Ok(slices)
}

/// Runs the full pipeline on `vol`. Without `attention` the patch encoder
/// supplies Q/K; with it, block `i` is used for slice `i`.
pub fn prune_volume(
    vol: &Volume,
    cfg: &PruneConfig,
    attention: Option<&[HeadStack]>,
) -> Result<PruneResult> {
    let total = Instant::now();
    check_inputs(vol, cfg, attention)?;
    let mut timings = StageTimings::default();

    let start = Instant::now();
    let selection = iaf_filter(vol, cfg.gamma);
    timings.iaf = elapsed_ms(start);

    let start = Instant::now();
    let scored = score_slices(vol, cfg, attention, selection.retained())?;
    timings.saliency = elapsed_ms(start);

    let slices = token_stage(&scored, cfg.tau, cfg.contextual_ratio, &mut timings)?;
    timings.total = elapsed_ms(total);
    Ok(PruneResult::from_slices(
        *cfg,
        selection,
        slices,
        cfg.tokens_per_slice(vol),
        timings,
    ))
}

/// Every `stride`-th slice starting at 0.
pub fn uniform_slice_sample(depth: usize, stride: usize) -> Result<SliceSelection> {
    if stride == 0 {
        return Err(Error::Invalid("stride must be >= 1".into()));
    }
    if depth == 0 {
        return Err(Error::Invalid("depth must be >= 1".into()));
    }
    SliceSelection::new((0..depth).step_by(stride).collect(), depth)
}

/// Token accounting for one pruning strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub variant: String,
    pub r_rate: f64,
    pub retained_slices: usize,
    pub retained_tokens: usize,
    /// Mean over kept slices of the importance mass carried by kept tokens.
    pub mean_mass: f64,
}

impl VariantStats {
    fn new(
        variant: &str,
        retained_slices: usize,
        retained_tokens: usize,
        original: usize,
        mean_mass: f64,
    ) -> Self {
        Self {
            variant: variant.to_string(),
            r_rate: retained_tokens as f64 / original as f64,
            retained_slices,
            retained_tokens,
            mean_mass,
        }
    }

    fn from_result(variant: &str, res: &PruneResult) -> Self {
        Self::new(
            variant,
            res.slice_selection.len(),
            res.retained_tokens,
            res.original_tokens,
            res.mean_primary_mass(),
        )
    }
}

fn all_slices(depth: usize) -> Vec<usize> {
    (0..depth).collect()
}

fn assemble(
    cfg: &PruneConfig,
    selection: SliceSelection,
    scored: &[ScoredSlice],
    tau: f64,
    contextual_ratio: f64,
    m: usize,
) -> Result<PruneResult> {
    let mut timings = StageTimings::default();
    let slices = token_stage(scored, tau, contextual_ratio, &mut timings)?;
    Ok(PruneResult::from_slices(
        *cfg, selection, slices, m, timings,
    ))
}

/// Token accounting for the ablation variants, in order: `original`,
/// `iaf_only`, `primary_only`, `primary_redundant`, `medpruner`.
///
/// `primary_only` and `primary_redundant` skip slice filtering;
/// `primary_only` also skips merging.
pub fn run_ablation(
    vol: &Volume,
    cfg: &PruneConfig,
    attention: Option<&[HeadStack]>,
) -> Result<Vec<VariantStats>> {
    check_inputs(vol, cfg, attention)?;
    let d = vol.depth();
    let m = cfg.tokens_per_slice(vol);
    let original = d * m;
    let selection = iaf_filter(vol, cfg.gamma);
    let scored = score_slices(vol, cfg, attention, &all_slices(d))?;
    let kept: Vec<ScoredSlice> = selection
        .retained()
        .iter()
        .map(|&i| scored[i].clone())
        .collect();
    let every = SliceSelection::new(all_slices(d), d)?;

    let primary_only = assemble(cfg, every.clone(), &scored, cfg.tau, 0.0, m)?;
    let primary_redundant = assemble(cfg, every, &scored, cfg.tau, cfg.contextual_ratio, m)?;
    let full = assemble(
        cfg,
        selection.clone(),
        &kept,
        cfg.tau,
        cfg.contextual_ratio,
        m,
    )?;

    Ok(vec![
        VariantStats::new("original", d, original, original, 1.0),
        VariantStats::new(
            "iaf_only",
            selection.len(),
            selection.len() * m,
            original,
            1.0,
        ),
        VariantStats::from_result("primary_only", &primary_only),
        VariantStats::from_result("primary_redundant", &primary_redundant),
        VariantStats::from_result("medpruner", &full),
    ])
}

/// One point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub r_rate: f64,
    pub mean_mass: f64,
}

/// Re-runs the token stage for each `tau` over a fixed slice selection.
pub fn tau_sweep(
    vol: &Volume,
    cfg: &PruneConfig,
    attention: Option<&[HeadStack]>,
    taus: &[f64],
) -> Result<Vec<SweepPoint>> {
    if let Some(&bad) = taus.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::Config(format!("tau out of range (0, 1]: {bad}")));
    }
    check_inputs(vol, cfg, attention)?;
    let m = cfg.tokens_per_slice(vol);
    let selection = iaf_filter(vol, cfg.gamma);
    let scored = score_slices(vol, cfg, attention, selection.retained())?;
    taus.iter()
        .map(|&tau| {
            let res = assemble(
                cfg,
                selection.clone(),
                &scored,
                tau,
                cfg.contextual_ratio,
                m,
            )?;
            Ok(SweepPoint {
                tau,
                r_rate: res.r_rate,
                mean_mass: res.mean_primary_mass(),
            })
        })
        .collect()
}

/// Full pipeline against two fixed-budget baselines at `ratio`:
/// `fixed_ratio` keeps the top `ratio` share of tokens on every slice, and
/// `uniform_slice` keeps every token of every `round(1 / ratio)`-th slice.
pub fn compare_baselines(
    vol: &Volume,
    cfg: &PruneConfig,
    attention: Option<&[HeadStack]>,
    ratio: f64,
) -> Result<Vec<VariantStats>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("ratio out of range (0, 1]: {ratio}")));
    }
    check_inputs(vol, cfg, attention)?;
    let d = vol.depth();
    let m = cfg.tokens_per_slice(vol);
    let original = d * m;

    let full = prune_volume(vol, cfg, attention)?;
    let scored = score_slices(vol, cfg, attention, &all_slices(d))?;
    let fixed: Vec<PrimarySet> = scored
        .iter()
        .map(|s| fixed_ratio_select(&s.importance, ratio))
        .collect::<Result<_>>()?;
    let fixed_tokens = fixed.iter().map(PrimarySet::len).sum();
    let fixed_mass = fixed.iter().map(|p| p.cumulative_mass).sum::<f64>() / d as f64;

    let stride = ((1.0 / ratio).round() as usize).max(1);
    let uniform = uniform_slice_sample(d, stride)?;

    Ok(vec![
        VariantStats::from_result("medpruner", &full),
        VariantStats::new("fixed_ratio", d, fixed_tokens, original, fixed_mass),
        VariantStats::new(
            "uniform_slice",
            uniform.len(),
            uniform.len() * m,
            original,
            1.0,
        ),
    ])
}

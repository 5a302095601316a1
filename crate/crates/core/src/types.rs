//! Value types passed between the pipeline stages.

use serde::{Deserialize, Serialize};

use crate::config::PruneConfig;
use crate::error::{Error, Result};

/// A stack of `depth` axial slices, each `height x width`, stored slice-major
/// then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    depth: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(depth: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if depth == 0 || height == 0 || width == 0 {
            return Err(Error::Invalid(format!(
                "volume dimensions must be positive, got {depth}x{height}x{width}"
            )));
        }
        let expected = depth
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Error::Invalid("volume dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Invalid(format!(
                "volume {depth}x{height}x{width} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite voxel at index {i}")));
        }
        Ok(Self {
            depth,
            height,
            width,
            data,
        })
    }

    /// Builds a volume by evaluating `f(slice, row, col)` at every voxel.
    pub fn from_fn(
        depth: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(depth * height * width);
        for d in 0..depth {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(d, r, c));
                }
            }
        }
        Self::new(depth, height, width, data)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixels per slice.
    pub fn slice_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Pixels of slice `i`, row-major. Panics if `i >= depth`.
    pub fn slice(&self, i: usize) -> &[f32] {
        let n = self.slice_len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Indices of the slices that survive slice-level filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSelection {
    retained: Vec<usize>,
    original_depth: usize,
}

impl SliceSelection {
    pub fn new(retained: Vec<usize>, original_depth: usize) -> Result<Self> {
        if retained.first() != Some(&0) {
            return Err(Error::Invalid(
                "slice selection must be non-empty and start at slice 0".into(),
            ));
        }
        if retained.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "slice selection must be strictly increasing".into(),
            ));
        }
        if retained.last().is_some_and(|&last| last >= original_depth) {
            return Err(Error::Invalid(format!(
                "slice selection index out of range for depth {original_depth}"
            )));
        }
        Ok(Self {
            retained,
            original_depth,
        })
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn original_depth(&self) -> usize {
        self.original_depth
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }
}

/// Normalized per-token importance weights for one slice. Every weight is
/// strictly positive and the weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    weights: Vec<f64>,
}

impl ImportanceVector {
    const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("importance vector must be non-empty".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid(format!(
                "importance weight {i} must be finite and positive, got {}",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Invalid(format!(
                "importance weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self { weights })
    }

    /// Uniform weights over `m` tokens.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn token_count(&self) -> usize {
        self.weights.len()
    }

    /// Token indices sorted by descending weight, lower index first on ties.
    pub fn ranked(&self) -> Vec<usize> {
        rank_descending(&self.weights)
    }
}

pub(crate) fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Tokens kept verbatim for one slice, in descending-weight order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimarySet {
    pub indices: Vec<usize>,
    pub cumulative_mass: f64,
}

impl PrimarySet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One group of redundant tokens folded into a single contextual token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: usize,
    pub members: Vec<usize>,
}

/// Token-stage output for one retained slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePrune {
    pub slice_index: usize,
    pub primary: PrimarySet,
    pub clusters: Vec<Cluster>,
    /// One mean feature vector per cluster, same order as `clusters`.
    pub contextual_tokens: Vec<Vec<f64>>,
}

impl SlicePrune {
    pub fn retained_tokens(&self) -> usize {
        self.primary.len() + self.clusters.len()
    }
}

/// Wall-clock time spent in each stage, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub iaf: f64,
    pub saliency: f64,
    pub dins: f64,
    pub merge: f64,
    pub total: f64,
}

/// Full outcome of pruning one volume.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub config: PruneConfig,
    pub slice_selection: SliceSelection,
    pub slices: Vec<SlicePrune>,
    pub tokens_per_slice: usize,
    pub original_tokens: usize,
    pub retained_tokens: usize,
    pub r_rate: f64,
    pub timings: StageTimings,
}

impl PruneResult {
    /// Assembles totals from per-slice detail. `original_tokens` counts every
    /// slice of the unfiltered volume.
    pub fn from_slices(
        config: PruneConfig,
        slice_selection: SliceSelection,
        slices: Vec<SlicePrune>,
        tokens_per_slice: usize,
        timings: StageTimings,
    ) -> Self {
        let original_tokens = slice_selection.original_depth() * tokens_per_slice;
        let retained_tokens = slices.iter().map(SlicePrune::retained_tokens).sum();
        Self {
            r_rate: retained_tokens as f64 / original_tokens as f64,
            config,
            slice_selection,
            slices,
            tokens_per_slice,
            original_tokens,
            retained_tokens,
            timings,
        }
    }

    /// Mean primary cumulative mass over retained slices.
    pub fn mean_primary_mass(&self) -> f64 {
        if self.slices.is_empty() {
            return 0.0;
        }
        self.slices
            .iter()
            .map(|s| s.primary.cumulative_mass)
            .sum::<f64>()
            / self.slices.len() as f64
    }
}

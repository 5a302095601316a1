use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Volume;

/// Every tunable of the pruning pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Slice filter sensitivity, in intensity units. Negative keeps every slice.
    pub gamma: f64,
    /// Cumulative importance mass the primary tokens must reach, in (0, 1].
    pub tau: f64,
    /// Softmax temperature applied to the raw importance scores.
    pub temperature: f64,
    /// Fraction of redundant tokens kept as cluster centers. Zero disables merging.
    pub contextual_ratio: f64,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub head_dim: usize,
}

impl PruneConfig {
    pub const DEFAULT_GAMMA: f64 = 0.02;
    pub const DEFAULT_TAU: f64 = 0.9;
    pub const DEFAULT_TEMPERATURE: f64 = 0.01;
    pub const DEFAULT_CONTEXTUAL_RATIO: f64 = 0.1;
    pub const DEFAULT_PATCH_SIZE: usize = 16;
    pub const DEFAULT_NUM_HEADS: usize = 4;
    pub const DEFAULT_HEAD_DIM: usize = 16;

    /// Defaults with the given patch size; the embedding width follows as `p * p`.
    pub fn with_patch_size(patch_size: usize) -> Self {
        Self {
            patch_size,
            embed_dim: patch_size * patch_size,
            ..Self::default()
        }
    }

    /// Checks the value ranges that do not depend on a volume.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.gamma.is_finite() && self.gamma >= -1.0) {
            return fail(format!(
                "gamma must be finite and >= -1, got {}",
                self.gamma
            ));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau out of range (0, 1]: {}", self.tau));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return fail(format!(
                "temperature must be finite and > 0, got {}",
                self.temperature
            ));
        }
        if !(0.0..=1.0).contains(&self.contextual_ratio) {
            return fail(format!(
                "contextual ratio out of range [0, 1]: {}",
                self.contextual_ratio
            ));
        }
        for (name, value) in [
            ("patch size", self.patch_size),
            ("embed dim", self.embed_dim),
            ("num heads", self.num_heads),
            ("head dim", self.head_dim),
        ] {
            if value == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    /// Checks every constraint, including patch divisibility against `vol`.
    pub fn validate_for(&self, vol: &Volume) -> Result<()> {
        self.validate()?;
        if !vol.height().is_multiple_of(self.patch_size) {
            return Err(Error::Config(format!(
                "patch size must divide height: {} does not divide {}",
                self.patch_size,
                vol.height()
            )));
        }
        if !vol.width().is_multiple_of(self.patch_size) {
            return Err(Error::Config(format!(
                "patch size must divide width: {} does not divide {}",
                self.patch_size,
                vol.width()
            )));
        }
        Ok(())
    }

    /// Tokens produced per slice of `vol` by the patch grid.
    pub fn tokens_per_slice(&self, vol: &Volume) -> usize {
        (vol.height() / self.patch_size) * (vol.width() / self.patch_size)
    }
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            gamma: Self::DEFAULT_GAMMA,
            tau: Self::DEFAULT_TAU,
            temperature: Self::DEFAULT_TEMPERATURE,
            contextual_ratio: Self::DEFAULT_CONTEXTUAL_RATIO,
            patch_size: Self::DEFAULT_PATCH_SIZE,
            embed_dim: Self::DEFAULT_PATCH_SIZE * Self::DEFAULT_PATCH_SIZE,
            num_heads: Self::DEFAULT_NUM_HEADS,
            head_dim: Self::DEFAULT_HEAD_DIM,
        }
    }
}

/// Free-function form of [`PruneConfig::validate_for`].
pub fn validate_config(cfg: &PruneConfig, vol: &Volume) -> Result<()> {
    cfg.validate_for(vol)
}

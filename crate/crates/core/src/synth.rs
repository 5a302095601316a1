//! Closed-form synthetic volumes and attention stacks for tests and demos.

use crate::error::{Error, Result};
use crate::saliency::HeadStack;
use crate::types::Volume;

/// Piecewise-constant volume: slice `i` holds `(i / block) * delta`, clamped
/// to `[0, 1]`.
pub fn make_step_volume(
    depth: usize,
    height: usize,
    width: usize,
    block: usize,
    delta: f64,
) -> Result<Volume> {
    if block == 0 {
        return Err(Error::Invalid("block must be >= 1".into()));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Invalid(format!("delta must be >= 0, got {delta}")));
    }
    Volume::from_fn(depth, height, width, |d, _, _| {
        ((d / block) as f64 * delta).clamp(0.0, 1.0) as f32
    })
}

/// Background 0.1 plus a linear spherical bump around `(center, H/2, W/2)`:
/// `0.1 + amplitude * max(0, 1 - dist / radius)`.
pub fn make_lesion_volume(
    depth: usize,
    height: usize,
    width: usize,
    center: usize,
    radius: f64,
    amplitude: f64,
) -> Result<Volume> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Invalid(format!("radius must be > 0, got {radius}")));
    }
    if !amplitude.is_finite() {
        return Err(Error::Invalid("amplitude must be finite".into()));
    }
    let (cz, cy, cx) = (center as f64, (height / 2) as f64, (width / 2) as f64);
    Volume::from_fn(depth, height, width, |d, r, c| {
        let dist =
            ((d as f64 - cz).powi(2) + (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
        (0.1 + amplitude * (1.0 - dist / radius).max(0.0)) as f32
    })
}

/// One-head stack whose attention logits are `gap` at `dominant` and 0
/// everywhere else, for every query row.
///
/// All query rows are `e_0`; key row `dominant` is `gap * sqrt(head_dim) * e_0`
/// and every other key row is zero.
pub fn make_skewed_headstack(
    tokens: usize,
    head_dim: usize,
    dominant: usize,
    gap: f64,
) -> Result<HeadStack> {
    if tokens == 0 || head_dim == 0 {
        return Err(Error::Invalid(
            "tokens and head_dim must be positive".into(),
        ));
    }
    if dominant >= tokens {
        return Err(Error::Invalid(format!(
            "dominant index {dominant} out of range for {tokens} tokens"
        )));
    }
    if !gap.is_finite() {
        return Err(Error::Invalid("gap must be finite".into()));
    }
    let mut q = vec![0.0f32; tokens * head_dim];
    for row in q.chunks_exact_mut(head_dim) {
        row[0] = 1.0;
    }
    let mut k = vec![0.0f32; tokens * head_dim];
    k[dominant * head_dim] = (gap * (head_dim as f64).sqrt()) as f32;
    HeadStack::new(tokens, head_dim, vec![q], vec![k])
}

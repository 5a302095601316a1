//! Anchor-based slice filtering.
//!
//! Slices are scanned in axial order against a running anchor. A slice whose
//! mean absolute pixel difference from the anchor is strictly greater than
//! `gamma` is kept and becomes the new anchor; every other slice is dropped.
//! Slice 0 is always the first anchor.

use crate::error::{Error, Result};
use crate::types::{SliceSelection, Volume};

/// Mean absolute difference between slices `i` and `j`.
pub fn slice_l1_distance(vol: &Volume, i: usize, j: usize) -> Result<f64> {
    let depth = vol.depth();
    if i >= depth || j >= depth {
        return Err(Error::Invalid(format!(
            "slice index out of range: ({i}, {j}) for depth {depth}"
        )));
    }
    Ok(mean_abs_diff(vol.slice(i), vol.slice(j)))
}

fn mean_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
        .sum();
    sum / a.len() as f64
}

/// Returns the anchor chain of `vol` under threshold `gamma`.
pub fn iaf_filter(vol: &Volume, gamma: f64) -> SliceSelection {
    let mut retained = vec![0];
    let mut anchor = vol.slice(0);
    for i in 1..vol.depth() {
        let candidate = vol.slice(i);
        if mean_abs_diff(candidate, anchor) > gamma {
            retained.push(i);
            anchor = candidate;
        }
    }
    SliceSelection::new(retained, vol.depth()).expect("anchor chain is a valid selection")
}

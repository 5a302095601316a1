//! Token selection by cumulative importance mass.

use crate::error::{Error, Result};
use crate::types::{ImportanceVector, PrimarySet};

/// Slack on the mass comparison so that `tau = 1` selects every token despite
/// summation rounding.
pub const MASS_EPSILON: f64 = 1e-9;

/// Smallest top-weight prefix whose cumulative mass reaches `tau`.
///
/// Tokens are ranked by descending weight, lower index first on ties.
pub fn nucleus_select(v: &ImportanceVector, tau: f64) -> Result<PrimarySet> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Invalid(format!("tau out of range (0, 1]: {tau}")));
    }
    let weights = v.weights();
    let ranked = v.ranked();
    let mut mass = 0.0;
    let mut k = ranked.len();
    for (n, &i) in ranked.iter().enumerate() {
        mass += weights[i];
        if mass >= tau - MASS_EPSILON {
            k = n + 1;
            break;
        }
    }
    let mut indices = ranked;
    indices.truncate(k);
    Ok(PrimarySet {
        cumulative_mass: mass,
        indices,
    })
}

/// Top `max(1, round(ratio * M))` tokens by weight; the fixed-budget baseline.
pub fn fixed_ratio_select(v: &ImportanceVector, ratio: f64) -> Result<PrimarySet> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Invalid(format!(
            "ratio out of range (0, 1]: {ratio}"
        )));
    }
    let m = v.token_count();
    // f64::round rounds half away from zero.
    let k = ((ratio * m as f64).round() as usize).clamp(1, m);
    let mut indices = v.ranked();
    indices.truncate(k);
    let cumulative_mass = indices.iter().map(|&i| v.weights()[i]).sum();
    Ok(PrimarySet {
        indices,
        cumulative_mass,
    })
}

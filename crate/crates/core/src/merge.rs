//! Folding redundant tokens into a few contextual tokens.
//!
//! The highest-importance redundant tokens become cluster centers. Every other
//! redundant token joins the center with the largest cosine similarity of
//! embedded features, and each cluster is replaced by the plain mean of its
//! members' features (center included).

use crate::saliency::TokenFeatures;
use crate::types::{Cluster, ImportanceVector};

/// Clusters and their mean feature vectors, ordered by ascending center index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeOutcome {
    pub clusters: Vec<Cluster>,
    pub contextual_tokens: Vec<Vec<f64>>,
}

/// Number of clusters for `redundant` tokens at `ratio`.
///
/// Zero ratio disables merging. Otherwise `ceil(ratio * redundant)`, at least
/// one and at most `redundant`.
pub fn cluster_count(redundant: usize, ratio: f64) -> usize {
    if redundant == 0 || ratio <= 0.0 {
        return 0;
    }
    // The slack keeps products like 0.1 * 30 from rounding up to 4.
    let c = (ratio * redundant as f64 - 1e-9).ceil() as usize;
    c.clamp(1, redundant)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine(a: &[f64], a_norm: f64, b: &[f64], b_norm: f64) -> f64 {
    if a_norm == 0.0 || b_norm == 0.0 {
        0.0
    } else {
        dot(a, b) / (a_norm * b_norm)
    }
}

/// Clusters the `redundant` token indices. Indices must be valid rows of
/// `feats` and weights of `importance`.
pub fn bipartite_merge(
    redundant: &[usize],
    importance: &ImportanceVector,
    feats: &TokenFeatures,
    contextual_ratio: f64,
) -> MergeOutcome {
    let count = cluster_count(redundant.len(), contextual_ratio);
    if count == 0 {
        return MergeOutcome::default();
    }

    let w = importance.weights();
    let mut centers = redundant.to_vec();
    centers.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    centers.truncate(count);
    centers.sort_unstable();

    let norms: Vec<f64> = centers
        .iter()
        .map(|&c| dot(feats.row(c), feats.row(c)).sqrt())
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    let mut sorted_redundant = redundant.to_vec();
    sorted_redundant.sort_unstable();
    for &token in &sorted_redundant {
        if centers.binary_search(&token).is_ok() {
            continue;
        }
        let row = feats.row(token);
        let norm = dot(row, row).sqrt();
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        // Centers are ascending, so strict `>` keeps the lowest index on ties.
        for (slot, &c) in centers.iter().enumerate() {
            let sim = cosine(row, norm, feats.row(c), norms[slot]);
            if sim > best_sim {
                best_sim = sim;
                best = slot;
            }
        }
        members[best].push(token);
    }

    let mut clusters = Vec::with_capacity(centers.len());
    let mut contextual_tokens = Vec::with_capacity(centers.len());
    for (center, members) in centers.into_iter().zip(members) {
        let mut mean = feats.row(center).to_vec();
        for &m in &members {
            for (acc, v) in mean.iter_mut().zip(feats.row(m)) {
                *acc += v;
            }
        }
        let n = (members.len() + 1) as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        contextual_tokens.push(mean);
        clusters.push(Cluster { center, members });
    }
    MergeOutcome {
        clusters,
        contextual_tokens,
    }
}

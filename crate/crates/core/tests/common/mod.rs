//! Straight-line reference implementations and seeded case generators shared
//! by the integration suites. Nothing here calls the library's algorithms.

#![allow(dead_code, clippy::needless_range_loop)]

use medpruner::{HeadStack, PruneConfig, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain loop over pixels, anchor kept as an index.
pub fn ref_iaf(vol: &Volume, gamma: f64) -> Vec<usize> {
    let n = vol.height() * vol.width();
    let data = vol.data();
    let mut kept = vec![0];
    let mut anchor = 0;
    for i in 1..vol.depth() {
        let mut acc = 0.0f64;
        for p in 0..n {
            acc += (data[i * n + p] as f64 - data[anchor * n + p] as f64).abs();
        }
        let delta = acc / n as f64;
        if delta > gamma {
            kept.push(i);
            anchor = i;
        }
    }
    kept
}

pub fn ref_l1(vol: &Volume, i: usize, j: usize) -> f64 {
    let n = vol.height() * vol.width();
    let data = vol.data();
    let mut acc = 0.0f64;
    for p in 0..n {
        acc += (data[i * n + p] as f64 - data[j * n + p] as f64).abs();
    }
    acc / n as f64
}

/// Descending order by repeated max scan; lowest index wins ties.
pub fn ref_ranking(w: &[f64]) -> Vec<usize> {
    let mut used = vec![false; w.len()];
    let mut order = Vec::with_capacity(w.len());
    for _ in 0..w.len() {
        let mut best: Option<usize> = None;
        for i in 0..w.len() {
            if used[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if w[i] > w[b] => best = Some(i),
                _ => {}
            }
        }
        let b = best.unwrap();
        used[b] = true;
        order.push(b);
    }
    order
}

/// Tries every prefix length k = 1..M and returns the smallest one whose mass
/// reaches `tau` (with the 1e-9 slack).
pub fn ref_nucleus(w: &[f64], tau: f64) -> (Vec<usize>, f64) {
    let order = ref_ranking(w);
    for k in 1..=w.len() {
        let mut mass = 0.0;
        for &i in &order[..k] {
            mass += w[i];
        }
        if mass >= tau - 1e-9 {
            return (order[..k].to_vec(), mass);
        }
    }
    let mass = order.iter().map(|&i| w[i]).sum();
    (order, mass)
}

/// Full M x M attention matrix per head, then head mean, then column mean.
pub fn ref_aggregate(stack: &HeadStack) -> Vec<f64> {
    let m = stack.tokens();
    let d = stack.head_dim();
    let h_n = stack.num_heads();
    let mut s_avg = vec![vec![0.0f64; m]; m];
    for h in 0..h_n {
        let q = stack.query(h);
        let k = stack.key(h);
        for i in 0..m {
            let mut logits = vec![0.0f64; m];
            for j in 0..m {
                let mut dot = 0.0;
                for c in 0..d {
                    dot += q[i * d + c] as f64 * k[j * d + c] as f64;
                }
                logits[j] = dot / (d as f64).sqrt();
            }
            let max = logits.iter().cloned().fold(f64::MIN, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..m {
                s_avg[i][j] += exps[j] / z / h_n as f64;
            }
        }
    }
    (0..m)
        .map(|j| (0..m).map(|i| s_avg[i][j]).sum::<f64>() / m as f64)
        .collect()
}

pub fn ref_softmax(scores: &[f64], t: f64) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| ((s - max) / t).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// Closed-form patch encoder evaluated weight-by-weight.
/// Features, then per-head queries and keys, as nested rows.
pub type ToyOutput = (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>);

pub fn ref_toy(pixels: &[f32], height: usize, width: usize, cfg: &PruneConfig) -> ToyOutput {
    let p = cfg.patch_size;
    let e = cfg.embed_dim;
    let dh = cfg.head_dim;
    let mut feats = Vec::new();
    for gr in 0..height / p {
        for gc in 0..width / p {
            let mut x = Vec::with_capacity(p * p);
            for r in 0..p {
                for c in 0..p {
                    x.push(pixels[(gr * p + r) * width + gc * p + c] as f64);
                }
            }
            let t: Vec<f64> = (0..e)
                .map(|b| {
                    (0..p * p)
                        .map(|a| x[a] * ((a * e + b + 1) as f64).sin() / p as f64)
                        .sum()
                })
                .collect();
            feats.push(t);
        }
    }
    let proj = |h: usize, f: fn(f64) -> f64| -> Vec<Vec<f64>> {
        feats
            .iter()
            .map(|t| {
                (0..dh)
                    .map(|b| {
                        (0..e)
                            .map(|a| {
                                t[a] * f((h * e * dh + a * dh + b + 1) as f64) / (e as f64).sqrt()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    let qs = (0..cfg.num_heads).map(|h| proj(h, f64::sin)).collect();
    let ks = (0..cfg.num_heads).map(|h| proj(h, f64::cos)).collect();
    (feats, qs, ks)
}

pub fn random_volume(rng: &mut impl Rng, depth: usize, h: usize, w: usize) -> Volume {
    // Mix of smooth runs and jumps so chains of every shape appear.
    let mut data = Vec::with_capacity(depth * h * w);
    let mut base: Vec<f32> = (0..h * w).map(|_| rng.gen::<f32>()).collect();
    for _ in 0..depth {
        match rng.gen_range(0..3) {
            0 => {}
            1 => base
                .iter_mut()
                .for_each(|v| *v = (*v + rng.gen_range(-0.1f32..0.1)).clamp(0.0, 1.0)),
            _ => base = (0..h * w).map(|_| rng.gen::<f32>()).collect(),
        }
        data.extend_from_slice(&base);
    }
    Volume::new(depth, h, w, data).unwrap()
}

pub fn random_weights(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = match rng.gen_range(0..4) {
        // Uniform, with exact ties.
        0 => vec![1.0; m],
        // Heavy ties from a small value set.
        1 => (0..m).map(|_| rng.gen_range(1..4) as f64).collect(),
        // Skewed.
        2 => (0..m).map(|_| rng.gen::<f64>().powi(8) + 1e-6).collect(),
        _ => (0..m).map(|_| rng.gen::<f64>() + 1e-6).collect(),
    };
    let z: f64 = raw.iter().sum();
    raw.iter().map(|x| x / z).collect()
}

pub fn random_stack(rng: &mut impl Rng, heads: usize, m: usize, d: usize, scale: f32) -> HeadStack {
    let mat = |rng: &mut ChaCha8Rng| -> Vec<f32> {
        (0..m * d).map(|_| rng.gen_range(-scale..scale)).collect()
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let queries = (0..heads).map(|_| mat(&mut local)).collect();
    let keys = (0..heads).map(|_| mat(&mut local)).collect();
    HeadStack::new(m, d, queries, keys).unwrap()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

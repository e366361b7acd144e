//! Empirical counterparts of the threshold quantities: degree counts,
//! the degree-(k-1)-spread-over-layers count, and Monte Carlo estimates of
//! block-separation probabilities and single-layer degree frequencies.
//!
//! Every estimator runs trials in fixed-size batches; batch `b` owns the
//! substream `(seed, b)` and contributes an integer count, so the result is
//! bit-identical for a fixed seed no matter how many workers run batches.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::{Atom, DistSampler, JointDistribution, DEFAULT_TAIL_TOL};
use crate::graph::{sample_layer, Layer, UnionGraph};
use crate::rng::substream;
use crate::{Error, Result};

/// Degree histogram of a union graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeProfile {
    /// degree -> number of vertices with that degree
    pub counts: BTreeMap<u32, usize>,
    pub min_degree: u32,
}

pub fn degree_counts(graph: &UnionGraph) -> DegreeProfile {
    let mut counts = BTreeMap::new();
    let mut min_degree = u32::MAX;
    for v in 0..graph.n() as u32 {
        let d = graph.degree(v);
        *counts.entry(d).or_insert(0usize) += 1;
        min_degree = min_degree.min(d);
    }
    DegreeProfile {
        counts,
        min_degree: if graph.n() == 0 { 0 } else { min_degree },
    }
}

/// Vertices whose layer degrees are all 0 or 1 and sum to exactly `k-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyDCount {
    pub count: usize,
    pub flagged: Vec<u32>,
}

/// Count vertices of total layer degree `k-1` spread over distinct layers
/// (one edge per contributing layer). Requires per-layer degree data, so
/// imported graphs are rejected.
pub fn property_d_count(graph: &UnionGraph, k: u32) -> Result<PropertyDCount> {
    let per_vertex = graph
        .layer_degrees()
        .ok_or_else(|| Error::MissingLayerData("layer degrees unavailable".into()))?;
    let mut flagged = Vec::new();
    for (v, layers) in per_vertex.iter().enumerate() {
        let spread = layers.iter().all(|&(_, d)| d <= 1);
        let total: u64 = layers.iter().map(|&(_, d)| d as u64).sum();
        if spread && total == k as u64 - 1 {
            flagged.push(v as u32);
        }
    }
    Ok(PropertyDCount {
        count: flagged.len(),
        flagged,
    })
}

/// Mean and plug-in standard error of a Bernoulli Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl MCEstimate {
    pub fn bernoulli(successes: u64, trials: u64) -> Self {
        assert!(trials >= 1, "at least one trial");
        assert!(successes <= trials);
        let mean = successes as f64 / trials as f64;
        MCEstimate {
            mean,
            std_error: (mean * (1.0 - mean) / trials as f64).sqrt(),
            trials,
        }
    }
}

const TRIAL_BATCH: u64 = 4096;

/// Run `trials` indicator trials in deterministic batches and count hits.
fn batched_count<F>(trials: u64, seed: u64, per_trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let batches = (trials + TRIAL_BATCH - 1) / TRIAL_BATCH;
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let count = (b * TRIAL_BATCH).min(trials)..((b + 1) * TRIAL_BATCH).min(trials);
            let mut hits = 0u64;
            for _ in count {
                if per_trial(&mut rng) {
                    hits += 1;
                }
            }
            hits
        })
        .sum()
}

fn check_block_geometry(n: usize, s: usize, r: usize) -> Result<()> {
    if r < 1 || s + 2 * r > n {
        return Err(Error::Domain(format!(
            "blocks ({s}, {}] and ({}, {n}] need 1 <= r and s + 2r <= n",
            s + r,
            s + r
        )));
    }
    Ok(())
}

/// True when no edge of the layer joins [s, s+r) to [s+r, n).
fn blocks_untouched(layer: &Layer, s: usize, r: usize) -> bool {
    let lo = s as u32;
    let mid = (s + r) as u32;
    layer
        .edges
        .iter()
        .all(|&(u, v)| !(u >= lo && u < mid && v >= mid))
}

fn qrs_over_sampler(
    sampler: &DistSampler,
    n: usize,
    s: usize,
    r: usize,
    trials: u64,
    seed: u64,
) -> Result<MCEstimate> {
    check_block_geometry(n, s, r)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let hits = batched_count(trials, seed, |rng| {
        let layer = sample_layer(sampler, n, 1, rng);
        blocks_untouched(&layer, s, r)
    });
    Ok(MCEstimate::bernoulli(hits, trials))
}

/// Monte Carlo estimate of the probability that a single layer with fixed
/// participant count `x` and edge probability `q` puts no edge between the
/// two trailing blocks of sizes r and n-s-r.
pub fn estimate_qrs(
    x: u64,
    q: f64,
    n: usize,
    s: usize,
    r: usize,
    trials: u64,
    seed: u64,
) -> Result<MCEstimate> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1]")));
    }
    let dist = JointDistribution::from_atoms(vec![Atom { x, q, p: 1.0 }]);
    let sampler = dist.sampler(DEFAULT_TAIL_TOL)?;
    qrs_over_sampler(&sampler, n, s, r, trials, seed)
}

/// Same event with `(X, Q)` drawn fresh from `dist` each trial.
pub fn estimate_qrs_dist(
    dist: &JointDistribution,
    n: usize,
    s: usize,
    r: usize,
    trials: u64,
    seed: u64,
) -> Result<MCEstimate> {
    let sampler = dist.sampler(DEFAULT_TAIL_TOL)?;
    qrs_over_sampler(&sampler, n, s, r, trials, seed)
}

/// Empirical pmf of the degree of vertex 1 in one sampled layer, reported
/// for t = 0..=t_max as independent Bernoulli estimates.
pub fn estimate_layer_degree_pmf(
    dist: &JointDistribution,
    n: usize,
    t_max: u32,
    trials: u64,
    seed: u64,
) -> Result<BTreeMap<u32, MCEstimate>> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let sampler = dist.sampler(DEFAULT_TAIL_TOL)?;
    let buckets = t_max as usize + 1;
    let batches = (trials + TRIAL_BATCH - 1) / TRIAL_BATCH;
    let totals = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let count = (b * TRIAL_BATCH).min(trials)..((b + 1) * TRIAL_BATCH).min(trials);
            let mut hist = vec![0u64; buckets];
            for _ in count {
                let layer = sample_layer(&sampler, n, 1, &mut rng);
                let d = layer
                    .edges
                    .iter()
                    .filter(|&&(u, v)| u == 0 || v == 0)
                    .count();
                if d < buckets {
                    hist[d] += 1;
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; buckets],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok((0..=t_max)
        .map(|t| (t, MCEstimate::bernoulli(totals[t as usize], trials)))
        .collect())
}

//! Shared helpers for the integration suites.
//!
//! Each test target compiles this module separately, so not every helper is
//! used from every target.
#![allow(dead_code)]

use graph_rank::{ComparisonGraph, ComparisonRecord};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Random connected multigraph: a random spanning tree plus `extra` random
/// edges, each with 1..=max_count comparisons.
pub fn random_connected_counts(
    rng: &mut ChaCha12Rng,
    k: usize,
    extra: usize,
    max_count: u64,
) -> Vec<(usize, usize, u64)> {
    let mut counts = Vec::new();
    for v in 1..k {
        let parent = rng.gen_range(0..v);
        counts.push((parent, v, rng.gen_range(1..=max_count)));
    }
    for _ in 0..extra {
        let i = rng.gen_range(0..k);
        let j = rng.gen_range(0..k);
        if i != j {
            counts.push((i.min(j), i.max(j), rng.gen_range(1..=max_count)));
        }
    }
    counts
}

pub fn random_connected_graph(
    rng: &mut ChaCha12Rng,
    k: usize,
    extra: usize,
    max_count: u64,
) -> ComparisonGraph {
    let counts = random_connected_counts(rng, k, extra, max_count);
    ComparisonGraph::from_edge_counts(k, &counts).unwrap()
}

/// Records with outcomes `mu_i - mu_j + noise` on a random connected graph.
pub fn random_noisy_records(
    rng: &mut ChaCha12Rng,
    k: usize,
    extra: usize,
    max_count: u64,
    merits: &[f64],
    sigma: f64,
) -> Vec<ComparisonRecord> {
    use rand_distr::{Distribution, StandardNormal};
    let counts = random_connected_counts(rng, k, extra, max_count);
    let mut records = Vec::new();
    for (i, j, c) in counts {
        for _ in 0..c {
            let z: f64 = StandardNormal.sample(rng);
            records.push(ComparisonRecord::new(i, j, merits[i] - merits[j] + sigma * z));
        }
    }
    records
}

/// Complete-graph records with `m` comparisons per pair.
pub fn complete_records(
    rng: &mut ChaCha12Rng,
    merits: &[f64],
    m: u64,
    sigma: f64,
) -> Vec<ComparisonRecord> {
    use rand_distr::{Distribution, StandardNormal};
    let k = merits.len();
    let mut records = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            for _ in 0..m {
                let z: f64 = StandardNormal.sample(rng);
                records.push(ComparisonRecord::new(i, j, merits[i] - merits[j] + sigma * z));
            }
        }
    }
    records
}

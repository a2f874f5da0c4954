//! Topology generators, precision functionals and the Monte-Carlo campaigns:
//! estimation/ranking consistency on fixed graphs, and the large sparse
//! random-graph regime with the row-sum comparison.
//!
//! Replicates run in parallel; every replicate draws from its own RNG stream
//! keyed by `(seed, cell, replicate)`, so campaign output is identical across
//! runs and thread counts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{ranks, solve_sum_zero};
use crate::graph::{ComparisonGraph, EdgeWeights};
use crate::rng::{stream_rng, CTX_CAMPAIGN};
use crate::spectral::spectral_summary;

/// Standard comparison-graph topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Complete,
    Cycle,
    Path,
    Star,
    Wheel,
    Tournament,
    ErdosRenyi,
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Complete => "complete",
            TopologyKind::Cycle => "cycle",
            TopologyKind::Path => "path",
            TopologyKind::Star => "star",
            TopologyKind::Wheel => "wheel",
            TopologyKind::Tournament => "tournament",
            TopologyKind::ErdosRenyi => "erdos_renyi",
        }
    }
}

/// A topology request: kind, item count, per-edge multiplicity, the edge
/// probability (Erdos-Renyi only) and whether to rescale edge weights so the
/// total comparison weight matches the complete graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub items: usize,
    #[serde(default = "default_multiplicity")]
    pub multiplicity: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_probability: Option<f64>,
    #[serde(default)]
    pub scale_to_complete: bool,
}

fn default_multiplicity() -> u64 {
    1
}

/// Edge set of the requested topology.
///
/// The tournament bracket pairs the surviving smallest-index items in order
/// each round, so the item with the smaller index always advances; it
/// requires a power-of-two item count.
fn topology_edges(kind: TopologyKind, k: usize, rng: Option<&mut ChaCha12Rng>, p: f64) -> Result<Vec<(usize, usize)>> {
    if k < 2 {
        return Err(Error::TooFewItems { items: k });
    }
    let mut edges = Vec::new();
    match kind {
        TopologyKind::Complete => {
            for i in 0..k {
                for j in (i + 1)..k {
                    edges.push((i, j));
                }
            }
        }
        TopologyKind::Cycle => {
            if k < 3 {
                return Err(Error::InvalidConfig {
                    reason: "cycle needs at least 3 items".into(),
                });
            }
            for i in 0..k {
                edges.push((i.min((i + 1) % k), i.max((i + 1) % k)));
            }
        }
        TopologyKind::Path => {
            for i in 0..k - 1 {
                edges.push((i, i + 1));
            }
        }
        TopologyKind::Star => {
            for i in 1..k {
                edges.push((0, i));
            }
        }
        TopologyKind::Wheel => {
            if k < 4 {
                return Err(Error::InvalidConfig {
                    reason: "wheel needs at least 4 items".into(),
                });
            }
            for i in 1..k {
                edges.push((0, i));
            }
            for i in 1..k - 1 {
                edges.push((i, i + 1));
            }
            edges.push((1, k - 1));
        }
        TopologyKind::Tournament => {
            if !k.is_power_of_two() {
                return Err(Error::InvalidConfig {
                    reason: format!("tournament needs a power-of-two item count, got {k}"),
                });
            }
            let mut survivors: Vec<usize> = (0..k).collect();
            while survivors.len() > 1 {
                let mut next = Vec::with_capacity(survivors.len() / 2);
                for pair in survivors.chunks(2) {
                    edges.push((pair[0], pair[1]));
                    next.push(pair[0]); // smaller index advances
                }
                survivors = next;
            }
        }
        TopologyKind::ErdosRenyi => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidConfig {
                    reason: format!("edge probability must be in (0, 1], got {p}"),
                });
            }
            let rng = rng.ok_or_else(|| Error::InvalidConfig {
                reason: "erdos_renyi topology needs a random source".into(),
            })?;
            for i in 0..k {
                for j in (i + 1)..k {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    Ok(edges)
}

/// Realizes a topology spec as a comparison graph (counts only, no outcomes)
/// plus, when scaling is requested, the per-edge weights that bring the total
/// comparison weight `trace(N)/2` to `K(K-1)/2`.
pub fn generate_topology(
    spec: &TopologySpec,
    rng: &mut ChaCha12Rng,
) -> Result<(ComparisonGraph, Option<EdgeWeights>)> {
    let p = spec.edge_probability.unwrap_or(1.0);
    let edges = topology_edges(spec.kind, spec.items, Some(rng), p)?;
    let counts: Vec<(usize, usize, u64)> = edges
        .iter()
        .map(|&(i, j)| (i, j, spec.multiplicity))
        .collect();
    let graph = ComparisonGraph::from_edge_counts(spec.items, &counts)?;
    let weights = if spec.scale_to_complete {
        let total: u64 = spec.multiplicity * edges.len() as u64;
        if total == 0 {
            return Err(Error::NoComparisons);
        }
        let k = spec.items as f64;
        let w = k * (k - 1.0) / 2.0 / total as f64;
        let mut weights = EdgeWeights::new();
        for &(i, j) in &edges {
            weights.set(i, j, w)?;
        }
        Some(weights)
    } else {
        None
    };
    Ok((graph, weights))
}

/// Error distribution for simulated outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorLaw {
    Normal { sigma: f64 },
    /// Student t with 2 degrees of freedom; mean zero but no variance, so
    /// mean-squared-error summaries are erratic (medians are reported
    /// alongside means for this reason).
    T2,
    /// Student t with 3 degrees of freedom divided by sqrt(3): unit variance.
    T3Scaled,
}

impl ErrorLaw {
    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            ErrorLaw::Normal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            ErrorLaw::T2 => StudentT::new(2.0).unwrap().sample(rng),
            ErrorLaw::T3Scaled => StudentT::new(3.0).unwrap().sample(rng) / 3f64.sqrt(),
        }
    }
}

/// A point of a metric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub estimate: f64,
    pub replicates: u64,
}

/// One named metric over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: String,
    pub points: Vec<SeriesPoint>,
}

/// Campaign output: configuration echo, seed, warnings and metric series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub campaign: String,
    pub config: serde_json::Value,
    pub seed: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub series: Vec<MetricSeries>,
}

impl SimulationReport {
    /// Flat CSV with columns `x,metric,estimate,replicates`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,metric,estimate,replicates\n");
        for series in &self.series {
            for point in &series.points {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    point.x, series.metric, point.estimate, point.replicates
                ));
            }
        }
        out
    }
}

/// Precision functionals `trace(N^+)` and `1/lambda2` for each deterministic
/// topology over a grid of item counts, with all Laplacians rescaled to a
/// common total comparison weight when `scale` is set.
pub fn precision_profile(
    kinds: &[TopologyKind],
    k_values: &[usize],
    scale: bool,
) -> Result<SimulationReport> {
    let mut series = Vec::new();
    for &kind in kinds {
        if kind == TopologyKind::ErdosRenyi {
            return Err(Error::InvalidConfig {
                reason: "precision profile is defined for deterministic topologies".into(),
            });
        }
        let mut trace_points = Vec::new();
        let mut max_points = Vec::new();
        for &k in k_values {
            let spec = TopologySpec {
                kind,
                items: k,
                multiplicity: 1,
                edge_probability: None,
                scale_to_complete: scale,
            };
            let mut rng = stream_rng(0, CTX_CAMPAIGN, 0);
            let (graph, weights) = generate_topology(&spec, &mut rng)?;
            let laplacian = graph.laplacian(weights.as_ref())?;
            let summary = spectral_summary(&laplacian)?;
            trace_points.push(SeriesPoint {
                x: k as f64,
                estimate: summary.pinv_trace,
                replicates: 1,
            });
            max_points.push(SeriesPoint {
                x: k as f64,
                estimate: summary.pinv_max_eigenvalue,
                replicates: 1,
            });
        }
        series.push(MetricSeries {
            metric: format!("pinv_trace[{}]", kind.name()),
            points: trace_points,
        });
        series.push(MetricSeries {
            metric: format!("pinv_max_eigenvalue[{}]", kind.name()),
            points: max_points,
        });
    }
    Ok(SimulationReport {
        campaign: "precision".into(),
        config: serde_json::json!({
            "kinds": kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
            "k_values": k_values,
            "scale": scale,
        }),
        seed: 0,
        warnings: Vec::new(),
        series,
    })
}

/// Configuration of the fixed-graph consistency campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyConfig {
    pub topology: TopologyKind,
    pub items: usize,
    /// Base merit vector; the campaign runs at `merits * 10^{-gamma}` for
    /// each gamma.
    pub merits: Vec<f64>,
    pub gammas: Vec<u32>,
    /// Comparisons per edge.
    pub m_grid: Vec<u64>,
    pub error: ErrorLaw,
    pub replicates: usize,
    pub seed: u64,
}

/// Per-edge outcome sums for one replicate: `s_ij = m (mu_i - mu_j) + sum eps`.
fn simulate_scores(
    edges: &[(usize, usize)],
    mu: &DVector<f64>,
    m: u64,
    law: &ErrorLaw,
    rng: &mut ChaCha12Rng,
) -> DVector<f64> {
    let mut s = DVector::zeros(mu.len());
    for &(i, j) in edges {
        let mut sum = m as f64 * (mu[i] - mu[j]);
        for _ in 0..m {
            sum += law.sample(rng);
        }
        s[i] += sum;
        s[j] -= sum;
    }
    s
}

/// Estimation and ranking consistency on a fixed topology: per `(gamma, m)`
/// cell reports the mean error norm (the plotted MSE), the mean squared
/// error norm, the median error norm and the probability of recovering the
/// true ranking.
pub fn run_consistency_campaign(config: &ConsistencyConfig) -> Result<SimulationReport> {
    if config.merits.len() != config.items {
        return Err(Error::InvalidConfig {
            reason: format!(
                "merit vector has length {}, expected {}",
                config.merits.len(),
                config.items
            ),
        });
    }
    if config.replicates == 0 || config.m_grid.is_empty() || config.gammas.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "replicates, m_grid and gammas must be non-empty".into(),
        });
    }
    let mut warnings = Vec::new();
    let base: DVector<f64> = DVector::from_column_slice(&config.merits);
    if base.sum().abs() > 1e-9 * base.norm().max(1.0) {
        warnings.push("merit vector does not sum to zero".into());
    }

    let spec = TopologySpec {
        kind: config.topology,
        items: config.items,
        multiplicity: 1,
        edge_probability: None,
        scale_to_complete: false,
    };
    let mut rng = stream_rng(config.seed, CTX_CAMPAIGN, u64::MAX);
    let (graph, _) = generate_topology(&spec, &mut rng)?;
    if !graph.is_connected() {
        return Err(Error::Disconnected {
            components: graph.connected_components(),
        });
    }
    let edges: Vec<(usize, usize)> = graph.edges().map(|(i, j, _)| (i, j)).collect();
    let unit_laplacian = graph.laplacian(None)?;

    // With n_ij = m the Laplacian is m * N_1, so one factorization serves
    // the whole grid: mu_hat = (N_1 + J/K)^{-1} S / m.
    let base_solve = {
        let k = config.items;
        let mut shifted = unit_laplacian.clone();
        for i in 0..k {
            for j in 0..k {
                shifted[(i, j)] += 1.0 / k as f64;
            }
        }
        shifted.cholesky().ok_or_else(|| Error::InvalidConfig {
            reason: "topology Laplacian is not connected".into(),
        })?
    };

    let mut series: Vec<MetricSeries> = Vec::new();
    for (gi, &gamma) in config.gammas.iter().enumerate() {
        let mu = &base * 10f64.powi(-(gamma as i32));
        let true_ranks = ranks(&mu);

        let mut mean_norm = Vec::new();
        let mut mean_sq = Vec::new();
        let mut median_norm = Vec::new();
        let mut p_correct = Vec::new();
        for (mi, &m) in config.m_grid.iter().enumerate() {
            let cell = (gi * config.m_grid.len() + mi) as u64;
            let per_rep: Vec<(f64, bool)> = (0..config.replicates as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream_rng(config.seed, CTX_CAMPAIGN, cell * 1_000_003 + rep);
                    let s = simulate_scores(&edges, &mu, m, &config.error, &mut rng);
                    let mut mu_hat = base_solve.solve(&s);
                    mu_hat /= m as f64;
                    let err = (&mu_hat - &mu).norm();
                    let correct = ranks(&mu_hat) == true_ranks;
                    (err, correct)
                })
                .collect();

            let r = config.replicates as f64;
            let norm_mean = per_rep.iter().map(|(e, _)| e).sum::<f64>() / r;
            let sq_mean = per_rep.iter().map(|(e, _)| e * e).sum::<f64>() / r;
            let mut norms: Vec<f64> = per_rep.iter().map(|(e, _)| *e).collect();
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = norms[norms.len() / 2];
            let correct = per_rep.iter().filter(|(_, c)| *c).count() as f64 / r;

            let x = m as f64;
            let reps = config.replicates as u64;
            mean_norm.push(SeriesPoint { x, estimate: norm_mean, replicates: reps });
            mean_sq.push(SeriesPoint { x, estimate: sq_mean, replicates: reps });
            median_norm.push(SeriesPoint { x, estimate: median, replicates: reps });
            p_correct.push(SeriesPoint { x, estimate: correct, replicates: reps });
        }
        series.push(MetricSeries {
            metric: format!("mse[gamma={gamma}]"),
            points: mean_norm,
        });
        series.push(MetricSeries {
            metric: format!("mean_squared_error[gamma={gamma}]"),
            points: mean_sq,
        });
        series.push(MetricSeries {
            metric: format!("median_error[gamma={gamma}]"),
            points: median_norm,
        });
        series.push(MetricSeries {
            metric: format!("p_correct_rank[gamma={gamma}]"),
            points: p_correct,
        });
    }

    Ok(SimulationReport {
        campaign: "consistency".into(),
        config: serde_json::to_value(config).expect("config serializes"),
        seed: config.seed,
        warnings,
        series,
    })
}

/// Edge-probability rules of the sparse campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbabilityRule {
    Constant { value: f64 },
    /// `p = (log K)^3 / K`.
    LogCubeOverK,
    /// `p = sqrt((log K)^3 / K)`.
    SqrtLogCubeOverK,
}

impl ProbabilityRule {
    pub fn evaluate(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            ProbabilityRule::Constant { value } => *value,
            ProbabilityRule::LogCubeOverK => kf.ln().powi(3) / kf,
            ProbabilityRule::SqrtLogCubeOverK => (kf.ln().powi(3) / kf).sqrt(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProbabilityRule::Constant { value } => format!("p={value}"),
            ProbabilityRule::LogCubeOverK => "p=logK^3/K".into(),
            ProbabilityRule::SqrtLogCubeOverK => "p=sqrt(logK^3/K)".into(),
        }
    }
}

/// Merit rule for the growing-item campaign.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritRule {
    /// `mu = (-(K-1), -(K-3), ..., K-3, K-1)`, which sums to zero.
    #[default]
    LinearLadder,
}

impl MeritRule {
    fn merits(&self, k: usize) -> DVector<f64> {
        match self {
            MeritRule::LinearLadder => {
                DVector::from_fn(k, |i, _| 2.0 * i as f64 - (k as f64 - 1.0))
            }
        }
    }
}

/// Configuration of the sparse Erdos-Renyi campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseConfig {
    pub k_grid: Vec<usize>,
    pub p_rules: Vec<ProbabilityRule>,
    #[serde(default)]
    pub merit_rule: MeritRule,
    pub replicates: usize,
    pub seed: u64,
}

/// Large sparse graphs: per `(K, p)` cell reports the mean maximum absolute
/// estimation error of the least-squares fit and of the row-sum estimator,
/// plus how many disconnected draws were replaced.
pub fn run_sparse_campaign(config: &SparseConfig) -> Result<SimulationReport> {
    if config.replicates == 0 || config.k_grid.is_empty() || config.p_rules.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "replicates, k_grid and p_rules must be non-empty".into(),
        });
    }
    for (ri, rule) in config.p_rules.iter().enumerate() {
        for &k in &config.k_grid {
            let p = rule.evaluate(k);
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "p rule {ri} evaluates to {p} at K={k}, outside (0, 1]"
                    ),
                });
            }
        }
    }

    let mut series = Vec::new();
    for (ri, rule) in config.p_rules.iter().enumerate() {
        let mut lse_points = Vec::new();
        let mut rowsum_points = Vec::new();
        let mut redraw_points = Vec::new();
        for (ki, &k) in config.k_grid.iter().enumerate() {
            let p = rule.evaluate(k);
            let mu = config.merit_rule.merits(k);
            let cell = (ri * config.k_grid.len() + ki) as u64;
            let per_rep: Result<Vec<(f64, f64, u64)>> = (0..config.replicates as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut rng =
                        stream_rng(config.seed, CTX_CAMPAIGN, (cell << 32) | rep);
                    sparse_replicate(k, p, &mu, &mut rng)
                })
                .collect();
            let per_rep = per_rep?;

            let r = config.replicates as f64;
            let lse = per_rep.iter().map(|(a, _, _)| a).sum::<f64>() / r;
            let rowsum = per_rep.iter().map(|(_, b, _)| b).sum::<f64>() / r;
            let redraws: u64 = per_rep.iter().map(|(_, _, c)| c).sum();
            let x = k as f64;
            let reps = config.replicates as u64;
            lse_points.push(SeriesPoint { x, estimate: lse, replicates: reps });
            rowsum_points.push(SeriesPoint { x, estimate: rowsum, replicates: reps });
            redraw_points.push(SeriesPoint { x, estimate: redraws as f64, replicates: reps });
        }
        series.push(MetricSeries {
            metric: format!("lse_max_error[{}]", rule.label()),
            points: lse_points,
        });
        series.push(MetricSeries {
            metric: format!("rowsum_max_error[{}]", rule.label()),
            points: rowsum_points,
        });
        series.push(MetricSeries {
            metric: format!("redraws[{}]", rule.label()),
            points: redraw_points,
        });
    }

    Ok(SimulationReport {
        campaign: "sparse".into(),
        config: serde_json::to_value(config).expect("config serializes"),
        seed: config.seed,
        warnings: Vec::new(),
        series,
    })
}

/// One sparse replicate: draw Erdos-Renyi graphs until connected (counting
/// redraws), simulate outcomes, and return the maximum absolute errors of
/// the least-squares and row-sum estimators.
fn sparse_replicate(
    k: usize,
    p: f64,
    mu: &DVector<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<(f64, f64, u64)> {
    const MAX_REDRAWS: u64 = 10_000;
    let mut redraws = 0u64;
    let edges = loop {
        let mut edges = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if edges_connected(k, &edges) {
            break edges;
        }
        redraws += 1;
        if redraws > MAX_REDRAWS {
            return Err(Error::Infeasible {
                reason: format!("no connected draw after {MAX_REDRAWS} attempts at K={k}, p={p}"),
            });
        }
    };

    let mut laplacian = DMatrix::zeros(k, k);
    let mut scores = DVector::zeros(k);
    for &(i, j) in &edges {
        let z: f64 = StandardNormal.sample(rng);
        let y = mu[i] - mu[j] + z;
        laplacian[(i, i)] += 1.0;
        laplacian[(j, j)] += 1.0;
        laplacian[(i, j)] -= 1.0;
        laplacian[(j, i)] -= 1.0;
        scores[i] += y;
        scores[j] -= y;
    }

    let mu_hat = solve_sum_zero(&laplacian, &scores).ok_or_else(|| Error::Infeasible {
        reason: "connected draw produced a singular system".into(),
    })?;
    let lse_err = (0..k).map(|i| (mu_hat[i] - mu[i]).abs()).fold(0.0, f64::max);
    let rowsum_err = (0..k)
        .map(|i| (scores[i] / laplacian[(i, i)] - mu[i]).abs())
        .fold(0.0, f64::max);
    Ok((lse_err, rowsum_err, redraws))
}

fn edges_connected(k: usize, edges: &[(usize, usize)]) -> bool {
    let mut adjacency = vec![Vec::new(); k];
    for &(i, j) in edges {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    crate::graph::components_from_adjacency(&adjacency).len() == 1
}

/// Share of connected draws among `draws` Erdos-Renyi graphs; used for the
/// connectivity-threshold checks.
pub fn connectivity_rate(k: usize, p: f64, draws: usize, seed: u64) -> f64 {
    let connected = (0..draws as u64)
        .into_par_iter()
        .filter(|&idx| {
            let mut rng = stream_rng(seed, CTX_CAMPAIGN, idx);
            let mut edges = Vec::new();
            for i in 0..k {
                for j in (i + 1)..k {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            edges_connected(k, &edges)
        })
        .count();
    connected as f64 / draws as f64
}

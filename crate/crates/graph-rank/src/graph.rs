//! Paired-comparison graphs: items, per-edge comparison counts and outcome
//! sums, Laplacians and structural diagnostics.
//!
//! Items are dense 0-based indices. Every comparison is stored with the
//! canonical orientation `i < j`; a record arriving as `(j, i, y)` is flipped
//! to `(i, j, -y)` (covariates are negated along with the outcome, which is
//! the flip rule induced by any antisymmetric combination rule).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One cardinal comparison: item `i` against item `j` with outcome `y` on the
/// merit-difference scale (`i` minus `j`), optionally carrying a combined
/// covariate vector oriented the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRecord {
    pub i: usize,
    pub j: usize,
    pub y: f64,
    pub x: Option<Vec<f64>>,
}

impl ComparisonRecord {
    pub fn new(i: usize, j: usize, y: f64) -> Self {
        Self { i, j, y, x: None }
    }

    pub fn with_covariates(i: usize, j: usize, y: f64, x: Vec<f64>) -> Self {
        Self { i, j, y, x: Some(x) }
    }

    /// The same comparison stored with `i < j`. Flipping negates the outcome
    /// and the covariates.
    pub(crate) fn canonical(&self) -> Self {
        if self.i <= self.j {
            self.clone()
        } else {
            Self {
                i: self.j,
                j: self.i,
                y: -self.y,
                x: self.x.as_ref().map(|x| x.iter().map(|v| -v).collect()),
            }
        }
    }

    fn validate(&self, items: usize) -> Result<()> {
        if self.i == self.j {
            return Err(Error::SelfComparison { item: self.i });
        }
        for &index in [self.i, self.j].iter() {
            if index >= items {
                return Err(Error::IndexOutOfRange { index, items });
            }
        }
        Ok(())
    }
}

/// Per-edge sufficient statistics under the canonical `i < j` orientation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EdgeData {
    /// Number of comparisons on the edge, `n_ij`.
    pub count: u64,
    /// Sum of outcomes oriented `i` minus `j`.
    pub sum: f64,
    /// Sum of squared outcomes (orientation-free); needed for the residual
    /// sum of squares without retaining individual records.
    pub sum_sq: f64,
}

/// Strictly positive per-edge weights for the weighted objective.
#[derive(Debug, Clone, Default)]
pub struct EdgeWeights {
    weights: BTreeMap<(usize, usize), f64>,
}

impl EdgeWeights {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the weight of the unordered pair `{i, j}`.
    pub fn set(&mut self, i: usize, j: usize, weight: f64) -> Result<()> {
        if weight.is_nan() || weight <= 0.0 {
            return Err(Error::NonPositiveWeight { i, j, value: weight });
        }
        self.weights.insert(ordered(i, j), weight);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.weights.get(&ordered(i, j)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// A pairwise comparison graph: `K` items, per-edge counts `n_ij` and outcome
/// sums `S_ij`, and optionally the retained record list (needed for bootstrap
/// resampling and covariate designs).
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ComparisonGraph {
    items: usize,
    edges: BTreeMap<(usize, usize), EdgeData>,
    total: u64,
    records: Option<Vec<ComparisonRecord>>,
    labels: Option<Vec<String>>,
}

impl ComparisonGraph {
    /// Aggregates comparison records into a graph on `items` vertices.
    ///
    /// Records are retained only when covariates are present (they are needed
    /// to build the covariate design); use [`ComparisonGraph::from_records_retained`]
    /// to force retention for bootstrap resampling.
    pub fn from_records(records: &[ComparisonRecord], items: usize) -> Result<Self> {
        let retain = records.iter().any(|r| r.x.is_some());
        Self::build(records, items, retain)
    }

    /// Like [`ComparisonGraph::from_records`] but always keeps the canonical
    /// record list.
    pub fn from_records_retained(records: &[ComparisonRecord], items: usize) -> Result<Self> {
        Self::build(records, items, true)
    }

    /// Builds a graph from explicit edge multiplicities, with zero outcomes.
    /// Used by topology generators and design studies.
    pub fn from_edge_counts(items: usize, counts: &[(usize, usize, u64)]) -> Result<Self> {
        if items < 2 {
            return Err(Error::TooFewItems { items });
        }
        let mut edges = BTreeMap::new();
        let mut total = 0u64;
        for &(i, j, count) in counts {
            if i == j {
                return Err(Error::SelfComparison { item: i });
            }
            for &index in [i, j].iter() {
                if index >= items {
                    return Err(Error::IndexOutOfRange { index, items });
                }
            }
            if count == 0 {
                continue;
            }
            let entry = edges.entry(ordered(i, j)).or_insert_with(EdgeData::default);
            entry.count += count;
            total += count;
        }
        Ok(Self {
            items,
            edges,
            total,
            records: None,
            labels: None,
        })
    }

    fn build(records: &[ComparisonRecord], items: usize, retain: bool) -> Result<Self> {
        if items < 2 {
            return Err(Error::TooFewItems { items });
        }
        let mut edges: BTreeMap<(usize, usize), EdgeData> = BTreeMap::new();
        let mut canonical = Vec::with_capacity(if retain { records.len() } else { 0 });
        for record in records {
            record.validate(items)?;
            let rec = record.canonical();
            let entry = edges.entry((rec.i, rec.j)).or_default();
            entry.count += 1;
            entry.sum += rec.y;
            entry.sum_sq += rec.y * rec.y;
            if retain {
                canonical.push(rec);
            }
        }
        Ok(Self {
            items,
            edges,
            total: records.len() as u64,
            records: retain.then_some(canonical),
            labels: None,
        })
    }

    /// Attaches item labels (for user-facing reports).
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        debug_assert_eq!(labels.len(), self.items);
        self.labels = Some(labels);
        self
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    /// Total number of comparisons `n`.
    pub fn total_comparisons(&self) -> u64 {
        self.total
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `n_ij`, zero for a non-edge.
    pub fn comparisons_between(&self, i: usize, j: usize) -> u64 {
        self.edges.get(&ordered(i, j)).map_or(0, |e| e.count)
    }

    /// Vertex degree `N_ii = sum_j n_ij`.
    pub fn degree(&self, i: usize) -> u64 {
        self.edges
            .iter()
            .filter(|(&(a, b), _)| a == i || b == i)
            .map(|(_, e)| e.count)
            .sum()
    }

    /// Iterates canonical edges as `(i, j, data)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &EdgeData)> {
        self.edges.iter().map(|(&(i, j), data)| (i, j, data))
    }

    pub fn records(&self) -> Option<&[ComparisonRecord]> {
        self.records.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Score vector `S` with `S_i = sum_{j != i} S_ij`.
    pub fn scores(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.items);
        for (&(i, j), data) in &self.edges {
            s[i] += data.sum;
            s[j] -= data.sum;
        }
        s
    }

    /// Weighted score vector `S_w` with `S_{w,i} = sum_j w_ij S_ij`.
    pub fn weighted_scores(&self, weights: &EdgeWeights) -> Result<DVector<f64>> {
        self.validate_weights(weights)?;
        let mut s = DVector::zeros(self.items);
        for (&(i, j), data) in &self.edges {
            let w = weights.get(i, j).unwrap_or(1.0);
            s[i] += w * data.sum;
            s[j] -= w * data.sum;
        }
        Ok(s)
    }

    /// Graph Laplacian `N` (weighted if weights are supplied): symmetric PSD
    /// with zero row sums, `N_ii = sum_j w_ij n_ij`, `N_ij = -w_ij n_ij`.
    pub fn laplacian(&self, weights: Option<&EdgeWeights>) -> Result<DMatrix<f64>> {
        if let Some(w) = weights {
            self.validate_weights(w)?;
        }
        let mut n = DMatrix::zeros(self.items, self.items);
        for (&(i, j), data) in &self.edges {
            let w = weights.and_then(|w| w.get(i, j)).unwrap_or(1.0);
            let value = w * data.count as f64;
            n[(i, i)] += value;
            n[(j, j)] += value;
            n[(i, j)] -= value;
            n[(j, i)] -= value;
        }
        Ok(n)
    }

    fn validate_weights(&self, weights: &EdgeWeights) -> Result<()> {
        for (i, j, _) in weights.iter() {
            if !self.edges.contains_key(&ordered(i, j)) {
                return Err(Error::WeightForNonEdge { i, j });
            }
        }
        Ok(())
    }

    /// True iff every pair of vertices is joined by a path of edges with
    /// `n_ij > 0`.
    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Connected components as sorted vertex lists.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut adjacency = vec![Vec::new(); self.items];
        for &(i, j) in self.edges.keys() {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        components_from_adjacency(&adjacency)
    }

    /// The bottleneck value `m = max_T min {n_ij : (i,j) in T}` over spanning
    /// trees, together with one attaining tree.
    ///
    /// A maximum spanning tree under edge weight `n_ij` maximises the minimum
    /// edge weight, so Kruskal on descending counts yields both.
    pub fn bottleneck(&self) -> Result<Bottleneck> {
        let components = self.connected_components();
        if components.len() != 1 {
            return Err(Error::Disconnected { components });
        }
        let mut edges: Vec<(u64, usize, usize)> = self
            .edges
            .iter()
            .map(|(&(i, j), data)| (data.count, i, j))
            .collect();
        // Descending by count; ties broken by index order for determinism.
        edges.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut dsu = DisjointSet::new(self.items);
        let mut tree = Vec::with_capacity(self.items - 1);
        let mut bottleneck = u64::MAX;
        for (count, i, j) in edges {
            if dsu.union(i, j) {
                tree.push((i, j));
                bottleneck = bottleneck.min(count);
                if tree.len() == self.items - 1 {
                    break;
                }
            }
        }
        Ok(Bottleneck { m: bottleneck, tree })
    }

    /// Residual sum of squares `Q(mu)` of the (optionally weighted) objective,
    /// computed from the per-edge aggregates.
    pub fn residual_sum_of_squares(
        &self,
        mu: &DVector<f64>,
        weights: Option<&EdgeWeights>,
    ) -> f64 {
        let mut q = 0.0;
        for (&(i, j), data) in &self.edges {
            let w = weights.and_then(|w| w.get(i, j)).unwrap_or(1.0);
            let d = mu[i] - mu[j];
            q += w * (data.sum_sq - 2.0 * d * data.sum + data.count as f64 * d * d);
        }
        // Rounding can push an exact fit slightly negative.
        q.max(0.0)
    }
}

/// Maximin spanning-tree summary: the bottleneck value and one attaining tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bottleneck {
    pub m: u64,
    pub tree: Vec<(usize, usize)>,
}

pub(crate) fn components_from_adjacency(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut component = vec![start];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &u in &adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    component.push(u);
                    stack.push(u);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_comparison() {
        let g = ComparisonGraph::from_records(&[ComparisonRecord::new(0, 1, 1.0)], 2).unwrap();
        assert_eq!(g.comparisons_between(0, 1), 1);
        let s = g.scores();
        assert_eq!(s.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn flip_rule_gives_identical_graph() {
        let a = ComparisonGraph::from_records(&[ComparisonRecord::new(0, 1, 1.0)], 2).unwrap();
        let b = ComparisonGraph::from_records(&[ComparisonRecord::new(1, 0, -1.0)], 2).unwrap();
        assert_eq!(a.comparisons_between(0, 1), b.comparisons_between(0, 1));
        assert_eq!(a.scores(), b.scores());
        assert_eq!(a.laplacian(None).unwrap(), b.laplacian(None).unwrap());
    }

    #[test]
    fn line_graph_scores_match_worked_example() {
        // K=3 line graph, n_01 = 1, n_12 = 3.
        let (y121, y231, y232, y233) = (0.7, -1.2, 0.4, 2.0);
        let records = vec![
            ComparisonRecord::new(0, 1, y121),
            ComparisonRecord::new(1, 2, y231),
            ComparisonRecord::new(1, 2, y232),
            ComparisonRecord::new(1, 2, y233),
        ];
        let g = ComparisonGraph::from_records(&records, 3).unwrap();
        let s = g.scores();
        let t23 = y231 + y232 + y233;
        assert!((s[0] - y121).abs() < 1e-12);
        assert!((s[1] - (-y121 + t23)).abs() < 1e-12);
        assert!((s[2] + t23).abs() < 1e-12);

        let n = g.laplacian(None).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, -1.0, 0.0, -1.0, 4.0, -3.0, 0.0, -3.0, 3.0],
        );
        assert_eq!(n, expected);
    }

    #[test]
    fn laplacian_of_weighted_path() {
        let m = 5u64;
        let g = ComparisonGraph::from_edge_counts(3, &[(0, 1, m), (1, 2, m * m)]).unwrap();
        let n = g.laplacian(None).unwrap();
        let mf = m as f64;
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                mf,
                -mf,
                0.0,
                -mf,
                mf * mf + mf,
                -mf * mf,
                0.0,
                -mf * mf,
                mf * mf,
            ],
        );
        assert_eq!(n, expected);
    }

    #[test]
    fn empty_edge_set_gives_zero_laplacian() {
        let g = ComparisonGraph::from_records(&[], 3).unwrap();
        assert_eq!(g.laplacian(None).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(g.total_comparisons(), 0);
    }

    #[test]
    fn connectivity() {
        let path =
            ComparisonGraph::from_edge_counts(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        assert!(path.is_connected());

        let split = ComparisonGraph::from_edge_counts(4, &[(0, 1, 1), (2, 3, 1)]).unwrap();
        assert!(!split.is_connected());
        assert_eq!(split.connected_components(), vec![vec![0, 1], vec![2, 3]]);

        let mut complete = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..8 {
                complete.push((i, j, 1));
            }
        }
        let complete = ComparisonGraph::from_edge_counts(8, &complete).unwrap();
        assert!(complete.is_connected());
    }

    #[test]
    fn bottleneck_of_tree_is_min_count() {
        let g = ComparisonGraph::from_edge_counts(3, &[(0, 1, 5), (1, 2, 25)]).unwrap();
        let b = g.bottleneck().unwrap();
        assert_eq!(b.m, 5);
        assert_eq!(b.tree.len(), 2);
    }

    #[test]
    fn bottleneck_of_weak_middle_path() {
        let k = 50;
        let g = ComparisonGraph::from_edge_counts(4, &[(0, 1, k), (1, 2, 1), (2, 3, k)]).unwrap();
        assert_eq!(g.bottleneck().unwrap().m, 1);
    }

    #[test]
    fn bottleneck_of_uniform_complete_graph() {
        let c = 7u64;
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                edges.push((i, j, c));
            }
        }
        let g = ComparisonGraph::from_edge_counts(4, &edges).unwrap();
        let b = g.bottleneck().unwrap();
        assert_eq!(b.m, c);
        assert_eq!(b.tree.len(), 3);
    }

    #[test]
    fn bottleneck_requires_connected_graph() {
        let g = ComparisonGraph::from_edge_counts(4, &[(0, 1, 1), (2, 3, 1)]).unwrap();
        assert!(matches!(g.bottleneck(), Err(Error::Disconnected { .. })));
    }

    #[test]
    fn rejects_bad_records() {
        assert!(matches!(
            ComparisonGraph::from_records(&[ComparisonRecord::new(0, 0, 1.0)], 2),
            Err(Error::SelfComparison { .. })
        ));
        assert!(matches!(
            ComparisonGraph::from_records(&[ComparisonRecord::new(0, 5, 1.0)], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            ComparisonGraph::from_records(&[], 1),
            Err(Error::TooFewItems { .. })
        ));
    }

    #[test]
    fn weight_for_non_edge_is_rejected() {
        let g = ComparisonGraph::from_edge_counts(3, &[(0, 1, 1)]).unwrap();
        let mut w = EdgeWeights::new();
        w.set(1, 2, 2.0).unwrap();
        assert!(matches!(
            g.laplacian(Some(&w)),
            Err(Error::WeightForNonEdge { .. })
        ));
    }

    #[test]
    fn scores_sum_to_zero() {
        let records = vec![
            ComparisonRecord::new(0, 1, 0.3),
            ComparisonRecord::new(2, 1, -1.7),
            ComparisonRecord::new(0, 2, 11.25),
            ComparisonRecord::new(2, 0, 4.5),
        ];
        let g = ComparisonGraph::from_records(&records, 3).unwrap();
        let s = g.scores();
        let total_abs: f64 = s.iter().map(|v| v.abs()).sum();
        assert!(s.sum().abs() <= 1e-9 * total_abs.max(1.0));
    }
}

//! Partition quality measures and graph feature comparison.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{compact_labels, Graph};
use crate::stats::GraphStats;

/// Vertex counts per (detected block, true community).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[a][b]`: vertices in detected block `a` and true community `b`.
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    /// Builds the table; labels of either side are compacted in order of
    /// first appearance.
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::invalid(format!(
                "label vectors differ in length ({} vs {})",
                pred.len(),
                truth.len()
            )));
        }
        let (p, rows) = compact_labels(pred);
        let (t, cols) = compact_labels(truth);
        let mut counts = vec![vec![0u64; cols]; rows];
        for (&a, &b) in p.iter().zip(&t) {
            counts[a][b] += 1;
        }
        Ok(ContingencyTable { counts })
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        ContingencyTable { counts }
    }

    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when either side has no co-clustered pair, in which case the
    /// affected scores are reported as 0.
    pub degenerate: bool,
}

/// Pair-counting precision, recall and F1 of `pred` against `truth`.
pub fn pairwise_f1(pred: &[usize], truth: &[usize]) -> Result<PairwiseScores> {
    let table = ContingencyTable::new(pred, truth)?;
    let both: u64 = table.counts.iter().flatten().map(|&n| pairs(n)).sum();
    let in_pred: u64 = table.counts.iter().map(|row| pairs(row.iter().sum())).sum();
    let in_truth: u64 = (0..table.cols())
        .map(|b| pairs(table.counts.iter().map(|row| row[b]).sum()))
        .sum();
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(both, in_pred);
    let recall = ratio(both, in_truth);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PairwiseScores {
        precision,
        recall,
        f1,
        degenerate: in_pred == 0 || in_truth == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `pairs[a] = Some(b)` when detected block `a` is matched to community `b`.
    pub pairs: Vec<Option<usize>>,
    pub weight: u64,
    /// Matched weight divided by the table total.
    pub accuracy: f64,
}

/// Maximum-weight one-to-one matching of detected blocks to true communities.
pub fn hungarian_match(table: &ContingencyTable) -> Matching {
    let (rows, cols) = (table.rows(), table.cols());
    let n = rows.max(cols);
    if n == 0 {
        return Matching {
            pairs: Vec::new(),
            weight: 0,
            accuracy: 0.0,
        };
    }
    let max = table.counts.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            max - table.counts[i][j] as i64
        } else {
            max
        }
    };
    // shortest augmenting paths with potentials, 1-based with a virtual column 0
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < min_to[j] {
                        min_to[j] = cur;
                        way[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs = vec![None; rows];
    let mut weight = 0;
    for j in 1..=n {
        let (i, c) = (owner[j] - 1, j - 1);
        if i < rows && c < cols {
            pairs[i] = Some(c);
            weight += table.counts[i][c];
        }
    }
    let total = table.total();
    Matching {
        pairs,
        weight,
        accuracy: if total == 0 {
            0.0
        } else {
            weight as f64 / total as f64
        },
    }
}

/// Directed modularity
/// `Q = (1/|E|) sum_{u->v, same block} 1 - sum_b K_out(b) K_in(b) / |E|^2`.
pub fn modularity(g: &Graph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.num_vertices() {
        return Err(Error::invalid("partition does not cover the graph"));
    }
    if g.num_edges() == 0 {
        return Err(Error::EmptyGraph(
            "modularity needs at least one edge".into(),
        ));
    }
    let m = g.num_edges() as f64;
    let inside = g
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == labels[v])
        .count() as f64;
    let mut k: FxHashMap<usize, (f64, f64)> = FxHashMap::default();
    for &(u, v) in g.edges() {
        k.entry(labels[u]).or_default().0 += 1.0;
        k.entry(labels[v]).or_default().1 += 1.0;
    }
    let mut blocks: Vec<(f64, f64)> = k.into_values().collect();
    blocks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let expected: f64 = blocks.iter().map(|(o, i)| o * i).sum();
    Ok(inside / m - expected / (m * m))
}

/// The six structural features used to compare a sample with its source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub clustering_coefficient: f64,
    pub density: f64,
    /// `d_max / |V|`.
    pub max_degree_ratio: f64,
    /// `d_avg / d_max`.
    pub avg_to_max_degree: f64,
    pub lcc_fraction: f64,
    /// `d_95 / |V|`.
    pub degree_95_ratio: f64,
}

impl Features {
    pub fn from_stats(s: &GraphStats) -> Self {
        let n = s.num_vertices as f64;
        Features {
            clustering_coefficient: s.clustering_coefficient,
            density: s.density,
            max_degree_ratio: s.d_max as f64 / n,
            avg_to_max_degree: if s.d_max == 0 {
                0.0
            } else {
                s.d_avg / s.d_max as f64
            },
            lcc_fraction: s.lcc_fraction,
            degree_95_ratio: s.d_95 as f64 / n,
        }
    }

    fn zip(&self, other: &Features, f: impl Fn(f64, f64) -> f64) -> Features {
        Features {
            clustering_coefficient: f(self.clustering_coefficient, other.clustering_coefficient),
            density: f(self.density, other.density),
            max_degree_ratio: f(self.max_degree_ratio, other.max_degree_ratio),
            avg_to_max_degree: f(self.avg_to_max_degree, other.avg_to_max_degree),
            lcc_fraction: f(self.lcc_fraction, other.lcc_fraction),
            degree_95_ratio: f(self.degree_95_ratio, other.degree_95_ratio),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureComparison {
    pub first: Features,
    pub second: Features,
    /// `first / second` per feature; `0 / 0` counts as 1.
    pub ratio: Features,
}

pub fn compare_features(a: &GraphStats, b: &GraphStats) -> FeatureComparison {
    let (first, second) = (Features::from_stats(a), Features::from_stats(b));
    let ratio = first.zip(&second, |x, y| if x == y { 1.0 } else { x / y });
    FeatureComparison {
        first,
        second,
        ratio,
    }
}

//! Structural statistics used to compare graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_vertices: usize,
    pub num_edges: usize,
    /// `|E| / (|V| (|V| - 1))`.
    pub density: f64,
    pub d_max: usize,
    pub d_avg: f64,
    /// Nearest-rank 95th percentile of total degree.
    pub d_95: usize,
    /// Largest weakly connected component over `|V|`.
    pub lcc_fraction: f64,
    /// Global transitivity of the undirected simple projection.
    pub clustering_coefficient: f64,
}

pub fn density(num_vertices: usize, num_edges: usize) -> f64 {
    let n = num_vertices as f64;
    num_edges as f64 / (n * (n - 1.0))
}

/// Smallest `d` such that at least `q` of the values are `<= d`.
pub fn nearest_rank_percentile(values: &[usize], q: f64) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub(crate) struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns whether the two sets were distinct.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    pub(crate) fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Sorted, deduplicated undirected neighbor lists without self-loops.
pub(crate) fn undirected_simple(g: &Graph) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = (0..g.num_vertices())
        .map(|v| {
            g.out_neighbors(v)
                .iter()
                .chain(g.in_neighbors(v))
                .copied()
                .filter(|&w| w != v)
                .collect()
        })
        .collect();
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

pub fn largest_component_fraction(g: &Graph) -> f64 {
    let n = g.num_vertices();
    let mut ds = DisjointSet::new(n);
    for &(u, v) in g.edges() {
        ds.union(u, v);
    }
    let largest = (0..n).map(|v| ds.component_size(v)).max().unwrap_or(0);
    largest as f64 / n as f64
}

pub fn global_clustering(g: &Graph) -> f64 {
    let adj = undirected_simple(g);
    let mut mark = vec![false; adj.len()];
    let mut triangles = 0u64;
    let mut triples = 0u64;
    for (u, nu) in adj.iter().enumerate() {
        let d = nu.len() as u64;
        triples += d * d.saturating_sub(1) / 2;
        for &w in nu {
            mark[w] = true;
        }
        for &v in nu.iter().filter(|&&v| v > u) {
            triangles += adj[v].iter().filter(|&&w| w > v && mark[w]).count() as u64;
        }
        for &w in nu {
            mark[w] = false;
        }
    }
    if triples == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / triples as f64
    }
}

pub fn graph_statistics(g: &Graph) -> Result<GraphStats> {
    let n = g.num_vertices();
    if n < 2 {
        return Err(Error::invalid(
            "graph statistics need at least two vertices",
        ));
    }
    let degrees = g.total_degrees();
    let d_max = degrees.iter().copied().max().unwrap_or(0);
    Ok(GraphStats {
        num_vertices: n,
        num_edges: g.num_edges(),
        density: density(n, g.num_edges()),
        d_max,
        d_avg: degrees.iter().sum::<usize>() as f64 / n as f64,
        d_95: nearest_rank_percentile(&degrees, 0.95),
        lcc_fraction: largest_component_fraction(g),
        clustering_coefficient: global_clustering(g),
    })
}

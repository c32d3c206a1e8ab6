//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbpsample::Graph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random directed multigraph; self-loops and repeated edges allowed.
pub fn random_multigraph(rng: &mut impl Rng, n: usize, m: usize) -> Graph {
    let edges = (0..m)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    Graph::from_edges(n, edges).unwrap()
}

/// Random simple digraph without self-loops (G(n, p)).
pub fn random_simple_digraph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Random labels in `0..k` with every label used (requires `n >= k`).
pub fn random_labels(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels
}

/// `ln n!` by direct summation.
pub fn ln_fact(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

pub fn big_fact(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, k| acc * k)
}

/// Natural log of a big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        let s = x.to_string();
        return s.parse::<f64>().unwrap().ln();
    }
    let shift = bits - 900;
    let top: BigUint = x >> shift;
    top.to_string().parse::<f64>().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Partitions of `n` into at most `parts` parts, each at most `largest`,
/// by enumerating the largest part.
pub fn count_partitions(
    n: u64,
    parts: u64,
    largest: u64,
    memo: &mut HashMap<(u64, u64, u64), u128>,
) -> u128 {
    if n == 0 {
        return 1;
    }
    if parts == 0 {
        return 0;
    }
    let largest = largest.min(n);
    if let Some(&v) = memo.get(&(n, parts, largest)) {
        return v;
    }
    let total = (1..=largest)
        .map(|p| count_partitions(n - p, parts - 1, p, memo))
        .sum();
    memo.insert((n, parts, largest), total);
    total
}

pub fn ln_q_oracle(n: u64, m: u64) -> f64 {
    let mut memo = HashMap::new();
    (count_partitions(n, m, n, &mut memo) as f64).ln()
}

/// Dense blockmodel counts computed straight from the edge list.
pub struct DenseModel {
    pub b: Vec<Vec<u64>>,
    pub sizes: Vec<u64>,
    pub e_out: Vec<u64>,
    pub e_in: Vec<u64>,
}

pub fn dense_model(g: &Graph, labels: &[usize]) -> DenseModel {
    let k = labels.iter().max().unwrap() + 1;
    let mut b = vec![vec![0u64; k]; k];
    for &(u, v) in g.edges() {
        b[labels[u]][labels[v]] += 1;
    }
    let mut sizes = vec![0u64; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let e_out = b.iter().map(|row| row.iter().sum()).collect();
    let e_in = (0..k).map(|j| b.iter().map(|row| row[j]).sum()).collect();
    DenseModel {
        b,
        sizes,
        e_out,
        e_in,
    }
}

/// Description length evaluated term by term from the formula, with direct
/// factorial sums and enumerated restricted partitions.
pub fn oracle_description_length(g: &Graph, labels: &[usize]) -> f64 {
    let dm = dense_model(g, labels);
    let k = dm.sizes.len();
    let n = g.num_vertices() as u64;
    let e = g.num_edges() as u64;
    let used: Vec<usize> = (0..k).filter(|&i| dm.sizes[i] > 0).collect();
    let c = used.len() as u64;

    let mut likelihood = 0.0;
    for row in &dm.b {
        for &x in row {
            likelihood += ln_fact(x);
        }
    }
    for i in 0..k {
        likelihood -= ln_fact(dm.e_out[i]) + ln_fact(dm.e_in[i]);
    }
    let mut mult: HashMap<(usize, usize), u64> = HashMap::new();
    for &edge in g.edges() {
        *mult.entry(edge).or_default() += 1;
    }
    for v in 0..g.num_vertices() {
        likelihood += ln_fact(g.out_degree(v) as u64) + ln_fact(g.in_degree(v) as u64);
    }
    for &m in mult.values() {
        likelihood -= ln_fact(m);
    }

    let pairs = c * (c + 1) / 2;
    let mut prior = -ln_choose(pairs + e + 1, e) - ln_choose(n - 1, c - 1) - ln_fact(n);
    for &i in &used {
        prior += ln_fact(dm.sizes[i]);
        let mut hist: HashMap<usize, u64> = HashMap::new();
        for v in 0..g.num_vertices() {
            if labels[v] == i {
                *hist.entry(g.total_degree(v)).or_default() += 1;
            }
        }
        prior += hist.values().map(|&h| ln_fact(h)).sum::<f64>();
        prior -= ln_fact(dm.sizes[i]);
        prior -= ln_q_oracle(dm.e_out[i] + dm.e_in[i], dm.sizes[i]);
    }
    -prior - likelihood
}

/// Pair counts by enumerating all unordered vertex pairs.
pub fn brute_force_pairs(pred: &[usize], truth: &[usize]) -> (u64, u64, u64) {
    let (mut both, mut in_pred, mut in_truth) = (0, 0, 0);
    for i in 0..pred.len() {
        for j in i + 1..pred.len() {
            let p = pred[i] == pred[j];
            let t = truth[i] == truth[j];
            both += u64::from(p && t);
            in_pred += u64::from(p);
            in_truth += u64::from(t);
        }
    }
    (both, in_pred, in_truth)
}

/// Directed modularity by the double sum over vertex pairs.
pub fn modularity_double_sum(g: &Graph, labels: &[usize]) -> f64 {
    let n = g.num_vertices();
    let m = g.num_edges() as f64;
    let mut a = vec![vec![0f64; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] += 1.0;
    }
    let mut q = 0.0;
    for u in 0..n {
        for v in 0..n {
            if labels[u] == labels[v] {
                q += a[u][v] - g.out_degree(u) as f64 * g.in_degree(v) as f64 / m;
            }
        }
    }
    q / m
}

/// Best one-to-one matching weight by trying every assignment of rows.
pub fn exhaustive_matching(table: &[Vec<u64>]) -> u64 {
    fn go(table: &[Vec<u64>], row: usize, used: &mut Vec<bool>) -> u64 {
        if row == table.len() {
            return 0;
        }
        let mut best = go(table, row + 1, used);
        for col in 0..used.len() {
            if !used[col] {
                used[col] = true;
                best = best.max(table[row][col] + go(table, row + 1, used));
                used[col] = false;
            }
        }
        best
    }
    let cols = table.first().map_or(0, |r| r.len());
    go(table, 0, &mut vec![false; cols])
}

/// Relative difference against a floor of 1.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

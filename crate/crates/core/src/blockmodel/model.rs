//! Degree-corrected blockmodel state and its description length.

use std::sync::Arc;

use rustc_hash::FxHashMap;

use super::combinatorics::{ln_binomial, ln_factorial, ln_multiset, LnPartitions};
use super::partition::Partition;
use crate::graph::Graph;

type Counts = FxHashMap<usize, u64>;

/// Block-pair edge counts plus the per-block bookkeeping the description
/// length needs.
#[derive(Debug, Clone)]
pub struct BlockModel {
    num_vertices: usize,
    num_edges: u64,
    /// `rows[i][j] = B_ij`, edges from block `i` to block `j`.
    rows: Vec<Counts>,
    /// `cols[j][i] = B_ij`.
    cols: Vec<Counts>,
    out_degree: Vec<u64>,
    in_degree: Vec<u64>,
    sizes: Vec<u64>,
    /// Per block: total vertex degree -> number of member vertices.
    degree_hist: Vec<Counts>,
    nonempty: usize,
    /// `sum ln d_out! + sum ln d_in! - sum ln M_kl!`, partition independent.
    vertex_term: f64,
    partitions: Arc<LnPartitions>,
}

/// Edges of one vertex grouped by the block at the other end.
#[derive(Debug, Clone, Default)]
pub struct VertexEdges {
    /// `(block, out-edges to block, in-edges from block)`, sorted by block;
    /// self-loops excluded.
    pub blocks: Vec<(usize, u64, u64)>,
    pub self_loops: u64,
    pub out_degree: u64,
    pub in_degree: u64,
}

impl VertexEdges {
    pub fn total_degree(&self) -> u64 {
        self.out_degree + self.in_degree
    }

    /// Edges (either direction) between the vertex and `block`.
    pub fn edges_to(&self, block: usize) -> u64 {
        self.blocks
            .binary_search_by_key(&block, |e| e.0)
            .map_or(0, |i| self.blocks[i].1 + self.blocks[i].2)
    }
}

/// Reusable scratch space for [`VertexEdges::gather`].
#[derive(Debug, Default)]
pub struct EdgeScratch {
    map: FxHashMap<usize, (u64, u64)>,
}

impl VertexEdges {
    pub fn gather(g: &Graph, assignment: &[usize], v: usize, scratch: &mut EdgeScratch) -> Self {
        let map = &mut scratch.map;
        map.clear();
        let mut self_loops = 0;
        for &u in g.out_neighbors(v) {
            if u == v {
                self_loops += 1;
            } else {
                map.entry(assignment[u]).or_default().0 += 1;
            }
        }
        for &u in g.in_neighbors(v) {
            if u != v {
                map.entry(assignment[u]).or_default().1 += 1;
            }
        }
        let mut blocks: Vec<(usize, u64, u64)> =
            map.iter().map(|(&t, &(o, i))| (t, o, i)).collect();
        blocks.sort_unstable_by_key(|e| e.0);
        VertexEdges {
            blocks,
            self_loops,
            out_degree: g.out_degree(v) as u64,
            in_degree: g.in_degree(v) as u64,
        }
    }
}

#[inline]
fn lf(n: u64) -> f64 {
    ln_factorial(n)
}

#[inline]
fn lfi(n: i64) -> f64 {
    debug_assert!(n >= 0, "negative block count");
    ln_factorial(n as u64)
}

fn vertex_term(g: &Graph) -> f64 {
    let mut term = 0.0;
    let mut multiplicity: FxHashMap<usize, u64> = FxHashMap::default();
    for v in 0..g.num_vertices() {
        term += lf(g.out_degree(v) as u64) + lf(g.in_degree(v) as u64);
        multiplicity.clear();
        for &u in g.out_neighbors(v) {
            *multiplicity.entry(u).or_default() += 1;
        }
        let mut repeated: Vec<u64> = multiplicity.values().copied().filter(|&m| m > 1).collect();
        repeated.sort_unstable();
        term -= repeated.into_iter().map(lf).sum::<f64>();
    }
    term
}

impl BlockModel {
    pub fn build(g: &Graph, p: &Partition) -> Self {
        Self::build_with(g, p, LnPartitions::shared())
    }

    pub fn build_with(g: &Graph, p: &Partition, partitions: Arc<LnPartitions>) -> Self {
        assert_eq!(
            p.len(),
            g.num_vertices(),
            "partition does not cover the graph"
        );
        let k = p.num_blocks();
        let a = p.assignment();
        let mut model = BlockModel {
            num_vertices: g.num_vertices(),
            num_edges: g.num_edges() as u64,
            rows: vec![Counts::default(); k],
            cols: vec![Counts::default(); k],
            out_degree: vec![0; k],
            in_degree: vec![0; k],
            sizes: vec![0; k],
            degree_hist: vec![Counts::default(); k],
            nonempty: 0,
            vertex_term: vertex_term(g),
            partitions,
        };
        for &(u, v) in g.edges() {
            let (i, j) = (a[u], a[v]);
            *model.rows[i].entry(j).or_default() += 1;
            *model.cols[j].entry(i).or_default() += 1;
            model.out_degree[i] += 1;
            model.in_degree[j] += 1;
        }
        for (v, &b) in a.iter().enumerate() {
            model.sizes[b] += 1;
            *model.degree_hist[b].entry(g.total_degree(v)).or_default() += 1;
        }
        model.nonempty = model.sizes.iter().filter(|&&s| s > 0).count();
        model
    }

    /// Number of block slots (including any emptied by moves).
    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_nonempty_blocks(&self) -> usize {
        self.nonempty
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> u64 {
        self.num_edges
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.rows[i].get(&j).copied().unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.rows[i].iter().map(|(&j, &c)| (j, c))
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.cols[j].iter().map(|(&i, &c)| (i, c))
    }

    pub fn block_out_degree(&self, i: usize) -> u64 {
        self.out_degree[i]
    }

    pub fn block_in_degree(&self, i: usize) -> u64 {
        self.in_degree[i]
    }

    /// `e_i = e_{i,out} + e_{i,in}`.
    pub fn block_degree(&self, i: usize) -> u64 {
        self.out_degree[i] + self.in_degree[i]
    }

    pub fn block_size(&self, i: usize) -> u64 {
        self.sizes[i]
    }

    pub fn degree_histogram(&self, i: usize) -> Vec<(usize, u64)> {
        let mut h: Vec<(usize, u64)> = self.degree_hist[i].iter().map(|(&d, &c)| (d, c)).collect();
        h.sort_unstable();
        h
    }

    /// Dense copy of the block matrix.
    pub fn matrix(&self) -> Vec<Vec<u64>> {
        let k = self.num_blocks();
        (0..k)
            .map(|i| (0..k).map(|j| self.count(i, j)).collect())
            .collect()
    }

    /// `sum_ij B_ij ln(B_ij / (n_i n_j))`.
    pub fn log_likelihood_sbm(&self) -> f64 {
        self.sorted_entries()
            .map(|(i, j, b)| {
                let b = b as f64;
                b * (b / (self.sizes[i] as f64 * self.sizes[j] as f64)).ln()
            })
            .sum()
    }

    /// `sum_ij B_ij ln(B_ij / (e_{i,out} e_{j,in}))`.
    pub fn log_likelihood_dcsbm(&self) -> f64 {
        self.sorted_entries()
            .map(|(i, j, b)| {
                let b = b as f64;
                b * (b / (self.out_degree[i] as f64 * self.in_degree[j] as f64)).ln()
            })
            .sum()
    }

    /// Nonparametric DCSBM log-likelihood, evaluated with ln-factorials.
    pub fn log_likelihood_nonparametric(&self) -> f64 {
        let b: f64 = self.sorted_entries().map(|(_, _, c)| lf(c)).sum();
        let e: f64 = (0..self.num_blocks())
            .map(|i| lf(self.out_degree[i]) + lf(self.in_degree[i]))
            .sum();
        b - e + self.vertex_term
    }

    /// Contribution of one block to the log prior, excluding its degree
    /// histogram: `ln n! - ln n! - ln q(e, n)`; zero for an empty block.
    #[inline]
    fn block_prior(&self, size: u64, degree: u64) -> f64 {
        if size == 0 {
            return 0.0;
        }
        // ln|C_i|! of the partition term cancels the histogram's 1/|C_i|!
        -self.partitions.ln_q(degree, size)
    }

    /// Prior terms that depend only on the number of nonempty blocks.
    fn global_prior(&self, num_blocks: usize) -> f64 {
        let c = num_blocks as u64;
        let v = self.num_vertices as u64;
        -ln_multiset(c * (c + 1) / 2, self.num_edges)
            - ln_binomial(v.saturating_sub(1), c.saturating_sub(1))
            - lf(v)
    }

    /// Log prior of the blockmodel, `ln(B)`.
    pub fn log_prior(&self) -> f64 {
        let mut total = self.global_prior(self.nonempty);
        for i in 0..self.num_blocks() {
            if self.sizes[i] == 0 {
                continue;
            }
            let hist = self.degree_histogram(i);
            total += hist.iter().map(|&(_, h)| lf(h)).sum::<f64>();
            total += self.block_prior(self.sizes[i], self.block_degree(i));
        }
        total
    }

    /// Description length `H = -ln(B) - L(G, B)` in nats.
    pub fn description_length(&self) -> f64 {
        -self.log_prior() - self.log_likelihood_nonparametric()
    }

    fn sorted_entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            let mut entries: Vec<(usize, u64)> = row.iter().map(|(&j, &c)| (j, c)).collect();
            entries.sort_unstable();
            entries.into_iter().map(move |(j, c)| (i, j, c))
        })
    }

    /// Change in description length when the vertex described by `ve`, with
    /// total degree `ve.total_degree()`, moves from block `r` to block `s`.
    ///
    /// Emptying `r` is allowed and drops it from the block count.
    pub fn move_delta(&self, ve: &VertexEdges, r: usize, s: usize) -> f64 {
        if r == s {
            return 0.0;
        }
        let (mut o_r, mut i_r, mut o_s, mut i_s) = (0u64, 0u64, 0u64, 0u64);
        let mut d_b = 0.0;
        for &(t, o, i) in &ve.blocks {
            if t == r {
                (o_r, i_r) = (o, i);
                continue;
            }
            if t == s {
                (o_s, i_s) = (o, i);
                continue;
            }
            if o > 0 {
                let (rt, st) = (self.count(r, t), self.count(s, t));
                d_b += lf(rt - o) - lf(rt) + lf(st + o) - lf(st);
            }
            if i > 0 {
                let (tr, ts) = (self.count(t, r), self.count(t, s));
                d_b += lf(tr - i) - lf(tr) + lf(ts + i) - lf(ts);
            }
        }
        let l = ve.self_loops as i64;
        let (rr, rs) = (self.count(r, r) as i64, self.count(r, s) as i64);
        let (sr, ss) = (self.count(s, r) as i64, self.count(s, s) as i64);
        let (o_r, i_r, o_s, i_s) = (o_r as i64, i_r as i64, o_s as i64, i_s as i64);
        d_b += lfi(rr - o_r - i_r - l) - lfi(rr) + lfi(rs - o_s + i_r) - lfi(rs)
            + lfi(sr + o_r - i_s)
            - lfi(sr)
            + lfi(ss + o_s + i_s + l)
            - lfi(ss);

        let (ko, ki) = (ve.out_degree, ve.in_degree);
        let d_e = lf(self.out_degree[r] - ko) - lf(self.out_degree[r])
            + lf(self.out_degree[s] + ko)
            - lf(self.out_degree[s])
            + lf(self.in_degree[r] - ki)
            - lf(self.in_degree[r])
            + lf(self.in_degree[s] + ki)
            - lf(self.in_degree[s]);
        let d_likelihood = d_b - d_e;

        let k = ve.total_degree();
        let d = k as usize;
        let (nr, ns) = (self.sizes[r], self.sizes[s]);
        let (er, es) = (self.block_degree(r), self.block_degree(s));
        let h_r = self.degree_hist[r].get(&d).copied().unwrap_or(0);
        let h_s = self.degree_hist[s].get(&d).copied().unwrap_or(0);
        let mut d_prior = -(h_r as f64).ln() + ((h_s + 1) as f64).ln();
        d_prior += self.block_prior(nr - 1, er - k) - self.block_prior(nr, er);
        d_prior += self.block_prior(ns + 1, es + k) - self.block_prior(ns, es);
        let before = self.nonempty;
        let after = before - usize::from(nr == 1) + usize::from(ns == 0);
        if after != before {
            d_prior += self.global_prior(after) - self.global_prior(before);
        }
        -d_prior - d_likelihood
    }

    /// Change in description length when blocks `r` and `s` are merged.
    pub fn merge_delta(&self, r: usize, s: usize) -> f64 {
        if r == s {
            return 0.0;
        }
        // symmetric in (r, s); walk the sparser block
        let (a, b) =
            if self.rows[r].len() + self.cols[r].len() <= self.rows[s].len() + self.cols[s].len() {
                (r, s)
            } else {
                (s, r)
            };
        let mut d_b = 0.0;
        for (&t, &c) in &self.rows[a] {
            if t != a && t != b {
                let bt = self.count(b, t);
                d_b += lf(c + bt) - lf(c) - lf(bt);
            }
        }
        for (&t, &c) in &self.cols[a] {
            if t != a && t != b {
                let tb = self.count(t, b);
                d_b += lf(c + tb) - lf(c) - lf(tb);
            }
        }
        let (aa, ab, ba, bb) = (
            self.count(a, a),
            self.count(a, b),
            self.count(b, a),
            self.count(b, b),
        );
        d_b += lf(aa + ab + ba + bb) - lf(aa) - lf(ab) - lf(ba) - lf(bb);
        let merged = |d: &[u64], x: usize, y: usize| lf(d[x] + d[y]) - lf(d[x]) - lf(d[y]);
        let d_e = merged(&self.out_degree, a, b) + merged(&self.in_degree, a, b);
        let d_likelihood = d_b - d_e;

        let (small, large) = if self.degree_hist[a].len() <= self.degree_hist[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        let mut d_prior = 0.0;
        for (d, &h) in &self.degree_hist[small] {
            let other = self.degree_hist[large].get(d).copied().unwrap_or(0);
            d_prior += lf(h + other) - lf(h) - lf(other);
        }
        let (na, nb) = (self.sizes[a], self.sizes[b]);
        let (ea, eb) = (self.block_degree(a), self.block_degree(b));
        d_prior += self.block_prior(na + nb, ea + eb)
            - self.block_prior(na, ea)
            - self.block_prior(nb, eb);
        let before = self.nonempty;
        let after = before - usize::from(na > 0 && nb > 0);
        d_prior += self.global_prior(after) - self.global_prior(before);
        -d_prior - d_likelihood
    }

    fn add_count(&mut self, i: usize, j: usize, delta: i64) {
        if delta == 0 {
            return;
        }
        let update = |map: &mut Counts, key: usize| {
            let entry = map.entry(key).or_default();
            *entry = (*entry as i64 + delta) as u64;
            if *entry == 0 {
                map.remove(&key);
            }
        };
        update(&mut self.rows[i], j);
        update(&mut self.cols[j], i);
    }

    /// Applies the move whose effect [`Self::move_delta`] evaluates.
    pub fn apply_move(&mut self, ve: &VertexEdges, r: usize, s: usize) {
        if r == s {
            return;
        }
        let (mut o_r, mut i_r, mut o_s, mut i_s) = (0i64, 0i64, 0i64, 0i64);
        for &(t, o, i) in &ve.blocks {
            let (o, i) = (o as i64, i as i64);
            if t == r {
                (o_r, i_r) = (o, i);
            } else if t == s {
                (o_s, i_s) = (o, i);
            } else {
                self.add_count(r, t, -o);
                self.add_count(s, t, o);
                self.add_count(t, r, -i);
                self.add_count(t, s, i);
            }
        }
        let l = ve.self_loops as i64;
        self.add_count(r, r, -o_r - i_r - l);
        self.add_count(r, s, -o_s + i_r);
        self.add_count(s, r, o_r - i_s);
        self.add_count(s, s, o_s + i_s + l);

        self.out_degree[r] -= ve.out_degree;
        self.out_degree[s] += ve.out_degree;
        self.in_degree[r] -= ve.in_degree;
        self.in_degree[s] += ve.in_degree;

        let d = ve.total_degree() as usize;
        let hist = &mut self.degree_hist[r];
        let h = hist
            .get_mut(&d)
            .expect("vertex degree missing from block histogram");
        *h -= 1;
        if *h == 0 {
            hist.remove(&d);
        }
        *self.degree_hist[s].entry(d).or_default() += 1;

        if self.sizes[r] == 1 {
            self.nonempty -= 1;
        }
        if self.sizes[s] == 0 {
            self.nonempty += 1;
        }
        self.sizes[r] -= 1;
        self.sizes[s] += 1;
    }
}

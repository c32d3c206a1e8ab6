//! Vertex-level Metropolis-Hastings sweeps at a fixed block count.

use rand::Rng;

use super::SbpConfig;
use crate::blockmodel::{BlockModel, EdgeScratch, Partition, VertexEdges};
use crate::graph::Graph;
use crate::rng::rng_for;

/// Outcome of one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    /// Moves that changed a vertex's block.
    pub accepted: usize,
    /// Sum of the description-length changes of the accepted moves.
    pub delta: f64,
}

/// Weight of each neighbour block, i.e. the number of edge endpoints of the
/// vertex that land in it. Self-loops count twice toward the vertex's block.
fn neighbour_weights<'a>(
    ve: &'a VertexEdges,
    own: usize,
) -> impl Iterator<Item = (usize, u64)> + 'a {
    let loops = (ve.self_loops > 0).then_some((own, 2 * ve.self_loops));
    ve.blocks.iter().map(|&(t, o, i)| (t, o + i)).chain(loops)
}

/// Draws a block proposal for a vertex currently in `r`.
pub fn propose_block(bm: &BlockModel, ve: &VertexEdges, r: usize, rng: &mut impl Rng) -> usize {
    let c = bm.num_blocks();
    let k = ve.total_degree();
    if k == 0 {
        return rng.random_range(0..c);
    }
    let mut pick = rng.random_range(0..k);
    let mut t = r;
    for (block, w) in neighbour_weights(ve, r) {
        if pick < w {
            t = block;
            break;
        }
        pick -= w;
    }
    let e_t = bm.block_degree(t);
    if rng.random_range(0..e_t + c as u64) < c as u64 {
        return rng.random_range(0..c);
    }
    let mut pick = rng.random_range(0..e_t);
    for (s, w) in bm.row(t).chain(bm.col(t)) {
        if pick < w {
            return s;
        }
        pick -= w;
    }
    unreachable!("block degree disagrees with its row and column sums")
}

/// Probability that [`propose_block`] proposes `s` for a vertex in `r`.
pub fn proposal_probability(bm: &BlockModel, ve: &VertexEdges, r: usize, s: usize) -> f64 {
    let c = bm.num_blocks() as f64;
    let k = ve.total_degree();
    if k == 0 {
        return 1.0 / c;
    }
    neighbour_weights(ve, r)
        .map(|(t, w)| {
            let ts = bm.count(t, s) + bm.count(s, t);
            w as f64 * (ts + 1) as f64 / (bm.block_degree(t) as f64 + c)
        })
        .sum::<f64>()
        / k as f64
}

/// Probability of proposing the way back to `r` once the vertex sits in `s`,
/// evaluated on the counts the move would produce.
fn reverse_proposal_probability(bm: &BlockModel, ve: &VertexEdges, r: usize, s: usize) -> f64 {
    let c = bm.num_blocks() as f64;
    let k = ve.total_degree();
    if k == 0 {
        return 1.0 / c;
    }
    let (mut o_r, mut i_r, mut o_s, mut i_s) = (0i64, 0i64, 0i64, 0i64);
    let mut total = 0.0;
    for &(t, o, i) in &ve.blocks {
        if t == r {
            (o_r, i_r) = (o as i64, i as i64);
        } else if t == s {
            (o_s, i_s) = (o as i64, i as i64);
        } else {
            let tr = bm.count(t, r) + bm.count(r, t) - o - i;
            total += (o + i) as f64 * (tr + 1) as f64 / (bm.block_degree(t) as f64 + c);
        }
    }
    let l = ve.self_loops as i64;
    let count = |a: usize, b: usize| bm.count(a, b) as i64;
    let rr = count(r, r) - o_r - i_r - l;
    let rs = count(r, s) - o_s + i_r;
    let sr = count(s, r) + o_r - i_s;
    let e_r = (bm.block_degree(r) - k) as f64;
    let e_s = (bm.block_degree(s) + k) as f64;
    total += (o_r + i_r) as f64 * (2 * rr + 1) as f64 / (e_r + c);
    total += (o_s + i_s + 2 * l) as f64 * (rs + sr + 1) as f64 / (e_s + c);
    total / k as f64
}

/// `p_backward / p_forward` for moving the vertex from `r` to `s`.
pub fn hastings_ratio(bm: &BlockModel, ve: &VertexEdges, r: usize, s: usize) -> f64 {
    reverse_proposal_probability(bm, ve, r, s) / proposal_probability(bm, ve, r, s)
}

/// `min(1, ratio * exp(-beta * delta))`; an infinite `beta` accepts only
/// strict improvements.
pub fn acceptance_probability(ratio: f64, delta: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return if delta < 0.0 { 1.0 } else { 0.0 };
    }
    (ratio * (-beta * delta).exp()).min(1.0)
}

/// One pass over all vertices in index order. Moves that would empty a block
/// are rejected.
pub fn mh_sweep(
    g: &Graph,
    p: &mut Partition,
    bm: &mut BlockModel,
    cfg: &SbpConfig,
    rng: &mut impl Rng,
) -> SweepStats {
    let mut stats = SweepStats::default();
    if bm.num_blocks() < 2 {
        return stats;
    }
    let mut scratch = EdgeScratch::default();
    for v in 0..g.num_vertices() {
        let r = p.block_of(v);
        let ve = VertexEdges::gather(g, p.assignment(), v, &mut scratch);
        let s = propose_block(bm, &ve, r, rng);
        if s == r || bm.block_size(r) == 1 {
            continue;
        }
        let delta = bm.move_delta(&ve, r, s);
        let accept = acceptance_probability(hastings_ratio(bm, &ve, r, s), delta, cfg.beta);
        if rng.random::<f64>() < accept {
            bm.apply_move(&ve, r, s);
            p.set_block(v, s);
            stats.accepted += 1;
            stats.delta += delta;
        }
    }
    stats
}

const FINE_TUNE_STREAM: u64 = 0x6d68;

/// Runs sweeps until the description length settles, returning the best
/// partition seen and its description length.
pub(crate) fn converge(g: &Graph, p: Partition, cfg: &SbpConfig, stream: u64) -> (Partition, f64) {
    let mut bm = BlockModel::build(g, &p);
    let mut h = bm.description_length();
    if p.num_blocks() < 2 || cfg.max_mh_sweeps == 0 {
        return (p, h);
    }
    let mut rng = rng_for(cfg.seed, &[FINE_TUNE_STREAM, stream]);
    let mut current = p;
    let mut best = (current.clone(), h);
    let mut history = vec![h];
    for _ in 0..cfg.max_mh_sweeps {
        let stats = mh_sweep(g, &mut current, &mut bm, cfg, &mut rng);
        h += stats.delta;
        history.push(h);
        if h < best.1 {
            best = (current.clone(), h);
        }
        let n = history.len();
        if n > cfg.convergence_window {
            let change = (history[n - 1 - cfg.convergence_window] - h).abs();
            if change < cfg.tolerance * h.abs() {
                break;
            }
        }
    }
    let exact = BlockModel::build(g, &best.0).description_length();
    (best.0, exact)
}

/// Vertex-level refinement at a fixed block count; never returns a partition
/// with a higher description length than `p`.
pub fn fine_tune(g: &Graph, p: Partition, cfg: &SbpConfig) -> Partition {
    converge(g, p, cfg, u64::MAX).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::description_length;

    fn two_triangles() -> Graph {
        Graph::from_edges(
            6,
            vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)],
        )
        .unwrap()
    }

    #[test]
    fn proposal_probabilities_sum_to_one() {
        let g = Graph::from_edges(5, vec![(0, 1), (1, 2), (2, 0), (0, 0), (3, 4), (4, 0)]).unwrap();
        let p = Partition::new(vec![0, 0, 1, 2, 2]).unwrap();
        let bm = BlockModel::build(&g, &p);
        let mut scratch = EdgeScratch::default();
        for v in 0..5 {
            let ve = VertexEdges::gather(&g, p.assignment(), v, &mut scratch);
            let total: f64 = (0..3)
                .map(|s| proposal_probability(&bm, &ve, p.block_of(v), s))
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_proposals_follow_probabilities() {
        let g = two_triangles();
        let p = Partition::new(vec![0, 0, 1, 1, 2, 2]).unwrap();
        let bm = BlockModel::build(&g, &p);
        let ve = VertexEdges::gather(&g, p.assignment(), 2, &mut EdgeScratch::default());
        let mut rng = rng_for(1, &[]);
        let mut hits = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            hits[propose_block(&bm, &ve, 1, &mut rng)] += 1;
        }
        for (s, &h) in hits.iter().enumerate() {
            let expected = proposal_probability(&bm, &ve, 1, s);
            assert!((h as f64 / n as f64 - expected).abs() < 0.01);
        }
    }

    #[test]
    fn frozen_sweeps_never_increase_h() {
        let g = two_triangles();
        let mut p = Partition::new(vec![0, 1, 0, 1, 0, 1]).unwrap();
        let mut bm = BlockModel::build(&g, &p);
        let cfg = SbpConfig {
            beta: f64::INFINITY,
            ..SbpConfig::default()
        };
        let mut rng = rng_for(3, &[]);
        let mut h = bm.description_length();
        for _ in 0..20 {
            mh_sweep(&g, &mut p, &mut bm, &cfg, &mut rng);
            let next = description_length(&g, &p);
            assert!(next <= h + 1e-9);
            h = next;
        }
    }

    #[test]
    fn sweeps_keep_every_block() {
        let g = two_triangles();
        let mut p = Partition::new(vec![0, 1, 2, 3, 4, 5]).unwrap();
        let mut bm = BlockModel::build(&g, &p);
        let mut rng = rng_for(4, &[]);
        for _ in 0..10 {
            mh_sweep(&g, &mut p, &mut bm, &SbpConfig::default(), &mut rng);
            assert_eq!(bm.num_nonempty_blocks(), 6);
        }
    }

    #[test]
    fn fine_tune_is_best_of() {
        let g = two_triangles();
        let start = Partition::new(vec![0, 1, 0, 1, 0, 1]).unwrap();
        let h0 = description_length(&g, &start);
        let tuned = fine_tune(&g, start, &SbpConfig::default());
        assert!(description_length(&g, &tuned) <= h0);
        assert_eq!(tuned.num_blocks(), 2);
    }
}

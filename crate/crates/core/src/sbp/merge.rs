//! Agglomerative merge phase.

use rand::Rng;
use rayon::prelude::*;

use super::SbpConfig;
use crate::blockmodel::{BlockModel, Partition};
use crate::graph::{compact_labels, Graph};
use crate::rng::rng_for;
use crate::stats::DisjointSet;

const MERGE_STREAM: u64 = 0x6d65;

/// Scored merge of block `source` into block `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCandidate {
    pub delta: f64,
    pub source: usize,
    pub target: usize,
}

fn propose_target(
    g: &Graph,
    p: &Partition,
    members: &[usize],
    r: usize,
    rng: &mut impl Rng,
) -> usize {
    let c = p.num_blocks();
    let other = |rng: &mut dyn rand::RngCore| {
        let s = rng.random_range(0..c - 1);
        if s >= r {
            s + 1
        } else {
            s
        }
    };
    if rng.random::<f64>() < 0.1 {
        return other(rng);
    }
    let u = members[rng.random_range(0..members.len())];
    let (outs, ins) = (g.out_neighbors(u), g.in_neighbors(u));
    let k = outs.len() + ins.len();
    if k == 0 {
        return other(rng);
    }
    let i = rng.random_range(0..k);
    let w = if i < outs.len() {
        outs[i]
    } else {
        ins[i - outs.len()]
    };
    let t = p.block_of(w);
    if t == r {
        other(rng)
    } else {
        t
    }
}

/// Scores `proposals` merge targets per block against a frozen model. The
/// result depends only on the seed and `phase`, not on thread scheduling.
pub fn score_merges(
    g: &Graph,
    p: &Partition,
    bm: &BlockModel,
    cfg: &SbpConfig,
    phase: u64,
) -> Vec<MergeCandidate> {
    let members = p.members();
    (0..p.num_blocks())
        .into_par_iter()
        .flat_map_iter(|r| {
            let mut rng = rng_for(cfg.seed, &[MERGE_STREAM, phase, r as u64]);
            let mut out = Vec::with_capacity(cfg.merge_proposals_per_block);
            for _ in 0..cfg.merge_proposals_per_block {
                let s = propose_target(g, p, &members[r], r, &mut rng);
                out.push(MergeCandidate {
                    delta: bm.merge_delta(r, s),
                    source: r,
                    target: s,
                });
            }
            out
        })
        .collect()
}

/// Applies the cheapest candidates until `target_blocks` remain, each block
/// acting as a merge source at most once. Returns a compacted partition.
pub fn apply_merges(
    p: &Partition,
    mut candidates: Vec<MergeCandidate>,
    target_blocks: usize,
) -> Partition {
    let c = p.num_blocks();
    let target_blocks = target_blocks.max(1);
    if c <= target_blocks {
        return p.clone();
    }
    candidates.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.source.cmp(&b.source))
            .then(a.target.cmp(&b.target))
    });
    let mut sets = DisjointSet::new(c);
    let mut used = vec![false; c];
    let mut remaining = c;
    for relax in [false, true] {
        for m in &candidates {
            if remaining == target_blocks {
                break;
            }
            if used[m.source] && !relax {
                continue;
            }
            if sets.union(m.source, m.target) {
                used[m.source] = true;
                remaining -= 1;
            }
        }
    }
    // proposals ran out: join leftover groups in id order
    for b in 1..c {
        if remaining == target_blocks {
            break;
        }
        if sets.union(b - 1, b) {
            remaining -= 1;
        }
    }
    let roots: Vec<usize> = (0..c).map(|b| sets.find(b)).collect();
    let labels: Vec<usize> = p.assignment().iter().map(|&b| roots[b]).collect();
    Partition::new(compact_labels(&labels).0).expect("compacted labels have no gaps")
}

/// Reduces the block count to `target_blocks` by greedy agglomeration.
pub(crate) fn merge_to(
    g: &Graph,
    p: &Partition,
    cfg: &SbpConfig,
    target_blocks: usize,
    phase: u64,
) -> Partition {
    if p.num_blocks() <= target_blocks.max(1) {
        return p.clone();
    }
    let bm = BlockModel::build(g, p);
    let candidates = score_merges(g, p, &bm, cfg, phase);
    apply_merges(p, candidates, target_blocks)
}

/// Block count after one merge phase: `max(1, ceil(rate * C))`.
pub fn merge_target(num_blocks: usize, rate: f64) -> usize {
    ((rate * num_blocks as f64).ceil() as usize).clamp(1, num_blocks.max(1))
}

/// One merge phase reducing `C` blocks to `max(1, ceil(rate * C))`.
pub fn merge_phase(g: &Graph, p: &Partition, cfg: &SbpConfig) -> Partition {
    merge_to(
        g,
        p,
        cfg,
        merge_target(p.num_blocks(), cfg.block_reduction_rate),
        0,
    )
}

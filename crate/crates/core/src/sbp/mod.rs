//! Stochastic block partitioning: merge phases, Metropolis-Hastings sweeps and
//! a bracketed search over the number of blocks.

mod mcmc;
mod merge;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use mcmc::{
    acceptance_probability, fine_tune, hastings_ratio, mh_sweep, proposal_probability,
    propose_block, SweepStats,
};
pub use merge::{apply_merges, merge_phase, merge_target, score_merges, MergeCandidate};

use crate::blockmodel::{BlockModel, Partition};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Tuning knobs of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbpConfig {
    /// Merge targets scored per block in each merge phase.
    pub merge_proposals_per_block: usize,
    /// Fraction of blocks kept by one merge phase.
    pub block_reduction_rate: f64,
    /// Upper bound on sweeps at one block count.
    pub max_mh_sweeps: usize,
    /// Sweeps over which convergence is judged.
    pub convergence_window: usize,
    /// Relative change in H below which sweeps stop.
    pub tolerance: f64,
    /// Inverse temperature of the acceptance rule.
    pub beta: f64,
    pub seed: u64,
}

impl Default for SbpConfig {
    fn default() -> Self {
        SbpConfig {
            merge_proposals_per_block: 10,
            block_reduction_rate: 0.5,
            max_mh_sweeps: 100,
            convergence_window: 3,
            tolerance: 1e-4,
            beta: 1.0,
            seed: 0,
        }
    }
}

impl SbpConfig {
    pub fn with_seed(seed: u64) -> Self {
        SbpConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.block_reduction_rate > 0.0 && self.block_reduction_rate < 1.0) {
            return Err(Error::invalid("block_reduction_rate must lie in (0, 1)"));
        }
        if self.merge_proposals_per_block == 0 {
            return Err(Error::invalid(
                "merge_proposals_per_block must be at least 1",
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketPoint {
    pub num_blocks: usize,
    pub description_length: f64,
    pub partition: Partition,
}

/// Up to three evaluated block counts: the best one and its nearest evaluated
/// neighbours above and below.
#[derive(Debug, Clone)]
pub struct SearchBracket {
    larger: Option<BracketPoint>,
    best: BracketPoint,
    smaller: Option<BracketPoint>,
}

const GOLDEN_STEP: f64 = 0.381_966_011_250_105;

impl SearchBracket {
    pub fn new(first: BracketPoint) -> Self {
        SearchBracket {
            larger: None,
            best: first,
            smaller: None,
        }
    }

    pub fn best(&self) -> &BracketPoint {
        &self.best
    }

    pub fn larger(&self) -> Option<&BracketPoint> {
        self.larger.as_ref()
    }

    pub fn smaller(&self) -> Option<&BracketPoint> {
        self.smaller.as_ref()
    }

    /// Block counts of the entries, largest first.
    pub fn block_counts(&self) -> Vec<usize> {
        [
            self.larger.as_ref(),
            Some(&self.best),
            self.smaller.as_ref(),
        ]
        .into_iter()
        .flatten()
        .map(|p| p.num_blocks)
        .collect()
    }

    /// Adds an evaluated point; ties in H go to the smaller block count.
    pub fn insert(&mut self, point: BracketPoint) {
        let b = &self.best;
        let better = point.description_length < b.description_length
            || (point.description_length == b.description_length
                && point.num_blocks < b.num_blocks);
        let below = point.num_blocks < b.num_blocks;
        if better {
            let old = std::mem::replace(&mut self.best, point);
            if below {
                self.larger = Some(old);
            } else {
                self.smaller = Some(old);
            }
        } else if below {
            self.smaller = Some(point);
        } else {
            self.larger = Some(point);
        }
    }

    /// Partition to start from and the block count to merge it down to, or
    /// `None` once the minimum is pinned to within one block.
    pub fn next_step(&self, rate: f64) -> Option<(&Partition, usize)> {
        let best = &self.best;
        let Some(smaller) = &self.smaller else {
            let target = merge_target(best.num_blocks, rate);
            return (target < best.num_blocks).then_some((&best.partition, target));
        };
        let ln = |c: usize| (c as f64).ln();
        let lower = (best.num_blocks - smaller.num_blocks > 1)
            .then(|| ln(best.num_blocks) - ln(smaller.num_blocks));
        let upper = self
            .larger
            .as_ref()
            .filter(|l| l.num_blocks - best.num_blocks > 1)
            .map(|l| (l, ln(l.num_blocks) - ln(best.num_blocks)));
        match (upper, lower) {
            (Some((l, up)), low) if low.is_none_or(|low| up >= low) => {
                let x = (ln(best.num_blocks) + GOLDEN_STEP * up).exp().round() as usize;
                Some((&l.partition, x.clamp(best.num_blocks + 1, l.num_blocks - 1)))
            }
            (_, Some(low)) => {
                let x = (ln(best.num_blocks) - GOLDEN_STEP * low).exp().round() as usize;
                Some((
                    &best.partition,
                    x.clamp(smaller.num_blocks + 1, best.num_blocks - 1),
                ))
            }
            _ => None,
        }
    }
}

/// One evaluated block count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub num_blocks: usize,
    pub description_length: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SbpResult {
    pub partition: Partition,
    pub description_length: f64,
    pub trace: Vec<TracePoint>,
}

/// Searches for the partition of `g` with the smallest description length,
/// starting from one block per vertex.
pub fn partition(g: &Graph, cfg: &SbpConfig) -> SbpResult {
    let clock = Instant::now();
    let n = g.num_vertices();
    let singleton = Partition::singleton(n);
    let h = BlockModel::build(g, &singleton).description_length();
    let mut trace = vec![TracePoint {
        num_blocks: n,
        description_length: h,
        seconds: clock.elapsed().as_secs_f64(),
    }];
    let mut bracket = SearchBracket::new(BracketPoint {
        num_blocks: n,
        description_length: h,
        partition: singleton,
    });
    let mut phase = 1u64;
    while let Some((from, target)) = bracket.next_step(cfg.block_reduction_rate) {
        let merged = merge::merge_to(g, from, cfg, target, phase);
        let (tuned, h) = mcmc::converge(g, merged, cfg, phase);
        trace.push(TracePoint {
            num_blocks: tuned.num_blocks(),
            description_length: h,
            seconds: clock.elapsed().as_secs_f64(),
        });
        bracket.insert(BracketPoint {
            num_blocks: tuned.num_blocks(),
            description_length: h,
            partition: tuned,
        });
        phase += 1;
    }
    let best = bracket.best;
    SbpResult {
        partition: best.partition,
        description_length: best.description_length,
        trace,
    }
}

/// Writes `num_blocks,H,cumulative_seconds` rows.
pub fn write_trace_csv(trace: &[TracePoint], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "num_blocks,H,cumulative_seconds")?;
    for t in trace {
        writeln!(
            out,
            "{},{},{}",
            t.num_blocks, t.description_length, t.seconds
        )?;
    }
    Ok(())
}

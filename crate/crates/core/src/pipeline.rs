//! Sample, partition the sample, propagate labels, fine-tune on the full graph.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{max_description_length, quality_score, BlockModel, Partition};
use crate::error::Result;
use crate::graph::Graph;
use crate::metrics::pairwise_f1;
use crate::rng::rng_for;
use crate::sampling::{sample, Sample, SampleMeta, SamplerConfig};
use crate::sbp::{self, SbpConfig, TracePoint};

const PROPAGATE_STREAM: u64 = 0x7072;

/// Labels every vertex of `g`: sampled vertices keep their block; the rest
/// take the block receiving most of their out-edges into the sample (ties to
/// the lowest block id), or a random block when they have none.
pub fn propagate(g: &Graph, s: &Sample, sp: &Partition, seed: u64) -> Result<Partition> {
    let mut local_block = vec![None; g.num_vertices()];
    for (local, &parent) in s.to_parent().iter().enumerate() {
        local_block[parent] = Some(sp.block_of(local));
    }
    let k = sp.num_blocks();
    let mut rng = rng_for(seed, &[PROPAGATE_STREAM]);
    let mut votes = vec![0usize; k];
    let mut touched = Vec::new();
    let assignment = (0..g.num_vertices())
        .map(|v| {
            if let Some(b) = local_block[v] {
                return b;
            }
            for &u in g.out_neighbors(v) {
                if let Some(b) = local_block[u] {
                    if votes[b] == 0 {
                        touched.push(b);
                    }
                    votes[b] += 1;
                }
            }
            let best = touched
                .iter()
                .copied()
                .max_by_key(|&b| (votes[b], std::cmp::Reverse(b)));
            for &b in &touched {
                votes[b] = 0;
            }
            touched.clear();
            best.unwrap_or_else(|| rng.random_range(0..k))
        })
        .collect();
    Partition::new(assignment)
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    pub sampling: f64,
    pub detection: f64,
    pub propagation: f64,
    pub fine_tune: f64,
}

impl StageSeconds {
    pub fn sum(&self) -> f64 {
        self.sampling + self.detection + self.propagation + self.fine_tune
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub partition: Partition,
    pub description_length: f64,
    pub sample_partition: Partition,
    pub sample_meta: SampleMeta,
    pub sample_size: usize,
    pub stage_seconds: StageSeconds,
    pub total_seconds: f64,
}

pub fn run_pipeline(g: &Graph, sampler: &SamplerConfig, cfg: &SbpConfig) -> Result<PipelineResult> {
    sampler.validate()?;
    cfg.validate()?;
    let clock = Instant::now();
    let mut stages = StageSeconds::default();

    let t = Instant::now();
    let s = sample(g, sampler)?;
    stages.sampling = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let detected = sbp::partition(s.graph(), cfg);
    stages.detection = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let propagated = propagate(g, &s, &detected.partition, cfg.seed)?;
    stages.propagation = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let tuned = sbp::fine_tune(g, propagated, cfg);
    let h = BlockModel::build(g, &tuned).description_length();
    stages.fine_tune = t.elapsed().as_secs_f64();

    Ok(PipelineResult {
        partition: tuned,
        description_length: h,
        sample_partition: detected.partition,
        sample_size: s.vertices.len(),
        sample_meta: s.meta,
        stage_seconds: stages,
        total_seconds: clock.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub partition: Partition,
    pub description_length: f64,
    pub seconds: f64,
    pub trace: Vec<TracePoint>,
}

/// SBP on the whole graph.
pub fn run_baseline(g: &Graph, cfg: &SbpConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let clock = Instant::now();
    let r = sbp::partition(g, cfg);
    Ok(BaselineResult {
        partition: r.partition,
        description_length: r.description_length,
        seconds: clock.elapsed().as_secs_f64(),
        trace: r.trace,
    })
}

/// JSON summary of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub sampler: SamplerConfig,
    pub sbp: SbpConfig,
    pub sample: SampleMeta,
    pub sample_size: usize,
    pub num_blocks: usize,
    pub description_length: f64,
    pub quality_score: f64,
    pub f1: Option<f64>,
    pub stage_seconds: StageSeconds,
    pub total_seconds: f64,
}

impl PipelineResult {
    pub fn report(
        &self,
        g: &Graph,
        sampler: &SamplerConfig,
        cfg: &SbpConfig,
    ) -> Result<PipelineReport> {
        let h_max = max_description_length(g);
        let f1 = match g.truth() {
            Some(t) => Some(pairwise_f1(self.partition.assignment(), t)?.f1),
            None => None,
        };
        Ok(PipelineReport {
            sampler: sampler.clone(),
            sbp: cfg.clone(),
            sample: self.sample_meta.clone(),
            sample_size: self.sample_size,
            num_blocks: self.partition.num_blocks(),
            description_length: self.description_length,
            quality_score: quality_score(self.description_length, h_max),
            f1,
            stage_seconds: self.stage_seconds,
            total_seconds: self.total_seconds,
        })
    }
}

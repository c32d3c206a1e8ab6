//! Batch experiments and the file formats shared with the command line.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{max_description_length, quality_score, Partition};
use crate::error::{Error, Result};
use crate::generator::{generate, GeneratorParams};
use crate::graph::{compact_labels, load_edge_list, Graph};
use crate::metrics::pairwise_f1;
use crate::pipeline::{run_baseline, run_pipeline};
use crate::rng::derive_seed;
use crate::sampling::{Algorithm, SamplerConfig, Threshold};
use crate::sbp::SbpConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    File {
        path: PathBuf,
        #[serde(default = "yes")]
        directed: bool,
        /// Optional "vertex_id block_id" truth file.
        #[serde(default)]
        truth: Option<PathBuf>,
    },
    Generate(GeneratorParams),
}

fn yes() -> bool {
    true
}

/// One sampling setting of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub fraction: f64,
    #[serde(default)]
    pub threshold: Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_graph_id")]
    pub graph_id: String,
    pub graph: GraphSource,
    pub cells: Vec<Cell>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Independent executions per run; the lowest H is kept.
    #[serde(default = "default_executions")]
    pub executions: usize,
    #[serde(default)]
    pub sbp: SbpConfig,
    #[serde(default = "default_ff_p")]
    pub ff_p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_graph_id() -> String {
    "graph".into()
}

fn default_runs() -> usize {
    5
}

fn default_executions() -> usize {
    2
}

fn default_ff_p() -> f64 {
    0.7
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.executions == 0 {
            return Err(Error::invalid("runs and executions must be at least 1"));
        }
        if self.cells.is_empty() {
            return Err(Error::invalid("experiment has no cells"));
        }
        for c in &self.cells {
            self.sampler(c, 0).validate()?;
        }
        self.sbp.validate()
    }

    fn sampler(&self, cell: &Cell, seed: u64) -> SamplerConfig {
        SamplerConfig {
            threshold: cell.threshold,
            ff_p: self.ff_p,
            seed,
            ..SamplerConfig::new(cell.algorithm, cell.fraction)
        }
    }

    /// Seed of one execution: derived from `(seed, cell, run, execution)`,
    /// where cell 0 is the baseline and sampling cells start at 1.
    pub fn execution_seed(&self, cell: usize, run: usize, execution: usize) -> u64 {
        derive_seed(self.seed, &[cell as u64, run as u64, execution as u64])
    }
}

/// Loads or generates the experiment graph.
pub fn load_source(source: &GraphSource) -> Result<Graph> {
    match source {
        GraphSource::File {
            path,
            directed,
            truth,
        } => {
            let g = load_edge_list(path, *directed)?;
            match truth {
                Some(t) => attach_truth(g, &read_partition(t)?),
                None => Ok(g),
            }
        }
        GraphSource::Generate(params) => Ok(generate(params)?.graph),
    }
}

/// One CSV row; `run = None` marks the per-cell mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub graph_id: String,
    pub algorithm: String,
    pub fraction: f64,
    pub threshold_effective: usize,
    pub run: Option<usize>,
    pub h: f64,
    pub qs: f64,
    pub f1: Option<f64>,
    pub sampling_s: f64,
    pub detection_s: f64,
    pub propagation_s: f64,
    pub finetune_s: f64,
    pub total_s: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    /// Failures of individual executions. A run with no successful
    /// execution is reported with NaN metrics.
    pub errors: Vec<String>,
}

pub const CSV_HEADER: &str = "graph_id,algorithm,fraction,threshold_effective,run,H,QS,f1,sampling_s,detection_s,propagation_s,finetune_s,total_s,speedup";

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

fn fmt_s(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

impl ExperimentTable {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# speedup = mean baseline total_s / row total_s")?;
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.graph_id,
                r.algorithm,
                r.fraction,
                r.threshold_effective,
                r.run.map_or("mean".to_string(), |x| x.to_string()),
                fmt_f(r.h),
                fmt_f(r.qs),
                r.f1.map_or(String::new(), fmt_f),
                fmt_s(r.sampling_s),
                fmt_s(r.detection_s),
                fmt_s(r.propagation_s),
                fmt_s(r.finetune_s),
                fmt_s(r.total_s),
                fmt_f(r.speedup),
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Execution {
    partition: Partition,
    h: f64,
    threshold_effective: usize,
    stages: [f64; 4],
    total: f64,
}

fn execute(g: &Graph, cfg: &ExperimentConfig, cell: usize, seed: u64) -> Result<Execution> {
    let sbp_cfg = SbpConfig {
        seed,
        ..cfg.sbp.clone()
    };
    if cell == 0 {
        let b = run_baseline(g, &sbp_cfg)?;
        return Ok(Execution {
            partition: b.partition,
            h: b.description_length,
            threshold_effective: 0,
            stages: [0.0, b.seconds, 0.0, 0.0],
            total: b.seconds,
        });
    }
    let sampler = cfg.sampler(&cfg.cells[cell - 1], seed);
    let p = run_pipeline(g, &sampler, &sbp_cfg)?;
    let s = p.stage_seconds;
    Ok(Execution {
        partition: p.partition,
        h: p.description_length,
        threshold_effective: p.sample_meta.effective_threshold,
        stages: [s.sampling, s.detection, s.propagation, s.fine_tune],
        total: p.total_seconds,
    })
}

/// Runs the baseline and every cell `runs` times, keeping the best of
/// `executions` independent executions per run. With `timing == false` all
/// times are reported as zero so the table is reproducible byte for byte.
pub fn run_experiment(cfg: &ExperimentConfig, timing: bool) -> Result<ExperimentTable> {
    cfg.validate()?;
    let g = load_source(&cfg.graph)?;
    run_experiment_on(&g, cfg, timing)
}

/// As [`run_experiment`], on an already loaded graph.
pub fn run_experiment_on(
    g: &Graph,
    cfg: &ExperimentConfig,
    timing: bool,
) -> Result<ExperimentTable> {
    cfg.validate()?;
    let h_max = max_description_length(g);
    let truth = g.truth();

    // (cell, run, execution); cell 0 is the baseline
    let jobs: Vec<(usize, usize, usize)> = (0..=cfg.cells.len())
        .flat_map(|c| (0..cfg.runs).flat_map(move |r| (0..cfg.executions).map(move |x| (c, r, x))))
        .collect();
    let outcomes: Vec<Result<Execution>> = jobs
        .par_iter()
        .map(|&(c, r, x)| execute(g, cfg, c, cfg.execution_seed(c, r, x)))
        .collect();

    let mut table = ExperimentTable::default();
    let mut best: Vec<Vec<Option<Execution>>> = vec![vec![None; cfg.runs]; cfg.cells.len() + 1];
    for (&(c, r, x), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(mut e) => {
                if !timing {
                    e.stages = [0.0; 4];
                    e.total = 0.0;
                }
                let slot = &mut best[c][r];
                // strictly lower H wins; ties keep the earlier execution
                if slot.as_ref().is_none_or(|b| e.h < b.h) {
                    *slot = Some(e);
                }
            }
            Err(err) => table
                .errors
                .push(format!("cell {c} run {r} execution {x}: {err}")),
        }
    }

    let baseline_times: Vec<f64> = best[0].iter().flatten().map(|e| e.total).collect();
    let mean_baseline = baseline_times.iter().sum::<f64>() / baseline_times.len().max(1) as f64;
    let speedup = |total: f64| {
        if total > 0.0 {
            mean_baseline / total
        } else {
            f64::NAN
        }
    };

    for (c, runs) in best.iter().enumerate() {
        let (algorithm, fraction) = if c == 0 {
            ("baseline".to_string(), 1.0)
        } else {
            let cell = &cfg.cells[c - 1];
            let label = match cell.threshold {
                Threshold::Off => cell.algorithm.code().to_string(),
                t => format!("{}-t{}", cell.algorithm.code(), t),
            };
            (label, cell.fraction)
        };
        let mut cell_rows = Vec::with_capacity(runs.len());
        for (r, e) in runs.iter().enumerate() {
            let mut row = ExperimentRow {
                graph_id: cfg.graph_id.clone(),
                algorithm: algorithm.clone(),
                fraction,
                threshold_effective: 0,
                run: Some(r),
                h: f64::NAN,
                qs: f64::NAN,
                f1: truth.map(|_| f64::NAN),
                sampling_s: f64::NAN,
                detection_s: f64::NAN,
                propagation_s: f64::NAN,
                finetune_s: f64::NAN,
                total_s: f64::NAN,
                speedup: f64::NAN,
            };
            if let Some(e) = e {
                row.threshold_effective = e.threshold_effective;
                row.h = e.h;
                row.qs = quality_score(e.h, h_max);
                if let Some(t) = truth {
                    row.f1 = Some(pairwise_f1(e.partition.assignment(), t)?.f1);
                }
                [
                    row.sampling_s,
                    row.detection_s,
                    row.propagation_s,
                    row.finetune_s,
                ] = e.stages;
                row.total_s = e.total;
                row.speedup = speedup(e.total);
            }
            cell_rows.push(row);
        }
        let mean = mean_row(&cell_rows);
        table.rows.extend(cell_rows);
        table.rows.push(mean);
    }
    Ok(table)
}

fn mean_row(rows: &[ExperimentRow]) -> ExperimentRow {
    let ok: Vec<&ExperimentRow> = rows.iter().filter(|r| !r.h.is_nan()).collect();
    let avg = |f: fn(&ExperimentRow) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    let first = &rows[0];
    ExperimentRow {
        graph_id: first.graph_id.clone(),
        algorithm: first.algorithm.clone(),
        fraction: first.fraction,
        threshold_effective: ok.iter().map(|r| r.threshold_effective).max().unwrap_or(0),
        run: None,
        h: avg(|r| r.h),
        qs: avg(|r| r.qs),
        f1: first.f1.map(|_| avg(|r| r.f1.unwrap_or(f64::NAN))),
        sampling_s: avg(|r| r.sampling_s),
        detection_s: avg(|r| r.detection_s),
        propagation_s: avg(|r| r.propagation_s),
        finetune_s: avg(|r| r.finetune_s),
        total_s: avg(|r| r.total_s),
        speedup: avg(|r| r.speedup),
    }
}

/// Writes `vertex_id block_id` lines using external vertex ids.
pub fn write_partition(g: &Graph, p: &Partition, mut out: impl Write) -> std::io::Result<()> {
    for (v, &b) in p.assignment().iter().enumerate() {
        writeln!(out, "{} {}", g.external_id(v), b)?;
    }
    Ok(())
}

/// Reads `vertex_id block_id` lines; `#` and `%` start comments.
pub fn read_partition(path: impl AsRef<Path>) -> Result<Vec<(u64, usize)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let err = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: message.to_string(),
        };
        let mut tokens = line.split_whitespace();
        let v = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("bad vertex id"))?;
        let b = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("bad block id"))?;
        out.push((v, b));
    }
    Ok(out)
}

/// Orders `(vertex_id, block)` pairs by the vertex order of `g`.
pub fn labels_for(g: &Graph, pairs: &[(u64, usize)]) -> Result<Vec<usize>> {
    let index = g.id_index();
    let mut labels = vec![None; g.num_vertices()];
    for &(id, b) in pairs {
        let v = *index
            .get(&id)
            .ok_or_else(|| Error::invalid(format!("vertex {id} is not in the graph")))?;
        labels[v] = Some(b);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| {
            l.ok_or_else(|| Error::invalid(format!("vertex {} has no label", g.external_id(v))))
        })
        .collect()
}

/// Attaches truth labels read from a partition file.
pub fn attach_truth(g: Graph, pairs: &[(u64, usize)]) -> Result<Graph> {
    let labels = labels_for(&g, pairs)?;
    g.with_truth(compact_labels(&labels).0)
}

/// Aligns two labelings by vertex id; both must cover the same ids.
pub fn align_labels(
    pred: &[(u64, usize)],
    truth: &[(u64, usize)],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let lookup: std::collections::BTreeMap<u64, usize> = truth.iter().copied().collect();
    if lookup.len() != pred.len() {
        return Err(Error::invalid(format!(
            "partition covers {} vertices but truth covers {}",
            pred.len(),
            lookup.len()
        )));
    }
    let mut p = Vec::with_capacity(pred.len());
    let mut t = Vec::with_capacity(pred.len());
    for &(id, b) in pred {
        let tb = *lookup
            .get(&id)
            .ok_or_else(|| Error::invalid(format!("vertex {id} missing from truth")))?;
        p.push(b);
        t.push(tb);
    }
    Ok((p, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut params = GeneratorParams::new(60, 2);
        params.community_strength = 5.0;
        params.max_degree = 10;
        params.seed = 3;
        ExperimentConfig {
            graph_id: "tiny".into(),
            graph: GraphSource::Generate(params),
            cells: vec![Cell {
                algorithm: Algorithm::MaxDegree,
                fraction: 0.5,
                threshold: Threshold::Auto,
            }],
            runs: 2,
            executions: 2,
            sbp: SbpConfig::default(),
            ff_p: 0.7,
            seed: 11,
            output_dir: None,
        }
    }

    #[test]
    fn table_shape_and_determinism() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg, false).unwrap();
        assert!(a.errors.is_empty());
        assert_eq!(a.rows.len(), 2 * 3);
        assert_eq!(a.rows[2].run, None);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        run_experiment(&cfg, false)
            .unwrap()
            .write_csv(&mut y)
            .unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), CSV_HEADER);
        assert!(text.contains("tiny,MD-tauto,0.5,"));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = tiny_config();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            serde_json::from_str::<ExperimentConfig>(&json).unwrap(),
            cfg
        );
        let minimal = r#"{"graph": {"file": {"path": "g.el"}}, "cells": [{"algorithm": "UR", "fraction": 0.1}]}"#;
        let c: ExperimentConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!((c.runs, c.executions), (5, 2));
        assert!(matches!(c.graph, GraphSource::File { directed: true, .. }));
    }

    #[test]
    fn validation_rejects_empty_cells() {
        let mut cfg = tiny_config();
        cfg.cells.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn alignment_by_id() {
        let (p, t) = align_labels(&[(5, 0), (7, 1)], &[(7, 3), (5, 2)]).unwrap();
        assert_eq!((p, t), (vec![0, 1], vec![2, 3]));
        assert!(align_labels(&[(5, 0)], &[(6, 0)]).is_err());
    }
}

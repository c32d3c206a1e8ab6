//! Vertex samplers with optional degree thresholding.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, Graph, Subgraph};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Uniform random vertices.
    #[serde(rename = "UR")]
    UniformRandom,
    /// Random seeds plus their out-neighbours.
    #[serde(rename = "RNN")]
    RandomNodeNeighbor,
    #[serde(rename = "FF")]
    ForestFire,
    #[serde(rename = "ES")]
    ExpansionSnowball,
    /// Highest total degree first.
    #[serde(rename = "MD")]
    MaxDegree,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::UniformRandom,
        Algorithm::RandomNodeNeighbor,
        Algorithm::ForestFire,
        Algorithm::ExpansionSnowball,
        Algorithm::MaxDegree,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Algorithm::UniformRandom => "UR",
            Algorithm::RandomNodeNeighbor => "RNN",
            Algorithm::ForestFire => "FF",
            Algorithm::ExpansionSnowball => "ES",
            Algorithm::MaxDegree => "MD",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown sampling algorithm {s:?} (expected UR, RNN, FF, ES or MD)"
                ))
            })
    }
}

/// Degree threshold: only vertices with total degree above `t` are eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threshold {
    #[default]
    Off,
    /// `t` = floor of the mean total degree.
    Auto,
    Fixed(usize),
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Off => f.write_str("off"),
            Threshold::Auto => f.write_str("auto"),
            Threshold::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Threshold::Off),
            "auto" => Ok(Threshold::Auto),
            _ => match s.parse::<usize>() {
                Ok(0) => Ok(Threshold::Off),
                Ok(t) => Ok(Threshold::Fixed(t)),
                Err(_) => Err(Error::invalid(format!(
                    "bad threshold {s:?} (expected off, auto or an integer)"
                ))),
            },
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(t) => Ok(if t == 0 {
                Threshold::Off
            } else {
                Threshold::Fixed(t)
            }),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Which edges define a vertex's neighbourhood for expansion snowball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    #[default]
    Out,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    pub fraction: f64,
    #[serde(default)]
    pub threshold: Threshold,
    #[serde(default = "default_ff_p")]
    pub ff_p: f64,
    #[serde(default)]
    pub es_neighborhood: Neighborhood,
    #[serde(default)]
    pub seed: u64,
}

fn default_ff_p() -> f64 {
    0.7
}

impl SamplerConfig {
    pub fn new(algorithm: Algorithm, fraction: f64) -> Self {
        SamplerConfig {
            algorithm,
            fraction,
            threshold: Threshold::Off,
            ff_p: default_ff_p(),
            es_neighborhood: Neighborhood::Out,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        if !(0.0..1.0).contains(&self.ff_p) {
            return Err(Error::invalid(format!(
                "ff_p must lie in [0, 1), got {}",
                self.ff_p
            )));
        }
        Ok(())
    }
}

/// Number of vertices a sampler selects: `ceil(f |V|)` clamped to `[1, |V|]`.
pub fn target_size(num_vertices: usize, fraction: f64) -> usize {
    ((fraction * num_vertices as f64).ceil() as usize).clamp(1, num_vertices.max(1))
}

/// Provenance recorded with every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub algorithm: Algorithm,
    pub fraction: f64,
    pub threshold: Threshold,
    /// Threshold actually applied after relaxation (0 = none).
    pub effective_threshold: usize,
    pub ff_p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// Selected parent vertices in selection order.
    pub vertices: Vec<usize>,
    /// Induced subgraph; local vertex `i` is `vertices[i]`.
    pub subgraph: Subgraph,
    pub meta: SampleMeta,
}

impl Sample {
    pub fn graph(&self) -> &Graph {
        &self.subgraph.graph
    }

    pub fn to_parent(&self) -> &[usize] {
        &self.subgraph.to_parent
    }
}

fn eligible_at(degrees: &[usize], t: usize) -> Vec<usize> {
    (0..degrees.len())
        .filter(|&v| t == 0 || degrees[v] > t)
        .collect()
}

/// Vertices with total degree above `t` (all vertices for `t = 0`). When fewer
/// than `target` qualify, `t` is lowered to the largest feasible value.
/// Returns the eligible set and the threshold applied.
pub fn eligible_vertices(g: &Graph, threshold: Threshold, target: usize) -> (Vec<usize>, usize) {
    let degrees = g.total_degrees();
    let requested = match threshold {
        Threshold::Off => 0,
        Threshold::Fixed(t) => t,
        Threshold::Auto => {
            let total: usize = degrees.iter().sum();
            total / g.num_vertices().max(1)
        }
    };
    let count_above = |t: usize| degrees.iter().filter(|&&d| d > t).count();
    let mut t = requested;
    if t > 0 && count_above(t) < target {
        // largest t' < t with at least `target` vertices of degree > t'
        let mut sorted = degrees.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let kth = sorted[target - 1];
        t = kth.saturating_sub(1).min(t);
        if t > 0 && count_above(t) < target {
            t = 0;
        }
    }
    (eligible_at(&degrees, t), t)
}

/// `|N_out(S) \ S| / |S|`.
pub fn expansion_factor(g: &Graph, sample: &[usize]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("expansion factor of an empty sample"));
    }
    let mut in_sample = vec![false; g.num_vertices()];
    for &v in sample {
        in_sample[v] = true;
    }
    let mut seen = vec![false; g.num_vertices()];
    let mut count = 0usize;
    for &v in sample {
        for &u in g.out_neighbors(v) {
            if !in_sample[u] && !seen[u] {
                seen[u] = true;
                count += 1;
            }
        }
    }
    Ok(count as f64 / sample.len() as f64)
}

/// Runs the configured sampler.
pub fn sample(g: &Graph, cfg: &SamplerConfig) -> Result<Sample> {
    cfg.validate()?;
    if g.num_vertices() == 0 {
        return Err(Error::EmptyGraph("cannot sample an empty graph".into()));
    }
    let target = target_size(g.num_vertices(), cfg.fraction);
    let (eligible, effective) = eligible_vertices(g, cfg.threshold, target);
    let mut rng = rng_for(cfg.seed, &[cfg.algorithm as u64]);
    let vertices = match cfg.algorithm {
        Algorithm::UniformRandom => uniform_random(&eligible, target, &mut rng),
        Algorithm::RandomNodeNeighbor => random_node_neighbor(g, &eligible, target, &mut rng),
        Algorithm::ForestFire => forest_fire(g, &eligible, target, cfg.ff_p, &mut rng),
        Algorithm::ExpansionSnowball => {
            expansion_snowball(g, &eligible, target, cfg.es_neighborhood, &mut rng)
        }
        Algorithm::MaxDegree => max_degree(g, target),
    };
    debug_assert_eq!(vertices.len(), target);
    let subgraph = induced_subgraph(g, &vertices)?;
    Ok(Sample {
        vertices,
        subgraph,
        meta: SampleMeta {
            algorithm: cfg.algorithm,
            fraction: cfg.fraction,
            threshold: cfg.threshold,
            effective_threshold: effective,
            ff_p: cfg.ff_p,
            seed: cfg.seed,
        },
    })
}

/// `target` distinct vertices drawn uniformly from `eligible`.
pub fn uniform_random(eligible: &[usize], target: usize, rng: &mut impl Rng) -> Vec<usize> {
    index::sample(rng, eligible.len(), target)
        .into_iter()
        .map(|i| eligible[i])
        .collect()
}

fn eligibility_mask(n: usize, eligible: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &v in eligible {
        mask[v] = true;
    }
    mask
}

/// Random seeds, each followed by its eligible out-neighbours, stopping
/// exactly at `target`.
pub fn random_node_neighbor(
    g: &Graph,
    eligible: &[usize],
    target: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let ok = eligibility_mask(g.num_vertices(), eligible);
    let mut seeds = eligible.to_vec();
    seeds.shuffle(rng);
    let mut taken = vec![false; g.num_vertices()];
    let mut out = Vec::with_capacity(target);
    'seeds: for s in seeds {
        if taken[s] {
            continue;
        }
        taken[s] = true;
        out.push(s);
        for &u in g.out_neighbors(s) {
            if out.len() == target {
                break 'seeds;
            }
            if ok[u] && !taken[u] {
                taken[u] = true;
                out.push(u);
            }
        }
        if out.len() == target {
            break;
        }
    }
    out
}

/// Forest fire: each burning vertex ignites `Geometric(1 - p)` of its unvisited
/// eligible out-neighbours; the rest are marked visited. Restarts from an
/// unvisited eligible vertex when the fire dies out, and from any unsampled
/// eligible vertex once everything has been visited.
pub fn forest_fire(
    g: &Graph,
    eligible: &[usize],
    target: usize,
    p: f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let ok = eligibility_mask(g.num_vertices(), eligible);
    let geometric = Geometric::new(1.0 - p).expect("ff_p in [0, 1)");
    let mut visited = vec![false; g.num_vertices()];
    let mut sampled = vec![false; g.num_vertices()];
    let mut out = Vec::with_capacity(target);
    let mut restart_order = eligible.to_vec();
    restart_order.shuffle(rng);
    let mut cursor = 0;
    let mut frontier = std::collections::VecDeque::new();
    let mut candidates = Vec::new();
    while out.len() < target {
        let Some(w) = frontier.pop_front() else {
            while cursor < restart_order.len() && visited[restart_order[cursor]] {
                cursor += 1;
            }
            let seed = match restart_order.get(cursor) {
                Some(&v) => v,
                None => *restart_order
                    .iter()
                    .find(|&&v| !sampled[v])
                    .expect("target <= eligible"),
            };
            visited[seed] = true;
            sampled[seed] = true;
            out.push(seed);
            frontier.push_back(seed);
            continue;
        };
        candidates.clear();
        for &u in g.out_neighbors(w) {
            if ok[u] && !visited[u] {
                visited[u] = true;
                candidates.push(u);
            }
        }
        let burn = (geometric.sample(rng) as usize).min(candidates.len());
        let (chosen, _) = candidates.partial_shuffle(rng, burn);
        for &u in chosen.iter() {
            if out.len() == target {
                break;
            }
            sampled[u] = true;
            out.push(u);
            frontier.push_back(u);
        }
    }
    out
}

/// Expansion snowball: repeatedly adds the frontier vertex that contributes
/// the most neighbours outside sample and frontier (ties to the lowest id).
pub fn expansion_snowball(
    g: &Graph,
    eligible: &[usize],
    target: usize,
    mode: Neighborhood,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let n = g.num_vertices();
    let ok = eligibility_mask(n, eligible);
    let forward = |v: usize| -> Vec<usize> {
        match mode {
            Neighborhood::Out => g.out_neighbors(v).to_vec(),
            Neighborhood::Both => g
                .out_neighbors(v)
                .iter()
                .chain(g.in_neighbors(v))
                .copied()
                .collect(),
        }
    };
    let backward = |v: usize| -> Vec<usize> {
        match mode {
            Neighborhood::Out => g.in_neighbors(v).to_vec(),
            Neighborhood::Both => g
                .in_neighbors(v)
                .iter()
                .chain(g.out_neighbors(v))
                .copied()
                .collect(),
        }
    };
    // 0 = outside, 1 = frontier, 2 = sampled
    let mut state = vec![0u8; n];
    let mut score = vec![0usize; n];
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = BinaryHeap::new();
    let mut mark = vec![usize::MAX; n];
    let mut restarts = eligible.to_vec();
    restarts.shuffle(rng);
    let mut cursor = 0;
    let mut out = Vec::with_capacity(target);

    let fresh_score = |v: usize, state: &[u8], mark: &mut [usize]| -> usize {
        let mut s = 0;
        for u in forward(v) {
            if state[u] == 0 && mark[u] != v {
                mark[u] = v;
                s += 1;
            }
        }
        s
    };

    while out.len() < target {
        let pick = loop {
            match heap.pop() {
                Some((s, Reverse(v))) if state[v] == 1 && s == score[v] => break Some(v),
                Some(_) => continue,
                None => break None,
            }
        };
        let v = match pick {
            Some(v) => v,
            None => {
                while state[restarts[cursor]] == 2 {
                    cursor += 1;
                }
                restarts[cursor]
            }
        };
        state[v] = 2;
        out.push(v);
        // v's new neighbours join the frontier
        let mut joined = Vec::new();
        for u in forward(v) {
            if state[u] == 0 {
                state[u] = 1;
                joined.push(u);
            }
        }
        // frontier candidates pointing at a newly covered vertex lose a point
        for &u in &joined {
            for x in backward(u) {
                if state[x] == 1 && ok[x] && mark[x] != n + u {
                    mark[x] = n + u;
                    if score[x] > 0 {
                        score[x] -= 1;
                        heap.push((score[x], Reverse(x)));
                    }
                }
            }
        }
        // a restart seed was outside the frontier and is newly covered
        for x in backward(v) {
            if pick.is_none() && state[x] == 1 && ok[x] && mark[x] != 2 * n + v {
                mark[x] = 2 * n + v;
                if score[x] > 0 {
                    score[x] -= 1;
                    heap.push((score[x], Reverse(x)));
                }
            }
        }
        for &u in &joined {
            if ok[u] {
                score[u] = fresh_score(u, &state, &mut mark);
                heap.push((score[u], Reverse(u)));
            }
        }
    }
    out
}

/// The `target` vertices of highest total degree, ties to the lowest id.
pub fn max_degree(g: &Graph, target: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.num_vertices()).collect();
    order.sort_by_key(|&v| (Reverse(g.total_degree(v)), v));
    order.truncate(target);
    order
}

/// Writes a metadata header followed by one external vertex id per line.
pub fn write_sample(g: &Graph, s: &Sample, mut out: impl Write) -> std::io::Result<()> {
    let m = &s.meta;
    writeln!(
        out,
        "# algorithm={} fraction={} threshold={} effective_threshold={} ff_p={} seed={}",
        m.algorithm, m.fraction, m.threshold, m.effective_threshold, m.ff_p, m.seed
    )?;
    for &v in &s.vertices {
        writeln!(out, "{}", g.external_id(v))?;
    }
    Ok(())
}

/// Reads a sample file written by [`write_sample`], mapping external ids back
/// to vertices of `g`.
pub fn read_sample(g: &Graph, path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let index = g.id_index();
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let id: u64 = line
            .parse()
            .map_err(|_| parse_err(format!("bad vertex id {line:?}")))?;
        let v = *index
            .get(&id)
            .ok_or_else(|| parse_err(format!("vertex {id} not in graph")))?;
        out.push(v);
    }
    Ok(out)
}

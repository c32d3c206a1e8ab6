//! Degree-corrected stochastic blockmodel graphs with planted communities.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Gamma};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{remove_islands, Graph};
use crate::rng::rng_for;
use crate::stats::{density, nearest_rank_percentile};

/// Vertices drawn relative to the target, anticipating island removal.
pub const OVERSAMPLE: f64 = 1.13;
const MAX_SIZE_ATTEMPTS: usize = 100;

const SIZES_STREAM: u64 = 1;
const DEGREE_STREAM: u64 = 2;
const REALIZE_STREAM: u64 = 3;
const THIN_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub target_vertices: usize,
    pub num_communities: usize,
    /// `x`; larger values give more uneven community sizes.
    #[serde(default = "default_size_variation")]
    pub size_variation: f64,
    /// `x_s`; larger values give fewer between-community edges.
    #[serde(default = "default_community_strength")]
    pub community_strength: f64,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Exponent of the degree law `P(d) ~ d^e`; negative.
    #[serde(default = "default_power_law_exponent")]
    pub power_law_exponent: f64,
    /// Edge density to thin down to, if any.
    #[serde(default)]
    pub target_density: Option<f64>,
    /// Dirichlet concentration is `dirichlet_scale / x` per community.
    #[serde(default = "default_dirichlet_scale")]
    pub dirichlet_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dirichlet_scale() -> f64 {
    10.0
}

fn default_size_variation() -> f64 {
    1.0
}

fn default_community_strength() -> f64 {
    3.0
}

fn default_max_degree() -> usize {
    50
}

fn default_power_law_exponent() -> f64 {
    -2.1
}

impl GeneratorParams {
    pub fn new(target_vertices: usize, num_communities: usize) -> Self {
        GeneratorParams {
            target_vertices,
            num_communities,
            size_variation: default_size_variation(),
            community_strength: default_community_strength(),
            max_degree: default_max_degree(),
            power_law_exponent: default_power_law_exponent(),
            target_density: None,
            dirichlet_scale: default_dirichlet_scale(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m));
        if self.target_vertices == 0 {
            return bad("target_vertices must be positive");
        }
        if self.num_communities == 0 {
            return bad("num_communities must be at least 1");
        }
        if self.max_degree == 0 {
            return bad("max_degree must be at least 1");
        }
        if !(self.power_law_exponent < 0.0) {
            return bad("power_law_exponent must be negative");
        }
        if !(self.size_variation > 0.0) {
            return bad("size_variation must be positive");
        }
        if !(self.community_strength >= 1.0) {
            return bad("community_strength must be at least 1");
        }
        if !(self.dirichlet_scale > 0.0) {
            return bad("dirichlet_scale must be positive");
        }
        if let Some(rho) = self.target_density {
            if !(rho > 0.0 && rho <= 1.0) {
                return bad("target_density must lie in (0, 1]");
            }
        }
        Ok(())
    }

    /// Number of vertices drawn before islands are removed.
    pub fn drawn_vertices(&self) -> usize {
        (OVERSAMPLE * self.target_vertices as f64).ceil() as usize
    }
}

/// Community sizes from a symmetric Dirichlet followed by a multinomial draw
/// over [`GeneratorParams::drawn_vertices`] vertices. Redraws while any
/// community is empty.
pub fn sample_community_sizes(params: &GeneratorParams, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let k = params.num_communities;
    let n = params.drawn_vertices();
    if k == 1 {
        return Ok(vec![n]);
    }
    let gamma = Gamma::new(params.dirichlet_scale / params.size_variation, 1.0)
        .map_err(|e| Error::Generator(e.to_string()))?;
    for _ in 0..MAX_SIZE_ATTEMPTS {
        let weights: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let Ok(pick) = WeightedIndex::new(&weights) else {
            continue;
        };
        let mut sizes = vec![0usize; k];
        for _ in 0..n {
            sizes[pick.sample(rng)] += 1;
        }
        if sizes.iter().all(|&s| s > 0) {
            return Ok(sizes);
        }
    }
    Err(Error::Generator(format!(
        "a community stayed empty after {MAX_SIZE_ATTEMPTS} draws; use fewer communities or a smaller size variation"
    )))
}

/// `B_ij = 1` on the diagonal and `1 / (x_s (|C| - 1))` elsewhere, then scaled
/// by `|C_i| |C_j|`.
pub fn build_target_blockmodel(sizes: &[usize], strength: f64) -> Vec<Vec<f64>> {
    let k = sizes.len();
    let off = if k > 1 {
        1.0 / (strength * (k - 1) as f64)
    } else {
        0.0
    };
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let base = if i == j { 1.0 } else { off };
                    base * sizes[i] as f64 * sizes[j] as f64
                })
                .collect()
        })
        .collect()
}

/// Total degree and its random split into out- and in-degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeDraw {
    pub out_degree: u64,
    pub in_degree: u64,
}

impl DegreeDraw {
    pub fn total(&self) -> u64 {
        self.out_degree + self.in_degree
    }
}

/// Probability of each degree `1..=d_max` under `P(d) ~ d^e`.
pub fn degree_pmf(max_degree: usize, exponent: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=max_degree)
        .map(|d| (d as f64).powf(exponent))
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Draws `n` degrees from the truncated power law, each split into in and out
/// halves by a fair binomial.
pub fn sample_degrees(params: &GeneratorParams, n: usize, rng: &mut impl Rng) -> Vec<DegreeDraw> {
    let pick = WeightedIndex::new(degree_pmf(params.max_degree, params.power_law_exponent))
        .expect("positive weights");
    (0..n)
        .map(|_| {
            let d = pick.sample(rng) as u64 + 1;
            let in_degree = Binomial::new(d, 0.5).expect("valid binomial").sample(rng);
            DegreeDraw {
                out_degree: d - in_degree,
                in_degree,
            }
        })
        .collect()
}

fn stochastic_round(x: f64, rng: &mut impl Rng) -> u64 {
    let floor = x.floor();
    floor as u64 + u64::from(rng.random::<f64>() < x - floor)
}

fn stub_sampler(members: &[usize], weight: impl Fn(usize) -> u64) -> Option<WeightedIndex<u64>> {
    let w: Vec<u64> = members.iter().map(|&v| weight(v)).collect();
    WeightedIndex::new(&w).ok()
}

/// Realizes a multigraph: `B` is rescaled to the total degree, each block-pair
/// count is stochastically rounded, and endpoints are matched to stubs in
/// proportion to out-degree (source) and in-degree (target).
pub fn realize_graph(
    labels: &[usize],
    b: &[Vec<f64>],
    degrees: &[DegreeDraw],
    rng: &mut impl Rng,
) -> Result<Graph> {
    if labels.len() != degrees.len() {
        return Err(Error::invalid("labels and degrees differ in length"));
    }
    if b.iter().any(|row| row.len() != b.len()) || labels.iter().any(|&l| l >= b.len()) {
        return Err(Error::invalid("block matrix does not match the labels"));
    }
    let total_degree: u64 = degrees.iter().map(DegreeDraw::total).sum();
    if total_degree == 0 {
        return Err(Error::Generator("total degree is zero".into()));
    }
    let k = b.len();
    let mut members = vec![Vec::new(); k];
    for (v, &l) in labels.iter().enumerate() {
        members[l].push(v);
    }
    // blocks whose members lack out- (or in-) stubs fall back to total degree
    let samplers = |f: fn(&DegreeDraw) -> u64| -> Vec<Option<WeightedIndex<u64>>> {
        members
            .iter()
            .map(|m| {
                stub_sampler(m, |v| f(&degrees[v]))
                    .or_else(|| stub_sampler(m, |v| degrees[v].total()))
            })
            .collect()
    };
    let out_pick = samplers(|d| d.out_degree);
    let in_pick = samplers(|d| d.in_degree);

    let mass: f64 = b.iter().flatten().sum();
    let scale = total_degree as f64 / mass;
    let mut edges = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let count = stochastic_round(b[i][j] * scale, rng);
            let (Some(src), Some(dst)) = (&out_pick[i], &in_pick[j]) else {
                continue;
            };
            for _ in 0..count {
                edges.push((members[i][src.sample(rng)], members[j][dst.sample(rng)]));
            }
        }
    }
    Graph::from_edges(labels.len(), edges)?.with_truth(labels.to_vec())
}

/// Deletes edges chosen uniformly at random until `|E| = round(rho |V| (|V|-1))`.
pub fn thin_to_density(g: &Graph, target: f64, seed: u64) -> Result<Graph> {
    let current = density(g.num_vertices(), g.num_edges());
    if target > current {
        return Err(Error::invalid(format!(
            "target density {target} exceeds current density {current}"
        )));
    }
    let n = g.num_vertices() as f64;
    let keep = ((target * n * (n - 1.0)).round() as usize).min(g.num_edges());
    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    order.shuffle(&mut rng_for(seed, &[THIN_STREAM]));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    let edges = kept.into_iter().map(|i| g.edges()[i]).collect();
    let mut out = Graph::from_edges(g.num_vertices(), edges)?;
    if let Some(t) = g.truth() {
        out = out.with_truth(t.to_vec())?;
    }
    Ok(out)
}

/// Deletes uniformly random edges and then the resulting islands, keeping
/// as many edges as possible while the pruned density stays at or below
/// `target`. Deletions are nested along one random edge order.
pub fn thin_and_prune(g: &Graph, target: f64, seed: u64) -> Result<Graph> {
    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    order.shuffle(&mut rng_for(seed, &[THIN_STREAM]));
    let mut touched = vec![false; g.num_vertices()];
    let mut pruned_density = |keep: usize| {
        touched.fill(false);
        let mut alive = 0usize;
        for &i in &order[..keep] {
            let (u, v) = g.edges()[i];
            for w in [u, v] {
                if !touched[w] {
                    touched[w] = true;
                    alive += 1;
                }
            }
        }
        density(alive, keep)
    };
    let total = g.num_edges();
    let keep = if pruned_density(total) <= target {
        total
    } else {
        // density is not monotone in the edge count, so find a feasible
        // count on a geometric grid before bisecting
        let mut hi = total;
        let mut lo = None;
        let mut m = total;
        while m > 1 {
            m = (m as f64 * 0.9) as usize;
            if m == 0 {
                break;
            }
            if pruned_density(m) <= target {
                lo = Some(m);
                break;
            }
            hi = m;
        }
        let mut lo = lo.ok_or_else(|| {
            Error::Generator(format!(
                "density {target} is unreachable once islands are removed"
            ))
        })?;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if pruned_density(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    let edges = kept.into_iter().map(|i| g.edges()[i]).collect();
    let mut out = Graph::from_edges(g.num_vertices(), edges)?;
    if let Some(t) = g.truth() {
        out = out.with_truth(t.to_vec())?;
    }
    Ok(remove_islands(&out)?.0)
}

fn serialize_ratio<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

fn deserialize_ratio<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ratio {
        Number(f64),
        Text(String),
    }
    match Ratio::deserialize(d)? {
        Ratio::Number(x) => Ok(x),
        Ratio::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Ratio::Text(t) => Err(serde::de::Error::custom(format!("bad ratio {t:?}"))),
    }
}

/// Statistics measured on an emitted graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedStats {
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_communities: usize,
    /// Population standard deviation of community sizes.
    pub sigma: f64,
    /// Within-community edges per between-community edge; `inf` when there
    /// are no between-community edges.
    #[serde(
        serialize_with = "serialize_ratio",
        deserialize_with = "deserialize_ratio"
    )]
    pub strength: f64,
    pub max_degree: usize,
    pub density: f64,
    pub degree_95: usize,
}

/// Measures [`RealizedStats`] on a graph carrying truth labels.
pub fn realized_stats(g: &Graph) -> Result<RealizedStats> {
    let truth = g
        .truth()
        .ok_or_else(|| Error::invalid("graph has no truth labels"))?;
    let k = truth.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    for &t in truth {
        sizes[t] += 1;
    }
    let nonempty: Vec<f64> = sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| s as f64)
        .collect();
    let mean = nonempty.iter().sum::<f64>() / nonempty.len().max(1) as f64;
    let sigma = (nonempty.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
        / nonempty.len().max(1) as f64)
        .sqrt();
    let within = g
        .edges()
        .iter()
        .filter(|&&(u, v)| truth[u] == truth[v])
        .count();
    let between = g.num_edges() - within;
    let strength = if between == 0 {
        f64::INFINITY
    } else {
        within as f64 / between as f64
    };
    let degrees = g.total_degrees();
    Ok(RealizedStats {
        num_vertices: g.num_vertices(),
        num_edges: g.num_edges(),
        num_communities: nonempty.len(),
        sigma,
        strength,
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        density: density(g.num_vertices(), g.num_edges()),
        degree_95: if degrees.is_empty() {
            0
        } else {
            nearest_rank_percentile(&degrees, 0.95)
        },
    })
}

#[derive(Debug, Clone)]
pub struct GeneratedGraph {
    /// Graph with truth labels attached.
    pub graph: Graph,
    pub realized: RealizedStats,
}

/// Full generation: sizes, target blockmodel, degrees, realization, optional
/// thinning and island removal.
pub fn generate(params: &GeneratorParams) -> Result<GeneratedGraph> {
    params.validate()?;
    let mut rng = rng_for(params.seed, &[SIZES_STREAM]);
    let sizes = sample_community_sizes(params, &mut rng)?;
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    labels.shuffle(&mut rng);
    let b = build_target_blockmodel(&sizes, params.community_strength);
    let degrees = sample_degrees(
        params,
        labels.len(),
        &mut rng_for(params.seed, &[DEGREE_STREAM]),
    );
    let raw = realize_graph(
        &labels,
        &b,
        &degrees,
        &mut rng_for(params.seed, &[REALIZE_STREAM]),
    )?;
    let graph = match params.target_density {
        Some(target) => thin_and_prune(&raw, target, params.seed)?,
        None => remove_islands(&raw)?.0,
    };
    let truth = graph.truth().expect("truth carried through").to_vec();
    let (compact, _) = crate::graph::compact_labels(&truth);
    let graph = graph.with_truth(compact)?;
    let realized = realized_stats(&graph)?;
    Ok(GeneratedGraph { graph, realized })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_blockmodel_examples() {
        assert_eq!(
            build_target_blockmodel(&[3, 3], 1.0),
            vec![vec![9.0, 9.0], vec![9.0, 9.0]]
        );
        let b = build_target_blockmodel(&[1, 2, 4], 2.0);
        assert_eq!(b[0][0], 1.0);
        assert_eq!(b[0][1], 0.25 * 2.0);
        assert_eq!(b[2][1], 0.25 * 8.0);
        assert_eq!(build_target_blockmodel(&[5], 3.0), vec![vec![25.0]]);
    }

    #[test]
    fn single_community_takes_everything() {
        let mut p = GeneratorParams::new(100, 1);
        p.seed = 1;
        let sizes = sample_community_sizes(&p, &mut rng_for(0, &[])).unwrap();
        assert_eq!(sizes, vec![113]);
    }

    #[test]
    fn unit_max_degree() {
        let mut p = GeneratorParams::new(10, 1);
        p.max_degree = 1;
        let d = sample_degrees(&p, 50, &mut rng_for(0, &[]));
        assert!(d.iter().all(|x| x.total() == 1));
    }

    #[test]
    fn impossible_sizes_error() {
        let mut p = GeneratorParams::new(5, 50);
        p.size_variation = 100.0;
        assert!(matches!(
            sample_community_sizes(&p, &mut rng_for(0, &[])),
            Err(Error::Generator(_))
        ));
    }

    #[test]
    fn validation() {
        let mut p = GeneratorParams::new(10, 2);
        assert!(p.validate().is_ok());
        p.power_law_exponent = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn strength_round_trips_infinity() {
        let g = Graph::from_edges(2, vec![(0, 1)])
            .unwrap()
            .with_truth(vec![0, 0])
            .unwrap();
        let s = realized_stats(&g).unwrap();
        assert!(s.strength.is_infinite());
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"inf\""));
        let back: RealizedStats = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}

mod common;

use common::*;
use rand::Rng;
use sbpsample::blockmodel::{description_length, BlockModel, EdgeScratch, Partition, VertexEdges};
use sbpsample::sbp::{
    acceptance_probability, fine_tune, hastings_ratio, merge_phase, mh_sweep, partition, SbpConfig,
};
use sbpsample::Graph;

fn pair_f1(pred: &[usize], truth: &[usize]) -> f64 {
    let (both, p, t) = brute_force_pairs(pred, truth);
    if both == 0 {
        return 0.0;
    }
    let (prec, rec) = (both as f64 / p as f64, both as f64 / t as f64);
    2.0 * prec * rec / (prec + rec)
}

fn two_cliques() -> Graph {
    let mut edges = Vec::new();
    for c in 0..2 {
        for u in 0..5 {
            for v in 0..5 {
                if u != v {
                    edges.push((5 * c + u, 5 * c + v));
                }
            }
        }
    }
    Graph::from_edges(10, edges).unwrap()
}

/// Planted blocks with dense diagonal and sparse off-diagonal edges.
fn planted(r: &mut impl Rng, n: usize, k: usize, p_in: f64, p_out: f64) -> (Graph, Vec<usize>) {
    let truth: Vec<usize> = (0..n).map(|v| v * k / n).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && r.random_bool(if truth[u] == truth[v] { p_in } else { p_out }) {
                edges.push((u, v));
            }
        }
    }
    (Graph::from_edges(n, edges).unwrap(), truth)
}

#[test]
fn two_cliques_split_matches_exhaustive_optimum() {
    let g = two_cliques();
    // best 2-partition by enumeration
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1..(1u32 << 9) {
        let labels: Vec<usize> = (0..10)
            .map(|v| {
                if v == 9 {
                    1
                } else {
                    ((mask >> v) & 1) as usize
                }
            })
            .collect();
        if labels.iter().all(|&l| l == 1) {
            continue;
        }
        let h = description_length(&g, &Partition::new(labels).unwrap());
        if h < best.0 {
            best = (h, mask);
        }
    }
    let oracle: Vec<usize> = (0..10)
        .map(|v| {
            if v == 9 {
                1
            } else {
                ((best.1 >> v) & 1) as usize
            }
        })
        .collect();
    assert_eq!(
        pair_f1(&oracle, &(0..10).map(|v| v / 5).collect::<Vec<_>>()),
        1.0
    );

    let r = partition(&g, &SbpConfig::with_seed(1));
    assert_eq!(r.partition.num_blocks(), 2);
    assert_eq!(pair_f1(r.partition.assignment(), &oracle), 1.0);
}

#[test]
fn merge_phase_joins_planted_halves() {
    let mut r = rng(11);
    for trial in 0..5 {
        let (g, truth) = planted(&mut r, 40, 2, 0.4, 0.02);
        // split each planted block into two halves
        let start: Vec<usize> = (0..40).map(|v| 2 * truth[v] + (v % 2)).collect();
        let p = Partition::new(start.clone()).unwrap();
        // exhaustive merge-score oracle over all block pairs
        let mut scores = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                let merged: Vec<usize> =
                    start.iter().map(|&l| if l == b { a } else { l }).collect();
                scores.push((
                    description_length(&g, &Partition::from_labels(&merged)),
                    a,
                    b,
                ));
            }
        }
        scores.sort_by(|x, y| x.0.total_cmp(&y.0));
        let best_two: Vec<(usize, usize)> = scores[..2].iter().map(|s| (s.1, s.2)).collect();
        assert!(
            best_two.contains(&(0, 1)) && best_two.contains(&(2, 3)),
            "trial {trial}: {scores:?}"
        );

        let merged = merge_phase(&g, &p, &SbpConfig::with_seed(trial));
        assert_eq!(merged.num_blocks(), 2);
        assert_eq!(pair_f1(merged.assignment(), &truth), 1.0);
    }
}

#[test]
fn acceptance_probability_matches_dense_oracle() {
    let g = Graph::from_edges(
        6,
        vec![
            (0, 1),
            (1, 2),
            (2, 0),
            (3, 4),
            (4, 5),
            (5, 3),
            (2, 3),
            (1, 1),
            (4, 2),
        ],
    )
    .unwrap();
    let labels = vec![0, 0, 0, 1, 1, 1];
    let v = 2;
    let (r, s) = (0, 1);
    let bm = BlockModel::build(&g, &Partition::new(labels.clone()).unwrap());
    let ve = VertexEdges::gather(&g, &labels, v, &mut EdgeScratch::default());

    // proposal probability from the dense model: neighbour endpoints of v
    let prob = |labels: &[usize], from_target: usize| {
        let dm = dense_model(&g, labels);
        let c = dm.sizes.len() as f64;
        let mut ends = Vec::new();
        for &(a, b) in g.edges() {
            if a == v {
                ends.push(labels[b]);
            }
            if b == v {
                ends.push(labels[a]);
            }
        }
        ends.iter()
            .map(|&t| {
                let e_t = (dm.e_out[t] + dm.e_in[t]) as f64;
                (dm.b[t][from_target] + dm.b[from_target][t] + 1) as f64 / (e_t + c)
            })
            .sum::<f64>()
            / ends.len() as f64
    };
    let forward = prob(&labels, s);
    let mut moved = labels.clone();
    moved[v] = s;
    let backward = prob(&moved, r);
    let dh = oracle_description_length(&g, &moved) - oracle_description_length(&g, &labels);
    let expected = (backward / forward * (-dh).exp()).min(1.0);

    let ratio = hastings_ratio(&bm, &ve, r, s);
    assert!((ratio - backward / forward).abs() < 1e-12);
    let got = acceptance_probability(ratio, bm.move_delta(&ve, r, s), 1.0);
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
}

#[test]
fn accepted_moves_match_recompute() {
    let mut r = rng(12);
    let (g, _) = planted(&mut r, 30, 3, 0.3, 0.05);
    let mut p = Partition::new(random_labels(&mut r, 30, 3)).unwrap();
    let mut bm = BlockModel::build(&g, &p);
    let cfg = SbpConfig::default();
    for _ in 0..10 {
        let before = description_length(&g, &p);
        let stats = mh_sweep(&g, &mut p, &mut bm, &cfg, &mut r);
        let after = description_length(&g, &p);
        assert!(rel_diff(before + stats.delta, after) < 1e-8);
        assert!(rel_diff(bm.description_length(), after) < 1e-8);
        assert_eq!(p.num_blocks(), 3);
    }
}

#[test]
fn fine_tune_improves_random_labels() {
    let mut r = rng(13);
    let mut gain = 0.0;
    for _ in 0..5 {
        let (g, truth) = planted(&mut r, 60, 3, 0.3, 0.02);
        let start = Partition::new(random_labels(&mut r, 60, 3)).unwrap();
        let f0 = pair_f1(start.assignment(), &truth);
        let h0 = description_length(&g, &start);
        let tuned = fine_tune(&g, start, &SbpConfig::with_seed(2));
        assert!(description_length(&g, &tuned) <= h0);
        gain += pair_f1(tuned.assignment(), &truth) - f0;
    }
    assert!(gain > 0.0);
}

#[test]
fn partition_recovers_planted_blocks() {
    let mut r = rng(14);
    let (g, truth) = planted(&mut r, 200, 4, 0.15, 0.005);
    let res = partition(&g, &SbpConfig::with_seed(5));
    let f1 = pair_f1(res.partition.assignment(), &truth);
    assert!(
        f1 > 0.9,
        "f1 = {f1}, blocks = {}",
        res.partition.num_blocks()
    );
    let h_max = description_length(&g, &Partition::singleton(200));
    assert!(res.description_length < h_max);
}

#[test]
fn partition_is_deterministic() {
    let mut r = rng(15);
    let (g, _) = planted(&mut r, 120, 3, 0.1, 0.01);
    let a = partition(&g, &SbpConfig::with_seed(77));
    let b = partition(&g, &SbpConfig::with_seed(77));
    assert_eq!(a.partition, b.partition);
    assert_eq!(a.description_length, b.description_length);
}

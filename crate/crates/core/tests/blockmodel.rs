mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use sbpsample::blockmodel::{
    description_length, ln_factorial, restricted_partitions, BlockModel, EdgeScratch, LnPartitions,
    Partition, VertexEdges,
};
use sbpsample::Graph;

#[test]
fn counts_match_dense_oracle() {
    let mut r = rng(1);
    for _ in 0..20 {
        let g = random_multigraph(&mut r, 30, 90);
        let labels = random_labels(&mut r, 30, 5);
        let bm = BlockModel::build(&g, &Partition::new(labels.clone()).unwrap());
        let dm = dense_model(&g, &labels);
        assert_eq!(bm.matrix(), dm.b);
        for i in 0..5 {
            assert_eq!(bm.block_out_degree(i), dm.e_out[i]);
            assert_eq!(bm.block_in_degree(i), dm.e_in[i]);
            assert_eq!(bm.block_size(i), dm.sizes[i]);
        }
    }
}

#[test]
fn description_length_matches_formula_oracle() {
    let mut r = rng(2);
    for trial in 0..30 {
        let n = 8 + trial % 10;
        let g = random_multigraph(&mut r, n, 2 * n);
        let k = 1 + trial % 5;
        let labels = random_labels(&mut r, n, k);
        let h = description_length(&g, &Partition::new(labels.clone()).unwrap());
        let oracle = oracle_description_length(&g, &labels);
        assert!(rel_diff(h, oracle) < 1e-8, "trial {trial}: {h} vs {oracle}");
    }
}

#[test]
fn nonparametric_likelihood_matches_big_integer_ratio() {
    let mut r = rng(3);
    let g = random_multigraph(&mut r, 20, 120);
    let labels = random_labels(&mut r, 20, 4);
    let bm = BlockModel::build(&g, &Partition::new(labels.clone()).unwrap());
    let dm = dense_model(&g, &labels);

    let mut num = num_bigint::BigUint::from(1u32);
    let mut den = num_bigint::BigUint::from(1u32);
    for row in &dm.b {
        for &x in row {
            num *= big_fact(x);
        }
    }
    for v in 0..20 {
        num *= big_fact(g.out_degree(v) as u64) * big_fact(g.in_degree(v) as u64);
    }
    for i in 0..4 {
        den *= big_fact(dm.e_out[i]) * big_fact(dm.e_in[i]);
    }
    let mut mult = std::collections::HashMap::new();
    for &e in g.edges() {
        *mult.entry(e).or_insert(0u64) += 1;
    }
    for &m in mult.values() {
        den *= big_fact(m);
    }
    let oracle = ln_big(&num) - ln_big(&den);
    let l = bm.log_likelihood_nonparametric();
    assert!(rel_diff(l, oracle) < 1e-9, "{l} vs {oracle}");
}

#[test]
fn ln_factorial_matches_big_integer() {
    for n in [0u64, 1, 5, 20, 170, 1000, 5000, 200_000] {
        let exact = ln_big(&big_fact(n.min(5000)));
        if n <= 5000 {
            assert!(rel_diff(ln_factorial(n), exact) < 1e-12, "n = {n}");
        } else {
            assert!(rel_diff(ln_factorial(n), ln_fact(n)) < 1e-10);
        }
    }
}

#[test]
fn restricted_partitions_match_enumeration() {
    let mut memo = std::collections::HashMap::new();
    for n in 0..60u64 {
        for m in 0..=n {
            let exact = count_partitions(n, m, n, &mut memo);
            assert_eq!(
                restricted_partitions(n as usize, m as usize),
                num_bigint::BigUint::from(exact)
            );
        }
    }
    let table = LnPartitions::shared();
    for (n, m) in [(100u64, 7u64), (150, 150), (90, 30)] {
        assert!((table.ln_q(n, m) - ln_q_oracle(n, m)).abs() < 1e-9);
    }
}

#[test]
fn planted_partition_beats_singletons() {
    // Two dense 5-vertex cliques joined by a single edge.
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
    edges.push((0, 5));
    let g = Graph::from_edges(10, edges).unwrap();
    let planted = Partition::new((0..10).map(|v| v / 5).collect()).unwrap();
    assert!(description_length(&g, &planted) < description_length(&g, &Partition::singleton(10)));
}

fn check_moves(g: &Graph, labels: Vec<usize>, moves: &[(usize, usize)]) {
    let k = labels.iter().max().unwrap() + 1;
    let mut assignment = labels;
    let mut bm = BlockModel::build(g, &Partition::new(assignment.clone()).unwrap());
    let mut scratch = EdgeScratch::default();
    for &(v, target) in moves {
        let r = assignment[v];
        let s = target % k;
        if r == s {
            continue;
        }
        let ve = VertexEdges::gather(g, &assignment, v, &mut scratch);
        let before = bm.description_length();
        let delta = bm.move_delta(&ve, r, s);
        bm.apply_move(&ve, r, s);
        assignment[v] = s;
        let h_after = oracle_from_assignment(g, &assignment);
        assert!(
            (before + delta - h_after).abs() <= 1e-9 * h_after.abs().max(1.0),
            "move {v}: {r}->{s}: {} vs {h_after}",
            before + delta
        );
        assert!((bm.description_length() - h_after).abs() <= 1e-9 * h_after.abs().max(1.0));
    }
}

/// Full recompute of H after compacting away empty blocks.
fn oracle_from_assignment(g: &Graph, assignment: &[usize]) -> f64 {
    description_length(g, &Partition::from_labels(assignment))
}

#[test]
fn move_delta_matches_full_recompute() {
    let mut r = rng(4);
    for _ in 0..25 {
        let g = random_multigraph(&mut r, 25, 70);
        let labels = random_labels(&mut r, 25, 4);
        let moves: Vec<_> = (0..40)
            .map(|_| (r.random_range(0..25), r.random_range(0..4)))
            .collect();
        check_moves(&g, labels, &moves);
    }
}

#[test]
fn move_delta_handles_emptying_a_block() {
    let mut r = rng(5);
    let g = random_multigraph(&mut r, 12, 30);
    let mut labels = vec![0; 12];
    labels[3] = 2;
    for v in 6..12 {
        labels[v] = 1;
    }
    check_moves(&g, labels, &[(3, 0), (4, 2), (4, 1)]);
}

#[test]
fn merge_delta_matches_full_recompute() {
    let mut r = rng(6);
    for _ in 0..30 {
        let g = random_multigraph(&mut r, 30, 80);
        let labels = random_labels(&mut r, 30, 6);
        let bm = BlockModel::build(&g, &Partition::new(labels.clone()).unwrap());
        let before = bm.description_length();
        let a = r.random_range(0..6);
        let b = (a + r.random_range(1..6)) % 6;
        let merged: Vec<usize> = labels.iter().map(|&l| if l == a { b } else { l }).collect();
        let after = oracle_from_assignment(&g, &merged);
        let d1 = bm.merge_delta(a, b);
        let d2 = bm.merge_delta(b, a);
        assert!((before + d1 - after).abs() < 1e-9 * after.abs().max(1.0));
        assert!((d1 - d2).abs() < 1e-9 * after.abs().max(1.0));
    }
}

fn graph_strategy() -> impl Strategy<Value = (Graph, Vec<usize>, u64)> {
    (4usize..18, 1usize..5, any::<u64>()).prop_map(|(n, k, seed)| {
        let mut r = rng(seed);
        let g = random_multigraph(&mut r, n, 3 * n);
        let labels = random_labels(&mut r, n, k.min(n));
        (g, labels, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn description_length_is_label_invariant((g, labels, seed) in graph_strategy()) {
        let k = labels.iter().max().unwrap() + 1;
        let mut perm: Vec<usize> = (0..k).collect();
        let mut r = rng(seed ^ 0xabc);
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let relabeled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let h1 = description_length(&g, &Partition::new(labels).unwrap());
        let h2 = description_length(&g, &Partition::new(relabeled).unwrap());
        prop_assert!((h1 - h2).abs() <= 1e-9 * h1.abs().max(1.0));
    }

    #[test]
    fn move_and_back_restores_description_length((g, labels, seed) in graph_strategy()) {
        let k = labels.iter().max().unwrap() + 1;
        prop_assume!(k >= 2);
        let mut r = rng(seed ^ 0x5eed);
        let v = r.random_range(0..g.num_vertices());
        let from = labels[v];
        let to = (from + r.random_range(1..k)) % k;
        let mut bm = BlockModel::build(&g, &Partition::new(labels.clone()).unwrap());
        let h0 = bm.description_length();
        let mut scratch = EdgeScratch::default();
        let mut assignment = labels;
        let ve = VertexEdges::gather(&g, &assignment, v, &mut scratch);
        let d1 = bm.move_delta(&ve, from, to);
        bm.apply_move(&ve, from, to);
        assignment[v] = to;
        let ve = VertexEdges::gather(&g, &assignment, v, &mut scratch);
        let d2 = bm.move_delta(&ve, to, from);
        bm.apply_move(&ve, to, from);
        prop_assert!((d1 + d2).abs() <= 1e-9 * h0.abs().max(1.0));
        prop_assert!((bm.description_length() - h0).abs() <= 1e-9 * h0.abs().max(1.0));
    }

    #[test]
    fn description_length_is_finite_and_non_negative_likelihood_gap((g, labels, _seed) in graph_strategy()) {
        let bm = BlockModel::build(&g, &Partition::new(labels).unwrap());
        let h = bm.description_length();
        prop_assert!(h.is_finite());
        prop_assert!(bm.log_likelihood_nonparametric() <= 1e-9);
    }
}

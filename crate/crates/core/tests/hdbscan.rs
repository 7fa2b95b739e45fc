use cohere_core::cluster::hdbscan;
use cohere_core::cluster::hdbscan::{core_distances, hdbscan_run, mutual_reachability_mst, HdbscanParams};
use cohere_core::math::Vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;
use oracles::{ari, blobs, core_oracle, eom_oracle, prim_oracle, stability_oracle};

fn uniform_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.0..2.0)]).collect()
}

#[test]
fn mst_weights_match_prim_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..200 {
        let pts = uniform_points(&mut rng, 30);
        let k = 1 + case % 6;
        let core = core_distances(&pts, k, 0.5);
        assert_eq!(core, core_oracle(&pts, k));
        let mst = mutual_reachability_mst(&pts, &core);
        assert_eq!(mst.len(), 29);
        let mut weights: Vec<f64> = mst.iter().map(|e| e.weight).collect();
        weights.sort_by(f64::total_cmp);
        assert_eq!(weights, prim_oracle(&pts, &core), "case {case}");
    }
}

#[test]
fn mst_spans_all_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts = uniform_points(&mut rng, 40);
    let core = core_distances(&pts, 4, 0.5);
    let mst = mutual_reachability_mst(&pts, &core);
    let mut parent: Vec<usize> = (0..40).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for e in &mst {
        let (a, b) = (find(&mut parent, e.a), find(&mut parent, e.b));
        assert_ne!(a, b, "cycle");
        parent[a] = b;
    }
}

#[test]
fn stabilities_match_exit_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n_blobs = rng.random_range(1..5);
        let centers: Vec<Vec3> = (0..n_blobs).map(|_| [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0), 0.0]).collect();
        let per = rng.random_range(8..25);
        let pts = blobs(&mut rng, &centers, per, 0.4);
        let run = hdbscan_run(&pts, &HdbscanParams { min_cluster_size: 5, min_samples: 4, ..Default::default() });
        for (a, b) in run.tree.stabilities().iter().zip(stability_oracle(&run.tree)) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn selection_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut fixtures = 0;
    let mut nontrivial = 0;
    while fixtures < 300 {
        let n_blobs = rng.random_range(1..6);
        let centers: Vec<Vec3> = (0..n_blobs).map(|_| [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), 0.0]).collect();
        let sigma = rng.random_range(0.2..1.0);
        let per = rng.random_range(6..20);
        let pts = blobs(&mut rng, &centers, per, sigma);
        let params =
            HdbscanParams { min_cluster_size: rng.random_range(3..7), min_samples: rng.random_range(1..6), ..Default::default() };
        let run = hdbscan_run(&pts, &params);
        if run.tree.clusters.len() > 12 {
            continue;
        }
        fixtures += 1;
        if run.tree.clusters.len() > 3 {
            nontrivial += 1;
        }
        for allow_root in [false, true] {
            let (_, winners) = eom_oracle(&run.tree, allow_root);
            let got = run.tree.select_eom(allow_root);
            assert!(winners.contains(&got), "selection {got:?} not optimal; optimal: {winners:?}");
        }
    }
    assert!(nontrivial >= 50, "only {nontrivial} fixtures with more than three clusters");
}

#[test]
fn two_blobs_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let a = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 1.0];
        let b = [a[0] + 5.0 * angle.cos(), a[1] + 5.0 * angle.sin(), 1.0];
        let per = rng.random_range(50..150);
        let pts = blobs(&mut rng, &[a, b], per, 0.1);
        let truth: Vec<Option<usize>> = (0..2 * per).map(|i| Some(i / per)).collect();
        let labels = hdbscan(&pts, &HdbscanParams::default());
        let score = ari(&labels, &truth);
        assert!(score >= 0.99, "ARI {score}");
    }
}

fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn labels_are_permutation_invariant(seed in any::<u64>(), n_blobs in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec3> = (0..n_blobs).map(|_| [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), 0.0]).collect();
        let pts = blobs(&mut rng, &centers, 20, 0.3);
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
        let params = HdbscanParams { min_cluster_size: 5, min_samples: 5, ..Default::default() };
        let base = hdbscan(&pts, &params);
        let moved = hdbscan(&shuffled, &params);
        let back: Vec<Option<usize>> = {
            let mut out = vec![None; pts.len()];
            for (k, &i) in perm.iter().enumerate() {
                out[i] = moved[k];
            }
            out
        };
        prop_assert!(same_partition(&base, &back));
    }

    #[test]
    fn lattice_labels_are_permutation_invariant(seed in any::<u64>(), n in 20usize..60) {
        // integer coordinates make equal mutual-reachability weights common
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n).map(|_| [rng.random_range(0..8) as f64, rng.random_range(0..8) as f64, 0.0]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
        let params = HdbscanParams { min_cluster_size: 4, min_samples: 3, ..Default::default() };
        let base = hdbscan(&pts, &params);
        let moved = hdbscan(&shuffled, &params);
        let mut back = vec![None; n];
        for (k, &i) in perm.iter().enumerate() {
            back[i] = moved[k];
        }
        prop_assert!(same_partition(&base, &back));
    }

    #[test]
    fn core_distance_is_monotone_in_k(seed in any::<u64>(), k in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = uniform_points(&mut rng, 25);
        let lo = core_distances(&pts, k, 0.5);
        let hi = core_distances(&pts, k + 1, 0.5);
        prop_assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
    }
}

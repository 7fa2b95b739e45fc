//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use cohere_core::assoc::CostMatrix;
use cohere_core::cluster::hdbscan::CondensedTree;
use cohere_core::math::Vec3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Row-order cost of every permutation of `0..n`, minimum kept.
pub fn brute_force(cost: &CostMatrix) -> f64 {
    fn go(cost: &CostMatrix, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        let n = cost.size();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost.get(row, c), best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.size()], 0.0, &mut best);
    best
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&c| c < p.len() && !std::mem::replace(&mut seen[c], true))
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// k-th smallest distance to any point, the point itself included.
pub fn core_oracle(points: &[Vec3], k: usize) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| dist(*p, *q)).collect();
            d.sort_by(f64::total_cmp);
            d[k.min(points.len()) - 1]
        })
        .collect()
}

/// Textbook dense Prim over an explicit weight matrix; sorted edge weights.
pub fn prim_oracle(points: &[Vec3], core: &[f64]) -> Vec<f64> {
    let n = points.len();
    let w = |a: usize, b: usize| dist(points[a], points[b]).max(core[a]).max(core[b]);
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut out = Vec::new();
    best[0] = 0.0;
    for step in 0..n {
        let v = (0..n).filter(|&v| !in_tree[v]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[v] = true;
        if step > 0 {
            out.push(best[v]);
        }
        for u in 0..n {
            if !in_tree[u] {
                best[u] = best[u].min(w(v, u));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn blobs<R: Rng>(rng: &mut R, centers: &[Vec3], per: usize, sigma: f64) -> Vec<Vec3> {
    let noise = Normal::new(0.0, sigma).unwrap();
    centers
        .iter()
        .flat_map(|c| {
            (0..per).map(|_| [c[0] + noise.sample(rng), c[1] + noise.sample(rng), c[2] + noise.sample(rng)]).collect::<Vec<_>>()
        })
        .collect()
}

/// Stability from the point exits alone: every point contributes
/// `λ_exit − λ_birth` to the cluster it leaves and, for each ancestor, the
/// span between that ancestor's birth and the birth of the child on its path.
pub fn stability_oracle(tree: &CondensedTree) -> Vec<f64> {
    let mut s = vec![0.0; tree.clusters.len()];
    for e in &tree.exits {
        let mut c = e.cluster;
        s[c] += e.lambda - tree.clusters[c].birth_lambda;
        while let Some(p) = tree.clusters[c].parent {
            s[p] += tree.clusters[c].birth_lambda - tree.clusters[p].birth_lambda;
            c = p;
        }
    }
    s
}

pub fn ancestors(tree: &CondensedTree, mut c: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(p) = tree.clusters[c].parent {
        out.push(p);
        c = p;
    }
    out
}

/// Best total stability over every non-nested subset of clusters.
pub fn eom_oracle(tree: &CondensedTree, allow_root: bool) -> (f64, Vec<Vec<bool>>) {
    let k = tree.clusters.len();
    let stab = stability_oracle(tree);
    let anc: Vec<Vec<usize>> = (0..k).map(|c| ancestors(tree, c)).collect();
    let mut best = f64::NEG_INFINITY;
    let mut all = Vec::new();
    for mask in 0u32..(1 << k) {
        let sel: Vec<bool> = (0..k).map(|c| mask >> c & 1 == 1).collect();
        if sel[0] && !allow_root {
            continue;
        }
        if (0..k).any(|c| sel[c] && anc[c].iter().any(|&a| sel[a])) {
            continue;
        }
        let total: f64 = (0..k).filter(|&c| sel[c]).map(|c| stab[c]).sum();
        all.push((total, sel));
        best = best.max(total);
    }
    let winners = all.into_iter().filter(|(t, _)| *t >= best - 1e-9 * best.abs().max(1.0)).map(|(_, s)| s).collect();
    (best, winners)
}

/// Adjusted Rand index of two labelings, noise treated as its own label.
pub fn ari(a: &[Option<usize>], b: &[Option<usize>]) -> f64 {
    use std::collections::HashMap;
    let key = |l: Option<usize>| l.map_or(0, |v| v + 1);
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((key(*x), key(*y))).or_default() += 1.0;
        *rows.entry(key(*x)).or_default() += 1.0;
        *cols.entry(key(*y)).or_default() += 1.0;
    }
    let c2 = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.values().map(|v| c2(*v)).sum();
    let sr: f64 = rows.values().map(|v| c2(*v)).sum();
    let sc: f64 = cols.values().map(|v| c2(*v)).sum();
    let expected = sr * sc / c2(a.len() as f64);
    let max = (sr + sc) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

//! HDBSCAN over 3D points.
//!
//! Core distances come from exact k-NN, the minimum spanning tree of the
//! mutual-reachability graph is built with dense Prim, the single-linkage
//! hierarchy is condensed with `min_cluster_size`, and clusters are selected by
//! excess of mass (maximum total stability over non-nested clusters).

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::knn;
use crate::math::{self, Vec3};

/// Distances below this are treated as this value when converted to density
/// `λ = 1/d`, so coincident points get a large finite λ instead of infinity.
pub const MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Allow the root of the condensed tree to be selected as a single cluster.
    pub allow_single_cluster: bool,
    /// Cell size of the k-NN grid, meters.
    pub knn_cell: f64,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self { min_cluster_size: 10, min_samples: 10, allow_single_cluster: true, knn_cell: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[inline]
pub fn mutual_reachability(core: &[f64], points: &[Vec3], a: usize, b: usize) -> f64 {
    math::dist3(points[a], points[b]).max(core[a]).max(core[b])
}

pub fn core_distances(points: &[Vec3], min_samples: usize, knn_cell: f64) -> Vec<f64> {
    knn::kth_neighbor_distances(points, min_samples, knn_cell)
}

/// Prim's algorithm on the implicit dense mutual-reachability graph. Ties pick
/// the lowest vertex index. Edges are returned in insertion order.
pub fn mutual_reachability_mst(points: &[Vec3], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    // Vertices outside the tree live in contiguous arrays compacted with
    // swap_remove, so ties are resolved on the original index rather than the
    // slot. Distances are compared squared and the emitted weight recomputed.
    // Parents are kept as f64 so the update loop stays in one lane width.
    let mut idx: Vec<usize> = (1..n).collect();
    let mut xs: Vec<f64> = points[1..].iter().map(|p| p[0]).collect();
    let mut ys: Vec<f64> = points[1..].iter().map(|p| p[1]).collect();
    let mut zs: Vec<f64> = points[1..].iter().map(|p| p[2]).collect();
    let mut cs: Vec<f64> = core[1..].iter().map(|c| c * c).collect();
    let mut best = vec![f64::INFINITY; n - 1];
    let mut parent = vec![0.0f64; n - 1];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    while !idx.is_empty() {
        let [cx, cy, cz] = points[current];
        let cc = core[current] * core[current];
        let tag = current as f64;
        let m = idx.len();
        let (xs_, ys_, zs_, cs_) = (&xs[..m], &ys[..m], &zs[..m], &cs[..m]);
        let (best_, parent_) = (&mut best[..m], &mut parent[..m]);
        for k in 0..m {
            let (dx, dy, dz) = (xs_[k] - cx, ys_[k] - cy, zs_[k] - cz);
            let mut w = dx * dx + dy * dy + dz * dz;
            w = if w > cc { w } else { cc };
            w = if w > cs_[k] { w } else { cs_[k] };
            let better = w < best_[k];
            best_[k] = if better { w } else { best_[k] };
            parent_[k] = if better { tag } else { parent_[k] };
        }
        let lo = min_of(&best[..m]);
        let mut pick = 0;
        let mut pick_idx = usize::MAX;
        for (k, (&b, &i)) in best[..m].iter().zip(&idx[..m]).enumerate() {
            if b == lo && i < pick_idx {
                pick = k;
                pick_idx = i;
            }
        }
        let next = idx.swap_remove(pick);
        let a = parent.swap_remove(pick) as usize;
        best.swap_remove(pick);
        xs.swap_remove(pick);
        ys.swap_remove(pick);
        zs.swap_remove(pick);
        cs.swap_remove(pick);
        edges.push(MstEdge { a, b: next, weight: mutual_reachability(core, points, a, next) });
        current = next;
    }
    edges
}

/// Minimum with eight independent accumulators (min is exact under reordering).
fn min_of(values: &[f64]) -> f64 {
    let mut lanes = [f64::INFINITY; 8];
    let mut chunks = values.chunks_exact(8);
    for c in &mut chunks {
        for l in 0..8 {
            lanes[l] = if c[l] < lanes[l] { c[l] } else { lanes[l] };
        }
    }
    for &v in chunks.remainder() {
        lanes[0] = if v < lanes[0] { v } else { lanes[0] };
    }
    lanes.iter().fold(f64::INFINITY, |a, &b| if b < a { b } else { a })
}

/// One merge of the single-linkage hierarchy. Leaves are `0..n`, merge `k`
/// creates node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

pub fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut edges: Vec<MstEdge> = mst.to_vec();
    edges.sort_by(|x, y| {
        x.weight.total_cmp(&y.weight).then(x.a.min(x.b).cmp(&y.a.min(y.b))).then(x.a.max(x.b).cmp(&y.a.max(y.b)))
    });
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (k, e) in edges.iter().enumerate() {
        let ra = find(&mut parent, e.a);
        let rb = find(&mut parent, e.b);
        let node = n + k;
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push(Merge { left: ra, right: rb, distance: e.weight, size: size[node] });
    }
    merges
}

#[inline]
pub fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(MIN_DISTANCE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedCluster {
    pub parent: Option<usize>,
    pub birth_lambda: f64,
    pub size: usize,
    pub children: Vec<usize>,
}

/// A point leaving `cluster` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointExit {
    pub point: usize,
    pub cluster: usize,
    pub lambda: f64,
}

/// Condensed cluster tree. Cluster 0 is the root; children always have larger
/// ids than their parents.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedTree {
    pub clusters: Vec<CondensedCluster>,
    pub exits: Vec<PointExit>,
}

impl CondensedTree {
    pub fn build(n: usize, merges: &[Merge], min_cluster_size: usize) -> Self {
        let mut clusters = vec![CondensedCluster { parent: None, birth_lambda: 0.0, size: n, children: Vec::new() }];
        let mut exits = Vec::with_capacity(n);
        if n == 0 {
            return Self { clusters, exits };
        }
        if merges.is_empty() {
            // single point
            exits.push(PointExit { point: 0, cluster: 0, lambda: lambda_of(0.0) });
            return Self { clusters, exits };
        }
        let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };
        let mut stack = Vec::new();
        let mut leaves_of = |node: usize, out: &mut Vec<usize>| {
            stack.clear();
            stack.push(node);
            while let Some(x) = stack.pop() {
                if x < n {
                    out.push(x);
                } else {
                    let m = &merges[x - n];
                    stack.push(m.right);
                    stack.push(m.left);
                }
            }
        };
        let mut fallen = Vec::new();
        let mut pieces = Vec::new();
        let mut open = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back((n + merges.len() - 1, 0usize));
        while let Some((node, label)) = queue.pop_front() {
            if node < n {
                exits.push(PointExit { point: node, cluster: label, lambda: lambda_of(0.0) });
                continue;
            }
            // merges at exactly this distance split simultaneously, so the
            // result does not depend on how ties were ordered
            let distance = merges[node - n].distance;
            let lambda = lambda_of(distance);
            pieces.clear();
            open.clear();
            open.push(node);
            while let Some(x) = open.pop() {
                if x >= n && merges[x - n].distance == distance {
                    open.push(merges[x - n].right);
                    open.push(merges[x - n].left);
                } else {
                    pieces.push(x);
                }
            }
            let big = pieces.iter().filter(|&&p| size_of(p) >= min_cluster_size).count();
            for &piece in &pieces {
                if size_of(piece) < min_cluster_size {
                    fallen.clear();
                    leaves_of(piece, &mut fallen);
                    exits.extend(fallen.iter().map(|&p| PointExit { point: p, cluster: label, lambda }));
                } else if big == 1 {
                    queue.push_back((piece, label));
                } else {
                    let id = clusters.len();
                    clusters.push(CondensedCluster {
                        parent: Some(label),
                        birth_lambda: lambda,
                        size: size_of(piece),
                        children: Vec::new(),
                    });
                    clusters[label].children.push(id);
                    queue.push_back((piece, id));
                }
            }
        }
        Self { clusters, exits }
    }

    /// Excess-of-mass stability of every cluster.
    pub fn stabilities(&self) -> Vec<f64> {
        let mut stab = vec![0.0; self.clusters.len()];
        for e in &self.exits {
            stab[e.cluster] += e.lambda - self.clusters[e.cluster].birth_lambda;
        }
        for c in &self.clusters {
            if let Some(p) = c.parent {
                stab[p] += (c.birth_lambda - self.clusters[p].birth_lambda) * c.size as f64;
            }
        }
        stab
    }

    /// Selects the set of non-nested clusters with maximal total stability.
    /// The root is a candidate only when `allow_root` is set.
    pub fn select_eom(&self, allow_root: bool) -> Vec<bool> {
        let stab = self.stabilities();
        let k = self.clusters.len();
        let mut selected = vec![true; k];
        let mut subtree = stab.clone();
        for c in (0..k).rev() {
            let children = &self.clusters[c].children;
            let child_sum: f64 = children.iter().map(|&ch| subtree[ch]).sum();
            let root_blocked = c == 0 && !allow_root;
            if root_blocked {
                selected[c] = false;
                subtree[c] = child_sum;
            } else if !children.is_empty() && child_sum > stab[c] {
                selected[c] = false;
                subtree[c] = child_sum;
            } else {
                subtree[c] = stab[c];
                let mut stack: Vec<usize> = children.clone();
                while let Some(d) = stack.pop() {
                    selected[d] = false;
                    stack.extend(self.clusters[d].children.iter().copied());
                }
            }
        }
        selected
    }

    /// Cluster label per point (selected tree cluster id), `None` for noise.
    pub fn label_points(&self, n: usize, selected: &[bool]) -> Vec<Option<usize>> {
        let mut labels = vec![None; n];
        for e in &self.exits {
            let mut c = Some(e.cluster);
            while let Some(id) = c {
                if selected[id] {
                    labels[e.point] = Some(id);
                    break;
                }
                c = self.clusters[id].parent;
            }
        }
        labels
    }
}

/// Full intermediate state of one HDBSCAN run.
#[derive(Debug, Clone, PartialEq)]
pub struct HdbscanRun {
    pub core: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub tree: CondensedTree,
    pub selected: Vec<bool>,
    pub labels: Vec<Option<usize>>,
}

/// Runs HDBSCAN and returns one label per point: `Some(cluster)` with clusters
/// numbered `0..` by their lowest member index, or `None` for noise.
pub fn hdbscan(points: &[Vec3], params: &HdbscanParams) -> Vec<Option<usize>> {
    hdbscan_run(points, params).labels
}

pub fn hdbscan_run(points: &[Vec3], params: &HdbscanParams) -> HdbscanRun {
    let n = points.len();
    let mcs = params.min_cluster_size.max(2);
    if n < mcs {
        return HdbscanRun {
            core: Vec::new(),
            mst: Vec::new(),
            tree: CondensedTree { clusters: Vec::new(), exits: Vec::new() },
            selected: Vec::new(),
            labels: vec![None; n],
        };
    }
    let core = core_distances(points, params.min_samples.max(1), params.knn_cell);
    let mst = mutual_reachability_mst(points, &core);
    let merges = single_linkage(n, &mst);
    let tree = CondensedTree::build(n, &merges, mcs);
    let selected = tree.select_eom(params.allow_single_cluster);
    let raw = tree.label_points(n, &selected);
    // renumber by first appearance
    let mut map = vec![usize::MAX; tree.clusters.len()];
    let mut next = 0;
    let labels = raw
        .iter()
        .map(|l| {
            l.map(|id| {
                if map[id] == usize::MAX {
                    map[id] = next;
                    next += 1;
                }
                map[id]
            })
        })
        .collect();
    HdbscanRun { core, mst, tree, selected, labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![[1.0, 2.0, 3.0]; 5];
        for mcs in 2..=5 {
            let params = HdbscanParams { min_cluster_size: mcs, min_samples: 2, ..Default::default() };
            let labels = hdbscan(&pts, &params);
            assert!(labels.iter().all(|l| *l == Some(0)), "mcs={mcs}: {labels:?}");
        }
    }

    #[test]
    fn too_few_points_is_all_noise() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        let labels = hdbscan(&pts, &HdbscanParams::default());
        assert_eq!(labels, vec![None, None]);
    }

    #[test]
    fn root_blocked_without_children_is_noise() {
        let pts = vec![[0.0; 3]; 6];
        let params = HdbscanParams { min_cluster_size: 6, min_samples: 2, allow_single_cluster: false, ..Default::default() };
        assert!(hdbscan(&pts, &params).iter().all(Option::is_none));
    }

    #[test]
    fn line_of_points_mst_weights() {
        // points at x = 0,1,3,6 with min_samples 1: mrd = euclidean
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [6.0, 0.0, 0.0]];
        let core = core_distances(&pts, 1, 1.0);
        let mut w: Vec<f64> = mutual_reachability_mst(&pts, &core).iter().map(|e| e.weight).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn stability_of_hand_built_tree() {
        // Two pairs {0,1} and {2,3}, each at distance 1, joined across a 9 m gap.
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0], [11.0, 0.0, 0.0]];
        let core = core_distances(&pts, 1, 1.0);
        let mst = mutual_reachability_mst(&pts, &core);
        let merges = single_linkage(4, &mst);
        let tree = CondensedTree::build(4, &merges, 2);
        assert_eq!(tree.clusters.len(), 3);
        let stab = tree.stabilities();
        // root: two children born at λ = 1/9, each of size 2
        assert!((stab[0] - 4.0 / 9.0).abs() < 1e-12);
        // children: both points leave at λ = 1
        assert!((stab[1] - 2.0 * (1.0 - 1.0 / 9.0)).abs() < 1e-12);
        assert!((stab[2] - 2.0 * (1.0 - 1.0 / 9.0)).abs() < 1e-12);
        let sel = tree.select_eom(true);
        assert_eq!(sel, vec![false, true, true]);
    }
}

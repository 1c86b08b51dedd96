//! HDBSCAN with excess-of-mass cluster selection.
//!
//! The pipeline follows the reference Python implementation step by step:
//! core distances, mutual reachability, a minimum spanning tree, the
//! single-linkage dendrogram, condensation by `min_cluster_size`, stability
//! and the excess-of-mass selection. Node numbering of the condensed tree
//! matches the reference as well (points `0..n`, the root is `n`, clusters
//! are numbered in breadth-first order of the dendrogram).

use std::collections::BTreeMap;

use super::distance::{prim_mst, DistanceMatrix};
use super::{validate_points, ClusterError, ClusterParams, Clustering, CondensedEdge};

/// Fits HDBSCAN on raw points.
pub fn fit_hdbscan<P: AsRef<[f32]> + Sync>(
    points: &[P],
    params: &ClusterParams,
) -> Result<Clustering, ClusterError> {
    validate_points(points)?;
    params.validate()?;
    if points.len() < params.min_samples {
        return Err(ClusterError::TooFewPoints {
            points: points.len(),
            min_samples: params.min_samples,
        });
    }
    let distances = DistanceMatrix::euclidean(points);
    Ok(fit_with_distances(&distances, params))
}

/// Distance to the `k`-th nearest other point, with `k = min(min_samples, n - 1)`.
pub fn core_distances(distances: &DistanceMatrix, min_samples: usize) -> Vec<f64> {
    let n = distances.len();
    let k = min_samples.min(n.saturating_sub(1));
    if k == 0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = distances
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .collect();
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

#[inline]
pub fn mutual_reachability(core: &[f64], distances: &DistanceMatrix, a: usize, b: usize) -> f64 {
    distances.get(a, b).max(core[a]).max(core[b])
}

/// One merge of the single-linkage dendrogram, scipy layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Minimum spanning tree of the mutual reachability graph.
pub fn mutual_reachability_mst(distances: &DistanceMatrix, min_samples: usize) -> Vec<(usize, usize, f64)> {
    let core = core_distances(distances, min_samples);
    prim_mst(distances.len(), |a, b| mutual_reachability(&core, distances, a, b))
}

pub fn single_linkage(n: usize, mst: &[(usize, usize, f64)]) -> Vec<Merge> {
    let mut edges = mst.to_vec();
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for (next, (a, b, w)) in (n..).zip(edges) {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let merged = size[ra] + size[rb];
        out.push(Merge {
            left: ra,
            right: rb,
            distance: w,
            size: merged,
        });
        parent[ra] = next;
        parent[rb] = next;
        size[next] = merged;
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    while parent[x] != root {
        let up = parent[x];
        parent[x] = root;
        x = up;
    }
    root
}

fn bfs(hierarchy: &[Merge], n: usize, root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut level = vec![root];
    while !level.is_empty() {
        out.extend_from_slice(&level);
        let mut next = Vec::new();
        for &x in &level {
            if x >= n {
                let m = hierarchy[x - n];
                next.push(m.left);
                next.push(m.right);
            }
        }
        level = next;
    }
    out
}

fn merge_size(hierarchy: &[Merge], n: usize, node: usize) -> usize {
    if node >= n {
        hierarchy[node - n].size
    } else {
        1
    }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// Condenses the dendrogram: splits that leave both sides with at least
/// `min_cluster_size` points create new clusters, otherwise the small side
/// falls out of its parent as individual points.
pub fn condense(hierarchy: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    let n = hierarchy.len() + 1;
    let root = 2 * hierarchy.len();
    let order = bfs(hierarchy, n, root);
    let mut relabel = vec![0usize; root + 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut ignore = vec![false; root + 1];
    let mut out = Vec::new();

    let fall_out = |out: &mut Vec<CondensedEdge>, ignore: &mut [bool], parent: usize, sub: usize, lambda: f64| {
        for x in bfs(hierarchy, n, sub) {
            if x < n {
                out.push(CondensedEdge {
                    parent,
                    child: x,
                    lambda,
                    child_size: 1,
                });
            }
            ignore[x] = true;
        }
    };

    for node in order {
        if ignore[node] || node < n {
            continue;
        }
        let m = hierarchy[node - n];
        let lambda = lambda_of(m.distance);
        let left_count = merge_size(hierarchy, n, m.left);
        let right_count = merge_size(hierarchy, n, m.right);
        let parent = relabel[node];
        let big_left = left_count >= min_cluster_size;
        let big_right = right_count >= min_cluster_size;
        match (big_left, big_right) {
            (true, true) => {
                relabel[m.left] = next_label;
                next_label += 1;
                out.push(CondensedEdge {
                    parent,
                    child: relabel[m.left],
                    lambda,
                    child_size: left_count,
                });
                relabel[m.right] = next_label;
                next_label += 1;
                out.push(CondensedEdge {
                    parent,
                    child: relabel[m.right],
                    lambda,
                    child_size: right_count,
                });
            }
            (false, false) => {
                fall_out(&mut out, &mut ignore, parent, m.left, lambda);
                fall_out(&mut out, &mut ignore, parent, m.right, lambda);
            }
            (false, true) => {
                relabel[m.right] = parent;
                fall_out(&mut out, &mut ignore, parent, m.left, lambda);
            }
            (true, false) => {
                relabel[m.left] = parent;
                fall_out(&mut out, &mut ignore, parent, m.right, lambda);
            }
        }
    }
    out
}

/// Stability of every condensed cluster node:
/// `sum over children of (lambda_child - lambda_birth) * child_size`.
pub fn stabilities(tree: &[CondensedEdge], n_points: usize) -> BTreeMap<usize, f64> {
    let mut births: BTreeMap<usize, f64> = BTreeMap::new();
    births.insert(n_points, 0.0);
    for e in tree {
        if e.child >= n_points {
            births.insert(e.child, e.lambda);
        }
    }
    let mut out: BTreeMap<usize, f64> = births.keys().map(|&c| (c, 0.0)).collect();
    for e in tree {
        let birth = births[&e.parent];
        // An infinite split level would give inf - inf; a child born where its
        // parent was born contributes nothing.
        let span = if e.lambda == birth { 0.0 } else { e.lambda - birth };
        *out.get_mut(&e.parent).expect("parent is a cluster") += span * e.child_size as f64;
    }
    out
}

/// Excess-of-mass selection. Returns the selected condensed cluster nodes.
pub fn select_excess_of_mass(
    tree: &[CondensedEdge],
    n_points: usize,
    allow_single_cluster: bool,
) -> Vec<usize> {
    let mut stability = stabilities(tree, n_points);
    let mut nodes: Vec<usize> = stability.keys().copied().collect();
    nodes.sort_unstable_by(|a, b| b.cmp(a));
    if !allow_single_cluster {
        nodes.retain(|&c| c != n_points);
    }
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in tree.iter().filter(|e| e.child_size > 1) {
        children.entry(e.parent).or_default().push(e.child);
    }
    let mut is_cluster: BTreeMap<usize, bool> = nodes.iter().map(|&c| (c, true)).collect();
    for &node in &nodes {
        let kids = children.get(&node).map(Vec::as_slice).unwrap_or(&[]);
        let subtree: f64 = kids.iter().map(|k| stability[k]).sum();
        if subtree > stability[&node] {
            is_cluster.insert(node, false);
            stability.insert(node, subtree);
        } else {
            let mut stack: Vec<usize> = kids.to_vec();
            while let Some(sub) = stack.pop() {
                is_cluster.insert(sub, false);
                if let Some(more) = children.get(&sub) {
                    stack.extend_from_slice(more);
                }
            }
        }
    }
    is_cluster
        .into_iter()
        .filter(|&(_, keep)| keep)
        .map(|(c, _)| c)
        .collect()
}

/// Assigns each point to its nearest selected ancestor. When the root is the
/// only selected cluster, only points that persist until the root's last
/// split are kept, as in the reference implementation.
pub fn label_points(tree: &[CondensedEdge], n_points: usize, selected: &[usize]) -> Vec<Option<u32>> {
    let root = n_points;
    let mut cluster_parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut point_edge: Vec<Option<(usize, f64)>> = vec![None; n_points];
    let mut root_max_lambda = f64::NEG_INFINITY;
    for e in tree {
        if e.child < n_points {
            point_edge[e.child] = Some((e.parent, e.lambda));
        } else {
            cluster_parent.insert(e.child, e.parent);
        }
        if e.parent == root {
            root_max_lambda = root_max_lambda.max(e.lambda);
        }
    }
    let label_of: BTreeMap<usize, u32> = selected
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as u32 + 1))
        .collect();
    let single_root = selected == [root];

    (0..n_points)
        .map(|p| {
            let (mut node, lambda) = point_edge[p]?;
            loop {
                if let Some(&label) = label_of.get(&node) {
                    if node == root {
                        return (single_root && lambda >= root_max_lambda).then_some(label);
                    }
                    return Some(label);
                }
                node = *cluster_parent.get(&node)?;
            }
        })
        .collect()
}

pub fn fit_with_distances(distances: &DistanceMatrix, params: &ClusterParams) -> Clustering {
    let n = distances.len();
    let mst = mutual_reachability_mst(distances, params.min_samples);
    let hierarchy = single_linkage(n, &mst);
    let tree = condense(&hierarchy, params.min_cluster_size);
    let selected = select_excess_of_mass(&tree, n, params.allow_single_cluster);
    let labels = label_points(&tree, n, &selected);
    let all = stabilities(&tree, n);
    let stabilities = selected
        .iter()
        .enumerate()
        .map(|(i, c)| (i as u32 + 1, all[c]))
        .collect();
    Clustering {
        labels,
        n_clusters: selected.len(),
        condensed_tree: tree,
        stabilities,
        cluster_nodes: selected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mcs: usize, ms: usize, single: bool) -> ClusterParams {
        ClusterParams {
            min_cluster_size: mcs,
            min_samples: ms,
            allow_single_cluster: single,
            ..ClusterParams::default()
        }
    }

    #[test]
    fn two_triplets_far_apart() {
        let pts: Vec<Vec<f32>> = vec![
            vec![0.0, 0.0],
            vec![0.5, 0.0],
            vec![0.0, 0.7],
            vec![100.0, 0.0],
            vec![100.6, 0.0],
            vec![100.0, 0.4],
        ];
        for single in [false, true] {
            let c = fit_hdbscan(&pts, &params(2, 2, single)).unwrap();
            assert_eq!(c.n_clusters, 2);
            assert!(c.labels.iter().all(Option::is_some));
            assert_eq!(c.labels[0], c.labels[1]);
            assert_eq!(c.labels[0], c.labels[2]);
            assert_eq!(c.labels[3], c.labels[5]);
            assert_ne!(c.labels[0], c.labels[3]);
        }
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![1.0f32, 2.0]; 8];
        let c = fit_hdbscan(&pts, &params(2, 2, true)).unwrap();
        assert_eq!(c.n_clusters, 1);
        assert!(c.labels.iter().all(|l| *l == Some(1)));
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0f32], vec![1.0]];
        assert!(matches!(
            fit_hdbscan(&pts, &params(2, 5, false)),
            Err(ClusterError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let pts = vec![vec![0.0f32], vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            fit_hdbscan(&pts, &params(2, 2, false)),
            Err(ClusterError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn core_distance_excludes_self() {
        let pts: Vec<Vec<f32>> = [0.0f32, 1.0, 3.0].iter().map(|&x| vec![x]).collect();
        let d = DistanceMatrix::euclidean(&pts);
        assert_eq!(core_distances(&d, 1), vec![1.0, 1.0, 2.0]);
        assert_eq!(core_distances(&d, 2), vec![3.0, 2.0, 3.0]);
    }
}

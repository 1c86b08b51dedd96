//! Density-based cluster validity (DBCV).
//!
//! For a cluster `C` of `n_C` points in `D` dimensions the all-points core
//! distance of `o` is
//!
//! ```text
//! core(o) = ( sum_{x in C, x != o} (1 / d(o, x))^D / (n_C - 1) )^(-1/D)
//! ```
//!
//! Mutual reachability uses these core distances. A cluster's density
//! sparseness is the largest edge of its mutual-reachability MST between
//! internal vertices (degree > 1); the density separation of two clusters
//! is the smallest mutual reachability between their internal vertices.
//! The score is the size-weighted mean over clusters of
//! `(sep - sparse) / max(sep, sparse)`, with noise counted in the total.

use super::distance::{prim_mst, DistanceMatrix};

/// DBCV in `[-1, 1]`. Fewer than two clusters gives 0 by convention.
pub fn dbcv_score<P: AsRef<[f32]> + Sync>(points: &[P], labels: &[Option<u32>]) -> f64 {
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    let distances = DistanceMatrix::euclidean(points);
    dbcv_with_distances(&distances, dim, labels)
}

struct ClusterSummary {
    members: Vec<usize>,
    core: Vec<f64>,
    internal: Vec<usize>,
    sparseness: f64,
}

pub fn dbcv_with_distances(distances: &DistanceMatrix, dim: usize, labels: &[Option<u32>]) -> f64 {
    assert_eq!(distances.len(), labels.len(), "one label per point");
    let n_total = labels.len();
    let max_label = labels.iter().flatten().copied().max().unwrap_or(0) as usize;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); max_label + 1];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            members[*l as usize].push(i);
        }
    }
    let clusters: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    if clusters.len() < 2 || n_total == 0 {
        return 0.0;
    }
    let dim = dim.max(1) as f64;

    let summaries: Vec<ClusterSummary> = clusters
        .into_iter()
        .map(|members| summarize(distances, dim, members))
        .collect();

    let mut score = 0.0;
    for (i, ci) in summaries.iter().enumerate() {
        if ci.members.len() < 2 {
            // A singleton has no density; it contributes a neutral 0.
            continue;
        }
        let separation = summaries
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, cj)| separation(distances, ci, cj))
            .fold(f64::INFINITY, f64::min);
        let denom = separation.max(ci.sparseness);
        let validity = if denom > 0.0 {
            (separation - ci.sparseness) / denom
        } else {
            0.0
        };
        score += ci.members.len() as f64 / n_total as f64 * validity;
    }
    score
}

fn summarize(distances: &DistanceMatrix, dim: f64, members: Vec<usize>) -> ClusterSummary {
    let m = members.len();
    let core: Vec<f64> = members
        .iter()
        .map(|&o| all_points_core_distance(distances, dim, o, &members))
        .collect();
    if m < 2 {
        return ClusterSummary {
            internal: members.clone(),
            members,
            core,
            sparseness: 0.0,
        };
    }
    let mr = |a: usize, b: usize| distances.get(members[a], members[b]).max(core[a]).max(core[b]);
    let mst = prim_mst(m, mr);
    let mut degree = vec![0usize; m];
    for &(a, b, _) in &mst {
        degree[a] += 1;
        degree[b] += 1;
    }
    let internal_local: Vec<usize> = (0..m).filter(|&i| degree[i] > 1).collect();
    let internal_edges: Vec<f64> = mst
        .iter()
        .filter(|&&(a, b, _)| degree[a] > 1 && degree[b] > 1)
        .map(|e| e.2)
        .collect();
    // Without internal edges the largest edge of the whole tree is used.
    let sparseness = if internal_edges.is_empty() {
        mst.iter().map(|e| e.2).fold(0.0, f64::max)
    } else {
        internal_edges.into_iter().fold(0.0, f64::max)
    };
    let internal = if internal_local.is_empty() {
        (0..m).collect()
    } else {
        internal_local
    };
    ClusterSummary {
        members,
        core,
        internal,
        sparseness,
    }
}

/// Computed in log space: `(1/d)^D` overflows for realistic `D`.
fn all_points_core_distance(distances: &DistanceMatrix, dim: f64, o: usize, members: &[usize]) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let mut terms = Vec::with_capacity(members.len() - 1);
    for &x in members {
        if x == o {
            continue;
        }
        let d = distances.get(o, x);
        if d == 0.0 {
            return 0.0;
        }
        terms.push(-dim * d.ln());
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    let log_mean = log_sum - ((members.len() - 1) as f64).ln();
    (-log_mean / dim).exp()
}

fn separation(distances: &DistanceMatrix, a: &ClusterSummary, b: &ClusterSummary) -> f64 {
    let mut best = f64::INFINITY;
    for &i in &a.internal {
        for &j in &b.internal {
            let d = distances
                .get(a.members[i], b.members[j])
                .max(a.core[i])
                .max(b.core[j]);
            best = best.min(d);
        }
    }
    best
}

//! Per-block clustering: HDBSCAN, DBCV-driven grid search and a k-means
//! baseline.

pub mod dbcv;
pub mod distance;
pub mod hdbscan;
pub mod kmeans;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dbcv::dbcv_score;
pub use distance::DistanceMatrix;
pub use hdbscan::fit_hdbscan;
pub use kmeans::fit_kmeans;

/// Grid over both `min_cluster_size` and `min_samples`.
pub const DEFAULT_GRID: [usize; 9] = [5, 10, 15, 20, 25, 30, 50, 80, 100];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least {min_samples} points, got {points}")]
    TooFewPoints { points: usize, min_samples: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
    #[error("cannot form {k} clusters from {points} points")]
    TooManyClusters { k: usize, points: usize },
    #[error("empty parameter grid")]
    EmptyGrid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSelection {
    #[default]
    ExcessOfMass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub allow_single_cluster: bool,
    pub selection: ClusterSelection,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_cluster_size: 5,
            min_samples: 5,
            allow_single_cluster: true,
            selection: ClusterSelection::ExcessOfMass,
        }
    }
}

impl ClusterParams {
    pub fn new(min_cluster_size: usize, min_samples: usize) -> Self {
        ClusterParams {
            min_cluster_size,
            min_samples,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_cluster_size < 2 || self.min_samples < 2 {
            return Err(ClusterError::InvalidParams(format!(
                "min_cluster_size and min_samples must be >= 2, got {} and {}",
                self.min_cluster_size, self.min_samples
            )));
        }
        Ok(())
    }
}

/// Edge of the condensed cluster tree. Children below `n_points` are points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

/// Result of a clustering fit. Cluster ids run from 1 to `n_clusters`;
/// `None` marks noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub labels: Vec<Option<u32>>,
    pub n_clusters: usize,
    pub condensed_tree: Vec<CondensedEdge>,
    /// Stability of each selected cluster, keyed by cluster id.
    pub stabilities: BTreeMap<u32, f64>,
    /// Condensed-tree node of each cluster id (index `id - 1`).
    pub cluster_nodes: Vec<usize>,
}

impl Clustering {
    /// Member indices per cluster id, index `id - 1`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out[*l as usize - 1].push(i);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

pub(crate) fn validate_points<P: AsRef<[f32]>>(points: &[P]) -> Result<(), ClusterError> {
    if points.len() < 2 {
        return Err(ClusterError::TooFewPoints {
            points: points.len(),
            min_samples: 2,
        });
    }
    let dim = points[0].as_ref().len();
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite { index });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub params: ClusterParams,
    /// `None` when the fit itself failed (e.g. too few points).
    pub dbcv: Option<f64>,
    pub n_clusters: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    pub scored: Vec<GridCell>,
    pub best: ClusterParams,
    pub best_clustering: Option<Clustering>,
    /// Set when no cell produced two or more clusters.
    pub degenerate: bool,
}

/// Scores every `(min_cluster_size, min_samples)` pair of `grid` by the DBCV
/// of its own labels and returns the maximizer. Ties go to the smaller
/// `min_cluster_size`, then the smaller `min_samples`.
pub fn grid_search<P: AsRef<[f32]> + Sync>(
    points: &[P],
    grid: &[usize],
    allow_single_cluster: bool,
) -> Result<GridSearchResult, ClusterError> {
    if grid.is_empty() {
        return Err(ClusterError::EmptyGrid);
    }
    validate_points(points)?;
    let dim = points[0].as_ref().len();
    let distances = DistanceMatrix::euclidean(points);
    let cells: Vec<ClusterParams> = grid
        .iter()
        .flat_map(|&mcs| {
            grid.iter().map(move |&ms| ClusterParams {
                min_cluster_size: mcs,
                min_samples: ms,
                allow_single_cluster,
                selection: ClusterSelection::ExcessOfMass,
            })
        })
        .collect();
    for c in &cells {
        c.validate()?;
    }

    let fits: Vec<(GridCell, Option<Clustering>)> = cells
        .into_par_iter()
        .map(|params| {
            if points.len() < params.min_samples {
                return (
                    GridCell {
                        params,
                        dbcv: None,
                        n_clusters: 0,
                    },
                    None,
                );
            }
            let clustering = hdbscan::fit_with_distances(&distances, &params);
            let score = dbcv::dbcv_with_distances(&distances, dim, &clustering.labels);
            (
                GridCell {
                    params,
                    dbcv: Some(score),
                    n_clusters: clustering.n_clusters,
                },
                Some(clustering),
            )
        })
        .collect();

    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by_key(|&i| {
        let p = &fits[i].0.params;
        (p.min_cluster_size, p.min_samples)
    });
    let degenerate = fits.iter().all(|(c, _)| c.dbcv.is_none() || c.n_clusters < 2);
    let mut best_idx = None;
    if !degenerate {
        for &i in &order {
            if let Some(s) = fits[i].0.dbcv {
                match best_idx {
                    None => best_idx = Some(i),
                    Some(b) if s > fits[b].0.dbcv.expect("scored") => best_idx = Some(i),
                    _ => {}
                }
            }
        }
    }
    let best_idx = best_idx.unwrap_or(0);
    let best = fits[best_idx].0.params.clone();
    let best_clustering = fits[best_idx].1.clone();
    Ok(GridSearchResult {
        scored: fits.into_iter().map(|(c, _)| c).collect(),
        best,
        best_clustering,
        degenerate,
    })
}

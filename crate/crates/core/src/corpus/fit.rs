use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distill, BlockFit, CorpusError, RetrievalCorpus, DEFAULT_EXEMPLARS};
use crate::clustering::{
    self, fit_kmeans, ClusterError, ClusterParams, Clustering, DistanceMatrix, DEFAULT_GRID,
};
use crate::encoding::{select_object_slots, BlockSlotEncoding, SlotSelection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClusterMethod {
    /// HDBSCAN with parameters picked per block by DBCV grid search.
    HdbscanGrid {
        grid: Vec<usize>,
        allow_single_cluster: bool,
    },
    /// HDBSCAN with fixed parameters for every block.
    Hdbscan { params: ClusterParams },
    Kmeans { k: usize, seed: u64 },
}

impl Default for ClusterMethod {
    fn default() -> Self {
        ClusterMethod::HdbscanGrid {
            grid: DEFAULT_GRID.to_vec(),
            allow_single_cluster: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub slot_mode: SlotSelection,
    pub method: ClusterMethod,
    pub exemplars_per_cluster: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            slot_mode: SlotSelection::MaxOne,
            method: ClusterMethod::default(),
            exemplars_per_cluster: DEFAULT_EXEMPLARS,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("no object slots selected from {scenes} scenes")]
    NoObjects { scenes: usize },
    #[error("scenes disagree on shape")]
    ShapeMismatch,
    #[error("block {block}: {source}")]
    Cluster {
        block: usize,
        #[source]
        source: ClusterError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub corpus: RetrievalCorpus,
    pub clusterings: Vec<Clustering>,
    pub n_points: usize,
}

/// Collects the object-slot vectors of every block: `result[j][i]` is block
/// `j` of the `i`-th selected slot.
pub fn gather_block_points(
    scenes: &[&BlockSlotEncoding],
    slot_mode: SlotSelection,
) -> Result<Vec<Vec<Vec<f32>>>, FitError> {
    let Some(first) = scenes.first() else {
        return Err(FitError::NoObjects { scenes: 0 });
    };
    let (n_blocks, dim) = (first.n_blocks(), first.block_dim());
    let mut out = vec![Vec::new(); n_blocks];
    for scene in scenes {
        if scene.n_blocks() != n_blocks || scene.block_dim() != dim {
            return Err(FitError::ShapeMismatch);
        }
        for slot in select_object_slots(scene, slot_mode) {
            for (j, points) in out.iter_mut().enumerate() {
                points.push(scene.block(slot, j).to_vec());
            }
        }
    }
    if out[0].is_empty() {
        return Err(FitError::NoObjects {
            scenes: scenes.len(),
        });
    }
    Ok(out)
}

/// Gathers object slots, clusters every block and distills the corpus.
/// Blocks whose clustering found nothing are stored as uninformative.
pub fn fit_corpus(scenes: &[&BlockSlotEncoding], config: &FitConfig) -> Result<FitReport, FitError> {
    let points = gather_block_points(scenes, config.slot_mode)?;
    let n_points = points[0].len();

    let fitted: Vec<(Clustering, BlockFit)> = points
        .par_iter()
        .enumerate()
        .map(|(block, pts)| fit_block(pts, &config.method).map_err(|source| FitError::Cluster { block, source }))
        .collect::<Result<_, _>>()?;
    let (clusterings, fits): (Vec<Clustering>, Vec<BlockFit>) = fitted.into_iter().unzip();

    let mut corpus = distill(&clusterings, &points, config.exemplars_per_cluster)?;
    for block in &mut corpus.blocks {
        if block.empty_fit {
            block.deleted_to_single = true;
        }
    }
    corpus.provenance.block_fits = fits;
    corpus.validate()?;
    Ok(FitReport {
        corpus,
        clusterings,
        n_points,
    })
}

fn fit_block(points: &[Vec<f32>], method: &ClusterMethod) -> Result<(Clustering, BlockFit), ClusterError> {
    match method {
        ClusterMethod::HdbscanGrid {
            grid,
            allow_single_cluster,
        } => {
            let result = clustering::grid_search(points, grid, *allow_single_cluster)?;
            let best_score = result
                .scored
                .iter()
                .find(|c| c.params == result.best)
                .and_then(|c| c.dbcv);
            let clustering = match result.best_clustering {
                Some(c) => c,
                None => {
                    let mut params = result.best.clone();
                    params.min_samples = params.min_samples.min(points.len());
                    let d = DistanceMatrix::euclidean(points);
                    clustering::hdbscan::fit_with_distances(&d, &params)
                }
            };
            let fit = BlockFit::Hdbscan {
                params: result.best,
                n_clusters: clustering.n_clusters,
                noise: clustering.noise_count(),
                dbcv: best_score,
            };
            Ok((clustering, fit))
        }
        ClusterMethod::Hdbscan { params } => {
            let clustering = clustering::fit_hdbscan(points, params)?;
            let fit = BlockFit::Hdbscan {
                params: params.clone(),
                n_clusters: clustering.n_clusters,
                noise: clustering.noise_count(),
                dbcv: None,
            };
            Ok((clustering, fit))
        }
        ClusterMethod::Kmeans { k, seed } => {
            let clustering = fit_kmeans(points, *k, *seed)?;
            Ok((clustering, BlockFit::Kmeans { k: *k, seed: *seed }))
        }
    }
}

use rand::Rng;

use super::distance::euclidean;
use super::{validate_points, ClusterError, Clustering};
use crate::seed;

pub const MAX_ITERATIONS: usize = 300;
pub const TOLERANCE: f64 = 1e-4;

/// Lloyd's algorithm from k-means++ seeding. Stops after [`MAX_ITERATIONS`]
/// or once no centroid moves further than [`TOLERANCE`]. Labels are `1..=k`.
pub fn fit_kmeans<P: AsRef<[f32]> + Sync>(
    points: &[P],
    k: usize,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    validate_points(points)?;
    if k == 0 || k > points.len() {
        return Err(ClusterError::TooManyClusters {
            k,
            points: points.len(),
        });
    }
    let dim = points[0].as_ref().len();
    let mut rng = seed::stream(seed, 0x4B4D_45414E53);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut assignment = vec![0usize; points.len()];

    for _ in 0..MAX_ITERATIONS {
        for (i, p) in points.iter().enumerate() {
            assignment[i] = nearest(&centroids, p.as_ref());
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(p.as_ref()) {
                *s += v as f64;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let next: Vec<f64> = if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its centroid.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = dist64(&centroids[assignment[a]], points[a].as_ref());
                        let db = dist64(&centroids[assignment[b]], points[b].as_ref());
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("nonempty");
                points[far].as_ref().iter().map(|&v| v as f64).collect()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift = shift.max(
                next.iter()
                    .zip(&centroids[c])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            );
            centroids[c] = next;
        }
        if shift <= TOLERANCE {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        assignment[i] = nearest(&centroids, p.as_ref());
    }
    Ok(Clustering {
        labels: assignment.iter().map(|&c| Some(c as u32 + 1)).collect(),
        n_clusters: k,
        condensed_tree: Vec::new(),
        stabilities: Default::default(),
        cluster_nodes: Vec::new(),
    })
}

fn dist64(c: &[f64], p: &[f32]) -> f64 {
    c.iter()
        .zip(p)
        .map(|(&a, &b)| (a - b as f64) * (a - b as f64))
        .sum::<f64>()
}

fn nearest(centroids: &[Vec<f64>], p: &[f32]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist64(centroid, p);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

fn plus_plus<P: AsRef<[f32]>, R: Rng>(points: &[P], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let to64 = |p: &P| p.as_ref().iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![to64(&points[first])];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| euclidean(p.as_ref(), points[first].as_ref()).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = to64(&points[pick]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist64(&c, p.as_ref()));
        }
        centroids.push(c);
    }
    centroids
}

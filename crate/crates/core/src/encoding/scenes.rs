//! Random scene collections for fitting and evaluation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CategoryKind, EncodingError, FactorSchema, GroundTruthObject, LabeledScene, SyntheticEncoder};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub count: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub seed: u64,
}

impl SceneSpec {
    /// `count` scenes with exactly one object each.
    pub fn single_object(count: usize, seed: u64) -> Self {
        SceneSpec {
            count,
            min_objects: 1,
            max_objects: 1,
            seed,
        }
    }
}

/// Draws every categorical factor uniformly and positions uniformly in the
/// unit square.
pub fn random_object<R: Rng>(schema: &FactorSchema, rng: &mut R) -> GroundTruthObject {
    let mut o = GroundTruthObject::new();
    for c in schema.categories() {
        o = match &c.kind {
            CategoryKind::Categorical { values } => {
                let v = &values[rng.random_range(0..values.len())];
                o.with(&c.name, v)
            }
            CategoryKind::Position => o.with_position(&c.name, rng.random(), rng.random()),
        };
    }
    o
}

/// Scene `i` depends only on the spec seed and `i`, so collections are
/// prefix-stable in `count`.
pub fn generate_scenes(encoder: &SyntheticEncoder, spec: &SceneSpec) -> Result<Vec<LabeledScene>, EncodingError> {
    let slots = encoder.config().n_slots;
    if spec.min_objects > spec.max_objects || spec.max_objects > slots {
        return Err(EncodingError::TooManyObjects {
            objects: spec.max_objects.max(spec.min_objects),
            slots,
        });
    }
    (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(spec.seed, seed::mix(0x5CE4E5, i as u64));
            let n = rng.random_range(spec.min_objects..=spec.max_objects);
            let objects: Vec<_> = (0..n).map(|_| random_object(encoder.schema(), &mut rng)).collect();
            encoder.encode_scene(&objects, seed::mix(spec.seed, i as u64))
        })
        .collect()
}

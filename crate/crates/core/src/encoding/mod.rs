//! Block-slot encodings and the synthetic soft binder.
//!
//! A [`BlockSlotEncoding`] holds one continuous vector per (slot, block) pair
//! plus a scalar attention value per slot. Real encodings come from a trained
//! object-centric encoder; here a [`SyntheticEncoder`] produces them from
//! ground-truth object factors so that every downstream claim can be checked
//! against known labels.
//!
//! Each categorical factor is assigned to one block. Within that block every
//! factor value owns `duplicate_clusters_per_value` Gaussian centroids, and
//! an object's block vector is one of its value's centroids plus isotropic
//! noise of scale `cluster_spread`. Blocks that no factor maps to are
//! distractors drawn from a single shared Gaussian.

pub mod io;
mod scenes;

pub use scenes::{generate_scenes, random_object, SceneSpec};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;

/// Per-coordinate standard deviation of distractor blocks.
pub const DISTRACTOR_SPREAD: f64 = 1.0;
/// Per-coordinate standard deviation of background (non-object) slots.
pub const BACKGROUND_SPREAD: f64 = 3.0;
/// Length of each axis of the linear position embedding.
pub const POSITION_SCALE: f64 = 4.0;
/// Minimum centroid separation in units of `cluster_spread`.
pub const CENTROID_SEPARATION: f64 = 10.0;

/// Smallest distance of duplicate centroids from their value's anchor, per
/// square root of the block dimension.
pub const DUPLICATE_OFFSET: f64 = 0.1;
/// Duplicate offset per square root of `cluster_spread` and of the block
/// dimension. Keeps duplicates far enough apart to be found as separate
/// clusters at nonzero spread.
pub const DUPLICATE_NOISE_OFFSET: f64 = 2.0;
/// Anchors of duplicated values are spread this much wider than plain
/// centroids, so siblings stay each other's nearest neighbors.
pub const ANCHOR_SCALE: f64 = 2.0;

const MAX_PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EncodingError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("factor_to_block maps more than one category to block {block}")]
    NonInjectiveMapping { block: usize },
    #[error("could not place well-separated centroids for category `{category}`")]
    CentroidPlacement { category: String },
    #[error("{objects} objects do not fit into {slots} slots")]
    TooManyObjects { objects: usize, slots: usize },
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("slot threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f32),
}

/// One factor of variation of the objects in a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    #[serde(flatten)]
    pub kind: CategoryKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CategoryKind {
    Categorical { values: Vec<String> },
    /// Continuous (x, y) in the unit square.
    Position,
}

impl Category {
    pub fn categorical(name: &str, values: &[&str]) -> Self {
        Category {
            name: name.to_owned(),
            kind: CategoryKind::Categorical {
                values: values.iter().map(|v| (*v).to_owned()).collect(),
            },
        }
    }

    pub fn position(name: &str) -> Self {
        Category {
            name: name.to_owned(),
            kind: CategoryKind::Position,
        }
    }

    pub fn values(&self) -> Option<&[String]> {
        match &self.kind {
            CategoryKind::Categorical { values } => Some(values),
            CategoryKind::Position => None,
        }
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values()?.iter().position(|v| v == label)
    }
}

/// Ordered list of object factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Category>", into = "Vec<Category>")]
pub struct FactorSchema {
    categories: Vec<Category>,
}

impl TryFrom<Vec<Category>> for FactorSchema {
    type Error = EncodingError;

    fn try_from(categories: Vec<Category>) -> Result<Self, Self::Error> {
        FactorSchema::new(categories)
    }
}

impl From<FactorSchema> for Vec<Category> {
    fn from(schema: FactorSchema) -> Self {
        schema.categories
    }
}

impl FactorSchema {
    pub fn new(categories: Vec<Category>) -> Result<Self, EncodingError> {
        if categories.is_empty() {
            return Err(EncodingError::InvalidSchema("no categories".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &categories {
            if !seen.insert(c.name.as_str()) {
                return Err(EncodingError::InvalidSchema(format!(
                    "duplicate category `{}`",
                    c.name
                )));
            }
            if let CategoryKind::Categorical { values } = &c.kind {
                if values.is_empty() {
                    return Err(EncodingError::InvalidSchema(format!(
                        "category `{}` has no values",
                        c.name
                    )));
                }
                let distinct: BTreeSet<_> = values.iter().collect();
                if distinct.len() != values.len() {
                    return Err(EncodingError::InvalidSchema(format!(
                        "category `{}` repeats a value",
                        c.name
                    )));
                }
            }
        }
        Ok(FactorSchema { categories })
    }

    /// Three shapes, eight colors, two sizes, two materials and a position.
    pub fn clevr() -> Self {
        FactorSchema {
            categories: vec![
                Category::categorical("shape", &["cube", "sphere", "cylinder"]),
                Category::categorical(
                    "color",
                    &["gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"],
                ),
                Category::categorical("size", &["small", "large"]),
                Category::categorical("material", &["rubber", "metal"]),
                Category::position("position"),
            ],
        }
    }

    /// Like [`FactorSchema::clevr`] with size and material held fixed.
    pub fn clevr_easy() -> Self {
        FactorSchema {
            categories: vec![
                Category::categorical("shape", &["cube", "sphere", "cylinder"]),
                Category::categorical(
                    "color",
                    &["gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"],
                ),
                Category::position("position"),
            ],
        }
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }

    /// Categorical categories in schema order.
    pub fn categorical(&self) -> impl Iterator<Item = &Category> {
        self.categories.iter().filter(|c| c.values().is_some())
    }

    /// Checks that `object` assigns every category exactly one valid value.
    pub fn validate_object(&self, object: &GroundTruthObject) -> Result<(), EncodingError> {
        for c in &self.categories {
            match (object.factors.get(&c.name), &c.kind) {
                (None, _) => {
                    return Err(EncodingError::InvalidObject(format!(
                        "missing category `{}`",
                        c.name
                    )))
                }
                (Some(FactorValue::Label(v)), CategoryKind::Categorical { values }) => {
                    if !values.contains(v) {
                        return Err(EncodingError::InvalidObject(format!(
                            "`{v}` is not a value of `{}`",
                            c.name
                        )));
                    }
                }
                (Some(FactorValue::Position([x, y])), CategoryKind::Position) => {
                    if !(0.0..=1.0).contains(x) || !(0.0..=1.0).contains(y) {
                        return Err(EncodingError::InvalidObject(format!(
                            "position ({x}, {y}) outside the unit square"
                        )));
                    }
                }
                _ => {
                    return Err(EncodingError::InvalidObject(format!(
                        "wrong value kind for `{}`",
                        c.name
                    )))
                }
            }
        }
        if let Some(extra) = object.factors.keys().find(|k| self.category(k).is_none()) {
            return Err(EncodingError::InvalidObject(format!(
                "unknown category `{extra}`"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorValue {
    Label(String),
    Position([f64; 2]),
}

impl fmt::Display for FactorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorValue::Label(l) => f.write_str(l),
            FactorValue::Position([x, y]) => write!(f, "{x},{y}"),
        }
    }
}

/// Latent ground-truth factors of one object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruthObject {
    pub factors: BTreeMap<String, FactorValue>,
}

impl GroundTruthObject {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, category: &str, value: &str) -> Self {
        self.factors
            .insert(category.to_owned(), FactorValue::Label(value.to_owned()));
        self
    }

    pub fn with_position(mut self, category: &str, x: f64, y: f64) -> Self {
        self.factors
            .insert(category.to_owned(), FactorValue::Position([x, y]));
        self
    }

    pub fn label(&self, category: &str) -> Option<&str> {
        match self.factors.get(category)? {
            FactorValue::Label(l) => Some(l),
            FactorValue::Position(_) => None,
        }
    }

    pub fn position(&self, category: &str) -> Option<[f64; 2]> {
        match self.factors.get(category)? {
            FactorValue::Position(p) => Some(*p),
            FactorValue::Label(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub n_slots: usize,
    pub n_blocks: usize,
    pub block_dim: usize,
    /// Category name to block index. Must be injective.
    pub factor_to_block: BTreeMap<String, usize>,
    pub cluster_spread: f64,
    pub duplicate_clusters_per_value: usize,
    pub seed: u64,
}

impl EncoderConfig {
    /// 16 blocks of 128 dimensions with the CLEVR factors spread over them.
    pub fn clevr(seed: u64) -> Self {
        EncoderConfig {
            n_slots: 4,
            n_blocks: 16,
            block_dim: 128,
            factor_to_block: [
                ("shape", 2),
                ("color", 5),
                ("size", 7),
                ("material", 11),
                ("position", 13),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect(),
            cluster_spread: 0.05,
            duplicate_clusters_per_value: 1,
            seed,
        }
    }

    /// 8 blocks of 128 dimensions for the CLEVR-Easy factors.
    pub fn clevr_easy(seed: u64) -> Self {
        EncoderConfig {
            n_slots: 4,
            n_blocks: 8,
            block_dim: 128,
            factor_to_block: [("shape", 2), ("color", 5), ("position", 6)]
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v))
                .collect(),
            cluster_spread: 0.05,
            duplicate_clusters_per_value: 1,
            seed,
        }
    }

    pub fn validate(&self, schema: &FactorSchema) -> Result<(), EncodingError> {
        if self.n_slots == 0 || self.n_blocks == 0 || self.block_dim == 0 {
            return Err(EncodingError::InvalidConfig(
                "n_slots, n_blocks and block_dim must be positive".into(),
            ));
        }
        if self.duplicate_clusters_per_value == 0 {
            return Err(EncodingError::InvalidConfig(
                "duplicate_clusters_per_value must be positive".into(),
            ));
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread >= 0.0) {
            return Err(EncodingError::InvalidConfig(format!(
                "cluster_spread must be finite and nonnegative, got {}",
                self.cluster_spread
            )));
        }
        let mut used = BTreeSet::new();
        for (category, &block) in &self.factor_to_block {
            if schema.category(category).is_none() {
                return Err(EncodingError::InvalidConfig(format!(
                    "factor_to_block names unknown category `{category}`"
                )));
            }
            if block >= self.n_blocks {
                return Err(EncodingError::InvalidConfig(format!(
                    "category `{category}` mapped to block {block} >= {}",
                    self.n_blocks
                )));
            }
            if !used.insert(block) {
                return Err(EncodingError::NonInjectiveMapping { block });
            }
        }
        Ok(())
    }

    /// The category encoded in block `j`, if any.
    pub fn category_of_block(&self, j: usize) -> Option<&str> {
        self.factor_to_block
            .iter()
            .find(|(_, &b)| b == j)
            .map(|(c, _)| c.as_str())
    }
}

/// Continuous block-slot representation of one scene.
///
/// `z` is stored slot-major, then block-major, then coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSlotEncoding {
    n_slots: usize,
    n_blocks: usize,
    block_dim: usize,
    z: Vec<f32>,
    attention: Vec<f32>,
}

impl BlockSlotEncoding {
    pub fn zeros(n_slots: usize, n_blocks: usize, block_dim: usize) -> Self {
        BlockSlotEncoding {
            n_slots,
            n_blocks,
            block_dim,
            z: vec![0.0; n_slots * n_blocks * block_dim],
            attention: vec![0.0; n_slots],
        }
    }

    /// Builds an encoding from raw parts, checking shape, finiteness and the
    /// attention range.
    pub fn from_parts(
        n_slots: usize,
        n_blocks: usize,
        block_dim: usize,
        z: Vec<f32>,
        attention: Vec<f32>,
    ) -> Result<Self, EncodingError> {
        if z.len() != n_slots * n_blocks * block_dim || attention.len() != n_slots {
            return Err(EncodingError::InvalidConfig(format!(
                "expected {} values and {} attentions, got {} and {}",
                n_slots * n_blocks * block_dim,
                n_slots,
                z.len(),
                attention.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(EncodingError::InvalidConfig("non-finite encoding value".into()));
        }
        if attention.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(EncodingError::InvalidConfig(
                "attention outside [0, 1]".into(),
            ));
        }
        Ok(BlockSlotEncoding {
            n_slots,
            n_blocks,
            block_dim,
            z,
            attention,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn block(&self, slot: usize, block: usize) -> &[f32] {
        let start = (slot * self.n_blocks + block) * self.block_dim;
        &self.z[start..start + self.block_dim]
    }

    pub fn block_mut(&mut self, slot: usize, block: usize) -> &mut [f32] {
        let start = (slot * self.n_blocks + block) * self.block_dim;
        &mut self.z[start..start + self.block_dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.z
    }

    pub fn attention(&self) -> &[f32] {
        &self.attention
    }

    pub fn set_attention(&mut self, slot: usize, value: f32) {
        self.attention[slot] = value;
    }
}

/// An encoding together with the ground truth that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScene {
    pub encoding: BlockSlotEncoding,
    pub objects: Vec<GroundTruthObject>,
    pub object_slot_ids: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SlotSelection {
    /// The single slot with maximal attention.
    MaxOne,
    /// Every slot whose attention reaches the threshold.
    Threshold { min_attention: f32 },
}

impl SlotSelection {
    pub fn threshold(min_attention: f32) -> Result<Self, EncodingError> {
        if min_attention > 0.0 && min_attention <= 1.0 {
            Ok(SlotSelection::Threshold { min_attention })
        } else {
            Err(EncodingError::InvalidThreshold(min_attention))
        }
    }
}

/// Picks the slots that hold objects. Ties in `MaxOne` go to the lowest index.
pub fn select_object_slots(encoding: &BlockSlotEncoding, mode: SlotSelection) -> Vec<usize> {
    match mode {
        SlotSelection::MaxOne => {
            let mut best = 0;
            for (i, &a) in encoding.attention.iter().enumerate() {
                if a > encoding.attention[best] {
                    best = i;
                }
            }
            if encoding.n_slots == 0 {
                Vec::new()
            } else {
                vec![best]
            }
        }
        SlotSelection::Threshold { min_attention } => encoding
            .attention
            .iter()
            .enumerate()
            .filter(|(_, &a)| a >= min_attention)
            .map(|(i, _)| i)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum BlockModel {
    Categorical {
        category: String,
        /// value index -> duplicate index -> centroid
        centroids: Vec<Vec<Vec<f32>>>,
    },
    Position {
        category: String,
        origin: Vec<f32>,
        axes: [Vec<f32>; 2],
    },
    Distractor {
        mean: Vec<f32>,
    },
}

/// Ground-truth-factored stand-in for a trained block-slot encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticEncoder {
    schema: FactorSchema,
    config: EncoderConfig,
    blocks: Vec<BlockModel>,
}

impl SyntheticEncoder {
    pub fn new(schema: FactorSchema, config: EncoderConfig) -> Result<Self, EncodingError> {
        config.validate(&schema)?;
        let d = config.block_dim;
        let mut blocks = Vec::with_capacity(config.n_blocks);
        for j in 0..config.n_blocks {
            let mut rng = seed::stream(config.seed, 0xB10C_0000 + j as u64);
            let model = match config.category_of_block(j).and_then(|c| schema.category(c)) {
                Some(category) => match &category.kind {
                    CategoryKind::Categorical { values } => {
                        let centroids = value_centroids(
                            &mut rng,
                            values.len(),
                            config.duplicate_clusters_per_value,
                            d,
                            config.cluster_spread,
                        )
                        .ok_or_else(|| EncodingError::CentroidPlacement {
                            category: category.name.clone(),
                        })?;
                        BlockModel::Categorical {
                            category: category.name.clone(),
                            centroids,
                        }
                    }
                    CategoryKind::Position => {
                        let origin = gaussian(&mut rng, d, 1.0);
                        let axes = [
                            unit(&mut rng, d, POSITION_SCALE),
                            unit(&mut rng, d, POSITION_SCALE),
                        ];
                        BlockModel::Position {
                            category: category.name.clone(),
                            origin,
                            axes,
                        }
                    }
                },
                None => BlockModel::Distractor {
                    mean: gaussian(&mut rng, d, 1.0),
                },
            };
            blocks.push(model);
        }
        Ok(SyntheticEncoder {
            schema,
            config,
            blocks,
        })
    }

    pub fn schema(&self) -> &FactorSchema {
        &self.schema
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Centroids of `value` in the block its category maps to.
    pub fn centroids(&self, category: &str, value: &str) -> Option<&[Vec<f32>]> {
        let j = *self.config.factor_to_block.get(category)?;
        match &self.blocks[j] {
            BlockModel::Categorical { centroids, .. } => {
                let idx = self.schema.category(category)?.value_index(value)?;
                Some(&centroids[idx])
            }
            _ => None,
        }
    }

    /// All centroids of a categorical block, value-major.
    pub fn block_centroids(&self, j: usize) -> Vec<&[f32]> {
        match self.blocks.get(j) {
            Some(BlockModel::Categorical { centroids, .. }) => centroids
                .iter()
                .flat_map(|dups| dups.iter().map(Vec::as_slice))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Encodes `objects` into a fresh scene. Each object takes a distinct
    /// random slot; the rest are background.
    pub fn encode_scene(
        &self,
        objects: &[GroundTruthObject],
        scene_seed: u64,
    ) -> Result<LabeledScene, EncodingError> {
        let cfg = &self.config;
        if objects.len() > cfg.n_slots {
            return Err(EncodingError::TooManyObjects {
                objects: objects.len(),
                slots: cfg.n_slots,
            });
        }
        for o in objects {
            self.schema.validate_object(o)?;
        }
        let mut rng = seed::stream(cfg.seed, seed::mix(0x5CE7E, scene_seed));
        let mut slots: Vec<usize> = (0..cfg.n_slots).collect();
        slots.shuffle(&mut rng);
        let object_slot_ids: Vec<usize> = slots[..objects.len()].to_vec();

        let mut encoding = BlockSlotEncoding::zeros(cfg.n_slots, cfg.n_blocks, cfg.block_dim);
        let sigma = cfg.cluster_spread;
        for slot in 0..cfg.n_slots {
            match object_slot_ids.iter().position(|&s| s == slot) {
                Some(k) => {
                    let object = &objects[k];
                    for j in 0..cfg.n_blocks {
                        let v = self.object_block(object, j, &mut rng)?;
                        let out = encoding.block_mut(slot, j);
                        for (o, c) in out.iter_mut().zip(v) {
                            *o = c;
                        }
                        let spread = match self.blocks[j] {
                            BlockModel::Distractor { .. } => DISTRACTOR_SPREAD,
                            _ => sigma,
                        };
                        add_noise(&mut rng, encoding.block_mut(slot, j), spread);
                    }
                    encoding.set_attention(slot, rng.random_range(0.8f32..=1.0));
                }
                None => {
                    for j in 0..cfg.n_blocks {
                        add_noise(&mut rng, encoding.block_mut(slot, j), BACKGROUND_SPREAD);
                    }
                    encoding.set_attention(slot, rng.random_range(0.0f32..0.2));
                }
            }
        }
        Ok(LabeledScene {
            encoding,
            objects: objects.to_vec(),
            object_slot_ids,
        })
    }

    fn object_block<R: Rng>(
        &self,
        object: &GroundTruthObject,
        j: usize,
        rng: &mut R,
    ) -> Result<Vec<f32>, EncodingError> {
        Ok(match &self.blocks[j] {
            BlockModel::Categorical {
                category,
                centroids,
            } => {
                let label = object.label(category).ok_or_else(|| {
                    EncodingError::InvalidObject(format!("missing `{category}`"))
                })?;
                let idx = self
                    .schema
                    .category(category)
                    .and_then(|c| c.value_index(label))
                    .ok_or_else(|| EncodingError::InvalidObject(format!("bad `{label}`")))?;
                let dups = &centroids[idx];
                let pick = if dups.len() == 1 {
                    0
                } else {
                    rng.random_range(0..dups.len())
                };
                dups[pick].clone()
            }
            BlockModel::Position {
                category,
                origin,
                axes,
            } => {
                let [x, y] = object.position(category).ok_or_else(|| {
                    EncodingError::InvalidObject(format!("missing `{category}`"))
                })?;
                origin
                    .iter()
                    .zip(&axes[0])
                    .zip(&axes[1])
                    .map(|((&o, &a), &b)| (o as f64 + x * a as f64 + y * b as f64) as f32)
                    .collect()
            }
            BlockModel::Distractor { mean } => mean.clone(),
        })
    }

    /// Reads the ground-truth factors back out of a slot: nearest centroid for
    /// categorical blocks, least squares for the position block. Categories
    /// without a block are absent from the result.
    pub fn decode_slot(&self, encoding: &BlockSlotEncoding, slot: usize) -> GroundTruthObject {
        let mut decoded = GroundTruthObject::new();
        for (j, model) in self.blocks.iter().enumerate() {
            let z = encoding.block(slot, j);
            match model {
                BlockModel::Categorical {
                    category,
                    centroids,
                } => {
                    let mut best = (f64::INFINITY, 0);
                    for (value, dups) in centroids.iter().enumerate() {
                        for c in dups {
                            let d = sq_dist(c, z);
                            if d < best.0 {
                                best = (d, value);
                            }
                        }
                    }
                    let values = self.schema.category(category).and_then(|c| c.values());
                    if let Some(values) = values {
                        decoded = decoded.with(category, &values[best.1]);
                    }
                }
                BlockModel::Position {
                    category,
                    origin,
                    axes,
                } => {
                    let [x, y] = solve_position(z, origin, axes);
                    decoded = decoded.with_position(category, x.clamp(0.0, 1.0), y.clamp(0.0, 1.0));
                }
                BlockModel::Distractor { .. } => {}
            }
        }
        decoded
    }
}

fn gaussian<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f32> {
    (0..d)
        .map(|_| (scale * rng.sample::<f64, _>(StandardNormal)) as f32)
        .collect()
}

fn unit<R: Rng>(rng: &mut R, d: usize, length: f64) -> Vec<f32> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.iter().map(|x| (x / norm * length) as f32).collect()
}

fn add_noise<R: Rng>(rng: &mut R, out: &mut [f32], spread: f64) {
    for o in out {
        let n: f64 = rng.sample(StandardNormal);
        *o = (*o as f64 + spread * n) as f32;
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Centroids per value. Duplicates of one value sit at orthogonal offsets
/// around a shared anchor, so they are each other's nearest centroids, and
/// every pair of centroids stays at least `CENTROID_SEPARATION` spreads apart.
fn value_centroids<R: Rng>(
    rng: &mut R,
    n_values: usize,
    dup: usize,
    d: usize,
    spread: f64,
) -> Option<Vec<Vec<Vec<f32>>>> {
    let min_gap = CENTROID_SEPARATION * spread;
    if dup == 1 {
        let flat = place_centroids(rng, n_values, d, min_gap)?;
        return Some(flat.into_iter().map(|c| vec![c]).collect());
    }
    if dup > d {
        return None;
    }
    let per_dim = DUPLICATE_OFFSET.max(DUPLICATE_NOISE_OFFSET * spread.sqrt());
    let offset = min_gap.max(per_dim * (d as f64).sqrt());
    // Duplicates of different values must stay farther apart than siblings.
    let gap = min_gap.max(offset * std::f64::consts::SQRT_2) + 2.0 * offset;
    let anchors = place_centroids(rng, n_values, d, gap / ANCHOR_SCALE)?;
    let mut out = Vec::with_capacity(n_values);
    for anchor in anchors {
        let anchor: Vec<f64> = anchor.iter().map(|&a| a as f64 * ANCHOR_SCALE).collect();
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(dup);
        while dirs.len() < dup {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for u in &dirs {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                dirs.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        out.push(
            dirs.iter()
                .map(|u| {
                    anchor
                        .iter()
                        .zip(u)
                        .map(|(&a, &x)| (a + offset * x) as f32)
                        .collect()
                })
                .collect(),
        );
    }
    Some(out)
}

/// Rejection-samples `count` standard-normal centroids with pairwise
/// distance at least `min_gap`.
fn place_centroids<R: Rng>(rng: &mut R, count: usize, d: usize, min_gap: f64) -> Option<Vec<Vec<f32>>> {
    let mut out: Vec<Vec<f32>> = Vec::with_capacity(count);
    let min_sq = min_gap * min_gap;
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let c = gaussian(rng, d, 1.0);
            if out.iter().all(|o| sq_dist(o, &c) >= min_sq) {
                out.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(out)
}

fn solve_position(z: &[f32], origin: &[f32], axes: &[Vec<f32>; 2]) -> [f64; 2] {
    // Normal equations of the 2-column least-squares problem.
    let (mut aa, mut ab, mut bb, mut ra, mut rb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..z.len() {
        let a = axes[0][i] as f64;
        let b = axes[1][i] as f64;
        let r = z[i] as f64 - origin[i] as f64;
        aa += a * a;
        ab += a * b;
        bb += b * b;
        ra += r * a;
        rb += r * b;
    }
    let det = aa * bb - ab * ab;
    if det.abs() < 1e-12 {
        return [0.0, 0.0];
    }
    [(ra * bb - rb * ab) / det, (rb * aa - ra * ab) / det]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn color_schema() -> FactorSchema {
        FactorSchema::new(vec![Category::categorical("color", &["red", "blue"])]).unwrap()
    }

    fn small_config(sigma: f64, dup: usize) -> EncoderConfig {
        EncoderConfig {
            n_slots: 3,
            n_blocks: 2,
            block_dim: 4,
            factor_to_block: [("color".to_owned(), 0)].into_iter().collect(),
            cluster_spread: sigma,
            duplicate_clusters_per_value: dup,
            seed: 11,
        }
    }

    #[test]
    fn schema_rejects_duplicates_and_empty_values() {
        assert!(FactorSchema::new(vec![]).is_err());
        assert!(FactorSchema::new(vec![
            Category::categorical("a", &["x"]),
            Category::categorical("a", &["y"]),
        ])
        .is_err());
        assert!(FactorSchema::new(vec![Category::categorical("a", &[])]).is_err());
    }

    #[test]
    fn zero_spread_reproduces_centroids() {
        let enc = SyntheticEncoder::new(color_schema(), small_config(0.0, 1)).unwrap();
        assert_eq!(enc.block_centroids(0).len(), 2);
        let again = SyntheticEncoder::new(color_schema(), small_config(0.0, 1)).unwrap();
        assert_eq!(enc, again);

        let obj = GroundTruthObject::new().with("color", "blue");
        let scene = enc.encode_scene(&[obj], 3).unwrap();
        let slot = scene.object_slot_ids[0];
        assert_eq!(
            scene.encoding.block(slot, 0),
            enc.centroids("color", "blue").unwrap()[0].as_slice()
        );
    }

    #[test]
    fn duplicates_double_the_centroid_count() {
        let enc = SyntheticEncoder::new(color_schema(), small_config(0.05, 2)).unwrap();
        assert_eq!(enc.block_centroids(0).len(), 4);
    }

    #[test]
    fn empty_scene_is_all_background() {
        let enc = SyntheticEncoder::new(color_schema(), small_config(0.05, 1)).unwrap();
        let scene = enc.encode_scene(&[], 1).unwrap();
        assert!(scene.object_slot_ids.is_empty());
        assert!(scene.encoding.attention().iter().all(|&a| a < 0.2));
    }

    #[test]
    fn too_many_objects() {
        let enc = SyntheticEncoder::new(color_schema(), small_config(0.05, 1)).unwrap();
        let obj = GroundTruthObject::new().with("color", "red");
        let err = enc.encode_scene(&vec![obj; 4], 0).unwrap_err();
        assert_eq!(err, EncodingError::TooManyObjects { objects: 4, slots: 3 });
    }

    #[test]
    fn non_injective_mapping_is_rejected() {
        let schema = FactorSchema::new(vec![
            Category::categorical("a", &["x"]),
            Category::categorical("b", &["y"]),
        ])
        .unwrap();
        let mut cfg = small_config(0.0, 1);
        cfg.factor_to_block = [("a".to_owned(), 1), ("b".to_owned(), 1)].into_iter().collect();
        assert_eq!(
            SyntheticEncoder::new(schema, cfg).unwrap_err(),
            EncodingError::NonInjectiveMapping { block: 1 }
        );
    }

    #[test]
    fn zero_dimensions_are_rejected() {
        let mut cfg = small_config(0.0, 1);
        cfg.block_dim = 0;
        assert!(matches!(
            SyntheticEncoder::new(color_schema(), cfg),
            Err(EncodingError::InvalidConfig(_))
        ));
    }

    #[test]
    fn max_one_and_threshold_selection() {
        let mut e = BlockSlotEncoding::zeros(3, 1, 1);
        for (i, a) in [0.1, 0.9, 0.3].into_iter().enumerate() {
            e.set_attention(i, a);
        }
        assert_eq!(select_object_slots(&e, SlotSelection::MaxOne), vec![1]);
        let t = SlotSelection::threshold(0.3).unwrap();
        assert_eq!(select_object_slots(&e, t), vec![1, 2]);

        let mut tie = BlockSlotEncoding::zeros(2, 1, 1);
        tie.set_attention(0, 0.5);
        tie.set_attention(1, 0.5);
        assert_eq!(select_object_slots(&tie, SlotSelection::MaxOne), vec![0]);

        assert!(SlotSelection::threshold(0.0).is_err());
        assert!(SlotSelection::threshold(1.5).is_err());
    }

    #[test]
    fn decoder_inverts_the_encoder() {
        let schema = FactorSchema::clevr();
        let enc = SyntheticEncoder::new(schema, EncoderConfig::clevr(4)).unwrap();
        let obj = GroundTruthObject::new()
            .with("shape", "sphere")
            .with("color", "cyan")
            .with("size", "small")
            .with("material", "metal")
            .with_position("position", 0.25, 0.75);
        let scene = enc.encode_scene(std::slice::from_ref(&obj), 9).unwrap();
        let decoded = enc.decode_slot(&scene.encoding, scene.object_slot_ids[0]);
        for c in ["shape", "color", "size", "material"] {
            assert_eq!(decoded.label(c), obj.label(c));
        }
        let [x, y] = decoded.position("position").unwrap();
        assert!((x - 0.25).abs() < 0.1 && (y - 0.75).abs() < 0.1, "{x} {y}");
    }
}

//! Encoding files.
//!
//! Layout: one line of JSON header, then a little-endian `f32` payload.
//! Per scene the payload holds `N_S * N_B * D_B` values (slot-major, then
//! block-major) followed by `N_S` attention values. Ground truth lives in a
//! sibling `<file>.labels` text file with one object per line:
//!
//! ```text
//! # ncb-labels v1
//! <scene>\t<slot>\t<category>=<value>\t...
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BlockSlotEncoding, EncoderConfig, FactorSchema, FactorValue, GroundTruthObject, LabeledScene, SyntheticEncoder};

pub const ENCODINGS_FORMAT: &str = "ncb-encodings";
pub const ENCODINGS_VERSION: u32 = 1;
pub const ENCODER_FORMAT: &str = "ncb-encoder";
pub const ENCODER_VERSION: u32 = 1;
const LABELS_HEADER: &str = "# ncb-labels v1";

#[derive(Debug, thiserror::Error)]
pub enum EncodingIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: header declares {expected}, payload implies {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("payload truncated at byte offset {offset} (expected {expected} bytes)")]
    Truncated { offset: usize, expected: usize },
    #[error("non-finite value at byte offset {offset}")]
    NonFinite { offset: usize },
    #[error("labels line {line}: {message}")]
    Labels { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingHeader {
    pub format: String,
    pub version: u32,
    pub n_slots: usize,
    pub n_blocks: usize,
    pub block_dim: usize,
    pub count: usize,
    pub schema: FactorSchema,
}

impl EncodingHeader {
    pub fn new(schema: FactorSchema, n_slots: usize, n_blocks: usize, block_dim: usize) -> Self {
        EncodingHeader {
            format: ENCODINGS_FORMAT.to_owned(),
            version: ENCODINGS_VERSION,
            n_slots,
            n_blocks,
            block_dim,
            count: 0,
            schema,
        }
    }

    fn scene_floats(&self) -> usize {
        self.n_slots * self.n_blocks * self.block_dim + self.n_slots
    }
}

/// Path of the ground-truth sidecar for an encoding file.
pub fn labels_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

/// Serializes scenes into the binary encoding format and the labels text.
pub fn encode(header: &EncodingHeader, scenes: &[LabeledScene]) -> Result<(Vec<u8>, String), EncodingIoError> {
    let mut header = header.clone();
    header.count = scenes.len();
    let mut bytes = serde_json::to_vec(&header)
        .map_err(|e| EncodingIoError::MalformedHeader(e.to_string()))?;
    bytes.push(b'\n');
    bytes.reserve(scenes.len() * header.scene_floats() * 4);

    let mut labels = String::from(LABELS_HEADER);
    labels.push('\n');
    for (i, scene) in scenes.iter().enumerate() {
        let e = &scene.encoding;
        if (e.n_slots(), e.n_blocks(), e.block_dim())
            != (header.n_slots, header.n_blocks, header.block_dim)
        {
            return Err(EncodingIoError::DimensionMismatch {
                expected: dims(header.n_slots, header.n_blocks, header.block_dim),
                found: format!("scene {i} with {}", dims(e.n_slots(), e.n_blocks(), e.block_dim())),
            });
        }
        for v in e.values().iter().chain(e.attention()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for (object, slot) in scene.objects.iter().zip(&scene.object_slot_ids) {
            labels.push_str(&format!("{i}\t{slot}"));
            for (category, value) in &object.factors {
                labels.push_str(&format!("\t{category}={value}"));
            }
            labels.push('\n');
        }
    }
    Ok((bytes, labels))
}

/// Everything needed to rebuild a [`SyntheticEncoder`]; centroids are
/// re-derived from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderFile {
    pub format: String,
    pub version: u32,
    pub schema: FactorSchema,
    pub config: EncoderConfig,
}

impl EncoderFile {
    pub fn of(encoder: &SyntheticEncoder) -> Self {
        EncoderFile {
            format: ENCODER_FORMAT.to_owned(),
            version: ENCODER_VERSION,
            schema: encoder.schema().clone(),
            config: encoder.config().clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("encoder file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EncodingIoError> {
        let file: EncoderFile =
            serde_json::from_str(text).map_err(|e| EncodingIoError::MalformedHeader(e.to_string()))?;
        if file.format != ENCODER_FORMAT || file.version != ENCODER_VERSION {
            return Err(EncodingIoError::MalformedHeader(format!(
                "expected {ENCODER_FORMAT} v{ENCODER_VERSION}, got {} v{}",
                file.format, file.version
            )));
        }
        Ok(file)
    }

    pub fn build(self) -> Result<SyntheticEncoder, super::EncodingError> {
        SyntheticEncoder::new(self.schema, self.config)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn write_encoder(path: &Path, encoder: &SyntheticEncoder) -> io::Result<()> {
    fs::write(path, EncoderFile::of(encoder).to_json())
}

pub fn read_encoder(path: &Path) -> Result<SyntheticEncoder, EncodingIoError> {
    let file = EncoderFile::from_json(&fs::read_to_string(path)?)?;
    file.build()
        .map_err(|e| EncodingIoError::MalformedHeader(e.to_string()))
}

pub fn write_encodings(
    path: &Path,
    header: &EncodingHeader,
    scenes: &[LabeledScene],
) -> Result<(), EncodingIoError> {
    let (bytes, labels) = encode(header, scenes)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    fs::write(labels_path(path), labels)?;
    Ok(())
}

pub fn read_encodings(path: &Path) -> Result<(EncodingHeader, Vec<LabeledScene>), EncodingIoError> {
    let bytes = fs::read(path)?;
    let labels_file = labels_path(path);
    let labels = if labels_file.exists() {
        Some(fs::read_to_string(labels_file)?)
    } else {
        None
    };
    decode(&bytes, labels.as_deref())
}

fn dims(n_slots: usize, n_blocks: usize, block_dim: usize) -> String {
    format!("N_S={n_slots} N_B={n_blocks} D_B={block_dim}")
}

/// Parses an encoding file. Without labels every scene has no ground truth.
pub fn decode(
    bytes: &[u8],
    labels: Option<&str>,
) -> Result<(EncodingHeader, Vec<LabeledScene>), EncodingIoError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| EncodingIoError::MalformedHeader("missing header line".into()))?;
    let header: EncodingHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| EncodingIoError::MalformedHeader(e.to_string()))?;
    if header.format != ENCODINGS_FORMAT {
        return Err(EncodingIoError::MalformedHeader(format!(
            "unexpected format `{}`",
            header.format
        )));
    }
    if header.version != ENCODINGS_VERSION {
        return Err(EncodingIoError::MalformedHeader(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.n_slots == 0 || header.n_blocks == 0 || header.block_dim == 0 {
        return Err(EncodingIoError::MalformedHeader("zero dimension".into()));
    }

    let start = newline + 1;
    let payload = &bytes[start..];
    let per_scene = header.scene_floats() * 4;
    let expected = per_scene * header.count;
    if payload.len() != expected {
        // A whole-number payload with a different block count is a shape
        // error, anything else is a short or overlong file.
        let floats = payload.len() / 4;
        if header.count > 0 && payload.len().is_multiple_of(4) && floats.is_multiple_of(header.count) {
            let row = floats / header.count;
            let per_slot = header.n_blocks * header.block_dim;
            if row > header.n_slots
                && (row - header.n_slots).is_multiple_of(header.n_slots * header.block_dim)
                && row - header.n_slots != header.n_slots * per_slot
            {
                let n_blocks = (row - header.n_slots) / (header.n_slots * header.block_dim);
                return Err(EncodingIoError::DimensionMismatch {
                    expected: dims(header.n_slots, header.n_blocks, header.block_dim),
                    found: dims(header.n_slots, n_blocks, header.block_dim),
                });
            }
        }
        if payload.len() < expected {
            return Err(EncodingIoError::Truncated {
                offset: bytes.len(),
                expected: start + expected,
            });
        }
        return Err(EncodingIoError::DimensionMismatch {
            expected: format!("{expected} payload bytes"),
            found: format!("{} payload bytes", payload.len()),
        });
    }

    let z_len = header.n_slots * header.n_blocks * header.block_dim;
    let mut scenes = Vec::with_capacity(header.count);
    for i in 0..header.count {
        let base = i * per_scene;
        let mut floats = Vec::with_capacity(header.scene_floats());
        for (k, chunk) in payload[base..base + per_scene].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(EncodingIoError::NonFinite {
                    offset: start + base + 4 * k,
                });
            }
            floats.push(v);
        }
        let attention = floats.split_off(z_len);
        let encoding = BlockSlotEncoding::from_parts(
            header.n_slots,
            header.n_blocks,
            header.block_dim,
            floats,
            attention,
        )
        .map_err(|e| EncodingIoError::MalformedHeader(format!("scene {i}: {e}")))?;
        scenes.push(LabeledScene {
            encoding,
            objects: Vec::new(),
            object_slot_ids: Vec::new(),
        });
    }

    if let Some(text) = labels {
        parse_labels(text, &header, &mut scenes)?;
    }
    Ok((header, scenes))
}

fn parse_labels(
    text: &str,
    header: &EncodingHeader,
    scenes: &mut [LabeledScene],
) -> Result<(), EncodingIoError> {
    let err = |line: usize, message: String| EncodingIoError::Labels { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == LABELS_HEADER => {}
        _ => return Err(err(1, "missing labels header".into())),
    }
    for (n, line) in lines {
        let lineno = n + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let scene: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(lineno, "bad scene index".into()))?;
        let slot: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(lineno, "bad slot id".into()))?;
        if scene >= scenes.len() {
            return Err(err(lineno, format!("scene {scene} out of range")));
        }
        if slot >= header.n_slots {
            return Err(err(lineno, format!("slot {slot} out of range")));
        }
        let mut object = GroundTruthObject::new();
        for field in fields {
            let (category, value) = field
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("expected category=value, got `{field}`")))?;
            let kind = header
                .schema
                .category(category)
                .ok_or_else(|| err(lineno, format!("unknown category `{category}`")))?;
            let value = if kind.values().is_some() {
                FactorValue::Label(value.to_owned())
            } else {
                let (x, y) = value
                    .split_once(',')
                    .ok_or_else(|| err(lineno, format!("bad position `{value}`")))?;
                let x: f64 = x.parse().map_err(|_| err(lineno, format!("bad x `{x}`")))?;
                let y: f64 = y.parse().map_err(|_| err(lineno, format!("bad y `{y}`")))?;
                FactorValue::Position([x, y])
            };
            object.factors.insert(category.to_owned(), value);
        }
        header
            .schema
            .validate_object(&object)
            .map_err(|e| err(lineno, e.to_string()))?;
        let s = &mut scenes[scene];
        if s.object_slot_ids.contains(&slot) {
            return Err(err(lineno, format!("slot {slot} labeled twice")));
        }
        s.objects.push(object);
        s.object_slot_ids.push(slot);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_file_rebuilds_the_same_encoder() {
        let enc = SyntheticEncoder::new(FactorSchema::clevr_easy(), EncoderConfig::clevr_easy(8)).unwrap();
        let file = EncoderFile::of(&enc);
        let back = EncoderFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.fingerprint(), file.fingerprint());
        assert_eq!(back.build().unwrap().block_centroids(2), enc.block_centroids(2));
        assert!(EncoderFile::from_json("{}").is_err());
    }

    fn scenes(n: usize) -> (EncodingHeader, Vec<LabeledScene>) {
        let schema = FactorSchema::clevr();
        let mut cfg = EncoderConfig::clevr(3);
        cfg.block_dim = 8;
        let enc = SyntheticEncoder::new(schema.clone(), cfg.clone()).unwrap();
        let obj = GroundTruthObject::new()
            .with("shape", "cube")
            .with("color", "red")
            .with("size", "large")
            .with("material", "metal")
            .with_position("position", 0.1, 0.123456789);
        let scenes = (0..n)
            .map(|i| enc.encode_scene(std::slice::from_ref(&obj), i as u64).unwrap())
            .collect();
        (
            EncodingHeader::new(schema, cfg.n_slots, cfg.n_blocks, cfg.block_dim),
            scenes,
        )
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (header, scenes) = scenes(10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.bin");
        write_encodings(&path, &header, &scenes).unwrap();
        let (read_header, read) = read_encodings(&path).unwrap();
        assert_eq!(read_header.count, 10);
        assert_eq!(read, scenes);
    }

    #[test]
    fn truncated_payload_names_offset() {
        let (header, scenes) = scenes(2);
        let (bytes, _) = encode(&header, &scenes).unwrap();
        let cut = &bytes[..bytes.len() - 7];
        match decode(cut, None) {
            Err(EncodingIoError::Truncated { offset, expected }) => {
                assert_eq!(offset, cut.len());
                assert_eq!(expected, bytes.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn block_count_mismatch_is_reported() {
        let (mut header, scenes) = scenes(3);
        let (bytes, _) = encode(&header, &scenes).unwrap();
        // Re-label the 16-block payload as an 8-block file.
        header.n_blocks = 8;
        header.count = 3;
        let mut forged = serde_json::to_vec(&header).unwrap();
        forged.push(b'\n');
        let start = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        forged.extend_from_slice(&bytes[start..]);
        match decode(&forged, None) {
            Err(EncodingIoError::DimensionMismatch { found, .. }) => {
                assert!(found.contains("N_B=16"), "{found}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let (header, scenes) = scenes(1);
        let (mut bytes, _) = encode(&header, &scenes).unwrap();
        let start = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        bytes[start + 8..start + 12].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode(&bytes, None),
            Err(EncodingIoError::NonFinite { offset }) if offset == start + 8
        ));
    }

    #[test]
    fn garbage_header() {
        assert!(matches!(
            decode(b"not json\n", None),
            Err(EncodingIoError::MalformedHeader(_))
        ));
        assert!(matches!(decode(b"", None), Err(EncodingIoError::MalformedHeader(_))));
    }
}

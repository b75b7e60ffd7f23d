//! File formats for everything the pipeline reads and writes: the HMB1
//! binary heatmap container, JSON-lines manifests / proposal sets / crop
//! plans, and the JSON evaluation report. Readers reject malformed input
//! rather than repairing it, and every writer is byte-deterministic.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cropper::CropPlan;
use crate::geometry::BoundingBox;
use crate::heatmap::{Heatmap, HeatmapError, HeatmapStack, TokenInfo};

/// File identifier of the binary heatmap bundle.
pub const BUNDLE_MAGIC: [u8; 4] = *b"HMB1";
/// Current bundle format version.
pub const BUNDLE_VERSION: u16 = 1;

const HEADER_LEN: u64 = 4 + 2 + 4 * 5;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bad magic {found:?}, expected {expected:?}", expected = BUNDLE_MAGIC)]
    BadMagic { found: [u8; 4] },
    #[error("unsupported bundle version {found}, expected {expected}", expected = BUNDLE_VERSION)]
    VersionMismatch { found: u16 },
    #[error("truncated bundle: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{extra} trailing bytes after the trailer")]
    TrailingBytes { extra: usize },
    #[error("NaN value in token {token} at cell {cell}")]
    NanValue { token: usize, cell: usize },
    #[error("infinite value in token {token} at cell {cell}")]
    InfiniteValue { token: usize, cell: usize },
    #[error("negative value {value} in token {token} at cell {cell}")]
    NegativeValue {
        token: usize,
        cell: usize,
        value: f32,
    },
    #[error(
        "header declares {header} tokens but trailer lists {tokens} strings and {flags} flags"
    )]
    TokenCountMismatch {
        header: u32,
        tokens: usize,
        flags: usize,
    },
    #[error("bundle dimensions overflow: {tokens} x {height} x {width}")]
    DimensionOverflow {
        tokens: u32,
        height: u32,
        width: u32,
    },
    #[error("invalid trailer JSON: {0}")]
    BadTrailer(#[from] serde_json::Error),
    #[error(transparent)]
    Stack(#[from] HeatmapError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    IoStream(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    BadRecord {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: duplicate sample id `{id}`")]
    DuplicateSampleId { line: usize, id: String },
    #[error("line {line}: duplicate image id `{id}`")]
    DuplicateImageId { line: usize, id: String },
    #[error("line {line}: sample `{id}` ground-truth box outside its {width}x{height} image")]
    GtOutOfBounds {
        line: usize,
        id: String,
        width: u32,
        height: u32,
    },
    #[error("line {line}: image `{id}` has an empty proposal list")]
    EmptyProposalSet { line: usize, id: String },
    #[error("line {line}: invalid box: {source}")]
    BadBox {
        line: usize,
        source: crate::geometry::GeometryError,
    },
}

#[derive(Serialize, Deserialize)]
struct BundleTrailer {
    tokens: Vec<String>,
    special: Vec<bool>,
    continuation_marker: String,
    query: String,
}

/// Serializes a stack into HMB1 bytes: fixed little-endian header, the
/// `T*H*W` float payload token-major row-major, then a length-prefixed JSON
/// trailer with the token metadata.
pub fn write_bundle_to<W: Write>(stack: &HeatmapStack, mut out: W) -> Result<(), BundleError> {
    out.write_all(&BUNDLE_MAGIC)?;
    out.write_u16::<LittleEndian>(BUNDLE_VERSION)?;
    out.write_u32::<LittleEndian>(stack.token_count() as u32)?;
    out.write_u32::<LittleEndian>(stack.grid_height() as u32)?;
    out.write_u32::<LittleEndian>(stack.grid_width() as u32)?;
    out.write_u32::<LittleEndian>(stack.image_height())?;
    out.write_u32::<LittleEndian>(stack.image_width())?;
    for map in stack.maps() {
        for &v in map.values() {
            out.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    let trailer = BundleTrailer {
        tokens: stack.tokens().iter().map(|t| t.text.clone()).collect(),
        special: stack.tokens().iter().map(|t| t.special).collect(),
        continuation_marker: stack.continuation_marker().to_string(),
        query: stack.query().to_string(),
    };
    let trailer_bytes = serde_json::to_vec(&trailer)?;
    out.write_u32::<LittleEndian>(trailer_bytes.len() as u32)?;
    out.write_all(&trailer_bytes)?;
    Ok(())
}

pub fn write_bundle(stack: &HeatmapStack, path: impl AsRef<Path>) -> Result<(), BundleError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_bundle_to(stack, std::io::BufWriter::new(file))
}

/// Parses HMB1 bytes back into a stack. The header is checked before the
/// payload is touched, and every value must be finite and non-negative.
pub fn read_bundle_from<R: Read>(mut input: R) -> Result<HeatmapStack, BundleError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    parse_bundle(&buf)
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<HeatmapStack, BundleError> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bundle(&buf)
}

fn parse_bundle(buf: &[u8]) -> Result<HeatmapStack, BundleError> {
    let actual = buf.len() as u64;
    if buf.len() >= 4 {
        let found = [buf[0], buf[1], buf[2], buf[3]];
        if found != BUNDLE_MAGIC {
            return Err(BundleError::BadMagic { found });
        }
    }
    if actual < HEADER_LEN {
        return Err(BundleError::Truncated {
            expected: HEADER_LEN,
            actual,
        });
    }
    let mut cursor = &buf[4..];
    let version = cursor.read_u16::<LittleEndian>()?;
    if version != BUNDLE_VERSION {
        return Err(BundleError::VersionMismatch { found: version });
    }
    let tokens = cursor.read_u32::<LittleEndian>()?;
    let grid_h = cursor.read_u32::<LittleEndian>()?;
    let grid_w = cursor.read_u32::<LittleEndian>()?;
    let image_h = cursor.read_u32::<LittleEndian>()?;
    let image_w = cursor.read_u32::<LittleEndian>()?;

    let cells = (grid_h as u64)
        .checked_mul(grid_w as u64)
        .and_then(|c| c.checked_mul(tokens as u64))
        .ok_or(BundleError::DimensionOverflow {
            tokens,
            height: grid_h,
            width: grid_w,
        })?;
    let payload_len = cells * 4;
    let min_len = HEADER_LEN + payload_len + 4;
    if actual < min_len {
        return Err(BundleError::Truncated {
            expected: min_len,
            actual,
        });
    }

    let per_map = (grid_h * grid_w) as usize;
    let mut maps = Vec::with_capacity(tokens as usize);
    let cell_width = image_w as f64 / grid_w.max(1) as f64;
    let cell_height = image_h as f64 / grid_h.max(1) as f64;
    for t in 0..tokens as usize {
        let mut values = Vec::with_capacity(per_map);
        for c in 0..per_map {
            let raw = cursor.read_f32::<LittleEndian>()?;
            if raw.is_nan() {
                return Err(BundleError::NanValue { token: t, cell: c });
            }
            if raw.is_infinite() {
                return Err(BundleError::InfiniteValue { token: t, cell: c });
            }
            if raw < 0.0 {
                return Err(BundleError::NegativeValue {
                    token: t,
                    cell: c,
                    value: raw,
                });
            }
            values.push(raw as f64);
        }
        maps.push(Heatmap::new(
            grid_w as usize,
            grid_h as usize,
            values,
            cell_width,
            cell_height,
        )?);
    }

    let trailer_len = cursor.read_u32::<LittleEndian>()? as u64;
    let expected = min_len + trailer_len;
    if actual < expected {
        return Err(BundleError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(BundleError::TrailingBytes {
            extra: (actual - expected) as usize,
        });
    }
    let trailer: BundleTrailer = serde_json::from_slice(&cursor[..trailer_len as usize])?;
    if trailer.tokens.len() != tokens as usize || trailer.special.len() != tokens as usize {
        return Err(BundleError::TokenCountMismatch {
            header: tokens,
            tokens: trailer.tokens.len(),
            flags: trailer.special.len(),
        });
    }
    let infos: Vec<TokenInfo> = trailer
        .tokens
        .into_iter()
        .zip(trailer.special)
        .map(|(text, special)| TokenInfo { text, special })
        .collect();
    Ok(HeatmapStack::new(
        maps,
        infos,
        trailer.query,
        trailer.continuation_marker,
        image_w,
        image_h,
    )?)
}

/// One evaluation sample: the image, the query, its ground truth and where
/// the exported artifacts live. Paths are resolved relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub query: String,
    pub gt_box: BoundingBox,
    pub bundle: String,
    pub parse: String,
}

/// Candidate boxes for one image, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    pub image_id: String,
    pub boxes: Vec<Proposal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confidence: Option<f64>,
}

impl ProposalSet {
    pub fn bounding_boxes(&self) -> Vec<BoundingBox> {
        self.boxes.iter().map(|p| p.bbox).collect()
    }
}

/// Reads a JSON-lines manifest, enforcing unique sample ids and in-bounds
/// ground truth. Unknown fields are ignored; missing fields are errors with
/// the offending line number.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(raw)
            .map_err(|source| ManifestError::BadRecord { line, source })?;
        record
            .gt_box
            .validate()
            .map_err(|source| ManifestError::BadBox { line, source })?;
        let in_bounds = record.gt_box.x1 >= 0.0
            && record.gt_box.y1 >= 0.0
            && record.gt_box.x2 <= record.image_width as f64
            && record.gt_box.y2 <= record.image_height as f64;
        if !in_bounds {
            return Err(ManifestError::GtOutOfBounds {
                line,
                id: record.sample_id,
                width: record.image_width,
                height: record.image_height,
            });
        }
        if seen.insert(record.sample_id.clone(), line).is_some() {
            return Err(ManifestError::DuplicateSampleId {
                line,
                id: record.sample_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(
    records: &[SampleRecord],
    path: impl AsRef<Path>,
) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("manifest records serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a JSON-lines proposal file into a map keyed by image id.
pub fn read_proposals(
    path: impl AsRef<Path>,
) -> Result<HashMap<String, ProposalSet>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut sets = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let set: ProposalSet = serde_json::from_str(raw)
            .map_err(|source| ManifestError::BadRecord { line, source })?;
        if set.boxes.is_empty() {
            return Err(ManifestError::EmptyProposalSet {
                line,
                id: set.image_id,
            });
        }
        for p in &set.boxes {
            p.bbox
                .validate()
                .map_err(|source| ManifestError::BadBox { line, source })?;
        }
        if sets.contains_key(&set.image_id) {
            return Err(ManifestError::DuplicateImageId {
                line,
                id: set.image_id,
            });
        }
        sets.insert(set.image_id.clone(), set);
    }
    Ok(sets)
}

pub fn write_proposals(sets: &[ProposalSet], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in sets {
        out.push_str(&serde_json::to_string(s).expect("proposal sets serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The fully resolved configuration echoed into every report, so a result
/// can always be traced back to its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub sqrt_alpha: f64,
    pub weighting: bool,
    pub include_special_tokens: bool,
    pub iou_threshold: f64,
    pub tie_break: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub chosen_index: usize,
    pub chosen_box: BoundingBox,
    pub best_iou: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub error: String,
}

/// Accuracy report over one manifest. `accuracy` is exactly
/// `correct_count / sample_count`; errored samples are listed but excluded
/// from the denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ConfigEcho,
    pub sample_count: usize,
    pub correct_count: usize,
    pub accuracy: f64,
    pub errored_count: usize,
    pub samples: Vec<SampleOutcome>,
    pub errors: Vec<SampleFailure>,
}

pub fn write_report(
    report: &EvaluationReport,
    path: impl AsRef<Path>,
) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut out = serde_json::to_string_pretty(report).expect("reports serialize");
    out.push('\n');
    std::fs::write(path, out).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvaluationReport, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ManifestError::BadRecord { line: 0, source })
}

/// Writes crop plans as JSON lines, one plan per line in input order.
pub fn write_crop_plans(plans: &[CropPlan], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in plans {
        out.push_str(&serde_json::to_string(p).expect("crop plans serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_crop_plans(path: impl AsRef<Path>) -> Result<Vec<CropPlan>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut plans = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        plans.push(
            serde_json::from_str(raw).map_err(|source| ManifestError::BadRecord {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(plans)
}

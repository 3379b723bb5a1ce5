//! File formats: binary PGM/PPM images, `DPPF` feature files, and mask documents.
//!
//! # Feature file layout
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DPPF"
//! 4       4     version, u32 LE, = 1
//! 8       4     rows, u32 LE
//! 12      4     cols, u32 LE
//! 16      8·r·c values, f64 LE, row-major
//! ```
//!
//! # Mask documents
//!
//! JSON with keys sorted at every level and no insignificant whitespace, so
//! two documents describing the same mask are byte-identical:
//!
//! ```text
//! {"config":{"epsilon":1.0,"mask_ratio":0.75,"mode":"pixel","seed":7,"tau":0.8},
//!  "greedy_count":12,"grid":{"cols":14,"rows":14},"patch_size":16,
//!  "schema_version":1,"visible":[0,5,...]}
//! ```
//! (shown wrapped; the real document is a single line)

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::image::Image;
use crate::kernel::FeatureMatrix;
use crate::masking::{FeatureMode, MaskResult};

pub const FEATURE_MAGIC: &[u8; 4] = b"DPPF";
pub const FEATURE_VERSION: u32 = 1;
pub const MASK_SCHEMA_VERSION: u64 = 1;
const FEATURE_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{extra} unexpected bytes after the payload")]
    TrailingBytes { extra: usize },
    #[error("bad magic {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported feature file version {0}")]
    VersionUnsupported(u32),
    #[error("feature file must have at least one row and one column (got {rows}x{cols})")]
    EmptyFeatures { rows: u32, cols: u32 },
    #[error("value at ({row}, {col}) is not finite")]
    NonFiniteValue { row: usize, col: usize },
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("image is {image:?} but mask grid expects {grid:?} (height, width, channels)")]
    DimensionMismatch {
        image: (usize, usize, usize),
        grid: (usize, usize, usize),
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------- PGM / PPM

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn malformed(&self, reason: impl Into<String>) -> IoError {
        IoError::MalformedHeader {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, IoError> {
        let start_sep = self.pos;
        self.skip_separators();
        if self.pos == start_sep {
            return Err(self.malformed(format!("expected whitespace before {what}")));
        }
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(usize::from(b - b'0')))
                .ok_or_else(|| self.malformed(format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(if self.pos >= self.bytes.len() {
                self.malformed(format!("header ends before {what}"))
            } else {
                self.malformed(format!("expected decimal {what}"))
            });
        }
        Ok(value)
    }
}

/// Parses a binary PGM (`P5`) or PPM (`P6`) image with maxval 255.
pub fn parse_pnm(bytes: &[u8]) -> Result<Image, IoError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some([b'P', d]) if d.is_ascii_digit() => {
            return Err(IoError::UnsupportedFormat(format!(
                "netpbm variant P{}; only P5 and P6 are read",
                *d as char
            )))
        }
        _ => {
            return Err(IoError::UnsupportedFormat(
                "not a binary PGM/PPM file".into(),
            ))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_pos = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::MalformedHeader {
            offset: maxval_pos,
            reason: format!("zero-sized image {width}x{height}"),
        });
    }
    if maxval != 255 {
        return Err(IoError::UnsupportedFormat(format!(
            "maxval {maxval}; only 255 is read"
        )));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(cur.malformed("expected single whitespace after maxval")),
        None => return Err(cur.malformed("header ends after maxval")),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| cur.malformed("image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(IoError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(IoError::TrailingBytes {
            extra: payload.len() - expected,
        });
    }
    Ok(Image::new(height, width, channels, payload.to_vec()).expect("dimensions checked above"))
}

/// Encodes as `P5` (one channel) or `P6` (three channels), maxval 255.
pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image, IoError> {
    parse_pnm(&fs::read(path)?)
}

pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<(), IoError> {
    fs::write(path, encode_pnm(image))?;
    Ok(())
}

/// Gray level written over masked patches.
pub const OVERLAY_GRAY: u8 = 128;

/// Copies `image` with every masked patch painted [`OVERLAY_GRAY`].
pub fn overlay_image(image: &Image, result: &MaskResult) -> Result<Image, IoError> {
    let g = &result.grid;
    let have = (image.height(), image.width(), image.channels());
    let want = (g.image_height, g.image_width, g.channels);
    if have != want {
        return Err(IoError::DimensionMismatch {
            image: have,
            grid: want,
        });
    }
    let mut out = image.clone();
    let (w, ch, p) = (image.width(), image.channels(), g.patch_size);
    let pixels = out.pixels_mut();
    for &idx in &result.masked {
        let (pr, pc) = (idx / g.cols, idx % g.cols);
        for y in pr * p..(pr + 1) * p {
            let start = (y * w + pc * p) * ch;
            pixels[start..start + p * ch].fill(OVERLAY_GRAY);
        }
    }
    Ok(out)
}

pub fn write_overlay(
    image: &Image,
    result: &MaskResult,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    write_image(path, &overlay_image(image, result)?)
}

// ---------------------------------------------------------------- features

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    let rows = u32::try_from(f.count()).expect("row count fits in u32");
    let cols = u32::try_from(f.dim()).expect("column count fits in u32");
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + f.values().len() * 8);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix, IoError> {
    let magic_len = bytes.len().min(4);
    if bytes[..magic_len] != FEATURE_MAGIC[..magic_len] {
        return Err(IoError::BadMagic(bytes[..magic_len].to_vec()));
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(IoError::TruncatedPayload {
            expected: FEATURE_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(IoError::VersionUnsupported(version));
    }
    let (rows, cols) = (word(8), word(12));
    if rows == 0 || cols == 0 {
        return Err(IoError::EmptyFeatures { rows, cols });
    }
    let (r, c) = (rows as usize, cols as usize);
    let expected = r
        .checked_mul(c)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(FEATURE_HEADER_LEN))
        .unwrap_or(usize::MAX);
    if bytes.len() < expected {
        return Err(IoError::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(IoError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let values: Vec<f64> = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(IoError::NonFiniteValue {
            row: pos / c,
            col: pos % c,
        });
    }
    Ok(FeatureMatrix::new(r, c, values).expect("shape and finiteness checked above"))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix, IoError> {
    decode_features(&fs::read(path)?)
}

pub fn write_features(path: impl AsRef<Path>, f: &FeatureMatrix) -> Result<(), IoError> {
    fs::write(path, encode_features(f))?;
    Ok(())
}

// ---------------------------------------------------------------- masks

/// Serializable description of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskDocument {
    pub schema_version: u64,
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    pub mask_ratio: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: FeatureMode,
    pub visible: Vec<usize>,
    pub greedy_count: usize,
}

fn violation(path: impl Into<String>, reason: impl Into<String>) -> IoError {
    IoError::SchemaViolation {
        path: path.into(),
        reason: reason.into(),
    }
}

impl MaskDocument {
    pub fn from_result(result: &MaskResult) -> Self {
        MaskDocument {
            schema_version: MASK_SCHEMA_VERSION,
            rows: result.grid.rows,
            cols: result.grid.cols,
            patch_size: result.grid.patch_size,
            mask_ratio: result.config.mask_ratio,
            tau: result.config.purge_ratio,
            epsilon: result.config.epsilon,
            seed: result.config.seed,
            mode: result.config.mode,
            visible: result.visible.clone(),
            greedy_count: result.greedy_count,
        }
    }

    /// Checks every document invariant, reporting the first offending field.
    pub fn validate(&self) -> Result<(), IoError> {
        if self.schema_version != MASK_SCHEMA_VERSION {
            return Err(violation(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        if self.rows == 0 {
            return Err(violation("grid.rows", "must be at least 1"));
        }
        if self.cols == 0 {
            return Err(violation("grid.cols", "must be at least 1"));
        }
        if self.patch_size == 0 {
            return Err(violation("patch_size", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return Err(violation("config.mask_ratio", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(violation("config.tau", "must lie in [0, 1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(violation("config.epsilon", "must be positive"));
        }
        let total = self
            .rows
            .checked_mul(self.cols)
            .ok_or_else(|| violation("grid", "rows·cols overflows"))?;
        if self.visible.is_empty() {
            return Err(violation("visible", "must not be empty"));
        }
        for (i, &v) in self.visible.iter().enumerate() {
            if v >= total {
                return Err(violation(
                    format!("visible[{i}]"),
                    format!("{v} is not below rows·cols = {total}"),
                ));
            }
            if i > 0 && v <= self.visible[i - 1] {
                let reason = if v == self.visible[i - 1] {
                    "duplicate index"
                } else {
                    "not ascending"
                };
                return Err(violation(format!("visible[{i}]"), reason));
            }
        }
        if self.greedy_count > self.visible.len() {
            return Err(violation(
                "greedy_count",
                "exceeds the number of visible patches",
            ));
        }
        Ok(())
    }

    /// Canonical serialization: sorted keys, no insignificant whitespace.
    pub fn to_canonical_string(&self) -> String {
        let value = json!({
            "schema_version": self.schema_version,
            "grid": { "rows": self.rows, "cols": self.cols },
            "patch_size": self.patch_size,
            "config": {
                "mask_ratio": self.mask_ratio,
                "tau": self.tau,
                "epsilon": self.epsilon,
                "seed": self.seed,
                "mode": self.mode.as_str(),
            },
            "visible": self.visible,
            "greedy_count": self.greedy_count,
        });
        // serde_json's default map is a BTreeMap, so keys come out sorted
        serde_json::to_string(&value).expect("JSON values always serialize")
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let root: Value = serde_json::from_str(text).map_err(|e| violation("$", e.to_string()))?;
        let obj = as_object(&root, "$")?;
        expect_keys(
            obj,
            "",
            &[
                "config",
                "greedy_count",
                "grid",
                "patch_size",
                "schema_version",
                "visible",
            ],
        )?;
        let grid = as_object(&obj["grid"], "grid")?;
        expect_keys(grid, "grid.", &["cols", "rows"])?;
        let config = as_object(&obj["config"], "config")?;
        expect_keys(
            config,
            "config.",
            &["epsilon", "mask_ratio", "mode", "seed", "tau"],
        )?;

        let mode = config["mode"]
            .as_str()
            .ok_or_else(|| violation("config.mode", "expected a string"))?
            .parse::<FeatureMode>()
            .map_err(|e| violation("config.mode", e))?;
        let visible = obj["visible"]
            .as_array()
            .ok_or_else(|| violation("visible", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, v)| as_usize(v, &format!("visible[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let doc = MaskDocument {
            schema_version: as_u64(&obj["schema_version"], "schema_version")?,
            rows: as_usize(&grid["rows"], "grid.rows")?,
            cols: as_usize(&grid["cols"], "grid.cols")?,
            patch_size: as_usize(&obj["patch_size"], "patch_size")?,
            mask_ratio: as_f64(&config["mask_ratio"], "config.mask_ratio")?,
            tau: as_f64(&config["tau"], "config.tau")?,
            epsilon: as_f64(&config["epsilon"], "config.epsilon")?,
            seed: as_u64(&config["seed"], "config.seed")?,
            mode,
            visible,
            greedy_count: as_usize(&obj["greedy_count"], "greedy_count")?,
        };
        doc.validate()?;
        Ok(doc)
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, IoError> {
    v.as_object()
        .ok_or_else(|| violation(path, "expected an object"))
}

fn expect_keys(obj: &Map<String, Value>, prefix: &str, keys: &[&str]) -> Result<(), IoError> {
    for k in keys {
        if !obj.contains_key(*k) {
            return Err(violation(format!("{prefix}{k}"), "missing"));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(violation(format!("{prefix}{extra}"), "unknown field"));
    }
    Ok(())
}

fn as_u64(v: &Value, path: &str) -> Result<u64, IoError> {
    v.as_u64()
        .ok_or_else(|| violation(path, "expected a nonnegative integer"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize, IoError> {
    usize::try_from(as_u64(v, path)?).map_err(|_| violation(path, "integer too large"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, IoError> {
    v.as_f64()
        .ok_or_else(|| violation(path, "expected a number"))
}

pub fn write_mask(path: impl AsRef<Path>, doc: &MaskDocument) -> Result<(), IoError> {
    doc.validate()?;
    fs::write(path, doc.to_canonical_string())?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskDocument, IoError> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| violation("$", e.to_string()))?;
    MaskDocument::parse(text)
}

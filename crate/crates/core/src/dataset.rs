//! Data model for paired multi-spectral face collections: the manifest
//! text format, the embedding binary format, and the pluggable interfaces
//! behind which neural detectors, synthesizers, and feature extractors sit.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::geometry::{KeypointSet, Point2, PointSchema};
use crate::image::Image;
use crate::losses::{Embedding, LossError};
use crate::verification::fuse_flip;
use crate::ModelError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("manifest invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: not an embedding file (bad magic)")]
    MagicMismatch { path: String },
    #[error("{path}: truncated embedding file: expected {expected} bytes, got {got}")]
    Truncated { path: String, expected: usize, got: usize },
    #[error("{path}: embedding index {index} out of range (file holds {count})")]
    IndexOutOfRange { path: String, index: usize, count: usize },
    #[error("subject {subject} frame {frame} has no embedding reference")]
    MissingEmbedding { subject: String, frame: i64 },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), source }
}

macro_rules! manifest_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some(Self::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

manifest_enum!(Split { Train => "TRAIN", Eval => "EVAL" });
manifest_enum!(Spectrum { Visible => "VISIBLE", Thermal => "THERMAL" });
manifest_enum!(Pose { Frontal => "FRONTAL", Profile => "PROFILE" });
manifest_enum!(Location { Indoor => "INDOOR", Outdoor => "OUTDOOR" });

/// Pointer to one vector inside an embedding file, written `path:index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingRef {
    pub path: String,
    pub index: usize,
}

impl EmbeddingRef {
    pub fn parse(s: &str) -> Option<EmbeddingRef> {
        let (path, index) = s.rsplit_once(':')?;
        if path.is_empty() {
            return None;
        }
        Some(EmbeddingRef { path: path.to_string(), index: index.parse().ok()? })
    }
}

impl fmt::Display for EmbeddingRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path, self.index)
    }
}

/// One captured frame: an image path relative to the manifest directory,
/// optional ground-truth keypoints, and an optional embedding reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: i64,
    pub image: String,
    pub keypoints: Option<KeypointSet>,
    pub embedding: Option<EmbeddingRef>,
}

/// One continuous capture of a subject under fixed conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub spectrum: Spectrum,
    pub pose: Pose,
    pub location: Location,
    pub range_m: f64,
    pub tags: Vec<String>,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub split: Split,
    pub sequences: Vec<Sequence>,
}

/// The whole collection. Subjects belong to exactly one split, so the
/// TRAIN and EVAL identity sets are disjoint by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub subjects: Vec<Subject>,
}

fn plain_token(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace)
}

impl DatasetManifest {
    /// Checks every structural invariant, naming the first violation.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for subject in &self.subjects {
            if !plain_token(&subject.id) {
                return Err(DatasetError::Invariant(format!(
                    "subject id {:?} must be nonempty without whitespace",
                    subject.id
                )));
            }
            if !seen.insert(&subject.id) {
                return Err(DatasetError::Invariant(format!("duplicate subject id {}", subject.id)));
            }
            for sequence in &subject.sequences {
                if !(sequence.range_m.is_finite() && sequence.range_m >= 0.0) {
                    return Err(DatasetError::Invariant(format!(
                        "subject {}: range_m must be finite and nonnegative, got {}",
                        subject.id, sequence.range_m
                    )));
                }
                for tag in &sequence.tags {
                    if !plain_token(tag) || tag.contains(',') {
                        return Err(DatasetError::Invariant(format!(
                            "subject {}: tag {:?} must be nonempty without whitespace or commas",
                            subject.id, tag
                        )));
                    }
                }
                let mut frame_ids = HashSet::new();
                for frame in &sequence.frames {
                    if !frame_ids.insert(frame.id) {
                        return Err(DatasetError::Invariant(format!(
                            "subject {}: duplicate frame id {} within a sequence",
                            subject.id, frame.id
                        )));
                    }
                    if !plain_token(&frame.image) {
                        return Err(DatasetError::Invariant(format!(
                            "subject {} frame {}: image path must be nonempty without whitespace",
                            subject.id, frame.id
                        )));
                    }
                    if let Some(kp) = &frame.keypoints {
                        if kp.schema() != PointSchema::FivePoint {
                            return Err(DatasetError::Invariant(format!(
                                "subject {} frame {}: manifest keypoints must use the five-point layout",
                                subject.id, frame.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical text serialization; the same manifest always produces the
    /// same bytes.
    pub fn to_text(&self) -> String {
        let mut out = String::from("manifest v1\n");
        for subject in &self.subjects {
            out.push_str(&format!("subject {} split={}\n", subject.id, subject.split));
            for sequence in &subject.sequences {
                out.push_str(&format!(
                    "sequence spectrum={} pose={} location={} range_m={}",
                    sequence.spectrum, sequence.pose, sequence.location, sequence.range_m
                ));
                if !sequence.tags.is_empty() {
                    out.push_str(&format!(" tags={}", sequence.tags.join(",")));
                }
                out.push('\n');
                for frame in &sequence.frames {
                    out.push_str(&format!("frame id={} image={}", frame.id, frame.image));
                    if let Some(kp) = &frame.keypoints {
                        let coords: Vec<String> = kp
                            .points()
                            .iter()
                            .flat_map(|p| [p.x.to_string(), p.y.to_string()])
                            .collect();
                        out.push_str(&format!(" kp={}", coords.join(",")));
                    }
                    if let Some(e) = &frame.embedding {
                        out.push_str(&format!(" emb={e}"));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
        fs::write(path, self.to_text()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let manifest = Self::parse_text(&text, &path.display().to_string())?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn parse_text(text: &str, path: &str) -> Result<Self, DatasetError> {
        let parse_err = |line: usize, msg: String| DatasetError::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == "manifest v1" => {}
            Some((n, l)) => {
                return Err(parse_err(n + 1, format!("expected `manifest v1`, got {l:?}")))
            }
            None => return Err(parse_err(1, "empty manifest".to_string())),
        }

        let mut manifest = DatasetManifest::default();
        for (n, line) in lines {
            let line_no = n + 1;
            let mut tokens = line.split_whitespace();
            let kind = tokens.next().expect("blank lines were filtered");
            let mut fields = HashMap::new();
            let mut positional = Vec::new();
            for token in tokens {
                match token.split_once('=') {
                    Some((key, value)) => {
                        if fields.insert(key, value).is_some() {
                            return Err(parse_err(line_no, format!("duplicate field {key:?}")));
                        }
                    }
                    None => positional.push(token),
                }
            }
            let mut take = |key: &str| fields.remove(key);
            match kind {
                "subject" => {
                    if positional.len() != 1 {
                        return Err(parse_err(line_no, "expected `subject ID split=...`".to_string()));
                    }
                    let split_text = take("split")
                        .ok_or_else(|| parse_err(line_no, "subject line missing split=".to_string()))?;
                    let split = Split::parse(split_text).ok_or_else(|| {
                        parse_err(line_no, format!("unknown split {split_text:?}"))
                    })?;
                    if !fields.is_empty() {
                        let key = fields.keys().next().unwrap();
                        return Err(parse_err(line_no, format!("unknown field {key:?}")));
                    }
                    manifest.subjects.push(Subject {
                        id: positional[0].to_string(),
                        split,
                        sequences: Vec::new(),
                    });
                }
                "sequence" => {
                    if !positional.is_empty() {
                        return Err(parse_err(line_no, format!("unexpected token {:?}", positional[0])));
                    }
                    let subject = manifest.subjects.last_mut().ok_or_else(|| {
                        parse_err(line_no, "sequence line before any subject".to_string())
                    })?;
                    let req = |field: Option<&str>, name: &str| {
                        field.map(str::to_string).ok_or_else(|| {
                            parse_err(line_no, format!("sequence line missing {name}="))
                        })
                    };
                    let spectrum_text = req(take("spectrum"), "spectrum")?;
                    let pose_text = req(take("pose"), "pose")?;
                    let location_text = req(take("location"), "location")?;
                    let range_text = req(take("range_m"), "range_m")?;
                    let tags = match take("tags") {
                        Some(t) => t.split(',').map(str::to_string).collect(),
                        None => Vec::new(),
                    };
                    if !fields.is_empty() {
                        let key = fields.keys().next().unwrap();
                        return Err(parse_err(line_no, format!("unknown field {key:?}")));
                    }
                    subject.sequences.push(Sequence {
                        spectrum: Spectrum::parse(&spectrum_text).ok_or_else(|| {
                            parse_err(line_no, format!("unknown spectrum {spectrum_text:?}"))
                        })?,
                        pose: Pose::parse(&pose_text).ok_or_else(|| {
                            parse_err(line_no, format!("unknown pose {pose_text:?}"))
                        })?,
                        location: Location::parse(&location_text).ok_or_else(|| {
                            parse_err(line_no, format!("unknown location {location_text:?}"))
                        })?,
                        range_m: range_text.parse().map_err(|_| {
                            parse_err(line_no, format!("bad range_m {range_text:?}"))
                        })?,
                        tags,
                        frames: Vec::new(),
                    });
                }
                "frame" => {
                    if !positional.is_empty() {
                        return Err(parse_err(line_no, format!("unexpected token {:?}", positional[0])));
                    }
                    let sequence = manifest
                        .subjects
                        .last_mut()
                        .and_then(|s| s.sequences.last_mut())
                        .ok_or_else(|| {
                            parse_err(line_no, "frame line before any sequence".to_string())
                        })?;
                    let id_text = take("id")
                        .ok_or_else(|| parse_err(line_no, "frame line missing id=".to_string()))?;
                    let image = take("image")
                        .ok_or_else(|| parse_err(line_no, "frame line missing image=".to_string()))?
                        .to_string();
                    let keypoints = match take("kp") {
                        Some(text) => {
                            let coords: Result<Vec<f64>, _> =
                                text.split(',').map(str::parse).collect();
                            let coords = coords.map_err(|_| {
                                parse_err(line_no, format!("bad kp coordinates {text:?}"))
                            })?;
                            if coords.len() != 10 {
                                return Err(parse_err(
                                    line_no,
                                    format!("kp needs 10 comma-separated numbers, got {}", coords.len()),
                                ));
                            }
                            let points =
                                coords.chunks(2).map(|c| Point2::new(c[0], c[1])).collect();
                            Some(KeypointSet::new(PointSchema::FivePoint, points).map_err(|e| {
                                parse_err(line_no, e.to_string())
                            })?)
                        }
                        None => None,
                    };
                    let embedding = match take("emb") {
                        Some(text) => Some(EmbeddingRef::parse(text).ok_or_else(|| {
                            parse_err(line_no, format!("bad embedding reference {text:?}"))
                        })?),
                        None => None,
                    };
                    if !fields.is_empty() {
                        let key = fields.keys().next().unwrap();
                        return Err(parse_err(line_no, format!("unknown field {key:?}")));
                    }
                    sequence.frames.push(Frame {
                        id: id_text
                            .parse()
                            .map_err(|_| parse_err(line_no, format!("bad frame id {id_text:?}")))?,
                        image,
                        keypoints,
                        embedding,
                    });
                }
                other => {
                    return Err(parse_err(line_no, format!("unknown record type {other:?}")));
                }
            }
        }
        Ok(manifest)
    }
}

const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Binary embedding store: magic `EMB1`, little-endian u32 count and dim,
/// then `count * dim` little-endian 32-bit floats, row-major.
pub fn write_embeddings(embeddings: &[Embedding], path: &Path) -> Result<(), DatasetError> {
    let dim = embeddings.first().map_or(0, Embedding::dim);
    for e in embeddings {
        if e.dim() != dim {
            return Err(LossError::DimensionMismatch { left: e.dim(), right: dim }.into());
        }
    }
    let mut bytes = Vec::with_capacity(12 + 4 * dim * embeddings.len());
    bytes.extend_from_slice(EMB_MAGIC);
    bytes.extend_from_slice(&(embeddings.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    for e in embeddings {
        for &v in e.values() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<Vec<Embedding>, DatasetError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    if bytes.len() < 12 {
        return Err(DatasetError::Truncated { path: display, expected: 12, got: bytes.len() });
    }
    if &bytes[0..4] != EMB_MAGIC {
        return Err(DatasetError::MagicMismatch { path: display });
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + 4 * count * dim;
    if bytes.len() != expected {
        return Err(DatasetError::Truncated { path: display, expected, got: bytes.len() });
    }
    let mut embeddings = Vec::with_capacity(count);
    for row in 0..count {
        let start = 12 + 4 * dim * row;
        let values: Vec<f64> = bytes[start..start + 4 * dim]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        embeddings.push(Embedding::new(values)?);
    }
    Ok(embeddings)
}

/// Caching resolver for `path:index` embedding references; paths are
/// interpreted relative to the manifest's directory.
pub struct EmbeddingStore {
    root: PathBuf,
    cache: HashMap<String, Vec<Embedding>>,
}

impl EmbeddingStore {
    pub fn new(root: &Path) -> Self {
        EmbeddingStore { root: root.to_path_buf(), cache: HashMap::new() }
    }

    pub fn get(&mut self, r: &EmbeddingRef) -> Result<Embedding, DatasetError> {
        if !self.cache.contains_key(&r.path) {
            let loaded = read_embeddings(&self.root.join(&r.path))?;
            self.cache.insert(r.path.clone(), loaded);
        }
        let file = &self.cache[&r.path];
        file.get(r.index).cloned().ok_or_else(|| DatasetError::IndexOutOfRange {
            path: r.path.clone(),
            index: r.index,
            count: file.len(),
        })
    }
}

/// Maps an image to a fixed-dimension feature vector. Implementations wrap
/// the face encoder; a deterministic projection double ships for tests.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;

    fn extract(&self, image: &Image) -> Result<Embedding, ModelError>;

    /// Double-flip fusion: the mean of the embeddings of the image and its
    /// horizontal mirror, re-normalized.
    fn extract_fused(&self, image: &Image) -> Result<Embedding, ModelError> {
        let original = self.extract(image)?;
        let flipped = self.extract(&image.flip_horizontal())?;
        fuse_flip(&original, &flipped).map_err(|e| Box::new(e) as ModelError)
    }
}

/// Maps an aligned thermal image to a visible-spectrum estimate.
/// Implementations wrap the synthesis network; passthrough and linear-map
/// doubles ship for tests.
pub trait SynthesisModel {
    fn translate(&self, thermal: &Image) -> Result<Image, ModelError>;
}

/// Test double: pools the image onto a coarse grid and applies a seeded
/// random linear projection, then normalizes. Pure and process-independent
/// for a given seed.
pub struct ProjectionExtractor {
    dim: usize,
    weights: Vec<f64>,
}

const POOL_GRID: usize = 8;
const POOL_INPUTS: usize = POOL_GRID * POOL_GRID + 1;

impl ProjectionExtractor {
    pub fn new(dim: usize, seed: u64) -> Result<Self, LossError> {
        if dim == 0 {
            return Err(LossError::InvalidDimensions);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let weights = (0..dim * POOL_INPUTS).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(ProjectionExtractor { dim, weights })
    }
}

impl FeatureExtractor for ProjectionExtractor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, image: &Image) -> Result<Embedding, ModelError> {
        let mut inputs = [0.0; POOL_INPUTS];
        // constant term so blank images still map to a nonzero direction
        inputs[POOL_INPUTS - 1] = 1.0;
        for gy in 0..POOL_GRID {
            for gx in 0..POOL_GRID {
                let sx = (gx as f64 + 0.5) * image.width() as f64 / POOL_GRID as f64 - 0.5;
                let sy = (gy as f64 + 0.5) * image.height() as f64 / POOL_GRID as f64 - 0.5;
                let mut v = 0.0;
                for c in 0..image.channels() {
                    v += image.sample_bilinear(sx, sy, c);
                }
                inputs[gy * POOL_GRID + gx] = v / image.channels() as f64;
            }
        }
        let values: Vec<f64> = (0..self.dim)
            .map(|r| {
                let row = &self.weights[r * POOL_INPUTS..(r + 1) * POOL_INPUTS];
                row.iter().zip(&inputs).map(|(w, x)| w * x).sum()
            })
            .collect();
        let embedding = Embedding::new(values).map_err(|e| Box::new(e) as ModelError)?;
        embedding.normalized().map_err(|e| Box::new(e) as ModelError)
    }
}

/// Test double returning the input unchanged.
pub struct PassthroughSynthesis;

impl SynthesisModel for PassthroughSynthesis {
    fn translate(&self, thermal: &Image) -> Result<Image, ModelError> {
        Ok(thermal.clone())
    }
}

/// Test double applying `v -> gain*v + bias` per sample, clamped to [0, 1].
/// `LinearMapSynthesis::inverting()` gives the `1 - v` intensity remap that
/// relates the two synthetic spectra.
pub struct LinearMapSynthesis {
    pub gain: f64,
    pub bias: f64,
}

impl LinearMapSynthesis {
    pub fn inverting() -> Self {
        LinearMapSynthesis { gain: -1.0, bias: 1.0 }
    }
}

impl SynthesisModel for LinearMapSynthesis {
    fn translate(&self, thermal: &Image) -> Result<Image, ModelError> {
        let data = thermal
            .data()
            .iter()
            .map(|v| (self.gain * v + self.bias).clamp(0.0, 1.0))
            .collect();
        Image::new(thermal.width(), thermal.height(), thermal.channels(), data)
            .map_err(|e| Box::new(e) as ModelError)
    }
}

//! Deterministic synthetic paired-spectrum generator. Renders abstract
//! landmark-bearing patterns (not faces): downstream computations depend
//! only on keypoints and embeddings, so the generator guarantees exactly
//! those — known keypoints under a yaw articulation sweep, a thermal
//! stream that is an intensity inversion of the visible content with a
//! known temporal offset, and identity embeddings whose pose perturbation
//! grows with |yaw| so profile cohorts score worse than frontal ones.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::dataset::{
    DatasetError, DatasetManifest, EmbeddingRef, Frame, Location, Pose, Sequence, Spectrum, Split,
    Subject, write_embeddings,
};
use crate::geometry::{CanonicalTemplate, GeometryError, KeypointSet, Point2, PointSchema};
use crate::image::{Image, ImageError};
use crate::landmarks::{write_keypoint_file, KeypointRecord, LandmarkError};
use crate::losses::{Embedding, LossError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no {what} at index {index} (have {count})")]
    BadIndex { what: &'static str, index: usize, count: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Generator parameters. Counts are per subject and per sequence; every
/// subject gets the full spectrum x pose x location grid of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub frames_per_sequence: usize,
    /// Total yaw sweep reach in degrees; head articulation stays within
    /// +/- this angle.
    pub articulation_amplitude_deg: f64,
    /// Standard deviation of the keypoint annotation noise, in pixels.
    pub noise_sigma_px: f64,
    pub embedding_dim: usize,
    pub seed: u64,
    /// Rendered frames are square with this side length.
    pub image_size: usize,
    /// The thermal stream lags the visible stream by this many frames.
    pub temporal_offset: i64,
    /// Leading fraction of subjects assigned to the TRAIN split.
    pub train_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_subjects: 40,
            frames_per_sequence: 12,
            articulation_amplitude_deg: 60.0,
            noise_sigma_px: 0.25,
            embedding_dim: 64,
            seed: 0,
            image_size: 96,
            temporal_offset: 3,
            train_fraction: 0.8,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".to_string());
        }
        if self.frames_per_sequence == 0 {
            return bad("frames_per_sequence must be positive".to_string());
        }
        if !self.articulation_amplitude_deg.is_finite()
            || self.articulation_amplitude_deg <= 0.0
            || self.articulation_amplitude_deg >= 90.0
        {
            return bad(format!(
                "articulation_amplitude_deg must lie in (0, 90), got {}",
                self.articulation_amplitude_deg
            ));
        }
        if !self.noise_sigma_px.is_finite() || self.noise_sigma_px < 0.0 {
            return bad(format!("noise_sigma_px must be nonnegative, got {}", self.noise_sigma_px));
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive".to_string());
        }
        if self.image_size < 16 {
            return bad(format!("image_size must be at least 16, got {}", self.image_size));
        }
        if self.temporal_offset < 0 {
            return bad(format!("temporal_offset must be nonnegative, got {}", self.temporal_offset));
        }
        if !self.train_fraction.is_finite() || !(0.0..=1.0).contains(&self.train_fraction) {
            return bad(format!("train_fraction must lie in [0, 1], got {}", self.train_fraction));
        }
        Ok(())
    }
}

/// Per-subject sequence grid, visible/thermal adjacent within each
/// condition.
const SEQUENCE_LAYOUT: [(Pose, Location, Spectrum); 8] = [
    (Pose::Frontal, Location::Indoor, Spectrum::Visible),
    (Pose::Frontal, Location::Indoor, Spectrum::Thermal),
    (Pose::Frontal, Location::Outdoor, Spectrum::Visible),
    (Pose::Frontal, Location::Outdoor, Spectrum::Thermal),
    (Pose::Profile, Location::Indoor, Spectrum::Visible),
    (Pose::Profile, Location::Indoor, Spectrum::Thermal),
    (Pose::Profile, Location::Outdoor, Spectrum::Visible),
    (Pose::Profile, Location::Outdoor, Spectrum::Thermal),
];

/// The five landmarks of the canonical template, re-centered on their
/// centroid and scaled by the template side, plus invented depths so yaw
/// rotation moves the nose more than the eyes.
const MODEL_XY: [[f64; 2]; 5] = [
    [-0.15625, -0.15625],
    [0.15625, -0.15625],
    [0.0, 0.0],
    [-0.125, 0.15625],
    [0.125, 0.15625],
];
const MODEL_Z: [f64; 5] = [0.12, 0.12, 0.35, 0.2, 0.2];

const BLOB_AMPLITUDE: [f64; 5] = [0.55, 0.55, 0.7, 0.5, 0.5];
const BLOB_SIGMA_FRAC: [f64; 5] = [0.035, 0.035, 0.05, 0.04, 0.04];

/// Embedding perturbation magnitude at full profile; scales with
/// sin(|yaw|)^3 so frontal frames stay almost clean while deep-profile
/// frames drift far enough to overlap the impostor score range.
const POSE_PERTURB: f64 = 4.0;
/// Per-frame isotropic embedding noise.
const EMB_NOISE: f64 = 0.05;

#[derive(Debug, Clone)]
struct StyleParams {
    base: f64,
    freq_x: f64,
    freq_y: f64,
    phase: f64,
}

#[derive(Debug, Clone)]
struct SubjectParams {
    latent: Vec<f64>,
    style: StyleParams,
    scale: f64,
    center: (f64, f64),
}

/// In-memory generated collection. Images are rendered on demand; the
/// manifest, ground-truth keypoints (inline), and embeddings are eager.
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub embeddings: Vec<Embedding>,
    pub temporal_offset: i64,
    config: SyntheticConfig,
    subjects: Vec<SubjectParams>,
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

fn yaw_degrees(
    config: &SyntheticConfig,
    subject_index: usize,
    pose: Pose,
    location: Location,
    state: i64,
) -> f64 {
    let amplitude = config.articulation_amplitude_deg;
    let frames = config.frames_per_sequence;
    match pose {
        Pose::Frontal => {
            // symmetric sweep through exact frontal at the midpoint
            let lin = if frames > 1 {
                2.0 * state as f64 / (frames as f64 - 1.0) - 1.0
            } else {
                0.0
            };
            0.4 * amplitude * lin
        }
        Pose::Profile => {
            // one-sided sweep deepening toward full profile; the side
            // alternates per subject and location but matches across
            // spectra so paired sequences articulate together
            let u = if frames > 1 { state as f64 / (frames as f64 - 1.0) } else { 0.0 };
            let location_index = match location {
                Location::Indoor => 0,
                Location::Outdoor => 1,
            };
            let side = if (subject_index + location_index) % 2 == 0 { 1.0 } else { -1.0 };
            side * amplitude * (0.55 + 0.45 * u)
        }
    }
}

fn project_landmarks(subject: &SubjectParams, yaw_rad: f64) -> [Point2; 5] {
    let (sin, cos) = yaw_rad.sin_cos();
    std::array::from_fn(|i| {
        let x = MODEL_XY[i][0] * cos + MODEL_Z[i] * sin;
        let y = MODEL_XY[i][1];
        Point2::new(subject.center.0 + subject.scale * x, subject.center.1 + subject.scale * y)
    })
}

/// Builds the whole collection in memory. Deterministic: the same config
/// always produces the same manifest, keypoints, and embeddings, and
/// [`SyntheticDataset::render`] the same pixels.
pub fn synthesize(config: &SyntheticConfig) -> Result<SyntheticDataset, SynthError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let size = config.image_size as f64;
    let train_count =
        ((config.n_subjects as f64 * config.train_fraction).round() as usize).min(config.n_subjects);

    let mut subjects = Vec::with_capacity(config.n_subjects);
    let mut manifest = DatasetManifest::default();
    let mut embeddings = Vec::new();

    for subject_index in 0..config.n_subjects {
        let latent = {
            let raw: Vec<f64> = (0..config.embedding_dim).map(|_| standard_normal(&mut rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            raw.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
        };
        let style = StyleParams {
            base: rng.gen_range(0.15..0.3),
            freq_x: rng.gen_range(0.7..2.3),
            freq_y: rng.gen_range(0.7..2.3),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        };
        let scale = size * rng.gen_range(0.95..1.15);
        let center = (
            size * (0.5 + rng.gen_range(-0.04..0.04)),
            size * (0.5 + rng.gen_range(-0.04..0.04)),
        );
        let params = SubjectParams { latent, style, scale, center };

        let subject_id = format!("S{subject_index:04}");
        let split = if subject_index < train_count { Split::Train } else { Split::Eval };
        let mut sequences = Vec::with_capacity(SEQUENCE_LAYOUT.len());
        for &(pose, location, spectrum) in &SEQUENCE_LAYOUT {
            let dir_name = format!(
                "{}-{}-{}",
                spectrum.as_str().to_lowercase(),
                pose.as_str().to_lowercase(),
                location.as_str().to_lowercase()
            );
            let range_m = match location {
                Location::Indoor => 1.5,
                Location::Outdoor => 100.0 * (1 + subject_index % 4) as f64,
            };
            let mut frames = Vec::with_capacity(config.frames_per_sequence);
            for t in 0..config.frames_per_sequence as i64 {
                let state = match spectrum {
                    Spectrum::Visible => t,
                    Spectrum::Thermal => t - config.temporal_offset,
                };
                let yaw = yaw_degrees(config, subject_index, pose, location, state).to_radians();
                let truth = project_landmarks(&params, yaw);
                let noisy: Vec<Point2> = truth
                    .iter()
                    .map(|p| {
                        let nx = standard_normal(&mut rng);
                        let ny = standard_normal(&mut rng);
                        Point2::new(
                            p.x + config.noise_sigma_px * nx,
                            p.y + config.noise_sigma_px * ny,
                        )
                    })
                    .collect();
                let keypoints = KeypointSet::new(PointSchema::FivePoint, noisy)?;

                let perturb = POSE_PERTURB * yaw.sin().abs().powi(3);
                let direction = {
                    let raw: Vec<f64> =
                        (0..config.embedding_dim).map(|_| standard_normal(&mut rng)).collect();
                    let norm =
                        raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    raw.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
                };
                let values: Vec<f64> = params
                    .latent
                    .iter()
                    .zip(&direction)
                    .map(|(u, d)| u + perturb * d + EMB_NOISE * standard_normal(&mut rng))
                    .collect();
                let embedding = Embedding::new(values)?.normalized()?;
                let embedding_index = embeddings.len();
                embeddings.push(embedding);

                frames.push(Frame {
                    id: t,
                    image: format!("images/{subject_id}/{dir_name}/{t:06}.pgm"),
                    keypoints: Some(keypoints),
                    embedding: Some(EmbeddingRef {
                        path: "embeddings.emb".to_string(),
                        index: embedding_index,
                    }),
                });
            }
            sequences.push(Sequence { spectrum, pose, location, range_m, tags: Vec::new(), frames });
        }
        manifest.subjects.push(Subject { id: subject_id, split, sequences });
        subjects.push(params);
    }

    manifest.validate()?;
    Ok(SyntheticDataset {
        manifest,
        embeddings,
        temporal_offset: config.temporal_offset,
        config: config.clone(),
        subjects,
    })
}

impl SyntheticDataset {
    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    fn render_pattern(&self, subject: &SubjectParams, yaw_rad: f64) -> Image {
        let size = self.config.image_size;
        let w = size as f64;
        let points = project_landmarks(subject, yaw_rad);
        let sigmas: Vec<f64> = BLOB_SIGMA_FRAC.iter().map(|f| f * w).collect();
        let mut data = Vec::with_capacity(size * size);
        for py in 0..size {
            for px in 0..size {
                let x = px as f64;
                let y = py as f64;
                let mut v = subject.style.base
                    + 0.08
                        * (std::f64::consts::TAU * subject.style.freq_x * x / w
                            + subject.style.phase)
                            .sin()
                        * (std::f64::consts::TAU * subject.style.freq_y * y / w).cos();
                for ((p, amp), sigma) in points.iter().zip(BLOB_AMPLITUDE).zip(&sigmas) {
                    let dx = x - p.x;
                    let dy = y - p.y;
                    v += amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                }
                data.push(v.clamp(0.0, 1.0));
            }
        }
        Image::new(size, size, 1, data).expect("rendered values are clamped to [0, 1]")
    }

    /// Renders one frame's pixels. Thermal frames show the visible content
    /// of their (offset-shifted) state through the `1 - v` intensity remap.
    pub fn render(
        &self,
        subject_index: usize,
        sequence_index: usize,
        frame_position: usize,
    ) -> Result<Image, SynthError> {
        let subject = self.subjects.get(subject_index).ok_or(SynthError::BadIndex {
            what: "subject",
            index: subject_index,
            count: self.subjects.len(),
        })?;
        if sequence_index >= SEQUENCE_LAYOUT.len() {
            return Err(SynthError::BadIndex {
                what: "sequence",
                index: sequence_index,
                count: SEQUENCE_LAYOUT.len(),
            });
        }
        if frame_position >= self.config.frames_per_sequence {
            return Err(SynthError::BadIndex {
                what: "frame",
                index: frame_position,
                count: self.config.frames_per_sequence,
            });
        }
        let (pose, location, spectrum) = SEQUENCE_LAYOUT[sequence_index];
        let t = frame_position as i64;
        let state = match spectrum {
            Spectrum::Visible => t,
            Spectrum::Thermal => t - self.temporal_offset,
        };
        let yaw = yaw_degrees(&self.config, subject_index, pose, location, state).to_radians();
        let image = self.render_pattern(subject, yaw);
        Ok(match spectrum {
            Spectrum::Visible => image,
            Spectrum::Thermal => {
                let data = image.data().iter().map(|v| 1.0 - v).collect();
                Image::new(image.width(), image.height(), 1, data)?
            }
        })
    }
}

/// Materializes a generated collection under `out_dir`: `manifest.txt`,
/// `template.txt`, `embeddings.emb`, rendered `images/`, and per-sequence
/// keypoint `tracks/`.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    out_dir: &Path,
) -> Result<SyntheticDataset, SynthError> {
    let dataset = synthesize(config)?;
    fs::create_dir_all(out_dir).map_err(|e| SynthError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    CanonicalTemplate::default().save(&out_dir.join("template.txt"))?;
    write_embeddings(&dataset.embeddings, &out_dir.join("embeddings.emb"))?;
    dataset.manifest.save(&out_dir.join("manifest.txt"))?;
    for (si, subject) in dataset.manifest.subjects.iter().enumerate() {
        for (qi, sequence) in subject.sequences.iter().enumerate() {
            let mut records = Vec::with_capacity(sequence.frames.len());
            for (fi, frame) in sequence.frames.iter().enumerate() {
                let image = dataset.render(si, qi, fi)?;
                image.write_pnm(&out_dir.join(&frame.image))?;
                records.push(KeypointRecord {
                    frame_id: frame.id,
                    keypoints: frame.keypoints.clone().expect("generator fills every frame"),
                });
            }
            let track_name = format!(
                "tracks/{}/{}-{}-{}.txt",
                subject.id,
                sequence.spectrum.as_str().to_lowercase(),
                sequence.pose.as_str().to_lowercase(),
                sequence.location.as_str().to_lowercase()
            );
            write_keypoint_file(&out_dir.join(track_name), PointSchema::FivePoint, &records)?;
        }
    }
    Ok(dataset)
}

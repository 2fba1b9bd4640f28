//! Cross-spectrum frame synchronization: matching each visible-light frame
//! to the thermal frame whose face geometry agrees best, using
//! template-normalized keypoint distance.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{solve_similarity, CanonicalTemplate, GeometryError, KeypointSet, PointSchema};
use crate::landmarks::KeypointRecord;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("track has no frames")]
    EmptyTrack,
    #[error("frame ids must strictly increase, got {prev} then {next}")]
    NonIncreasingFrameIds { prev: i64, next: i64 },
    #[error("every frame of the {which} track failed alignment")]
    NoAlignableFrames { which: &'static str },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> SyncError {
    SyncError::Io { path: path.display().to_string(), source }
}

/// An ordered sequence of per-frame five-point keypoint sets. Frame ids
/// must strictly increase; gaps are fine (frames without detections are
/// simply absent).
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointTrack {
    frames: Vec<(i64, KeypointSet)>,
}

impl KeypointTrack {
    pub fn new(frames: Vec<(i64, KeypointSet)>) -> Result<Self, SyncError> {
        if frames.is_empty() {
            return Err(SyncError::EmptyTrack);
        }
        for pair in frames.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(SyncError::NonIncreasingFrameIds { prev: pair[0].0, next: pair[1].0 });
            }
        }
        for (_, kp) in &frames {
            if kp.schema() != PointSchema::FivePoint {
                return Err(GeometryError::SchemaMismatch {
                    expected: PointSchema::FivePoint,
                    got: kp.schema(),
                }
                .into());
            }
        }
        Ok(KeypointTrack { frames })
    }

    pub fn from_records(records: &[KeypointRecord]) -> Result<Self, SyncError> {
        Self::new(records.iter().map(|r| (r.frame_id, r.keypoints.clone())).collect())
    }

    pub fn frames(&self) -> &[(i64, KeypointSet)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A track whose keypoints have been mapped into template coordinates.
/// Frames whose similarity solve degenerated are listed in `dropped`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTrack {
    pub frames: Vec<(i64, KeypointSet)>,
    pub dropped: Vec<i64>,
}

/// Maps every frame's keypoints through its fitted frame -> template
/// similarity. Degenerate frames are dropped rather than failing the track.
pub fn align_track(track: &KeypointTrack, template: &CanonicalTemplate) -> AlignedTrack {
    let template_set = template.as_keypoint_set();
    let mut frames = Vec::with_capacity(track.len());
    let mut dropped = Vec::new();
    for (id, kp) in track.frames() {
        match solve_similarity(kp, &template_set) {
            Ok(t) => frames.push((*id, t.apply_set(kp))),
            Err(_) => dropped.push(*id),
        }
    }
    AlignedTrack { frames, dropped }
}

/// Root-sum-square distance over the five landmark pairs, normalized by
/// five times the template diagonal so values are comparable across
/// template sizes.
pub fn pair_distance(
    a: &KeypointSet,
    b: &KeypointSet,
    template: &CanonicalTemplate,
) -> Result<f64, SyncError> {
    for kp in [a, b] {
        if kp.schema() != PointSchema::FivePoint {
            return Err(GeometryError::SchemaMismatch {
                expected: PointSchema::FivePoint,
                got: kp.schema(),
            }
            .into());
        }
    }
    let ss: f64 = a
        .points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| {
            let dx = p.x - q.x;
            let dy = p.y - q.y;
            dx * dx + dy * dy
        })
        .sum();
    Ok(ss.sqrt() / (5.0 * template.diagonal()))
}

/// One matched frame pair with its geometry distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncPair {
    pub visible_id: i64,
    pub thermal_id: i64,
    pub distance: f64,
}

/// Matches every visible frame to its geometrically closest thermal frame.
///
/// The assignment is an independent argmin per visible frame: several
/// visible frames may share one thermal frame, and ties go to the lower
/// thermal frame id. With `align_first` both tracks are first mapped into
/// template coordinates (dropping degenerate frames), which makes the
/// distance insensitive to camera placement differences between the two
/// streams.
pub fn synchronize(
    visible: &KeypointTrack,
    thermal: &KeypointTrack,
    template: &CanonicalTemplate,
    align_first: bool,
) -> Result<Vec<SyncPair>, SyncError> {
    let (visible_frames, thermal_frames) = if align_first {
        let v = align_track(visible, template);
        let t = align_track(thermal, template);
        if v.frames.is_empty() {
            return Err(SyncError::NoAlignableFrames { which: "visible" });
        }
        if t.frames.is_empty() {
            return Err(SyncError::NoAlignableFrames { which: "thermal" });
        }
        (v.frames, t.frames)
    } else {
        (visible.frames().to_vec(), thermal.frames().to_vec())
    };

    visible_frames
        .par_iter()
        .map(|(vid, vkp)| {
            let mut best: Option<(i64, f64)> = None;
            for (tid, tkp) in &thermal_frames {
                let d = pair_distance(vkp, tkp, template)?;
                // strict less-than keeps the first (lowest-id) frame on ties
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((*tid, d));
                }
            }
            let (thermal_id, distance) = best.expect("thermal track is nonempty");
            Ok(SyncPair { visible_id: *vid, thermal_id, distance })
        })
        .collect()
}

/// Text pair files: one `visible_id thermal_id distance` line per pair.
pub fn write_sync_pairs(path: &Path, pairs: &[SyncPair]) -> Result<(), SyncError> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&format!("{} {} {}\n", p.visible_id, p.thermal_id, p.distance));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_sync_pairs(path: &Path) -> Result<Vec<SyncPair>, SyncError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| SyncError::Parse {
            path: path.display().to_string(),
            line: n + 1,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
        }
        let visible_id: i64 =
            fields[0].parse().map_err(|_| parse_err(format!("bad visible id {:?}", fields[0])))?;
        let thermal_id: i64 =
            fields[1].parse().map_err(|_| parse_err(format!("bad thermal id {:?}", fields[1])))?;
        let distance: f64 =
            fields[2].parse().map_err(|_| parse_err(format!("bad distance {:?}", fields[2])))?;
        pairs.push(SyncPair { visible_id, thermal_id, distance });
    }
    Ok(pairs)
}

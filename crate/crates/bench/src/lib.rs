//! Deterministic input generators shared by the criterion benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use tvface_core::{
    CanonicalTemplate, Image, KeypointSet, KeypointTrack, Point2, PointSchema, ScoreSet,
};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Overlapping genuine and impostor score pools, the realistic regime where
/// ranking work dominates.
pub fn score_set(n_genuine: usize, n_impostor: usize, seed: u64) -> ScoreSet {
    let mut rng = rng(seed);
    ScoreSet {
        genuine: (0..n_genuine).map(|_| rng.gen_range(0.1..1.0)).collect(),
        impostor: (0..n_impostor).map(|_| rng.gen_range(-1.0..0.6)).collect(),
    }
}

/// A jittered five-point shape somewhere in a VGA frame.
pub fn five_point_shape(rng: &mut ChaCha12Rng) -> KeypointSet {
    let template = CanonicalTemplate::default();
    let scale = rng.gen_range(0.7..2.5);
    let dx = rng.gen_range(0.0..300.0);
    let dy = rng.gen_range(0.0..200.0);
    let points: Vec<Point2> = template
        .points()
        .iter()
        .map(|p| {
            Point2::new(
                scale * p.x + dx + rng.gen_range(-1.0..1.0),
                scale * p.y + dy + rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    KeypointSet::new(PointSchema::FivePoint, points).expect("five points")
}

/// A keypoint track whose face drifts horizontally frame over frame.
pub fn drifting_track(len: usize, seed: u64) -> KeypointTrack {
    let mut rng = rng(seed);
    let base = five_point_shape(&mut rng);
    let frames: Vec<(i64, KeypointSet)> = (0..len)
        .map(|t| {
            let points: Vec<Point2> = base
                .points()
                .iter()
                .map(|p| {
                    Point2::new(
                        p.x + 2.0 * t as f64 + rng.gen_range(-0.5..0.5),
                        p.y + rng.gen_range(-0.5..0.5),
                    )
                })
                .collect();
            (t as i64, KeypointSet::new(PointSchema::FivePoint, points).expect("five points"))
        })
        .collect();
    KeypointTrack::new(frames).expect("increasing frame ids")
}

/// A grayscale test card with smooth gradients, so warping touches every
/// interpolation path.
pub fn test_image(size: usize, seed: u64) -> Image {
    let mut rng = rng(seed);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let data: Vec<f64> = (0..size * size)
        .map(|i| {
            let x = (i % size) as f64 / size as f64;
            let y = (i / size) as f64 / size as f64;
            0.5 + 0.5 * (12.0 * x + phase).sin() * (9.0 * y).cos()
        })
        .collect();
    Image::new(size, size, 1, data).expect("valid dimensions")
}

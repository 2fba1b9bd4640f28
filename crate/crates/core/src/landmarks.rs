//! Keypoint prediction plumbing: crop jittering, robust aggregation of
//! multi-crop predictions, the seven-to-five point reduction, systematic
//! offset calibration, and normalized-error reporting.
//!
//! Raw detector output carries seven landmarks (eye corners, nose tip,
//! mouth corners); alignment consumes five (eye centers instead of the
//! four corners).

use std::fs;
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::geometry::{solve_similarity_points, GeometryError, KeypointSet, Point2, PointSchema};
use crate::image::Image;
use crate::ModelError;

pub const LEFT_EYE_OUTER: usize = 0;
pub const LEFT_EYE_INNER: usize = 1;
pub const RIGHT_EYE_INNER: usize = 2;
pub const RIGHT_EYE_OUTER: usize = 3;
pub const NOSE_TIP: usize = 4;
pub const MOUTH_LEFT: usize = 5;
pub const MOUTH_RIGHT: usize = 6;

#[derive(Debug, Error)]
pub enum LandmarkError {
    #[error("face box ({x}, {y}, {w}, {h}) does not fit inside a {img_w}x{img_h} image")]
    BoxOutsideImage { x: f64, y: f64, w: f64, h: f64, img_w: u32, img_h: u32 },
    #[error("jitter must be finite and nonnegative, got {0}")]
    InvalidJitter(f64),
    #[error("inlier threshold must be finite and positive, got {0}")]
    InvalidThreshold(f64),
    #[error("no input provided")]
    EmptyInput,
    #[error("inputs differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{mode:?} calibration needs at least {needed} samples, got {got}")]
    InsufficientSamples { mode: CalibrationMode, needed: usize, got: usize },
    #[error("calibration samples do not span the plane; affine fit is singular")]
    DegenerateCalibration,
    #[error("ground-truth eye centers coincide; inter-ocular distance is zero")]
    ZeroInterOcular,
    #[error("errors must be finite and nonnegative")]
    InvalidErrorValue,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("keypoint predictor failed: {0}")]
    Predictor(#[source] ModelError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> LandmarkError {
    LandmarkError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn center(&self) -> Point2 {
        Point2::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

/// Five jittered copies of a face box, clipped to the image and constrained
/// to keep the face box center inside. Jitter displaces the box by up to
/// `jitter * side` per axis and rescales by up to `1 +/- jitter`.
/// Deterministic for a given seed; `jitter = 0` yields five exact copies.
pub fn five_random_crops(
    face_box: Rect,
    image_size: (u32, u32),
    jitter: f64,
    seed: u64,
) -> Result<[Rect; 5], LandmarkError> {
    let (img_w, img_h) = (image_size.0 as f64, image_size.1 as f64);
    let outside = |b: &Rect| {
        !(b.w > 0.0 && b.h > 0.0 && b.x >= 0.0 && b.y >= 0.0 && b.x + b.w <= img_w && b.y + b.h <= img_h)
    };
    if outside(&face_box) {
        return Err(LandmarkError::BoxOutsideImage {
            x: face_box.x,
            y: face_box.y,
            w: face_box.w,
            h: face_box.h,
            img_w: image_size.0,
            img_h: image_size.1,
        });
    }
    if !jitter.is_finite() || jitter < 0.0 {
        return Err(LandmarkError::InvalidJitter(jitter));
    }
    let center = face_box.center();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut crops = [face_box; 5];
    for crop in crops.iter_mut() {
        let dx = rng.gen_range(-jitter..=jitter) * face_box.w;
        let dy = rng.gen_range(-jitter..=jitter) * face_box.h;
        let ds = 1.0 + rng.gen_range(-jitter..=jitter);
        let w = face_box.w * ds;
        let h = face_box.h * ds;
        let mut x = center.x + dx - 0.5 * w;
        let mut y = center.y + dy - 0.5 * h;
        // keep the face center covered even under extreme jitter
        x = x.clamp(center.x - w, center.x);
        y = y.clamp(center.y - h, center.y);
        // clip to the image; the center lies in both rectangles, so the
        // intersection still contains it
        let x0 = x.max(0.0);
        let y0 = y.max(0.0);
        let x1 = (x + w).min(img_w);
        let y1 = (y + h).min(img_h);
        *crop = Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
    }
    Ok(crops)
}

/// Predicts seven raw landmarks in full-image coordinates for a crop.
/// Implementations wrap whatever detector backs the pipeline.
pub trait KeypointPredictor {
    fn predict(&self, image: &Image, crop: Rect) -> Result<KeypointSet, ModelError>;
}

#[derive(Debug, Clone, Copy)]
pub struct RansacConfig {
    /// Mean per-landmark residual, in pixels, below which a prediction
    /// counts as consistent with a hypothesis.
    pub inlier_threshold: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig { inlier_threshold: 5.0 }
    }
}

/// Fuses multiple keypoint predictions of one face by consensus voting.
///
/// Every prediction serves once as the hypothesis. A candidate is an inlier
/// when, after fitting the similarity transform hypothesis -> candidate,
/// the mean per-landmark residual stays below the threshold; hypotheses
/// whose fit degenerates gather no consensus. The fused output is the
/// coordinate-wise mean of the largest inlier set (ties broken by lower
/// total residual, then lower hypothesis index). Without any set of two or
/// more inliers the per-landmark, per-axis median of all predictions is
/// returned instead.
pub fn aggregate_keypoints(
    predictions: &[KeypointSet],
    config: &RansacConfig,
) -> Result<KeypointSet, LandmarkError> {
    if predictions.is_empty() {
        return Err(LandmarkError::EmptyInput);
    }
    if !config.inlier_threshold.is_finite() || config.inlier_threshold <= 0.0 {
        return Err(LandmarkError::InvalidThreshold(config.inlier_threshold));
    }
    let schema = predictions[0].schema();
    for p in predictions {
        if p.schema() != schema {
            return Err(GeometryError::SchemaMismatch { expected: schema, got: p.schema() }.into());
        }
    }
    if predictions.len() == 1 {
        return Ok(predictions[0].clone());
    }

    let k = schema.point_count() as f64;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for hypothesis in predictions {
        let mut inliers = Vec::new();
        let mut total_residual = 0.0;
        for (ci, candidate) in predictions.iter().enumerate() {
            let Ok(t) = solve_similarity_points(hypothesis.points(), candidate.points()) else {
                continue;
            };
            let mean_residual: f64 = hypothesis
                .points()
                .iter()
                .zip(candidate.points())
                .map(|(&h, c)| t.apply(h).distance(c))
                .sum::<f64>()
                / k;
            if mean_residual < config.inlier_threshold {
                inliers.push(ci);
                total_residual += mean_residual;
            }
        }
        let better = match &best {
            None => true,
            Some((bi, bt)) => {
                inliers.len() > bi.len() || (inliers.len() == bi.len() && total_residual < *bt)
            }
        };
        if better {
            best = Some((inliers, total_residual));
        }
    }

    let (inliers, _) = best.expect("at least one hypothesis was evaluated");
    let points = if inliers.len() >= 2 {
        let n = inliers.len() as f64;
        (0..schema.point_count())
            .map(|i| {
                let sx: f64 = inliers.iter().map(|&j| predictions[j].points()[i].x).sum();
                let sy: f64 = inliers.iter().map(|&j| predictions[j].points()[i].y).sum();
                Point2::new(sx / n, sy / n)
            })
            .collect()
    } else {
        (0..schema.point_count())
            .map(|i| {
                let mut xs: Vec<f64> = predictions.iter().map(|p| p.points()[i].x).collect();
                let mut ys: Vec<f64> = predictions.iter().map(|p| p.points()[i].y).collect();
                Point2::new(median_in_place(&mut xs), median_in_place(&mut ys))
            })
            .collect()
    };
    Ok(KeypointSet::new(schema, points)?)
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("keypoints are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs the whole single-face procedure: jittered crops, one prediction per
/// crop, consensus aggregation.
pub fn predict_with_crops(
    image: &Image,
    face_box: Rect,
    predictor: &dyn KeypointPredictor,
    jitter: f64,
    seed: u64,
    config: &RansacConfig,
) -> Result<KeypointSet, LandmarkError> {
    let crops = five_random_crops(face_box, (image.width() as u32, image.height() as u32), jitter, seed)?;
    let mut predictions = Vec::with_capacity(5);
    for crop in crops {
        predictions.push(predictor.predict(image, crop).map_err(LandmarkError::Predictor)?);
    }
    aggregate_keypoints(&predictions, config)
}

/// Reduces seven raw landmarks to the five-point alignment layout: eye
/// corner pairs collapse to their midpoints, nose and mouth corners pass
/// through.
pub fn to_five_point(raw: &KeypointSet) -> Result<KeypointSet, LandmarkError> {
    if raw.schema() != PointSchema::SevenPointRaw {
        return Err(GeometryError::SchemaMismatch {
            expected: PointSchema::SevenPointRaw,
            got: raw.schema(),
        }
        .into());
    }
    let p = raw.points();
    let points = vec![
        p[LEFT_EYE_OUTER].midpoint(&p[LEFT_EYE_INNER]),
        p[RIGHT_EYE_INNER].midpoint(&p[RIGHT_EYE_OUTER]),
        p[NOSE_TIP],
        p[MOUTH_LEFT],
        p[MOUTH_RIGHT],
    ];
    Ok(KeypointSet::new(PointSchema::FivePoint, points)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// One constant 2-vector per landmark.
    OffsetOnly,
    /// A full 2x2 matrix plus offset per landmark.
    Affine,
}

impl CalibrationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationMode::OffsetOnly => "OFFSET_ONLY",
            CalibrationMode::Affine => "AFFINE",
        }
    }

    pub fn parse(s: &str) -> Option<CalibrationMode> {
        match s {
            "OFFSET_ONLY" => Some(CalibrationMode::OffsetOnly),
            "AFFINE" => Some(CalibrationMode::Affine),
            _ => None,
        }
    }
}

/// Per-landmark correction `p -> A p + b` learned from validation data.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetModel {
    mode: CalibrationMode,
    per_landmark: Vec<(Matrix2<f64>, Vector2<f64>)>,
}

impl OffsetModel {
    pub fn mode(&self) -> CalibrationMode {
        self.mode
    }

    pub fn apply(&self, kp: &KeypointSet) -> Result<KeypointSet, LandmarkError> {
        if kp.schema() != PointSchema::FivePoint {
            return Err(GeometryError::SchemaMismatch {
                expected: PointSchema::FivePoint,
                got: kp.schema(),
            }
            .into());
        }
        let points = kp
            .points()
            .iter()
            .zip(&self.per_landmark)
            .map(|(&p, (a, b))| {
                let v = a * Vector2::new(p.x, p.y) + b;
                Point2::new(v.x, v.y)
            })
            .collect();
        Ok(KeypointSet::new(PointSchema::FivePoint, points)?)
    }

    /// Text format: `offset-model MODE` header, then one
    /// `a11 a12 a21 a22 bx by` line per landmark.
    pub fn save(&self, path: &Path) -> Result<(), LandmarkError> {
        let mut out = format!("offset-model {}\n", self.mode.as_str());
        for (a, b) in &self.per_landmark {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                a[(0, 0)],
                a[(0, 1)],
                a[(1, 0)],
                a[(1, 1)],
                b.x,
                b.y
            ));
        }
        fs::write(path, out).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, LandmarkError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let parse_err = |line: usize, msg: &str| LandmarkError::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty offset model file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 || fields[0] != "offset-model" {
            return Err(parse_err(n + 1, "expected header `offset-model MODE`"));
        }
        let mode = CalibrationMode::parse(fields[1])
            .ok_or_else(|| parse_err(n + 1, "mode must be OFFSET_ONLY or AFFINE"))?;
        let mut per_landmark = Vec::with_capacity(5);
        for (n, line) in lines {
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|_| parse_err(n + 1, "expected six numbers"))?;
            if vals.len() != 6 {
                return Err(parse_err(n + 1, "expected six numbers"));
            }
            per_landmark.push((
                Matrix2::new(vals[0], vals[1], vals[2], vals[3]),
                Vector2::new(vals[4], vals[5]),
            ));
        }
        if per_landmark.len() != 5 {
            return Err(parse_err(text.lines().count(), "expected five landmark rows"));
        }
        Ok(OffsetModel { mode, per_landmark })
    }
}

/// Fits a per-landmark correction mapping predictions onto ground truth by
/// least squares. `OffsetOnly` needs one sample per landmark, `Affine`
/// three non-collinear ones.
pub fn calibrate_offset(
    predictions: &[KeypointSet],
    ground_truth: &[KeypointSet],
    mode: CalibrationMode,
) -> Result<OffsetModel, LandmarkError> {
    if predictions.len() != ground_truth.len() {
        return Err(LandmarkError::LengthMismatch { left: predictions.len(), right: ground_truth.len() });
    }
    let needed = match mode {
        CalibrationMode::OffsetOnly => 1,
        CalibrationMode::Affine => 3,
    };
    if predictions.len() < needed {
        return Err(LandmarkError::InsufficientSamples { mode, needed, got: predictions.len() });
    }
    for kp in predictions.iter().chain(ground_truth) {
        if kp.schema() != PointSchema::FivePoint {
            return Err(GeometryError::SchemaMismatch {
                expected: PointSchema::FivePoint,
                got: kp.schema(),
            }
            .into());
        }
    }
    let n = predictions.len() as f64;
    let mut per_landmark = Vec::with_capacity(5);
    for i in 0..5 {
        match mode {
            CalibrationMode::OffsetOnly => {
                let mut sum = Vector2::zeros();
                for (p, g) in predictions.iter().zip(ground_truth) {
                    sum += Vector2::new(
                        g.points()[i].x - p.points()[i].x,
                        g.points()[i].y - p.points()[i].y,
                    );
                }
                per_landmark.push((Matrix2::identity(), sum / n));
            }
            CalibrationMode::Affine => {
                // two independent 3-parameter least squares, one per output axis
                let mut m = Matrix3::zeros();
                let mut rx = Vector3::zeros();
                let mut ry = Vector3::zeros();
                for (p, g) in predictions.iter().zip(ground_truth) {
                    let row = Vector3::new(p.points()[i].x, p.points()[i].y, 1.0);
                    m += row * row.transpose();
                    rx += row * g.points()[i].x;
                    ry += row * g.points()[i].y;
                }
                let lu = m.lu();
                let (wx, wy) = match (lu.solve(&rx), lu.solve(&ry)) {
                    (Some(wx), Some(wy)) => (wx, wy),
                    _ => return Err(LandmarkError::DegenerateCalibration),
                };
                per_landmark.push((
                    Matrix2::new(wx[0], wx[1], wy[0], wy[1]),
                    Vector2::new(wx[2], wy[2]),
                ));
            }
        }
    }
    Ok(OffsetModel { mode, per_landmark })
}

/// Mean landmark distance normalized by the ground-truth inter-ocular
/// distance (eye center to eye center).
pub fn nme(prediction: &KeypointSet, ground_truth: &KeypointSet) -> Result<f64, LandmarkError> {
    for kp in [prediction, ground_truth] {
        if kp.schema() != PointSchema::FivePoint {
            return Err(GeometryError::SchemaMismatch {
                expected: PointSchema::FivePoint,
                got: kp.schema(),
            }
            .into());
        }
    }
    let gt = ground_truth.points();
    let iod = gt[0].distance(&gt[1]);
    if iod == 0.0 {
        return Err(LandmarkError::ZeroInterOcular);
    }
    let mean_dist: f64 = prediction
        .points()
        .iter()
        .zip(gt)
        .map(|(p, g)| p.distance(g))
        .sum::<f64>()
        / 5.0;
    Ok(mean_dist / iod)
}

/// Summary statistics over a list of normalized errors.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointReport {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    /// Median absolute deviation about the median.
    pub mad: f64,
    pub max: f64,
    /// Area under the cumulative error distribution over [0, threshold],
    /// normalized by the threshold.
    pub auc: f64,
    /// Fraction of errors strictly above the threshold.
    pub failure_rate: f64,
    pub threshold: f64,
}

pub fn keypoint_report(errors: &[f64], threshold: f64) -> Result<KeypointReport, LandmarkError> {
    if errors.is_empty() {
        return Err(LandmarkError::EmptyInput);
    }
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(LandmarkError::InvalidThreshold(threshold));
    }
    if !errors.iter().all(|e| e.is_finite() && *e >= 0.0) {
        return Err(LandmarkError::InvalidErrorValue);
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = errors.to_vec();
    let median = median_in_place(&mut sorted);
    let mut deviations: Vec<f64> = errors.iter().map(|e| (e - median).abs()).collect();
    let mad = median_in_place(&mut deviations);
    let max = sorted[sorted.len() - 1];
    // The cumulative error distribution is a step function; each error at or
    // below the threshold contributes the interval it spends counted.
    let auc = errors.iter().map(|&e| (threshold - e).max(0.0)).sum::<f64>() / (n * threshold);
    let failure_rate = errors.iter().filter(|&&e| e > threshold).count() as f64 / n;
    Ok(KeypointReport { n: errors.len(), mean, std, median, mad, max, auc, failure_rate, threshold })
}

/// CSV text with one header and one data row; columns ordered
/// mean, std, median, mad, max error, auc, failure rate, n.
pub fn keypoint_report_csv_string(report: &KeypointReport) -> String {
    let t = report.threshold;
    format!(
        "mean,std,median,mad,max_error,auc_{t},failure_rate_{t},n\n{},{},{},{},{},{},{},{}\n",
        report.mean, report.std, report.median, report.mad, report.max, report.auc, report.failure_rate, report.n
    )
}

pub fn write_keypoint_report_csv(path: &Path, report: &KeypointReport) -> Result<(), LandmarkError> {
    fs::write(path, keypoint_report_csv_string(report)).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointRecord {
    pub frame_id: i64,
    pub keypoints: KeypointSet,
}

/// Text keypoint files: a `schema NAME` header, then one
/// `frame_id x1 y1 ... xK yK` line per record. Repeated frame ids are
/// allowed (multi-crop prediction dumps); track loading enforces order
/// separately.
pub fn read_keypoint_file(path: &Path) -> Result<(PointSchema, Vec<KeypointRecord>), LandmarkError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parse_err = |line: usize, msg: String| LandmarkError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty keypoint file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 || fields[0] != "schema" {
        return Err(parse_err(n + 1, "expected header `schema NAME`".into()));
    }
    let schema = PointSchema::parse(fields[1])
        .ok_or_else(|| parse_err(n + 1, format!("unknown schema {:?}", fields[1])))?;
    let mut records = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let expected = 1 + 2 * schema.point_count();
        if fields.len() != expected {
            return Err(parse_err(n + 1, format!("expected {expected} fields, got {}", fields.len())));
        }
        let frame_id: i64 =
            fields[0].parse().map_err(|_| parse_err(n + 1, format!("bad frame id {:?}", fields[0])))?;
        let mut points = Vec::with_capacity(schema.point_count());
        for pair in fields[1..].chunks(2) {
            let x: f64 = pair[0].parse().map_err(|_| parse_err(n + 1, format!("bad coordinate {:?}", pair[0])))?;
            let y: f64 = pair[1].parse().map_err(|_| parse_err(n + 1, format!("bad coordinate {:?}", pair[1])))?;
            points.push(Point2::new(x, y));
        }
        let keypoints = KeypointSet::new(schema, points)
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        records.push(KeypointRecord { frame_id, keypoints });
    }
    Ok((schema, records))
}

pub fn write_keypoint_file(
    path: &Path,
    schema: PointSchema,
    records: &[KeypointRecord],
) -> Result<(), LandmarkError> {
    let mut out = format!("schema {}\n", schema.as_str());
    for r in records {
        if r.keypoints.schema() != schema {
            return Err(GeometryError::SchemaMismatch { expected: schema, got: r.keypoints.schema() }.into());
        }
        out.push_str(&r.frame_id.to_string());
        for p in r.keypoints.points() {
            out.push_str(&format!(" {} {}", p.x, p.y));
        }
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seven(points: [(f64, f64); 7]) -> KeypointSet {
        KeypointSet::new(PointSchema::SevenPointRaw, points.iter().map(|&(x, y)| Point2::new(x, y)).collect())
            .unwrap()
    }

    fn five(points: [(f64, f64); 5]) -> KeypointSet {
        KeypointSet::new(PointSchema::FivePoint, points.iter().map(|&(x, y)| Point2::new(x, y)).collect())
            .unwrap()
    }

    fn base_seven() -> KeypointSet {
        seven([
            (30.0, 40.0),
            (45.0, 41.0),
            (65.0, 41.0),
            (80.0, 40.0),
            (55.0, 60.0),
            (42.0, 80.0),
            (68.0, 80.0),
        ])
    }

    #[test]
    fn zero_jitter_returns_identical_crops() {
        let face = Rect { x: 10.0, y: 20.0, w: 50.0, h: 60.0 };
        let crops = five_random_crops(face, (200, 200), 0.0, 42).unwrap();
        for c in &crops {
            assert_eq!(*c, face);
        }
    }

    #[test]
    fn crops_contain_center_and_stay_inside() {
        let face = Rect { x: 5.0, y: 5.0, w: 90.0, h: 90.0 };
        for seed in 0..20 {
            let crops = five_random_crops(face, (100, 100), 0.3, seed).unwrap();
            for c in &crops {
                assert!(c.contains(face.center()), "crop {c:?} lost the face center");
                assert!(c.x >= 0.0 && c.y >= 0.0 && c.x + c.w <= 100.0 && c.y + c.h <= 100.0);
            }
        }
    }

    #[test]
    fn crops_are_deterministic_per_seed() {
        let face = Rect { x: 10.0, y: 10.0, w: 40.0, h: 40.0 };
        let a = five_random_crops(face, (100, 100), 0.1, 7).unwrap();
        let b = five_random_crops(face, (100, 100), 0.1, 7).unwrap();
        let c = five_random_crops(face, (100, 100), 0.1, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn box_outside_image_is_rejected() {
        let face = Rect { x: 80.0, y: 10.0, w: 40.0, h: 40.0 };
        assert!(matches!(
            five_random_crops(face, (100, 100), 0.1, 0),
            Err(LandmarkError::BoxOutsideImage { .. })
        ));
    }

    #[test]
    fn single_prediction_passes_through() {
        let p = base_seven();
        let fused = aggregate_keypoints(std::slice::from_ref(&p), &RansacConfig::default()).unwrap();
        assert_eq!(fused, p);
    }

    #[test]
    fn identical_predictions_return_the_prediction() {
        let p = base_seven();
        let fused = aggregate_keypoints(&vec![p.clone(); 5], &RansacConfig::default()).unwrap();
        for (a, b) in fused.points().iter().zip(p.points()) {
            assert_abs_diff_eq!(a.distance(b), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gross_shape_outlier_is_excluded() {
        let base = base_seven();
        let mut preds: Vec<KeypointSet> = (0..4)
            .map(|i| {
                let jitter = 0.3 * (i as f64 - 1.5);
                let points = base.points().iter().map(|p| Point2::new(p.x + jitter, p.y - jitter)).collect();
                KeypointSet::new(PointSchema::SevenPointRaw, points).unwrap()
            })
            .collect();
        // shape-breaking outlier: landmarks scattered by ~100 px incoherently
        let outlier_points: Vec<Point2> = base
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                Point2::new(p.x + sign * 100.0, p.y + sign * 80.0)
            })
            .collect();
        preds.push(KeypointSet::new(PointSchema::SevenPointRaw, outlier_points).unwrap());
        let fused = aggregate_keypoints(&preds, &RansacConfig::default()).unwrap();
        for (f, b) in fused.points().iter().zip(base.points()) {
            assert!(f.distance(b) < 1.0, "fused point {f:?} strayed from {b:?}");
        }
    }

    #[test]
    fn no_consensus_falls_back_to_median() {
        // three mutually inconsistent shapes: every pairwise fit residual is huge
        let a = base_seven();
        let scatter = |kp: &KeypointSet, magnitude: f64| {
            let points = kp
                .points()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    Point2::new(p.x + sign * magnitude, p.y - sign * magnitude)
                })
                .collect();
            KeypointSet::new(PointSchema::SevenPointRaw, points).unwrap()
        };
        let preds = vec![a.clone(), scatter(&a, 50.0), scatter(&a, -120.0)];
        let fused = aggregate_keypoints(&preds, &RansacConfig { inlier_threshold: 1.0 }).unwrap();
        let raw: Vec<Vec<(f64, f64)>> =
            preds.iter().map(|p| p.points().iter().map(|q| (q.x, q.y)).collect()).collect();
        let expected = tvface_oracles::median_keypoints(&raw);
        for (f, (ex, ey)) in fused.points().iter().zip(expected) {
            assert_abs_diff_eq!(f.x, ex, epsilon = 1e-12);
            assert_abs_diff_eq!(f.y, ey, epsilon = 1e-12);
        }
    }

    #[test]
    fn aggregation_rejects_mixed_schemas() {
        let preds = vec![
            base_seven(),
            five([(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.0, 2.0), (1.0, 2.0)]),
        ];
        assert!(matches!(
            aggregate_keypoints(&preds, &RansacConfig::default()),
            Err(LandmarkError::Geometry(GeometryError::SchemaMismatch { .. }))
        ));
    }

    #[test]
    fn to_five_point_takes_eye_midpoints() {
        let raw = base_seven();
        let fp = to_five_point(&raw).unwrap();
        assert_eq!(fp.schema(), PointSchema::FivePoint);
        assert_eq!(fp.points()[0], Point2::new(37.5, 40.5));
        assert_eq!(fp.points()[1], Point2::new(72.5, 40.5));
        assert_eq!(fp.points()[2], raw.points()[NOSE_TIP]);
        assert_eq!(fp.points()[3], raw.points()[MOUTH_LEFT]);
        assert_eq!(fp.points()[4], raw.points()[MOUTH_RIGHT]);
    }

    #[test]
    fn offset_only_single_sample_maps_pred_to_gt() {
        let pred = five([(10.0, 10.0), (20.0, 10.0), (15.0, 15.0), (12.0, 20.0), (18.0, 20.0)]);
        let gt = five([(11.0, 9.0), (21.0, 11.0), (15.5, 15.0), (12.0, 21.0), (19.0, 20.0)]);
        let model =
            calibrate_offset(std::slice::from_ref(&pred), std::slice::from_ref(&gt), CalibrationMode::OffsetOnly)
                .unwrap();
        let corrected = model.apply(&pred).unwrap();
        for (c, g) in corrected.points().iter().zip(gt.points()) {
            assert_abs_diff_eq!(c.distance(g), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn affine_recovers_exact_affine_relation() {
        let preds: Vec<KeypointSet> = [(0.0, 0.0), (7.0, 3.0), (-2.0, 9.0), (4.0, -5.0)]
            .iter()
            .map(|&(dx, dy)| {
                five([
                    (10.0 + dx, 10.0 + dy),
                    (20.0 + 2.0 * dx, 10.0 - dy),
                    (15.0 - dx, 15.0 + dy),
                    (12.0 + dy, 20.0 + dx),
                    (18.0 - dy, 20.0 - dx),
                ])
            })
            .collect();
        let a = Matrix2::new(1.1, -0.2, 0.3, 0.9);
        let b = Vector2::new(2.0, -3.0);
        let gts: Vec<KeypointSet> = preds
            .iter()
            .map(|kp| {
                let points = kp
                    .points()
                    .iter()
                    .map(|p| {
                        let v = a * Vector2::new(p.x, p.y) + b;
                        Point2::new(v.x, v.y)
                    })
                    .collect();
                KeypointSet::new(PointSchema::FivePoint, points).unwrap()
            })
            .collect();
        let model = calibrate_offset(&preds, &gts, CalibrationMode::Affine).unwrap();
        for (p, g) in preds.iter().zip(&gts) {
            let corrected = model.apply(p).unwrap();
            for (c, gt) in corrected.points().iter().zip(g.points()) {
                assert_abs_diff_eq!(c.distance(gt), 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn affine_needs_three_samples() {
        let pred = five([(10.0, 10.0), (20.0, 10.0), (15.0, 15.0), (12.0, 20.0), (18.0, 20.0)]);
        let res = calibrate_offset(
            &[pred.clone(), pred.clone()],
            &[pred.clone(), pred],
            CalibrationMode::Affine,
        );
        assert!(matches!(res, Err(LandmarkError::InsufficientSamples { needed: 3, got: 2, .. })));
    }

    #[test]
    fn offset_model_file_round_trip() {
        let pred = five([(10.0, 10.0), (20.0, 10.0), (15.0, 15.0), (12.0, 20.0), (18.0, 20.0)]);
        let gt = five([(11.5, 9.25), (21.0, 11.0), (15.5, 15.0), (12.0, 21.0), (19.0, 20.0)]);
        let model =
            calibrate_offset(std::slice::from_ref(&pred), std::slice::from_ref(&gt), CalibrationMode::OffsetOnly)
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        model.save(&path).unwrap();
        assert_eq!(OffsetModel::load(&path).unwrap(), model);
    }

    #[test]
    fn nme_normalizes_by_interocular_distance() {
        let gt = five([(40.0, 50.0), (80.0, 50.0), (60.0, 70.0), (48.0, 90.0), (72.0, 90.0)]);
        // every landmark off by 4 px; inter-ocular distance is 40
        let pred = five([(44.0, 50.0), (84.0, 50.0), (64.0, 70.0), (52.0, 90.0), (76.0, 90.0)]);
        assert_abs_diff_eq!(nme(&pred, &gt).unwrap(), 0.1, epsilon = 1e-12);

        let degenerate = five([(40.0, 50.0), (40.0, 50.0), (60.0, 70.0), (48.0, 90.0), (72.0, 90.0)]);
        assert!(matches!(nme(&pred, &degenerate), Err(LandmarkError::ZeroInterOcular)));
    }

    #[test]
    fn report_hand_case() {
        let r = keypoint_report(&[0.02, 0.02, 0.10, 0.10], 0.08).unwrap();
        assert_abs_diff_eq!(r.auc, 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(r.failure_rate, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean, 0.06, epsilon = 1e-12);
        assert_abs_diff_eq!(r.median, 0.06, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mad, 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(r.max, 0.10, epsilon = 1e-12);
        assert_abs_diff_eq!(r.std, 0.04, epsilon = 1e-12);
    }

    #[test]
    fn report_all_above_threshold() {
        let r = keypoint_report(&[0.2, 0.2, 0.2], 0.08).unwrap();
        assert_eq!(r.failure_rate, 1.0);
        assert_eq!(r.auc, 0.0);
    }

    #[test]
    fn report_matches_integration_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..400);
            let errors: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.2)).collect();
            let r = keypoint_report(&errors, 0.08).unwrap();
            let (auc, failure) = tvface_oracles::ced_auc_and_failure(&errors, 0.08);
            assert_abs_diff_eq!(r.auc, auc, epsilon = 1e-12);
            assert_abs_diff_eq!(r.failure_rate, failure, epsilon = 1e-12);
        }
    }

    #[test]
    fn keypoint_file_round_trip_and_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kp.txt");
        let records = vec![
            KeypointRecord { frame_id: 0, keypoints: base_seven() },
            KeypointRecord { frame_id: 3, keypoints: base_seven() },
        ];
        write_keypoint_file(&path, PointSchema::SevenPointRaw, &records).unwrap();
        let (schema, back) = read_keypoint_file(&path).unwrap();
        assert_eq!(schema, PointSchema::SevenPointRaw);
        assert_eq!(back, records);

        let bad = dir.path().join("bad.txt");
        fs::write(&bad, "schema FIVE_POINT\n0 1 2 3\n").unwrap();
        match read_keypoint_file(&bad) {
            Err(LandmarkError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    struct TemplatePredictor {
        truth: KeypointSet,
    }

    impl KeypointPredictor for TemplatePredictor {
        fn predict(&self, _image: &Image, crop: Rect) -> Result<KeypointSet, ModelError> {
            // deterministic sub-pixel jitter derived from the crop origin
            let dx = (crop.x * 0.37).sin() * 0.4;
            let dy = (crop.y * 0.53).cos() * 0.4;
            let points = self.truth.points().iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect();
            Ok(KeypointSet::new(PointSchema::SevenPointRaw, points)?)
        }
    }

    #[test]
    fn predict_with_crops_stays_near_truth() {
        let truth = base_seven();
        let predictor = TemplatePredictor { truth: truth.clone() };
        let img = Image::zeros(120, 120, 1).unwrap();
        let face = Rect { x: 20.0, y: 25.0, w: 70.0, h: 70.0 };
        let fused =
            predict_with_crops(&img, face, &predictor, 0.1, 99, &RansacConfig::default()).unwrap();
        for (f, t) in fused.points().iter().zip(truth.points()) {
            assert!(f.distance(t) < 1.0);
        }
    }
}

//! Similarity-transform estimation and face alignment.
//!
//! A face crop is aligned by solving the least-squares similarity transform
//! (scale, rotation, translation; no reflection) that carries its five
//! landmarks onto a canonical template, then inverse-warping the image into
//! the template frame with bilinear sampling.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::image::{Image, ImageError};

#[derive(Debug, Error)]
pub enum GeometryError {
    /// The fit is underdetermined or collapses: fewer than two points,
    /// all source points coincident, or a rank-zero cross-covariance
    /// (which would drive the scale to zero).
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("expected {expected:?} keypoints, got {got:?}")]
    SchemaMismatch { expected: PointSchema, got: PointSchema },
    #[error("schema {schema:?} requires {expected} points, got {got}")]
    WrongPointCount { schema: PointSchema, expected: usize, got: usize },
    #[error("point sets differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("no samples provided")]
    EmptyInput,
    #[error("landmark {landmark} of the template falls outside the output raster at ({x}, {y})")]
    TemplateOutOfBounds { landmark: usize, x: f64, y: f64 },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// Landmark layouts carried by a [`KeypointSet`].
///
/// `SevenPointRaw` is the detector-native order: left eye outer, left eye
/// inner, right eye inner, right eye outer, nose tip, left mouth corner,
/// right mouth corner. `FivePoint` is the alignment order: left eye center,
/// right eye center, nose tip, left mouth corner, right mouth corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSchema {
    FivePoint,
    SevenPointRaw,
}

impl PointSchema {
    pub fn point_count(&self) -> usize {
        match self {
            PointSchema::FivePoint => 5,
            PointSchema::SevenPointRaw => 7,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PointSchema::FivePoint => "FIVE_POINT",
            PointSchema::SevenPointRaw => "SEVEN_POINT_RAW",
        }
    }

    pub fn parse(s: &str) -> Option<PointSchema> {
        match s {
            "FIVE_POINT" => Some(PointSchema::FivePoint),
            "SEVEN_POINT_RAW" => Some(PointSchema::SevenPointRaw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    schema: PointSchema,
    points: Vec<Point2>,
}

impl KeypointSet {
    pub fn new(schema: PointSchema, points: Vec<Point2>) -> Result<Self, GeometryError> {
        if points.len() != schema.point_count() {
            return Err(GeometryError::WrongPointCount {
                schema,
                expected: schema.point_count(),
                got: points.len(),
            });
        }
        if !points.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(KeypointSet { schema, points })
    }

    pub fn schema(&self) -> PointSchema {
        self.schema
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }
}

/// `p -> scale * rotation * p + translation` with `scale > 0` and
/// `rotation` a proper rotation (orthonormal, determinant +1).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix2<f64>,
    pub translation: Vector2<f64>,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Matrix2<f64>, translation: Vector2<f64>) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidTransform(format!("scale must be positive, got {scale}")));
        }
        let gram = rotation.transpose() * rotation;
        let ortho_defect = (gram - Matrix2::identity()).abs().max();
        if ortho_defect > 1e-9 {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation not orthonormal (defect {ortho_defect:e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidTransform("rotation must have determinant +1".into()));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidTransform("translation must be finite".into()));
        }
        Ok(SimilarityTransform { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: Matrix2::identity(),
            translation: Vector2::zeros(),
        }
    }

    pub fn from_angle(scale: f64, angle: f64, tx: f64, ty: f64) -> Result<Self, GeometryError> {
        let (sin, cos) = angle.sin_cos();
        SimilarityTransform::new(scale, Matrix2::new(cos, -sin, sin, cos), Vector2::new(tx, ty))
    }

    pub fn angle(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let v = self.scale * (self.rotation * Vector2::new(p.x, p.y)) + self.translation;
        Point2::new(v.x, v.y)
    }

    pub fn apply_set(&self, kp: &KeypointSet) -> KeypointSet {
        let points = kp.points().iter().map(|&p| self.apply(p)).collect();
        KeypointSet { schema: kp.schema(), points }
    }

    pub fn invert(&self) -> SimilarityTransform {
        let scale = 1.0 / self.scale;
        let rotation = self.rotation.transpose();
        let translation = -scale * (rotation * self.translation);
        SimilarityTransform { scale, rotation, translation }
    }
}

/// Five-point landmark layout of the aligned output raster.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTemplate {
    points: Vec<Point2>,
    output_size: (u32, u32),
}

/// Reference layout for 128x128 aligned faces: eye centers, nose tip,
/// mouth corners.
pub const DEFAULT_TEMPLATE_POINTS: [(f64, f64); 5] =
    [(44.0, 52.0), (84.0, 52.0), (64.0, 72.0), (48.0, 92.0), (80.0, 92.0)];

pub const DEFAULT_TEMPLATE_SIZE: (u32, u32) = (128, 128);

impl CanonicalTemplate {
    pub fn new(points: Vec<Point2>, output_size: (u32, u32)) -> Result<Self, GeometryError> {
        if points.len() != 5 {
            return Err(GeometryError::WrongPointCount {
                schema: PointSchema::FivePoint,
                expected: 5,
                got: points.len(),
            });
        }
        if output_size.0 == 0 || output_size.1 == 0 {
            return Err(GeometryError::InvalidTransform("template output size must be nonzero".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(GeometryError::NonFinite);
            }
            if p.x < 0.0 || p.y < 0.0 || p.x >= output_size.0 as f64 || p.y >= output_size.1 as f64 {
                return Err(GeometryError::TemplateOutOfBounds { landmark: i, x: p.x, y: p.y });
            }
        }
        Ok(CanonicalTemplate { points, output_size })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn output_size(&self) -> (u32, u32) {
        self.output_size
    }

    pub fn diagonal(&self) -> f64 {
        let (w, h) = self.output_size;
        ((w as f64).powi(2) + (h as f64).powi(2)).sqrt()
    }

    pub fn as_keypoint_set(&self) -> KeypointSet {
        KeypointSet { schema: PointSchema::FivePoint, points: self.points.clone() }
    }

    /// Text format: a `size W H` header followed by five `x y` lines.
    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        let mut out = format!("size {} {}\n", self.output_size.0, self.output_size.1);
        for p in &self.points {
            out.push_str(&format!("{} {}\n", p.x, p.y));
        }
        fs::write(path, out).map_err(|e| GeometryError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GeometryError::Io { path: path.display().to_string(), source: e })?;
        let parse_err = |line: usize, msg: &str| GeometryError::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty template file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "size" {
            return Err(parse_err(n + 1, "expected header `size W H`"));
        }
        let w: u32 = fields[1].parse().map_err(|_| parse_err(n + 1, "bad width"))?;
        let h: u32 = fields[2].parse().map_err(|_| parse_err(n + 1, "bad height"))?;
        let mut points = Vec::with_capacity(5);
        for (n, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(n + 1, "expected `x y`"));
            }
            let x: f64 = fields[0].parse().map_err(|_| parse_err(n + 1, "bad x coordinate"))?;
            let y: f64 = fields[1].parse().map_err(|_| parse_err(n + 1, "bad y coordinate"))?;
            points.push(Point2::new(x, y));
        }
        CanonicalTemplate::new(points, (w, h))
    }
}

impl Default for CanonicalTemplate {
    fn default() -> Self {
        CanonicalTemplate {
            points: DEFAULT_TEMPLATE_POINTS.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
            output_size: DEFAULT_TEMPLATE_SIZE,
        }
    }
}

/// Least-squares similarity fit `src -> dst` over point slices.
///
/// Closed-form solution via the SVD of the cross-covariance; the sign
/// matrix `diag(1, sign(det U * det V))` forces a proper rotation, and the
/// scale is `trace(D * S)` over the source variance. Works for any
/// configuration with at least two distinct source points, including
/// collinear ones.
pub fn solve_similarity_points(src: &[Point2], dst: &[Point2]) -> Result<SimilarityTransform, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch { left: src.len(), right: dst.len() });
    }
    if src.len() < 2 {
        return Err(GeometryError::DegenerateConfiguration("need at least two point pairs"));
    }
    let n = src.len() as f64;
    let mut mu_src = Vector2::zeros();
    let mut mu_dst = Vector2::zeros();
    for (p, q) in src.iter().zip(dst) {
        mu_src += Vector2::new(p.x, p.y);
        mu_dst += Vector2::new(q.x, q.y);
    }
    mu_src /= n;
    mu_dst /= n;

    let mut var_src = 0.0;
    let mut var_dst = 0.0;
    let mut cov = Matrix2::zeros();
    for (p, q) in src.iter().zip(dst) {
        let dp = Vector2::new(p.x, p.y) - mu_src;
        let dq = Vector2::new(q.x, q.y) - mu_dst;
        var_src += dp.norm_squared();
        var_dst += dq.norm_squared();
        cov += dq * dp.transpose();
    }
    var_src /= n;
    var_dst /= n;
    cov /= n;

    // Coincident sources leave rotation and scale unconstrained. The spread
    // threshold is relative to the coordinate magnitude so the test is about
    // representable precision, not absolute pixel units.
    let coincidence_floor = (1e-12 * (1.0 + mu_src.norm())).powi(2);
    if var_src <= coincidence_floor {
        return Err(GeometryError::DegenerateConfiguration("source points are coincident"));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("2x2 svd with u requested");
    let v_t = svd.v_t.expect("2x2 svd with v_t requested");
    let d1 = svd.singular_values[0];
    let d2 = svd.singular_values[1];
    debug_assert!(d1 >= d2);
    // Rank-zero cross-covariance means the optimum collapses to zero scale
    // (e.g. all destination points coincide).
    if d1 <= 1e-12 * (var_src * var_dst).sqrt() + f64::MIN_POSITIVE {
        return Err(GeometryError::DegenerateConfiguration("cross-covariance has rank zero"));
    }

    let sign = if u.determinant() * v_t.determinant() < 0.0 { -1.0 } else { 1.0 };
    let rotation = u * Matrix2::new(1.0, 0.0, 0.0, sign) * v_t;
    let scale = (d1 + sign * d2) / var_src;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(GeometryError::DegenerateConfiguration("fit collapses to nonpositive scale"));
    }
    let translation = mu_dst - scale * (rotation * mu_src);
    Ok(SimilarityTransform { scale, rotation, translation })
}

/// [`solve_similarity_points`] over keypoint sets with matching schemas.
pub fn solve_similarity(src: &KeypointSet, dst: &KeypointSet) -> Result<SimilarityTransform, GeometryError> {
    if src.schema() != dst.schema() {
        return Err(GeometryError::SchemaMismatch { expected: src.schema(), got: dst.schema() });
    }
    solve_similarity_points(src.points(), dst.points())
}

/// Warps `image` so that `keypoints` land on the template, producing an
/// output raster of the template's size. Returns the aligned image together
/// with the forward keypoints-to-template transform. Output pixels are
/// filled by bilinear sampling at the inverse-mapped location, zero outside
/// the source.
pub fn align_face(
    image: &Image,
    keypoints: &KeypointSet,
    template: &CanonicalTemplate,
) -> Result<(Image, SimilarityTransform), GeometryError> {
    if keypoints.schema() != PointSchema::FivePoint {
        return Err(GeometryError::SchemaMismatch {
            expected: PointSchema::FivePoint,
            got: keypoints.schema(),
        });
    }
    let forward = solve_similarity_points(keypoints.points(), template.points())?;
    let inverse = forward.invert();
    let (w, h) = template.output_size();
    let (w, h) = (w as usize, h as usize);
    let channels = image.channels();
    let mut data = vec![0.0; w * h * channels];
    for oy in 0..h {
        for ox in 0..w {
            let src = inverse.apply(Point2::new(ox as f64, oy as f64));
            for c in 0..channels {
                data[(oy * w + ox) * channels + c] = image.sample_bilinear(src.x, src.y, c);
            }
        }
    }
    let out = Image::new(w, h, channels, data)?;
    Ok((out, forward))
}

/// Coordinate-wise mean of five-point samples, validated against the output
/// raster bounds.
pub fn mean_template(samples: &[KeypointSet], output_size: (u32, u32)) -> Result<CanonicalTemplate, GeometryError> {
    if samples.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    for s in samples {
        if s.schema() != PointSchema::FivePoint {
            return Err(GeometryError::SchemaMismatch { expected: PointSchema::FivePoint, got: s.schema() });
        }
    }
    let n = samples.len() as f64;
    let points: Vec<Point2> = (0..5)
        .map(|i| {
            let sx: f64 = samples.iter().map(|s| s.points()[i].x).sum();
            let sy: f64 = samples.iter().map(|s| s.points()[i].y).sum();
            Point2::new(sx / n, sy / n)
        })
        .collect();
    CanonicalTemplate::new(points, output_size)
}

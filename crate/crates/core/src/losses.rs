//! Training-side arithmetic: label-smoothed cross entropy, cosine identity
//! loss, mean absolute pixel loss, their gradients, the weighted composite
//! objective, and a small MLP classifier trained by plain gradient descent.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("no input provided")]
    EmptyInput,
    #[error("vector lengths differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("image shapes differ: {a_w}x{a_h}x{a_c} vs {b_w}x{b_h}x{b_c}")]
    ShapeMismatch { a_w: usize, a_h: usize, a_c: usize, b_w: usize, b_h: usize, b_c: usize },
    #[error("values must be finite")]
    NonFinite,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("smoothing epsilon must lie in [0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("target probabilities must be nonnegative and sum to 1, got sum {sum}")]
    TargetsNotNormalized { sum: f64 },
    #[error("classifier dimensions must be positive with at least two classes")]
    InvalidDimensions,
    #[error("learning rate must be finite and positive, got {0}")]
    InvalidLearningRate(f64),
    #[error("parameter vector has length {got}, classifier needs {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> LossError {
    LossError::Io { path: path.display().to_string(), source }
}

/// A feature vector produced by the face encoder. Finite and nonempty by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, LossError> {
        if values.is_empty() {
            return Err(LossError::EmptyInput);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(LossError::NonFinite);
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-6
    }

    pub fn normalized(&self) -> Result<Embedding, LossError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(LossError::ZeroNorm);
        }
        Ok(Embedding(self.0.iter().map(|v| v / n).collect()))
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64, LossError> {
        if self.dim() != other.dim() {
            return Err(LossError::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

/// Label-smoothed class target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTargets {
    label: usize,
    epsilon: f64,
    probabilities: Vec<f64>,
}

impl SmoothedTargets {
    pub fn label(&self) -> usize {
        self.label
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn num_classes(&self) -> usize {
        self.probabilities.len()
    }
}

/// Smooths a hard label over `num_classes` classes: the true class keeps
/// `1 - eps*(n-1)/n` of the mass and every other class receives `eps/n`.
pub fn smoothed_targets(
    label: usize,
    num_classes: usize,
    epsilon: f64,
) -> Result<SmoothedTargets, LossError> {
    if num_classes < 2 {
        return Err(LossError::InvalidDimensions);
    }
    if label >= num_classes {
        return Err(LossError::LabelOutOfRange { label, num_classes });
    }
    if !epsilon.is_finite() || !(0.0..1.0).contains(&epsilon) {
        return Err(LossError::InvalidEpsilon(epsilon));
    }
    let n = num_classes as f64;
    let on_target = 1.0 - ((n - 1.0) / n) * epsilon;
    let off_target = epsilon / n;
    let probabilities = (0..num_classes)
        .map(|c| if c == label { on_target } else { off_target })
        .collect();
    Ok(SmoothedTargets { label, epsilon, probabilities })
}

fn check_targets(targets: &[f64]) -> Result<(), LossError> {
    if !targets.iter().all(|q| q.is_finite() && *q >= 0.0) {
        return Err(LossError::NonFinite);
    }
    let sum: f64 = targets.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(LossError::TargetsNotNormalized { sum });
    }
    Ok(())
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Cross entropy between a softmax over `logits` and an explicit target
/// distribution, evaluated in log space so large logits cannot overflow.
pub fn cross_entropy(logits: &[f64], targets: &[f64]) -> Result<f64, LossError> {
    if logits.is_empty() {
        return Err(LossError::EmptyInput);
    }
    if logits.len() != targets.len() {
        return Err(LossError::DimensionMismatch { left: logits.len(), right: targets.len() });
    }
    if !logits.iter().all(|l| l.is_finite()) {
        return Err(LossError::NonFinite);
    }
    check_targets(targets)?;
    let lse = log_sum_exp(logits);
    Ok(logits.iter().zip(targets).map(|(l, q)| q * (lse - l)).sum())
}

/// Gradient of [`cross_entropy`] with respect to the logits: `softmax - q`.
pub fn cross_entropy_gradient(logits: &[f64], targets: &[f64]) -> Result<Vec<f64>, LossError> {
    if logits.is_empty() {
        return Err(LossError::EmptyInput);
    }
    if logits.len() != targets.len() {
        return Err(LossError::DimensionMismatch { left: logits.len(), right: targets.len() });
    }
    if !logits.iter().all(|l| l.is_finite()) {
        return Err(LossError::NonFinite);
    }
    check_targets(targets)?;
    let lse = log_sum_exp(logits);
    Ok(logits.iter().zip(targets).map(|(l, q)| (l - lse).exp() - q).collect())
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), LossError> {
    if a.is_empty() {
        return Err(LossError::EmptyInput);
    }
    if a.len() != b.len() {
        return Err(LossError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(LossError::NonFinite);
    }
    Ok(())
}

/// `1 - cos(a, b)`: zero for parallel vectors, one for orthogonal, two for
/// opposite. Invariant to positive rescaling of either argument.
pub fn cosine_identity_loss(a: &[f64], b: &[f64]) -> Result<f64, LossError> {
    check_pair(a, b)?;
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(LossError::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(1.0 - dot / (na * nb))
}

/// Gradient of [`cosine_identity_loss`] with respect to `a`.
pub fn cosine_identity_gradient(a: &[f64], b: &[f64]) -> Result<Vec<f64>, LossError> {
    check_pair(a, b)?;
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(LossError::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let cos = dot / (na * nb);
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| cos * x / (na * na) - y / (na * nb))
        .collect())
}

/// Identity preservation term between a generated face embedding and the
/// matching real one.
pub fn identity_loss(generated: &Embedding, target: &Embedding) -> Result<f64, LossError> {
    cosine_identity_loss(generated.values(), target.values())
}

/// Mean absolute difference over every pixel sample of two equally shaped
/// images.
pub fn l1_pixel_loss(a: &Image, b: &Image) -> Result<f64, LossError> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(LossError::ShapeMismatch {
            a_w: a.width(),
            a_h: a.height(),
            a_c: a.channels(),
            b_w: b.width(),
            b_h: b.height(),
            b_c: b.channels(),
        });
    }
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// Subgradient of [`l1_pixel_loss`] with respect to `a`, flattened in the
/// image's sample order; ties contribute zero.
pub fn l1_pixel_gradient(a: &Image, b: &Image) -> Result<Vec<f64>, LossError> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(LossError::ShapeMismatch {
            a_w: a.width(),
            a_h: a.height(),
            a_c: a.channels(),
            b_w: b.width(),
            b_h: b.height(),
            b_c: b.channels(),
        });
    }
    let n = a.data().len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            if x > y {
                1.0 / n
            } else if x < y {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect())
}

/// Relative weights of the composite translation objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub generator: f64,
    pub pixel: f64,
    pub identity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { generator: 1.0, pixel: 10.0, identity: 1.0 }
    }
}

/// Weighted sum of the three pre-computed loss terms.
pub fn composite_loss(
    generator_term: f64,
    pixel_term: f64,
    identity_term: f64,
    weights: &LossWeights,
) -> f64 {
    weights.generator * generator_term + weights.pixel * pixel_term + weights.identity * identity_term
}

const MLP_MAGIC: &[u8; 4] = b"MLP1";

/// Two-hidden-layer ReLU classifier over embeddings, producing raw logits.
/// Layers are `input -> hidden -> hidden -> classes`; weights are stored
/// row-major per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: Vec<f64>,
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

fn matvec(w: &[f64], x: &[f64], b: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            let row = &w[r * cols..(r + 1) * cols];
            row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b[r]
        })
        .collect()
}

impl MlpClassifier {
    /// Random initialization: zero biases and weights drawn from a centered
    /// normal scaled by `sqrt(2 / fan_in)`. Deterministic per seed.
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self, LossError> {
        if input_dim == 0 || hidden_dim == 0 || num_classes < 2 {
            return Err(LossError::InvalidDimensions);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut layer = |rows: usize, cols: usize| -> Vec<f64> {
            let scale = (2.0 / cols as f64).sqrt();
            (0..rows * cols).map(|_| scale * standard_normal(&mut rng)).collect()
        };
        let w1 = layer(hidden_dim, input_dim);
        let w2 = layer(hidden_dim, hidden_dim);
        let w3 = layer(num_classes, hidden_dim);
        Ok(MlpClassifier {
            input_dim,
            hidden_dim,
            num_classes,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; hidden_dim],
            w3,
            b3: vec![0.0; num_classes],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn param_count(&self) -> usize {
        self.hidden_dim * self.input_dim
            + self.hidden_dim
            + self.hidden_dim * self.hidden_dim
            + self.hidden_dim
            + self.num_classes * self.hidden_dim
            + self.num_classes
    }

    fn check_input(&self, x: &[f64]) -> Result<(), LossError> {
        if x.len() != self.input_dim {
            return Err(LossError::DimensionMismatch { left: x.len(), right: self.input_dim });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(LossError::NonFinite);
        }
        Ok(())
    }

    /// Raw class logits for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LossError> {
        self.check_input(x)?;
        let mut h1 = matvec(&self.w1, x, &self.b1, self.hidden_dim, self.input_dim);
        for v in h1.iter_mut() {
            *v = v.max(0.0);
        }
        let mut h2 = matvec(&self.w2, &h1, &self.b2, self.hidden_dim, self.hidden_dim);
        for v in h2.iter_mut() {
            *v = v.max(0.0);
        }
        Ok(matvec(&self.w3, &h2, &self.b3, self.num_classes, self.hidden_dim))
    }

    /// Smallest absolute hidden pre-activation for one input.
    ///
    /// The loss is non-differentiable where a pre-activation crosses zero;
    /// numerical audits use this margin to sample points where the analytic
    /// gradient is an honest derivative.
    pub fn preactivation_margin(&self, x: &[f64]) -> Result<f64, LossError> {
        self.check_input(x)?;
        let z1 = matvec(&self.w1, x, &self.b1, self.hidden_dim, self.input_dim);
        let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let z2 = matvec(&self.w2, &h1, &self.b2, self.hidden_dim, self.hidden_dim);
        Ok(z1.iter().chain(&z2).fold(f64::INFINITY, |m, z| m.min(z.abs())))
    }

    /// Cross-entropy loss for one example together with its gradient over
    /// every parameter, flattened in the same order as [`params`].
    ///
    /// [`params`]: MlpClassifier::params
    pub fn loss_and_gradient(
        &self,
        x: &[f64],
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>), LossError> {
        self.check_input(x)?;
        if targets.len() != self.num_classes {
            return Err(LossError::DimensionMismatch {
                left: targets.len(),
                right: self.num_classes,
            });
        }
        let z1 = matvec(&self.w1, x, &self.b1, self.hidden_dim, self.input_dim);
        let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let z2 = matvec(&self.w2, &h1, &self.b2, self.hidden_dim, self.hidden_dim);
        let h2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
        let logits = matvec(&self.w3, &h2, &self.b3, self.num_classes, self.hidden_dim);
        let loss = cross_entropy(&logits, targets)?;
        let dlogits = cross_entropy_gradient(&logits, targets)?;

        let h = self.hidden_dim;
        let d = self.input_dim;
        let n = self.num_classes;
        let mut gw3 = vec![0.0; n * h];
        for r in 0..n {
            for c in 0..h {
                gw3[r * h + c] = dlogits[r] * h2[c];
            }
        }
        let mut dh2 = vec![0.0; h];
        for c in 0..h {
            dh2[c] = (0..n).map(|r| self.w3[r * h + c] * dlogits[r]).sum();
        }
        let dz2: Vec<f64> =
            dh2.iter().zip(&z2).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect();
        let mut gw2 = vec![0.0; h * h];
        for r in 0..h {
            for c in 0..h {
                gw2[r * h + c] = dz2[r] * h1[c];
            }
        }
        let mut dh1 = vec![0.0; h];
        for c in 0..h {
            dh1[c] = (0..h).map(|r| self.w2[r * h + c] * dz2[r]).sum();
        }
        let dz1: Vec<f64> =
            dh1.iter().zip(&z1).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect();
        let mut gw1 = vec![0.0; h * d];
        for r in 0..h {
            for c in 0..d {
                gw1[r * d + c] = dz1[r] * x[c];
            }
        }

        let mut grad = Vec::with_capacity(self.param_count());
        grad.extend(gw1);
        grad.extend(dz1);
        grad.extend(gw2);
        grad.extend(dz2);
        grad.extend(gw3);
        grad.extend(dlogits);
        Ok((loss, grad))
    }

    /// One full-batch gradient-descent step; returns the mean loss measured
    /// before the update.
    pub fn train_step(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        learning_rate: f64,
    ) -> Result<f64, LossError> {
        if inputs.is_empty() {
            return Err(LossError::EmptyInput);
        }
        if inputs.len() != targets.len() {
            return Err(LossError::DimensionMismatch { left: inputs.len(), right: targets.len() });
        }
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(LossError::InvalidLearningRate(learning_rate));
        }
        let mut total_loss = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for (x, q) in inputs.iter().zip(targets) {
            let (loss, g) = self.loss_and_gradient(x, q)?;
            total_loss += loss;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        let scale = learning_rate / inputs.len() as f64;
        let mut params = self.params();
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= scale * g;
        }
        self.set_params(&params)?;
        Ok(total_loss / inputs.len() as f64)
    }

    /// All parameters flattened as `w1, b1, w2, b2, w3, b3`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(&self.w1);
        out.extend(&self.b1);
        out.extend(&self.w2);
        out.extend(&self.b2);
        out.extend(&self.w3);
        out.extend(&self.b3);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), LossError> {
        if params.len() != self.param_count() {
            return Err(LossError::ParamCount { expected: self.param_count(), got: params.len() });
        }
        if !params.iter().all(|v| v.is_finite()) {
            return Err(LossError::NonFinite);
        }
        let mut offset = 0;
        let mut take = |len: usize| {
            let slice = params[offset..offset + len].to_vec();
            offset += len;
            slice
        };
        self.w1 = take(self.hidden_dim * self.input_dim);
        self.b1 = take(self.hidden_dim);
        self.w2 = take(self.hidden_dim * self.hidden_dim);
        self.b2 = take(self.hidden_dim);
        self.w3 = take(self.num_classes * self.hidden_dim);
        self.b3 = take(self.num_classes);
        Ok(())
    }

    /// Binary format: magic `MLP1`, then input/hidden/class dims as
    /// little-endian u32, then every parameter as little-endian f64 in
    /// [`params`] order.
    ///
    /// [`params`]: MlpClassifier::params
    pub fn save(&self, path: &Path) -> Result<(), LossError> {
        let mut bytes = Vec::with_capacity(16 + 8 * self.param_count());
        bytes.extend_from_slice(MLP_MAGIC);
        bytes.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.hidden_dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.num_classes as u32).to_le_bytes());
        for p in self.params() {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
        fs::write(path, bytes).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, LossError> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let format_err = |msg: &str| LossError::Format {
            path: path.display().to_string(),
            msg: msg.to_string(),
        };
        if bytes.len() < 16 || &bytes[0..4] != MLP_MAGIC {
            return Err(format_err("not a classifier file (bad magic)"));
        }
        let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let input_dim = read_u32(4);
        let hidden_dim = read_u32(8);
        let num_classes = read_u32(12);
        if input_dim == 0 || hidden_dim == 0 || num_classes < 2 {
            return Err(format_err("invalid dimensions in header"));
        }
        let mut model = MlpClassifier {
            input_dim,
            hidden_dim,
            num_classes,
            w1: Vec::new(),
            b1: Vec::new(),
            w2: Vec::new(),
            b2: Vec::new(),
            w3: Vec::new(),
            b3: Vec::new(),
        };
        let expected = 16 + 8 * model.param_count();
        if bytes.len() != expected {
            return Err(format_err(&format!(
                "expected {expected} bytes for a {input_dim}->{hidden_dim}->{hidden_dim}->{num_classes} classifier, got {}",
                bytes.len()
            )));
        }
        let params: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if !params.iter().all(|v| v.is_finite()) {
            return Err(format_err("non-finite parameter"));
        }
        model.set_params(&params)?;
        Ok(model)
    }
}

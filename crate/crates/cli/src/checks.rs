//! Gradient audits for `loss-check`: every analytic gradient in the loss
//! module is compared against central finite differences at seeded random
//! points. The subgradient of the mean absolute pixel loss is only audited
//! away from its kinks, where it is an honest derivative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use tvface_core::{
    cosine_identity_gradient, cosine_identity_loss, cross_entropy, cross_entropy_gradient,
    l1_pixel_gradient, l1_pixel_loss, smoothed_targets, Image, MlpClassifier,
};

/// Outcome of one audited gradient: the worst vector-relative disagreement
/// between the analytic gradient and finite differences over all points.
#[derive(Debug, Clone)]
pub struct GradientAudit {
    pub name: &'static str,
    pub max_relative_error: f64,
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-12)
}

/// Runs all four audits at `points_per_audit` seeded random points each.
pub fn gradient_audits(seed: u64, points_per_audit: usize) -> Vec<GradientAudit> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];

    for p in 0..points_per_audit {
        // cross entropy over logits with smoothed targets
        let n = 4 + p % 6;
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let targets = smoothed_targets(p % n, n, 0.1).expect("valid smoothing parameters");
        let analytic = cross_entropy_gradient(&logits, targets.probabilities())
            .expect("finite logits and a valid distribution");
        let numeric = central_difference(
            |l: &[f64]| cross_entropy(l, targets.probabilities()).unwrap(),
            &logits,
            1e-6,
        );
        worst[0] = worst[0].max(relative_error(&analytic, &numeric));

        // cosine identity loss in its first argument
        let dim = 3 + p % 5;
        let sample_away_from_zero = |rng: &mut ChaCha12Rng| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().map(|a| a * a).sum::<f64>().sqrt() > 0.3 {
                return v;
            }
        };
        let a = sample_away_from_zero(&mut rng);
        let b = sample_away_from_zero(&mut rng);
        let analytic = cosine_identity_gradient(&a, &b).expect("nonzero vectors");
        let numeric =
            central_difference(|x: &[f64]| cosine_identity_loss(x, &b).unwrap(), &a, 1e-6);
        worst[1] = worst[1].max(relative_error(&analytic, &numeric));

        // mean absolute pixel loss, sampled with a gap around every kink
        let side = 4;
        let base: Vec<f64> = (0..side * side).map(|_| rng.gen_range(0.3..0.7)).collect();
        let other: Vec<f64> = base
            .iter()
            .map(|v| {
                let delta = rng.gen_range(0.05..0.25);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                (v + sign * delta).clamp(0.0, 1.0)
            })
            .collect();
        let image_b = Image::new(side, side, 1, other).expect("values stay in range");
        let analytic = l1_pixel_gradient(
            &Image::new(side, side, 1, base.clone()).expect("values stay in range"),
            &image_b,
        )
        .expect("shapes match");
        let numeric = central_difference(
            |flat: &[f64]| {
                let img = Image::new(side, side, 1, flat.to_vec()).unwrap();
                l1_pixel_loss(&img, &image_b).unwrap()
            },
            &base,
            1e-6,
        );
        worst[2] = worst[2].max(relative_error(&analytic, &numeric));

        // full classifier backpropagation through both hidden layers; the
        // input is resampled until every hidden pre-activation clears the
        // finite-difference step, keeping the audit away from relu kinks
        let inputs = 3 + p % 3;
        let classes = 3 + p % 2;
        let model = MlpClassifier::new(inputs, 4, classes, seed.wrapping_add(p as u64))
            .expect("valid classifier shape");
        let x: Vec<f64> = loop {
            let candidate: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if model.preactivation_margin(&candidate).expect("matching dimensions") > 1e-3 {
                break candidate;
            }
        };
        let targets = smoothed_targets(p % classes, classes, 0.1).expect("valid smoothing");
        let (_, analytic) = model
            .loss_and_gradient(&x, targets.probabilities())
            .expect("matching dimensions");
        let params = model.params();
        let numeric = central_difference(
            |theta: &[f64]| {
                let mut m = model.clone();
                m.set_params(theta).unwrap();
                m.loss_and_gradient(&x, targets.probabilities()).unwrap().0
            },
            &params,
            1e-5,
        );
        worst[3] = worst[3].max(relative_error(&analytic, &numeric));
    }

    ["cross-entropy", "cosine-identity", "l1-pixel", "mlp-classifier"]
        .into_iter()
        .zip(worst)
        .map(|(name, max_relative_error)| GradientAudit { name, max_relative_error })
        .collect()
}

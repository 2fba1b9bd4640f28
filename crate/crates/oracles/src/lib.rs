//! Slow, obviously-correct reference implementations.
//!
//! Everything in this crate exists to cross-check the fast paths in
//! `tvface-core` from tests. Nothing here may depend on the code it checks,
//! so implementations stick to brute force: exhaustive pair counting,
//! dense threshold sweeps, derivative-free minimization, direct step-function
//! integration, and naive nested loops.

use std::f64::consts::PI;

/// ROC area, as a percentage, by exhaustive pair counting; ties contribute
/// one half. The pair count is a half-integer, so it accumulates exactly,
/// and the single final division makes the result bitwise-comparable to any
/// other exact counting method scaled the same way.
pub fn auc_pair_count(genuine: &[f64], impostor: &[f64]) -> f64 {
    assert!(!genuine.is_empty() && !impostor.is_empty());
    let mut num = 0.0;
    for &g in genuine {
        for &i in impostor {
            if g > i {
                num += 1.0;
            } else if g == i {
                num += 0.5;
            }
        }
    }
    100.0 * num / (genuine.len() as f64 * impostor.len() as f64)
}

/// Empirical ROC by recounting both classes at every distinct score.
///
/// Returns `(threshold, far, tar)` triples starting from the `(inf, 0, 0)`
/// anchor, thresholds descending. Accept rule is `score >= threshold`.
pub fn roc_dense_sweep(genuine: &[f64], impostor: &[f64]) -> Vec<(f64, f64, f64)> {
    assert!(!genuine.is_empty() && !impostor.is_empty());
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("scores must be finite"));
    thresholds.dedup();
    let ng = genuine.len() as f64;
    let ni = impostor.len() as f64;
    let mut points = vec![(f64::INFINITY, 0.0, 0.0)];
    for &t in &thresholds {
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / ni;
        let tar = genuine.iter().filter(|&&s| s >= t).count() as f64 / ng;
        points.push((t, far, tar));
    }
    points
}

/// Equal error rate in percent from ROC points, linearly interpolated on the
/// first segment where `tar + far - 1` changes sign.
pub fn eer_percent_from_points(points: &[(f64, f64, f64)]) -> f64 {
    for w in points.windows(2) {
        let (_, f1, t1) = w[0];
        let (_, f2, t2) = w[1];
        let g1 = t1 + f1 - 1.0;
        let g2 = t2 + f2 - 1.0;
        if g1 <= 0.0 && g2 >= 0.0 {
            let denom = (t2 - t1) + (f2 - f1);
            let alpha = if denom == 0.0 { 0.0 } else { -g1 / denom };
            return 100.0 * (f1 + alpha * (f2 - f1));
        }
    }
    100.0
}

/// True-accept rate in percent at an exact false-accept rate, taken on the
/// ROC polyline. At a vertical run the topmost point counts.
pub fn tar_at_far_percent_from_points(points: &[(f64, f64, f64)], far_target: f64) -> f64 {
    let mut k = 0;
    for (i, &(_, f, _)) in points.iter().enumerate() {
        if f <= far_target {
            k = i;
        }
    }
    let (_, f1, t1) = points[k];
    if k + 1 < points.len() {
        let (_, f2, t2) = points[k + 1];
        if f2 > f1 {
            return 100.0 * (t1 + (far_target - f1) * (t2 - t1) / (f2 - f1));
        }
    }
    100.0 * t1
}

/// Sum of squared residuals of the best similarity fit src -> dst found by
/// Nelder-Mead over (log scale, angle, translation), restarted from four
/// rotation seeds. Scale stays positive by construction, so the search space
/// matches a proper (reflection-free) similarity.
pub fn similarity_fit_residual(src: &[(f64, f64)], dst: &[(f64, f64)]) -> f64 {
    assert_eq!(src.len(), dst.len());
    let objective = |p: &[f64]| -> f64 {
        let s = p[0].exp();
        let (sin, cos) = p[1].sin_cos();
        src.iter()
            .zip(dst)
            .map(|(&(x, y), &(u, v))| {
                let px = s * (cos * x - sin * y) + p[2];
                let py = s * (sin * x + cos * y) + p[3];
                (px - u) * (px - u) + (py - v) * (py - v)
            })
            .sum()
    };
    let (mx, my) = centroid(src);
    let (mu, mv) = centroid(dst);
    let vs: f64 = src.iter().map(|&(x, y)| (x - mx).powi(2) + (y - my).powi(2)).sum();
    let vd: f64 = dst.iter().map(|&(u, v)| (u - mu).powi(2) + (v - mv).powi(2)).sum();
    let s0 = (vd / vs).sqrt().max(1e-9);
    let mut best = f64::INFINITY;
    for &theta0 in &[0.0, PI / 2.0, PI, -PI / 2.0] {
        let (sin, cos) = theta0.sin_cos();
        let seed = [
            s0.ln(),
            theta0,
            mu - s0 * (cos * mx - sin * my),
            mv - s0 * (sin * mx + cos * my),
        ];
        best = best.min(nelder_mead(objective, &seed, &[0.2, 0.2, 1.0, 1.0], 2000));
    }
    best
}

/// Plain Nelder-Mead; returns the best objective value reached.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, seed: &[f64], steps: &[f64], max_iter: usize) -> f64 {
    let n = seed.len();
    let mut simplex: Vec<Vec<f64>> = vec![seed.to_vec()];
    for i in 0..n {
        let mut v = seed.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let (best, worst, second_worst) = (order[0], order[n], order[n - 1]);
        if (values[worst] - values[best]).abs() <= 1e-15 * (1.0 + values[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for d in 0..n {
                centroid[d] += simplex[i][d] / n as f64;
            }
        }
        let lerp = |from: &[f64], t: f64| -> Vec<f64> {
            (0..n).map(|d| centroid[d] + t * (from[d] - centroid[d])).collect()
        };
        let reflected = lerp(&simplex[worst], -1.0);
        let fr = f(&reflected);
        if fr < values[best] {
            let expanded = lerp(&simplex[worst], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = if fr < values[worst] {
                lerp(&simplex[worst], -0.5)
            } else {
                lerp(&simplex[worst], 0.5)
            };
            let fc = f(&contracted);
            if fc < values[worst].min(fr) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                for &i in order.iter().skip(1) {
                    simplex[i] = (0..n)
                        .map(|d| simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn centroid(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
    (sx / n, sy / n)
}

/// Least-squares similarity fit in the (a, b, tx, ty) parametrization where
/// the linear map is [[a, -b], [b, a]]. Solved with Gaussian elimination on
/// the normal equations; independent of any SVD route.
pub fn similarity_fit_normal_equations(src: &[(f64, f64)], dst: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let (mut sxx, mut sx, mut sy, mut su, mut sv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sxu_yv, mut sxv_yu) = (0.0, 0.0);
    for (&(x, y), &(u, v)) in src.iter().zip(dst) {
        sxx += x * x + y * y;
        sx += x;
        sy += y;
        su += u;
        sv += v;
        sxu_yv += x * u + y * v;
        sxv_yu += x * v - y * u;
    }
    let mut m = [
        [sxx, 0.0, sx, sy, sxu_yv],
        [0.0, sxx, -sy, sx, sxv_yu],
        [sx, -sy, n, 0.0, su],
        [sy, sx, 0.0, n, sv],
    ];
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()).unwrap();
        m.swap(col, pivot);
        assert!(m[col][col].abs() > 1e-12, "singular normal equations");
        for row in 0..4 {
            if row != col {
                let factor = m[row][col] / m[col][col];
                for k in col..5 {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    (m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3])
}

/// Area under the cumulative error distribution over [0, threshold],
/// normalized by the threshold, plus the fraction of errors above it.
/// Integrates the step function interval by interval.
pub fn ced_auc_and_failure(errors: &[f64], threshold: f64) -> (f64, f64) {
    assert!(!errors.is_empty() && threshold > 0.0);
    let n = errors.len() as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    let mut prev = 0.0;
    let mut below = 0usize;
    for (i, &e) in sorted.iter().enumerate() {
        if e > threshold {
            break;
        }
        area += (e - prev) * (i as f64 / n);
        prev = e;
        below = i + 1;
    }
    area += (threshold - prev) * (below as f64 / n);
    let failures = sorted.iter().filter(|&&e| e > threshold).count() as f64;
    (area / threshold, failures / n)
}

/// Central finite-difference gradient of a scalar function.
pub fn central_diff_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

/// Median with the average-of-middle-two convention for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-landmark, per-axis median across predictions. Each prediction lists
/// the same landmarks in the same order.
pub fn median_keypoints(predictions: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    assert!(!predictions.is_empty());
    let k = predictions[0].len();
    (0..k)
        .map(|i| {
            let xs: Vec<f64> = predictions.iter().map(|p| p[i].0).collect();
            let ys: Vec<f64> = predictions.iter().map(|p| p[i].1).collect();
            (median(&xs), median(&ys))
        })
        .collect()
}

/// All-pairs nearest-thermal assignment. Distance is the root of the summed
/// squared landmark distances, normalized by five times the template
/// diagonal. Ties keep the earliest thermal frame.
pub fn brute_force_sync(
    visible: &[(i64, Vec<(f64, f64)>)],
    thermal: &[(i64, Vec<(f64, f64)>)],
    template_diagonal: f64,
) -> Vec<(i64, i64, f64)> {
    visible
        .iter()
        .map(|(vid, vkp)| {
            let mut best: Option<(i64, f64)> = None;
            for (tid, tkp) in thermal {
                let mut ss = 0.0;
                for (a, b) in vkp.iter().zip(tkp) {
                    ss += (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
                }
                let d = ss.sqrt() / (5.0 * template_diagonal);
                let replace = match best {
                    None => true,
                    Some((_, bd)) => d < bd,
                };
                if replace {
                    best = Some((*tid, d));
                }
            }
            let (tid, d) = best.expect("thermal track must be nonempty");
            (*vid, tid, d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_perfect_separation_is_one_hundred_percent() {
        assert_eq!(auc_pair_count(&[0.9, 0.8], &[0.1, 0.2]), 100.0);
    }

    #[test]
    fn auc_identical_distributions_is_fifty_percent() {
        assert_eq!(auc_pair_count(&[0.3, 0.7], &[0.3, 0.7]), 50.0);
    }

    #[test]
    fn eer_of_interleaved_scores_is_fifty() {
        let points = roc_dense_sweep(&[0.9, 0.4], &[0.5, 0.1]);
        assert!((eer_percent_from_points(&points) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn eer_of_perfect_separation_is_zero() {
        let points = roc_dense_sweep(&[0.9, 0.8], &[0.1, 0.2]);
        assert!(eer_percent_from_points(&points).abs() < 1e-12);
        assert!((tar_at_far_percent_from_points(&points, 0.01) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn ced_hand_case() {
        let (auc, failure) = ced_auc_and_failure(&[0.02, 0.02, 0.10, 0.10], 0.08);
        assert!((auc - 0.375).abs() < 1e-12, "auc {auc}");
        assert!((failure - 0.5).abs() < 1e-12, "failure {failure}");
    }

    #[test]
    fn nelder_mead_recovers_exact_fit() {
        let src = [(0.0, 0.0), (10.0, 0.0), (3.0, 7.0), (-4.0, 2.0)];
        let s = 1.7;
        let th: f64 = 0.6;
        let (sin, cos) = th.sin_cos();
        let dst: Vec<(f64, f64)> = src
            .iter()
            .map(|&(x, y)| (s * (cos * x - sin * y) + 5.0, s * (sin * x + cos * y) - 2.0))
            .collect();
        let residual = similarity_fit_residual(&src, &dst);
        assert!(residual < 1e-9, "residual {residual}");
    }

    #[test]
    fn normal_equations_recover_exact_fit() {
        let src = [(0.0, 0.0), (10.0, 0.0), (3.0, 7.0), (-4.0, 2.0)];
        let (a0, b0, tx0, ty0) = (1.2, -0.9, 4.0, 11.0);
        let dst: Vec<(f64, f64)> = src
            .iter()
            .map(|&(x, y)| (a0 * x - b0 * y + tx0, b0 * x + a0 * y + ty0))
            .collect();
        let (a, b, tx, ty) = similarity_fit_normal_equations(&src, &dst);
        assert!((a - a0).abs() < 1e-9 && (b - b0).abs() < 1e-9);
        assert!((tx - tx0).abs() < 1e-9 && (ty - ty0).abs() < 1e-9);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn sync_prefers_lower_thermal_id_on_ties() {
        let kp = vec![(0.0, 0.0); 5];
        let visible = vec![(0i64, kp.clone())];
        let thermal = vec![(10i64, kp.clone()), (11i64, kp.clone())];
        let pairs = brute_force_sync(&visible, &thermal, 181.0);
        assert_eq!(pairs, vec![(0, 10, 0.0)]);
    }
}

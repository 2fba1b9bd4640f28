//! Verification protocol scoring: cosine match scores, ROC construction,
//! rank-based AUC, EER and TAR-at-FAR interpolation, cohort aggregation,
//! and the report/ROC file formats.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::dataset::{
    DatasetError, DatasetManifest, EmbeddingStore, Location, Pose, Sequence, Spectrum, Split,
};
use crate::losses::{Embedding, LossError};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("score set has no {which} scores")]
    EmptyScores { which: &'static str },
    #[error("no input provided")]
    EmptyInput,
    #[error("scores must be finite")]
    NonFinite,
    #[error("false-accept target must lie in (0, 1], got {0}")]
    InvalidFarTarget(f64),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> VerifyError {
    VerifyError::Io { path: path.display().to_string(), source }
}

/// Cosine similarity between two embeddings; higher means more alike.
pub fn match_score(a: &Embedding, b: &Embedding) -> Result<f64, VerifyError> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(LossError::ZeroNorm.into());
    }
    Ok(a.dot(b)? / (na * nb))
}

/// Fuses the embeddings of an image and its horizontal mirror into one
/// vector: element-wise mean, re-normalized to unit length.
pub fn fuse_flip(original: &Embedding, flipped: &Embedding) -> Result<Embedding, VerifyError> {
    if original.dim() != flipped.dim() {
        return Err(LossError::DimensionMismatch { left: original.dim(), right: flipped.dim() }.into());
    }
    let mean: Vec<f64> = original
        .values()
        .iter()
        .zip(flipped.values())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(Embedding::new(mean)?.normalized()?)
}

/// Genuine (same subject) and impostor (different subject) score pools.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl ScoreSet {
    fn validate(&self) -> Result<(), VerifyError> {
        if self.genuine.is_empty() {
            return Err(VerifyError::EmptyScores { which: "genuine" });
        }
        if self.impostor.is_empty() {
            return Err(VerifyError::EmptyScores { which: "impostor" });
        }
        if !self.genuine.iter().chain(&self.impostor).all(|s| s.is_finite()) {
            return Err(VerifyError::NonFinite);
        }
        Ok(())
    }
}

/// One operating point of the ROC curve. `far` and `tar` are fractions in
/// [0, 1]; a trial is accepted when its score is at least `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub tar: f64,
}

/// The full ROC: an accept-nothing anchor at threshold infinity followed by
/// one point per distinct score, thresholds strictly descending.
pub fn roc_points(scores: &ScoreSet) -> Result<Vec<RocPoint>, VerifyError> {
    scores.validate()?;
    let mut genuine = scores.genuine.clone();
    let mut impostor = scores.impostor.clone();
    genuine.sort_by(|a, b| b.partial_cmp(a).expect("scores are finite"));
    impostor.sort_by(|a, b| b.partial_cmp(a).expect("scores are finite"));
    let mut thresholds: Vec<f64> = genuine.iter().chain(&impostor).cloned().collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("scores are finite"));
    thresholds.dedup();

    let g = genuine.len() as f64;
    let i = impostor.len() as f64;
    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(RocPoint { threshold: f64::INFINITY, far: 0.0, tar: 0.0 });
    let (mut ga, mut ia) = (0usize, 0usize);
    for t in thresholds {
        while ga < genuine.len() && genuine[ga] >= t {
            ga += 1;
        }
        while ia < impostor.len() && impostor[ia] >= t {
            ia += 1;
        }
        points.push(RocPoint { threshold: t, far: ia as f64 / i, tar: ga as f64 / g });
    }
    Ok(points)
}

/// Area under the ROC as a percentage, computed with the rank statistic:
/// the probability that a random genuine score exceeds a random impostor
/// score, ties counting half.
pub fn auc_percent(scores: &ScoreSet) -> Result<f64, VerifyError> {
    scores.validate()?;
    let mut all: Vec<(f64, bool)> = scores
        .genuine
        .iter()
        .map(|&s| (s, true))
        .chain(scores.impostor.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));
    let mut genuine_rank_sum = 0.0;
    let mut idx = 0;
    while idx < all.len() {
        let mut end = idx;
        while end < all.len() && all[end].0 == all[idx].0 {
            end += 1;
        }
        // tied scores share the average of the ranks they span
        let avg_rank = (idx + 1 + end) as f64 / 2.0;
        for entry in &all[idx..end] {
            if entry.1 {
                genuine_rank_sum += avg_rank;
            }
        }
        idx = end;
    }
    let g = scores.genuine.len() as f64;
    let i = scores.impostor.len() as f64;
    let u = genuine_rank_sum - g * (g + 1.0) / 2.0;
    Ok(100.0 * u / (g * i))
}

/// Equal error rate as a percentage: the FAR at the point where the curve
/// crosses `tar + far = 1`, linearly interpolated between the bracketing
/// ROC points.
pub fn eer_percent(points: &[RocPoint]) -> Result<f64, VerifyError> {
    if points.is_empty() {
        return Err(VerifyError::EmptyInput);
    }
    let gap = |p: &RocPoint| p.tar + p.far - 1.0;
    if gap(&points[0]) >= 0.0 {
        return Ok(100.0 * points[0].far);
    }
    for pair in points.windows(2) {
        let (g1, g2) = (gap(&pair[0]), gap(&pair[1]));
        if g1 < 0.0 && g2 >= 0.0 {
            let dt = pair[1].tar - pair[0].tar;
            let df = pair[1].far - pair[0].far;
            let denom = dt + df;
            let alpha = if denom == 0.0 { 0.0 } else { -g1 / denom };
            return Ok(100.0 * (pair[0].far + alpha * df));
        }
    }
    // tar + far - 1 never reached zero; report the closest end
    Ok(100.0 * points[points.len() - 1].far)
}

/// True-accept rate, as a percentage, at the operating point whose FAR is
/// exactly `far_target` (a fraction). Picks the last ROC point at or below
/// the target and interpolates toward the next one.
pub fn tar_at_far_percent(points: &[RocPoint], far_target: f64) -> Result<f64, VerifyError> {
    if points.is_empty() {
        return Err(VerifyError::EmptyInput);
    }
    if !(far_target > 0.0 && far_target <= 1.0) {
        return Err(VerifyError::InvalidFarTarget(far_target));
    }
    let mut idx = None;
    for (i, p) in points.iter().enumerate() {
        if p.far <= far_target {
            idx = Some(i);
        }
    }
    let i = idx.expect("the anchor point has far 0");
    let p1 = &points[i];
    if i + 1 < points.len() {
        let p2 = &points[i + 1];
        if p2.far > p1.far {
            let alpha = (far_target - p1.far) / (p2.far - p1.far);
            return Ok(100.0 * (p1.tar + alpha * (p2.tar - p1.tar)));
        }
    }
    Ok(100.0 * p1.tar)
}

/// The four standard verification metrics, all as percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    pub auc: f64,
    pub eer: f64,
    pub tar_at_far1: f64,
    pub tar_at_far5: f64,
}

pub fn verification_report(scores: &ScoreSet) -> Result<VerificationReport, VerifyError> {
    let points = roc_points(scores)?;
    Ok(VerificationReport {
        auc: auc_percent(scores)?,
        eer: eer_percent(&points)?,
        tar_at_far1: tar_at_far_percent(&points, 0.01)?,
        tar_at_far5: tar_at_far_percent(&points, 0.05)?,
    })
}

/// Unweighted mean of each metric over a set of cohort reports.
pub fn cohort_average(reports: &[VerificationReport]) -> Result<VerificationReport, VerifyError> {
    if reports.is_empty() {
        return Err(VerifyError::EmptyInput);
    }
    let n = reports.len() as f64;
    Ok(VerificationReport {
        auc: reports.iter().map(|r| r.auc).sum::<f64>() / n,
        eer: reports.iter().map(|r| r.eer).sum::<f64>() / n,
        tar_at_far1: reports.iter().map(|r| r.tar_at_far1).sum::<f64>() / n,
        tar_at_far5: reports.iter().map(|r| r.tar_at_far5).sum::<f64>() / n,
    })
}

/// Collapses labeled embeddings to one unit-length template per label: the
/// normalized mean of each label's vectors, labels in first-seen order.
pub fn subject_templates(
    samples: &[(String, Embedding)],
) -> Result<Vec<(String, Embedding)>, VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::EmptyInput);
    }
    let dim = samples[0].1.dim();
    let mut order: Vec<&str> = Vec::new();
    let mut sums: HashMap<&str, (Vec<f64>, usize)> = HashMap::new();
    for (label, e) in samples {
        if e.dim() != dim {
            return Err(LossError::DimensionMismatch { left: e.dim(), right: dim }.into());
        }
        let entry = sums.entry(label).or_insert_with(|| {
            order.push(label);
            (vec![0.0; dim], 0)
        });
        for (acc, v) in entry.0.iter_mut().zip(e.values()) {
            *acc += v;
        }
        entry.1 += 1;
    }
    order
        .into_iter()
        .map(|label| {
            let (sum, count) = &sums[label];
            let mean: Vec<f64> = sum.iter().map(|v| v / *count as f64).collect();
            let template = Embedding::new(mean)?.normalized()?;
            Ok((label.to_string(), template))
        })
        .collect()
}

/// Scores every query against every gallery template. Pairs with equal
/// labels feed the genuine pool, the rest the impostor pool.
pub fn score_cohort(
    gallery: &[(String, Embedding)],
    queries: &[(String, Embedding)],
) -> Result<ScoreSet, VerifyError> {
    if gallery.is_empty() || queries.is_empty() {
        return Err(VerifyError::EmptyInput);
    }
    let mut scores = ScoreSet::default();
    for (qlabel, q) in queries {
        for (glabel, g) in gallery {
            let s = match_score(q, g)?;
            if qlabel == glabel {
                scores.genuine.push(s);
            } else {
                scores.impostor.push(s);
            }
        }
    }
    Ok(scores)
}

/// Predicate over manifest sequences; `None` fields match anything.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameFilter {
    pub split: Option<Split>,
    pub spectrum: Option<Spectrum>,
    pub pose: Option<Pose>,
    pub location: Option<Location>,
}

impl FrameFilter {
    pub fn matches(&self, split: Split, sequence: &Sequence) -> bool {
        self.split.map_or(true, |s| s == split)
            && self.spectrum.map_or(true, |s| s == sequence.spectrum)
            && self.pose.map_or(true, |p| p == sequence.pose)
            && self.location.map_or(true, |l| l == sequence.location)
    }
}

/// A named gallery/query filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub name: String,
    pub gallery: FrameFilter,
    pub query: FrameFilter,
}

/// An ordered list of cohorts to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub cohorts: Vec<CohortSpec>,
}

impl ProtocolSpec {
    /// The standard four-cohort protocol: within each pose x location
    /// condition of the evaluation split, visible frames form the gallery
    /// and thermal frames the queries. The eight selections are pairwise
    /// disjoint and together cover every evaluation frame.
    pub fn canonical_four() -> ProtocolSpec {
        let mut cohorts = Vec::new();
        for pose in [Pose::Frontal, Pose::Profile] {
            for location in [Location::Indoor, Location::Outdoor] {
                let base = FrameFilter {
                    split: Some(Split::Eval),
                    spectrum: None,
                    pose: Some(pose),
                    location: Some(location),
                };
                cohorts.push(CohortSpec {
                    name: format!(
                        "{}-{}",
                        pose.as_str().to_lowercase(),
                        location.as_str().to_lowercase()
                    ),
                    gallery: FrameFilter { spectrum: Some(Spectrum::Visible), ..base },
                    query: FrameFilter { spectrum: Some(Spectrum::Thermal), ..base },
                });
            }
        }
        ProtocolSpec { cohorts }
    }
}

/// A frame chosen by a protocol filter, addressed by its position in the
/// manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedFrame {
    pub subject_id: String,
    pub sequence_index: usize,
    pub frame_index: usize,
}

/// The gallery and query frame lists of one evaluated cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSelection {
    pub name: String,
    pub gallery: Vec<SelectedFrame>,
    pub query: Vec<SelectedFrame>,
}

pub fn select_frames(manifest: &DatasetManifest, filter: &FrameFilter) -> Vec<SelectedFrame> {
    let mut selected = Vec::new();
    for subject in &manifest.subjects {
        for (si, sequence) in subject.sequences.iter().enumerate() {
            if !filter.matches(subject.split, sequence) {
                continue;
            }
            for fi in 0..sequence.frames.len() {
                selected.push(SelectedFrame {
                    subject_id: subject.id.clone(),
                    sequence_index: si,
                    frame_index: fi,
                });
            }
        }
    }
    selected
}

/// Applies every cohort filter of `spec` to the manifest. Cohorts with no
/// matching frames come back empty rather than failing, so callers can
/// flag and skip them.
pub fn build_protocol(manifest: &DatasetManifest, spec: &ProtocolSpec) -> Vec<CohortSelection> {
    spec.cohorts
        .iter()
        .map(|cohort| CohortSelection {
            name: cohort.name.clone(),
            gallery: select_frames(manifest, &cohort.gallery),
            query: select_frames(manifest, &cohort.query),
        })
        .collect()
}

/// Loads the embedding behind every selected frame, labeled by subject.
/// Frames without an embedding reference are an error: scoring needs every
/// selected frame represented.
pub fn resolve_embeddings(
    manifest: &DatasetManifest,
    store: &mut EmbeddingStore,
    selection: &[SelectedFrame],
) -> Result<Vec<(String, Embedding)>, DatasetError> {
    let by_id: HashMap<&str, &crate::dataset::Subject> =
        manifest.subjects.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out = Vec::with_capacity(selection.len());
    for sel in selection {
        let subject = by_id
            .get(sel.subject_id.as_str())
            .unwrap_or_else(|| panic!("selection references unknown subject {}", sel.subject_id));
        let frame = &subject.sequences[sel.sequence_index].frames[sel.frame_index];
        let r = frame.embedding.as_ref().ok_or_else(|| DatasetError::MissingEmbedding {
            subject: sel.subject_id.clone(),
            frame: frame.id,
        })?;
        out.push((sel.subject_id.clone(), store.get(r)?));
    }
    Ok(out)
}

/// One named cohort row of a verification report file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub gallery: String,
    pub query: String,
    pub report: VerificationReport,
}

const REPORT_HEADER: &str = "gallery,query,auc,eer,tar1,tar5";

/// CSV text with a fixed `gallery,query,auc,eer,tar1,tar5` header and one
/// row per cohort.
pub fn report_csv_string(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.gallery, r.query, r.report.auc, r.report.eer, r.report.tar_at_far1, r.report.tar_at_far5
        ));
    }
    out
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<(), VerifyError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, report_csv_string(rows)).map_err(|e| io_err(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>, VerifyError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parse_err = |line: usize, msg: String| VerifyError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == REPORT_HEADER => {}
        Some((n, header)) => {
            return Err(parse_err(n + 1, format!("expected header {REPORT_HEADER:?}, got {header:?}")))
        }
        None => return Err(parse_err(1, "empty report file".to_string())),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(n + 1, format!("expected 6 columns, got {}", fields.len())));
        }
        let num = |s: &str| -> Result<f64, VerifyError> {
            s.trim().parse().map_err(|_| parse_err(n + 1, format!("bad number {s:?}")))
        };
        rows.push(ReportRow {
            gallery: fields[0].trim().to_string(),
            query: fields[1].trim().to_string(),
            report: VerificationReport {
                auc: num(fields[2])?,
                eer: num(fields[3])?,
                tar_at_far1: num(fields[4])?,
                tar_at_far5: num(fields[5])?,
            },
        });
    }
    Ok(rows)
}

/// CSV with a `threshold,far,tar` header and one row per ROC point.
pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<(), VerifyError> {
    let mut out = String::from("threshold,far,tar\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.tar));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// A self-contained SVG plot of the ROC curve with axes, a chance
/// diagonal, and the curve as a polyline.
pub fn write_roc_svg(path: &Path, points: &[RocPoint]) -> Result<(), VerifyError> {
    const SIZE: f64 = 560.0;
    const MARGIN: f64 = 40.0;
    const SPAN: f64 = SIZE - 2.0 * MARGIN;
    let x = |far: f64| MARGIN + far * SPAN;
    let y = |tar: f64| MARGIN + (1.0 - tar) * SPAN;
    let mut poly = String::new();
    for p in points {
        poly.push_str(&format!("{:.2},{:.2} ", x(p.far), y(p.tar)));
    }
    let svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\">\n",
            "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n",
            "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{m}\" stroke=\"#cccccc\" stroke-dasharray=\"6,4\"/>\n",
            "<polyline points=\"{poly}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            "<text x=\"{cx}\" y=\"{tb}\" text-anchor=\"middle\" font-size=\"14\">false accept rate</text>\n",
            "<text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 14 {cy})\">true accept rate</text>\n",
            "</svg>\n"
        ),
        size = SIZE,
        m = MARGIN,
        b = SIZE - MARGIN,
        r = SIZE - MARGIN,
        poly = poly.trim_end(),
        cx = SIZE / 2.0,
        tb = SIZE - 10.0,
        cy = SIZE / 2.0,
    );
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    fs::write(path, svg).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_scores(rng: &mut ChaCha12Rng) -> ScoreSet {
        // quarter-integer lattice scores force plenty of exact ties
        let g = rng.gen_range(1..60);
        let i = rng.gen_range(1..60);
        ScoreSet {
            genuine: (0..g).map(|_| rng.gen_range(-8..=12) as f64 / 4.0).collect(),
            impostor: (0..i).map(|_| rng.gen_range(-12..=8) as f64 / 4.0).collect(),
        }
    }

    #[test]
    fn auc_matches_pair_counting_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = random_scores(&mut rng);
            let expected = tvface_oracles::auc_pair_count(&s.genuine, &s.impostor);
            let got = auc_percent(&s).unwrap();
            assert_eq!(got, expected, "rank AUC must equal pair counting bitwise");
        }
    }

    #[test]
    fn perfect_and_chance_separation() {
        let perfect = ScoreSet { genuine: vec![0.9, 0.8, 0.95], impostor: vec![0.1, 0.2, 0.3] };
        let r = verification_report(&perfect).unwrap();
        assert_eq!(r.auc, 100.0);
        assert_eq!(r.eer, 0.0);
        assert_eq!(r.tar_at_far1, 100.0);
        assert_eq!(r.tar_at_far5, 100.0);

        let chance = ScoreSet { genuine: vec![0.5, 0.5], impostor: vec![0.5, 0.5] };
        assert_eq!(auc_percent(&chance).unwrap(), 50.0);
    }

    #[test]
    fn interleaved_hand_case() {
        let s = ScoreSet { genuine: vec![0.9, 0.4], impostor: vec![0.5, 0.1] };
        let r = verification_report(&s).unwrap();
        assert_abs_diff_eq!(r.auc, 75.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.eer, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tar_at_far1, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tar_at_far5, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn auc_swap_symmetry() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s = random_scores(&mut rng);
            let swapped = ScoreSet { genuine: s.impostor.clone(), impostor: s.genuine.clone() };
            assert_abs_diff_eq!(
                auc_percent(&s).unwrap(),
                100.0 - auc_percent(&swapped).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn roc_points_match_dense_sweep_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..50 {
            let s = random_scores(&mut rng);
            let got = roc_points(&s).unwrap();
            let expected = tvface_oracles::roc_dense_sweep(&s.genuine, &s.impostor);
            assert_eq!(got.len(), expected.len());
            for (p, (t, f, ta)) in got.iter().zip(expected) {
                assert_eq!(p.threshold, t);
                assert_abs_diff_eq!(p.far, f, epsilon = 1e-12);
                assert_abs_diff_eq!(p.tar, ta, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eer_and_tar_match_oracle_on_random_sets() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for _ in 0..100 {
            let s = random_scores(&mut rng);
            let points = roc_points(&s).unwrap();
            let oracle_points = tvface_oracles::roc_dense_sweep(&s.genuine, &s.impostor);
            let eer = eer_percent(&points).unwrap();
            let eer_oracle = tvface_oracles::eer_percent_from_points(&oracle_points);
            assert_abs_diff_eq!(eer, eer_oracle, epsilon = 1e-9);
            for target in [0.01, 0.05, 0.25] {
                let tar = tar_at_far_percent(&points, target).unwrap();
                let tar_oracle =
                    tvface_oracles::tar_at_far_percent_from_points(&oracle_points, target);
                assert!(
                    (tar - tar_oracle).abs() <= 1e-9,
                    "tar@{target}: {tar} vs oracle {tar_oracle}"
                );
            }
        }
    }

    #[test]
    fn tar_grows_with_the_far_budget() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let s = random_scores(&mut rng);
            let r = verification_report(&s).unwrap();
            assert!(
                r.tar_at_far5 >= r.tar_at_far1 - 1e-12,
                "TAR@5% ({}) below TAR@1% ({})",
                r.tar_at_far5,
                r.tar_at_far1
            );
        }
    }

    #[test]
    fn empty_pools_are_rejected() {
        let s = ScoreSet { genuine: vec![], impostor: vec![0.1] };
        assert!(matches!(auc_percent(&s), Err(VerifyError::EmptyScores { which: "genuine" })));
        let s = ScoreSet { genuine: vec![0.1], impostor: vec![] };
        assert!(matches!(roc_points(&s), Err(VerifyError::EmptyScores { which: "impostor" })));
    }

    #[test]
    fn match_score_is_cosine() {
        let a = Embedding::new(vec![1.0, 0.0]).unwrap();
        let b = Embedding::new(vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            match_score(&a, &b).unwrap(),
            1.0 / (2.0_f64).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn fuse_flip_averages_and_normalizes() {
        let a = Embedding::new(vec![2.0, 0.0]).unwrap();
        let b = Embedding::new(vec![0.0, 2.0]).unwrap();
        let fused = fuse_flip(&a, &b).unwrap();
        assert!(fused.is_normalized());
        assert_abs_diff_eq!(fused.values()[0], fused.values()[1], epsilon = 1e-15);
        let same = fuse_flip(&a, &a).unwrap();
        assert_abs_diff_eq!(same.values()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn subject_templates_group_and_normalize() {
        let samples = vec![
            ("s1".to_string(), Embedding::new(vec![1.0, 0.0]).unwrap()),
            ("s2".to_string(), Embedding::new(vec![0.0, 3.0]).unwrap()),
            ("s1".to_string(), Embedding::new(vec![0.0, 1.0]).unwrap()),
        ];
        let templates = subject_templates(&samples).unwrap();
        assert_eq!(templates.len(), 2);
        assert_eq!(templates[0].0, "s1");
        assert_eq!(templates[1].0, "s2");
        let t1 = &templates[0].1;
        assert!(t1.is_normalized());
        assert_abs_diff_eq!(t1.values()[0], t1.values()[1], epsilon = 1e-15);
        assert_abs_diff_eq!(templates[1].1.values()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn score_cohort_partitions_by_label() {
        let e = |v: Vec<f64>| Embedding::new(v).unwrap();
        let gallery = vec![
            ("s1".to_string(), e(vec![1.0, 0.0])),
            ("s2".to_string(), e(vec![0.0, 1.0])),
        ];
        let queries = vec![
            ("s1".to_string(), e(vec![0.9, 0.1])),
            ("s1".to_string(), e(vec![0.8, 0.3])),
            ("s2".to_string(), e(vec![0.1, 0.9])),
        ];
        let scores = score_cohort(&gallery, &queries).unwrap();
        assert_eq!(scores.genuine.len(), 3, "one genuine pair per query");
        assert_eq!(scores.impostor.len(), 3);
        let r = verification_report(&scores).unwrap();
        assert_eq!(r.auc, 100.0, "well-separated toy cohort");
    }

    #[test]
    fn cohort_average_is_componentwise_mean() {
        let a = VerificationReport { auc: 90.0, eer: 10.0, tar_at_far1: 50.0, tar_at_far5: 70.0 };
        let b = VerificationReport { auc: 100.0, eer: 0.0, tar_at_far1: 100.0, tar_at_far5: 100.0 };
        let avg = cohort_average(&[a, b]).unwrap();
        assert_eq!(avg, VerificationReport { auc: 95.0, eer: 5.0, tar_at_far1: 75.0, tar_at_far5: 85.0 });
        assert!(matches!(cohort_average(&[]), Err(VerifyError::EmptyInput)));
    }

    fn toy_manifest() -> DatasetManifest {
        use crate::dataset::{Frame, Subject};
        let mut subjects = Vec::new();
        for (i, split) in [(0, Split::Train), (1, Split::Eval), (2, Split::Eval)] {
            let mut sequences = Vec::new();
            for spectrum in [Spectrum::Visible, Spectrum::Thermal] {
                for pose in [Pose::Frontal, Pose::Profile] {
                    for location in [Location::Indoor, Location::Outdoor] {
                        sequences.push(Sequence {
                            spectrum,
                            pose,
                            location,
                            range_m: 1.5,
                            tags: vec![],
                            frames: (0..2)
                                .map(|f| Frame {
                                    id: f,
                                    image: format!("img/{i}/{spectrum}-{pose}-{location}/{f}.pgm"),
                                    keypoints: None,
                                    embedding: None,
                                })
                                .collect(),
                        });
                    }
                }
            }
            subjects.push(Subject { id: format!("S{i:04}"), split, sequences });
        }
        DatasetManifest { subjects }
    }

    #[test]
    fn canonical_protocol_partitions_eval_frames() {
        let manifest = toy_manifest();
        let cohorts = build_protocol(&manifest, &ProtocolSpec::canonical_four());
        assert_eq!(cohorts.len(), 4);
        let mut seen = std::collections::HashSet::new();
        let mut total = 0;
        for cohort in &cohorts {
            // 2 eval subjects x 1 matching sequence x 2 frames per side
            assert_eq!(cohort.gallery.len(), 4, "cohort {}", cohort.name);
            assert_eq!(cohort.query.len(), 4, "cohort {}", cohort.name);
            for sel in cohort.gallery.iter().chain(&cohort.query) {
                assert!(
                    seen.insert((sel.subject_id.clone(), sel.sequence_index, sel.frame_index)),
                    "frame selected twice across cohorts"
                );
                total += 1;
            }
        }
        // every eval frame is covered: 2 subjects x 8 sequences x 2 frames
        assert_eq!(total, 32);
        assert!(cohorts.iter().all(|c| c
            .gallery
            .iter()
            .chain(&c.query)
            .all(|s| s.subject_id != "S0000")));
    }

    #[test]
    fn vacuous_filters_give_empty_cohorts() {
        let mut manifest = toy_manifest();
        for subject in &mut manifest.subjects {
            subject.sequences.retain(|s| s.location == Location::Indoor);
        }
        let cohorts = build_protocol(&manifest, &ProtocolSpec::canonical_four());
        let outdoor: Vec<_> =
            cohorts.iter().filter(|c| c.name.ends_with("-outdoor")).collect();
        assert_eq!(outdoor.len(), 2);
        for cohort in outdoor {
            assert!(cohort.gallery.is_empty() && cohort.query.is_empty());
        }
    }

    #[test]
    fn resolve_embeddings_labels_and_errors() {
        use crate::dataset::{write_embeddings, EmbeddingRef};
        let mut manifest = toy_manifest();
        let dir = tempfile::tempdir().unwrap();
        let embeddings =
            vec![Embedding::new(vec![1.0, 0.0]).unwrap(), Embedding::new(vec![0.0, 1.0]).unwrap()];
        write_embeddings(&embeddings, &dir.path().join("embeddings.emb")).unwrap();
        manifest.subjects[1].sequences[0].frames[0].embedding =
            Some(EmbeddingRef { path: "embeddings.emb".to_string(), index: 1 });
        let mut store = EmbeddingStore::new(dir.path());
        let selection = vec![SelectedFrame {
            subject_id: "S0001".to_string(),
            sequence_index: 0,
            frame_index: 0,
        }];
        let resolved = resolve_embeddings(&manifest, &mut store, &selection).unwrap();
        assert_eq!(resolved.len(), 1);
        assert_eq!(resolved[0].0, "S0001");
        assert_eq!(resolved[0].1, embeddings[1]);

        let missing = vec![SelectedFrame {
            subject_id: "S0001".to_string(),
            sequence_index: 0,
            frame_index: 1,
        }];
        assert!(matches!(
            resolve_embeddings(&manifest, &mut store, &missing),
            Err(DatasetError::MissingEmbedding { frame: 1, .. })
        ));
    }

    #[test]
    fn report_csv_round_trip() {
        let rows = vec![
            ReportRow {
                gallery: "vis-frontal-indoor".to_string(),
                query: "thermal-frontal-indoor".to_string(),
                report: VerificationReport { auc: 99.5, eer: 2.8, tar_at_far1: 91.0, tar_at_far5: 97.9 },
            },
            ReportRow {
                gallery: "vis-frontal-indoor".to_string(),
                query: "thermal-profile-outdoor".to_string(),
                report: VerificationReport { auc: 85.25, eer: 23.5, tar_at_far1: 21.125, tar_at_far5: 42.5 },
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(&path, &rows).unwrap();
        assert_eq!(read_report_csv(&path).unwrap(), rows);

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "wrong,header\n").unwrap();
        assert!(matches!(read_report_csv(&bad), Err(VerifyError::Parse { line: 1, .. })));
    }

    #[test]
    fn roc_csv_and_svg_outputs() {
        let s = ScoreSet { genuine: vec![0.9, 0.7], impostor: vec![0.6, 0.2] };
        let points = roc_points(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("roc.csv");
        write_roc_csv(&csv_path, &points).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("threshold,far,tar\ninf,0,0\n"), "got {text:?}");
        assert_eq!(text.lines().count(), points.len() + 1);

        let svg_path = dir.path().join("roc.svg");
        write_roc_svg(&svg_path, &points).unwrap();
        let svg = fs::read_to_string(&svg_path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("false accept rate"));
    }
}

//! Command-line front end composing the pipeline stages: keypoint fusion,
//! alignment, cross-spectrum synchronization, verification scoring, and the
//! synthetic data generator.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. All
//! diagnostics go to standard error; data goes to files or standard output.
//! Every subcommand is deterministic given identical flags and seeds, and
//! data outputs never depend on `--threads`.

pub mod checks;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, Parser, Subcommand};
use rayon::prelude::*;

use tvface_core::{
    aggregate_keypoints, align_face, auc_percent, build_protocol, calibrate_offset,
    cohort_average, eer_percent, generate_synthetic, keypoint_report, keypoint_report_csv_string,
    nme, read_keypoint_file, read_report_csv, report_csv_string, resolve_embeddings, roc_points,
    score_cohort, subject_templates, synchronize, tar_at_far_percent, to_five_point,
    write_keypoint_file, write_keypoint_report_csv, write_report_csv, write_roc_csv,
    write_roc_svg, write_sync_pairs, CalibrationMode, CanonicalTemplate, DatasetManifest,
    EmbeddingStore, FrameFilter, Image, KeypointRecord, KeypointSet, KeypointTrack, PointSchema,
    ProtocolSpec, RansacConfig, ReportRow, SyntheticConfig, VerificationReport,
};

#[derive(Parser)]
#[command(
    name = "tvface",
    version,
    about = "Thermal-to-visible face verification toolkit",
    propagate_version = true
)]
pub struct Cli {
    /// Worker threads for parallel subcommands; data outputs are identical
    /// for every value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Warp images onto the canonical template using per-frame keypoints
    Align(AlignArgs),
    /// Fuse repeated per-frame keypoint predictions by shape consensus
    AggregateKp(AggregateKpArgs),
    /// Pair visible and thermal frames by keypoint-geometry distance
    Sync(SyncArgs),
    /// Score a manifest's verification cohorts and write report/ROC files
    EvalVerify(EvalVerifyArgs),
    /// Summarize predicted-vs-truth keypoint error into a CSV report
    EvalKeypoints(EvalKeypointsArgs),
    /// Fit a per-landmark keypoint correction model on validation data
    Calibrate(CalibrateArgs),
    /// Audit analytic loss gradients against finite differences
    LossCheck(LossCheckArgs),
    /// Render a synthetic paired-spectrum dataset to disk
    GenSynthetic(GenSyntheticArgs),
    /// Average the rows of one or more verification report CSVs
    CohortAverage(CohortAverageArgs),
}

#[derive(Args)]
pub struct AlignArgs {
    /// Keypoint file with one record per frame
    #[arg(long)]
    pub keypoints: PathBuf,
    /// Directory holding one image per frame id, named NNNNNN.pgm or .ppm
    #[arg(long)]
    pub images: PathBuf,
    /// Alignment template file; the built-in template when omitted
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Output directory for aligned images and transforms.txt
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AggregateKpArgs {
    /// Keypoint file where repeated frame ids are competing predictions
    #[arg(long)]
    pub input: PathBuf,
    /// Mean per-landmark residual (pixels) below which a prediction joins
    /// the consensus
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
    /// Convert seven-point raw output to the five-point layout
    #[arg(long)]
    pub five_point: bool,
    /// Fused keypoint file, one record per frame
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SyncArgs {
    /// Visible-track keypoint file
    #[arg(long)]
    pub visible: PathBuf,
    /// Thermal-track keypoint file
    #[arg(long)]
    pub thermal: PathBuf,
    /// Alignment template file; the built-in template when omitted
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Map both tracks onto the template before measuring distance
    #[arg(long)]
    pub align_first: bool,
    /// Output pairs file: `visible_id thermal_id distance` lines
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalVerifyArgs {
    /// Dataset manifest
    #[arg(long)]
    pub manifest: PathBuf,
    /// Root for embedding file references; the manifest's directory when
    /// omitted
    #[arg(long)]
    pub embeddings_root: Option<PathBuf>,
    /// Report CSV path; standard output when omitted
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Per-cohort ROC CSV stem; the cohort name is appended to the stem
    #[arg(long)]
    pub out_roc: Option<PathBuf>,
    /// Also write an SVG plot next to each ROC CSV
    #[arg(long, requires = "out_roc")]
    pub svg: bool,
    /// Two comma-separated false-accept budgets for the TAR columns
    #[arg(long, default_value = "0.01,0.05", value_parser = parse_far_pair)]
    pub far: FarPair,
}

#[derive(Args)]
pub struct EvalKeypointsArgs {
    /// Predicted keypoint file (seven-point input is converted)
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth keypoint file
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Normalized-error threshold for the AUC and failure-rate columns
    #[arg(long, default_value_t = 0.08)]
    pub threshold: f64,
    /// Report CSV path; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Predicted keypoint file from the validation set
    #[arg(long)]
    pub predictions: PathBuf,
    /// Matching ground-truth keypoint file
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Correction family: OFFSET_ONLY or AFFINE
    #[arg(long, default_value = "OFFSET_ONLY", value_parser = parse_calibration_mode)]
    pub mode: CalibrationMode,
    /// Output model file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LossCheckArgs {
    /// Seed for the random audit points
    #[arg(long)]
    pub seed: u64,
    /// Random points per audit
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Maximum allowed relative error between analytic and numeric gradients
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Args)]
pub struct GenSyntheticArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub subjects: usize,
    /// Frames per sequence
    #[arg(long, default_value_t = 12)]
    pub frames: usize,
    /// Yaw articulation amplitude in degrees, exclusive of 0 and 90
    #[arg(long, default_value_t = 60.0)]
    pub amplitude: f64,
    /// Keypoint annotation noise in pixels
    #[arg(long, default_value_t = 0.25)]
    pub noise: f64,
    /// Embedding dimension
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Rendered image side length
    #[arg(long, default_value_t = 96)]
    pub image_size: usize,
    /// Thermal stream lag in frames
    #[arg(long, default_value_t = 3)]
    pub offset: i64,
    /// Leading fraction of subjects assigned to the TRAIN split
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Args)]
pub struct CohortAverageArgs {
    /// Report CSVs to pool
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
    /// Output CSV path; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The two false-accept budgets reported by `eval-verify`.
#[derive(Debug, Clone, Copy)]
pub struct FarPair {
    pub first: f64,
    pub second: f64,
}

fn parse_far_pair(s: &str) -> Result<FarPair, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected exactly two comma-separated budgets, e.g. 0.01,0.05".to_string());
    }
    let mut values = [0.0f64; 2];
    for (slot, part) in values.iter_mut().zip(&parts) {
        let v: f64 = part.trim().parse().map_err(|_| format!("`{part}` is not a number"))?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(format!("false-accept budget {v} lies outside (0, 1]"));
        }
        *slot = v;
    }
    Ok(FarPair { first: values[0], second: values[1] })
}

fn parse_calibration_mode(s: &str) -> Result<CalibrationMode, String> {
    CalibrationMode::parse(s)
        .ok_or_else(|| format!("unknown mode `{s}`; use OFFSET_ONLY or AFFINE"))
}

/// Parses `argv` and runs the requested subcommand, returning the process
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return 1;
    }
    let command = cli.command;
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(command)),
            Err(e) => Err(anyhow::anyhow!("building a {n}-thread pool failed: {e}")),
        },
        None => dispatch(command),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Align(args) => run_align(args),
        Command::AggregateKp(args) => run_aggregate_kp(args),
        Command::Sync(args) => run_sync(args),
        Command::EvalVerify(args) => run_eval_verify(args),
        Command::EvalKeypoints(args) => run_eval_keypoints(args),
        Command::Calibrate(args) => run_calibrate(args),
        Command::LossCheck(args) => run_loss_check(args),
        Command::GenSynthetic(args) => run_gen_synthetic(args),
        Command::CohortAverage(args) => run_cohort_average(args),
    }
}

fn load_template(path: Option<&Path>) -> Result<CanonicalTemplate> {
    match path {
        Some(p) => {
            CanonicalTemplate::load(p).with_context(|| format!("loading {}", p.display()))
        }
        None => Ok(CanonicalTemplate::default()),
    }
}

/// Reads a keypoint file and converts seven-point raw records to the
/// five-point layout every downstream stage consumes.
fn load_five_point_records(path: &Path) -> Result<Vec<KeypointRecord>> {
    let (schema, records) =
        read_keypoint_file(path).with_context(|| format!("reading {}", path.display()))?;
    match schema {
        PointSchema::FivePoint => Ok(records),
        PointSchema::SevenPointRaw => records
            .into_iter()
            .map(|r| {
                Ok(KeypointRecord {
                    frame_id: r.frame_id,
                    keypoints: to_five_point(&r.keypoints)
                        .with_context(|| format!("frame {} in {}", r.frame_id, path.display()))?,
                })
            })
            .collect(),
    }
}

/// Joins two single-record-per-frame keypoint files on frame id, requiring
/// the id sets to match exactly. Returns pairs in `left` file order.
fn strict_join(
    left: &[KeypointRecord],
    left_path: &Path,
    right: &[KeypointRecord],
    right_path: &Path,
) -> Result<Vec<(KeypointSet, KeypointSet)>> {
    let mut right_map: HashMap<i64, &KeypointSet> = HashMap::with_capacity(right.len());
    for r in right {
        if right_map.insert(r.frame_id, &r.keypoints).is_some() {
            bail!("{}: frame {} appears more than once", right_path.display(), r.frame_id);
        }
    }
    let mut seen: HashMap<i64, ()> = HashMap::with_capacity(left.len());
    let mut pairs = Vec::with_capacity(left.len());
    for l in left {
        if seen.insert(l.frame_id, ()).is_some() {
            bail!("{}: frame {} appears more than once", left_path.display(), l.frame_id);
        }
        let r = right_map.get(&l.frame_id).ok_or_else(|| {
            anyhow::anyhow!("{}: no record for frame {}", right_path.display(), l.frame_id)
        })?;
        pairs.push((l.keypoints.clone(), (*r).clone()));
    }
    if right.len() != left.len() {
        let missing = right.iter().find(|r| !seen.contains_key(&r.frame_id));
        if let Some(r) = missing {
            bail!("{}: no record for frame {}", left_path.display(), r.frame_id);
        }
    }
    Ok(pairs)
}

fn find_frame_image(dir: &Path, frame_id: i64) -> Result<PathBuf> {
    let candidates = [format!("{frame_id:06}.pgm"), format!("{frame_id:06}.ppm")];
    for name in &candidates {
        let path = dir.join(name);
        if path.is_file() {
            return Ok(path);
        }
    }
    bail!("no image for frame {frame_id}: tried {}/{{{}}}", dir.display(), candidates.join(", "))
}

fn run_align(args: AlignArgs) -> Result<()> {
    let records = load_five_point_records(&args.keypoints)?;
    let template = load_template(args.template.as_deref())?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut transforms = String::from("transforms v1\n");
    for r in &records {
        let image_path = find_frame_image(&args.images, r.frame_id)?;
        let image = Image::read_pnm(&image_path)
            .with_context(|| format!("reading {}", image_path.display()))?;
        let (aligned, t) = align_face(&image, &r.keypoints, &template)
            .with_context(|| format!("frame {} in {}", r.frame_id, args.keypoints.display()))?;
        let name = image_path.file_name().expect("candidate paths always carry a file name");
        aligned
            .write_pnm(&args.out.join(name))
            .with_context(|| format!("writing aligned frame {}", r.frame_id))?;
        transforms.push_str(&format!(
            "{} {} {} {} {}\n",
            r.frame_id,
            t.scale,
            t.angle(),
            t.translation.x,
            t.translation.y
        ));
    }
    let transforms_path = args.out.join("transforms.txt");
    fs::write(&transforms_path, transforms)
        .with_context(|| format!("writing {}", transforms_path.display()))?;
    eprintln!("aligned {} frames into {}", records.len(), args.out.display());
    Ok(())
}

fn run_aggregate_kp(args: AggregateKpArgs) -> Result<()> {
    let (schema, records) = read_keypoint_file(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut order: Vec<i64> = Vec::new();
    let mut groups: HashMap<i64, Vec<KeypointSet>> = HashMap::new();
    for r in records {
        groups
            .entry(r.frame_id)
            .or_insert_with(|| {
                order.push(r.frame_id);
                Vec::new()
            })
            .push(r.keypoints);
    }
    let config = RansacConfig { inlier_threshold: args.threshold };
    let convert = args.five_point && schema == PointSchema::SevenPointRaw;
    let mut fused = Vec::with_capacity(order.len());
    let mut prediction_count = 0usize;
    for id in order {
        let predictions = &groups[&id];
        prediction_count += predictions.len();
        let kp = aggregate_keypoints(predictions, &config)
            .with_context(|| format!("frame {id} in {}", args.input.display()))?;
        let kp = if convert { to_five_point(&kp)? } else { kp };
        fused.push(KeypointRecord { frame_id: id, keypoints: kp });
    }
    let out_schema = if args.five_point { PointSchema::FivePoint } else { schema };
    write_keypoint_file(&args.out, out_schema, &fused)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("fused {prediction_count} predictions into {} frames", fused.len());
    Ok(())
}

fn run_sync(args: SyncArgs) -> Result<()> {
    let visible = KeypointTrack::from_records(&load_five_point_records(&args.visible)?)
        .with_context(|| format!("track {}", args.visible.display()))?;
    let thermal = KeypointTrack::from_records(&load_five_point_records(&args.thermal)?)
        .with_context(|| format!("track {}", args.thermal.display()))?;
    let template = load_template(args.template.as_deref())?;
    let pairs = synchronize(&visible, &thermal, &template, args.align_first)?;
    write_sync_pairs(&args.out, &pairs)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "paired {} visible frames against {} thermal frames",
        pairs.len(),
        thermal.len()
    );
    Ok(())
}

fn describe_filter(filter: &FrameFilter) -> String {
    let mut parts: Vec<String> = Vec::new();
    if let Some(s) = filter.spectrum {
        parts.push(s.as_str().to_lowercase());
    }
    if let Some(p) = filter.pose {
        parts.push(p.as_str().to_lowercase());
    }
    if let Some(l) = filter.location {
        parts.push(l.as_str().to_lowercase());
    }
    if parts.is_empty() {
        "all".to_string()
    } else {
        parts.join("-")
    }
}

/// `stem.csv` + cohort `frontal-indoor` -> `stem-frontal-indoor.ext`.
fn cohort_sibling(stem: &Path, cohort: &str, ext: &str) -> PathBuf {
    let base = stem
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "roc".to_string());
    stem.with_file_name(format!("{base}-{cohort}.{ext}"))
}

fn run_eval_verify(args: EvalVerifyArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let root = args
        .embeddings_root
        .clone()
        .unwrap_or_else(|| args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
    let mut store = EmbeddingStore::new(&root);
    let spec = ProtocolSpec::canonical_four();
    let selections = build_protocol(&manifest, &spec);

    let mut prepared = Vec::new();
    for (cohort, selection) in spec.cohorts.iter().zip(&selections) {
        if selection.gallery.is_empty() || selection.query.is_empty() {
            eprintln!(
                "cohort {}: empty ({} gallery / {} query frames), skipped",
                selection.name,
                selection.gallery.len(),
                selection.query.len()
            );
            continue;
        }
        let gallery = resolve_embeddings(&manifest, &mut store, &selection.gallery)
            .with_context(|| format!("cohort {} gallery", selection.name))?;
        let query = resolve_embeddings(&manifest, &mut store, &selection.query)
            .with_context(|| format!("cohort {} query", selection.name))?;
        prepared.push((cohort, selection.name.clone(), gallery, query));
    }
    if prepared.is_empty() {
        bail!("no cohort in {} has both gallery and query frames", args.manifest.display());
    }

    let far = args.far;
    let scored = prepared
        .par_iter()
        .map(|(cohort, name, gallery, query)| {
            let templates = subject_templates(gallery)?;
            let scores = score_cohort(&templates, query)?;
            let points = roc_points(&scores)?;
            let report = VerificationReport {
                auc: auc_percent(&scores)?,
                eer: eer_percent(&points)?,
                tar_at_far1: tar_at_far_percent(&points, far.first)?,
                tar_at_far5: tar_at_far_percent(&points, far.second)?,
            };
            let row = ReportRow {
                gallery: describe_filter(&cohort.gallery),
                query: describe_filter(&cohort.query),
                report,
            };
            Ok((name.clone(), row, points, scores.genuine.len(), scores.impostor.len()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(scored.len());
    for (name, row, points, genuine, impostor) in &scored {
        eprintln!(
            "cohort {name}: {genuine} genuine / {impostor} impostor pairs, AUC {:.2}",
            row.report.auc
        );
        if let Some(stem) = &args.out_roc {
            write_roc_csv(&cohort_sibling(stem, name, "csv"), points)?;
            if args.svg {
                write_roc_svg(&cohort_sibling(stem, name, "svg"), points)?;
            }
        }
        rows.push(row.clone());
    }
    match &args.out_report {
        Some(path) => write_report_csv(path, &rows)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", report_csv_string(&rows)),
    }
    Ok(())
}

fn run_eval_keypoints(args: EvalKeypointsArgs) -> Result<()> {
    let predictions = load_five_point_records(&args.predictions)?;
    let truth = load_five_point_records(&args.ground_truth)?;
    let pairs = strict_join(&predictions, &args.predictions, &truth, &args.ground_truth)?;
    let errors = pairs
        .iter()
        .map(|(p, t)| nme(p, t).map_err(anyhow::Error::from))
        .collect::<Result<Vec<f64>>>()?;
    let report = keypoint_report(&errors, args.threshold)?;
    match &args.out {
        Some(path) => write_keypoint_report_csv(path, &report)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", keypoint_report_csv_string(&report)),
    }
    eprintln!("evaluated {} frames", report.n);
    Ok(())
}

fn run_calibrate(args: CalibrateArgs) -> Result<()> {
    let predictions = load_five_point_records(&args.predictions)?;
    let truth = load_five_point_records(&args.ground_truth)?;
    let pairs = strict_join(&predictions, &args.predictions, &truth, &args.ground_truth)?;
    let (preds, gts): (Vec<KeypointSet>, Vec<KeypointSet>) = pairs.into_iter().unzip();
    let model = calibrate_offset(&preds, &gts, args.mode)?;
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("fitted {} correction on {} frames", args.mode.as_str(), preds.len());
    Ok(())
}

fn run_loss_check(args: LossCheckArgs) -> Result<()> {
    if args.points == 0 {
        bail!("--points must be at least 1");
    }
    let audits = checks::gradient_audits(args.seed, args.points);
    let mut failures = 0usize;
    for audit in &audits {
        let ok = audit.max_relative_error <= args.tolerance;
        println!(
            "{} {:e} {}",
            audit.name,
            audit.max_relative_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failures += 1;
        }
    }
    if failures > 0 {
        bail!("{failures} gradient audit(s) exceeded the {} relative tolerance", args.tolerance);
    }
    Ok(())
}

fn run_gen_synthetic(args: GenSyntheticArgs) -> Result<()> {
    let config: SyntheticConfig = SyntheticConfig {
        n_subjects: args.subjects,
        frames_per_sequence: args.frames,
        articulation_amplitude_deg: args.amplitude,
        noise_sigma_px: args.noise,
        embedding_dim: args.dim,
        seed: args.seed,
        image_size: args.image_size,
        temporal_offset: args.offset,
        train_fraction: args.train_fraction,
    };
    let dataset = generate_synthetic(&config, &args.out)?;
    let frames: usize = dataset
        .manifest
        .subjects
        .iter()
        .flat_map(|s| s.sequences.iter().map(|q| q.frames.len()))
        .sum();
    eprintln!(
        "generated {} subjects, {frames} frames under {}",
        dataset.manifest.subjects.len(),
        args.out.display()
    );
    Ok(())
}

fn run_cohort_average(args: CohortAverageArgs) -> Result<()> {
    let mut reports = Vec::new();
    for path in &args.reports {
        let rows =
            read_report_csv(path).with_context(|| format!("reading {}", path.display()))?;
        reports.extend(rows.into_iter().map(|r| r.report));
    }
    if reports.is_empty() {
        bail!("the given report files contain no data rows");
    }
    let average = cohort_average(&reports)?;
    let row = ReportRow {
        gallery: "average".to_string(),
        query: "average".to_string(),
        report: average,
    };
    match &args.out {
        Some(path) => write_report_csv(path, &[row])
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", report_csv_string(&[row])),
    }
    eprintln!("averaged {} rows from {} files", reports.len(), args.reports.len());
    Ok(())
}

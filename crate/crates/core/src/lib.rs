//! Core algorithms for thermal-to-visible face verification pipelines:
//! similarity-transform face alignment, robust multi-crop keypoint
//! aggregation, keypoint-driven cross-spectrum video synchronization,
//! translation-training losses with a small reference classifier, the
//! verification/ROC protocol, a text dataset-manifest model, and a
//! deterministic synthetic data generator for end-to-end testing.
//!
//! All randomized behavior is seeded and reproducible; nothing here loads
//! neural network weights. Plug real detectors, keypoint predictors, or
//! feature extractors in through the [`landmarks::KeypointPredictor`] and
//! [`dataset::FeatureExtractor`] traits.

pub mod dataset;
pub mod geometry;
pub mod image;
pub mod landmarks;
pub mod losses;
pub mod sync;
pub mod synth;
pub mod verification;

/// Error type external model plug-ins (keypoint predictors, feature
/// extractors, synthesis models) may return.
pub type ModelError = Box<dyn std::error::Error + Send + Sync>;

pub use dataset::{
    DatasetError, DatasetManifest, EmbeddingRef, EmbeddingStore, FeatureExtractor, Frame,
    LinearMapSynthesis, Location, PassthroughSynthesis, Pose, ProjectionExtractor, Sequence,
    Spectrum, Split, Subject, SynthesisModel, read_embeddings, write_embeddings,
};
pub use geometry::{
    CanonicalTemplate, GeometryError, KeypointSet, Point2, PointSchema, SimilarityTransform,
    align_face, mean_template, solve_similarity, solve_similarity_points,
};
pub use image::{Image, ImageError};
pub use landmarks::{
    CalibrationMode, KeypointPredictor, KeypointRecord, KeypointReport, LandmarkError, OffsetModel,
    RansacConfig, Rect, aggregate_keypoints, calibrate_offset, five_random_crops, keypoint_report,
    keypoint_report_csv_string, nme, predict_with_crops, read_keypoint_file, to_five_point,
    write_keypoint_file, write_keypoint_report_csv,
};
pub use losses::{
    Embedding, LossError, LossWeights, MlpClassifier, SmoothedTargets, composite_loss,
    cosine_identity_gradient, cosine_identity_loss, cross_entropy, cross_entropy_gradient,
    identity_loss, l1_pixel_gradient, l1_pixel_loss, smoothed_targets,
};
pub use sync::{
    AlignedTrack, KeypointTrack, SyncError, SyncPair, align_track, pair_distance, read_sync_pairs,
    synchronize, write_sync_pairs,
};
pub use synth::{SynthError, SyntheticConfig, SyntheticDataset, generate_synthetic, synthesize};
pub use verification::{
    CohortSelection, CohortSpec, FrameFilter, ProtocolSpec, ReportRow, RocPoint, ScoreSet,
    SelectedFrame, VerificationReport, VerifyError, auc_percent, build_protocol, cohort_average,
    eer_percent, fuse_flip, match_score, read_report_csv, report_csv_string, resolve_embeddings,
    roc_points, score_cohort, select_frames, subject_templates, tar_at_far_percent,
    verification_report, write_report_csv, write_roc_csv, write_roc_svg,
};

//! Property tests for structural invariants that must hold over the whole
//! input space, not just at hand-picked values.

use proptest::prelude::*;
use tvface_core::{
    aggregate_keypoints, auc_percent, nme, pair_distance, roc_points, smoothed_targets,
    solve_similarity_points, CanonicalTemplate, DatasetManifest, EmbeddingRef, Frame, KeypointSet,
    Location, Point2, PointSchema, Pose, RansacConfig, ScoreSet, Sequence, Spectrum, Split,
    Subject, SimilarityTransform,
};

fn spread_points(points: &[Point2]) -> f64 {
    let cx = points.iter().map(|p| p.x).sum::<f64>() / points.len() as f64;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / points.len() as f64;
    points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

prop_compose! {
    fn arb_five_points()(raw in prop::collection::vec((-500.0..500.0f64, -500.0..500.0f64), 5)) -> Vec<Point2> {
        raw.into_iter().map(|(x, y)| Point2::new(x, y)).collect()
    }
}

prop_compose! {
    fn arb_transform()(
        scale in 0.2..5.0f64,
        angle in -std::f64::consts::PI..std::f64::consts::PI,
        tx in -100.0..100.0f64,
        ty in -100.0..100.0f64,
    ) -> SimilarityTransform {
        SimilarityTransform::from_angle(scale, angle, tx, ty).unwrap()
    }
}

prop_compose! {
    fn arb_scores()(
        genuine in prop::collection::vec(-1.0..1.0f64, 1..40),
        impostor in prop::collection::vec(-1.0..1.0f64, 1..40),
    ) -> ScoreSet {
        ScoreSet { genuine, impostor }
    }
}

proptest! {
    #[test]
    fn similarity_solve_recovers_applied_transform(
        points in arb_five_points(),
        transform in arb_transform(),
    ) {
        prop_assume!(spread_points(&points) > 1.0);
        let mapped: Vec<Point2> = points.iter().map(|&p| transform.apply(p)).collect();
        let solved = solve_similarity_points(&points, &mapped).unwrap();
        for &p in &points {
            let residual = solved.apply(p).distance(&transform.apply(p));
            let scale = 1.0 + transform.apply(p).distance(&Point2::new(0.0, 0.0));
            prop_assert!(residual / scale < 1e-9, "residual {residual}");
        }
    }

    #[test]
    fn inverse_transform_round_trips_points(
        points in arb_five_points(),
        transform in arb_transform(),
    ) {
        let inverse = transform.invert();
        for &p in &points {
            let back = inverse.apply(transform.apply(p));
            prop_assert!(back.distance(&p) < 1e-6 * (1.0 + p.distance(&Point2::new(0.0, 0.0))));
        }
    }

    #[test]
    fn nme_is_invariant_under_joint_similarity(
        pred in arb_five_points(),
        truth in arb_five_points(),
        transform in arb_transform(),
    ) {
        // inter-ocular normalization cancels any common similarity warp
        prop_assume!(truth[0].distance(&truth[1]) > 1.0);
        let as_set = |pts: &[Point2]| KeypointSet::new(PointSchema::FivePoint, pts.to_vec()).unwrap();
        let base = nme(&as_set(&pred), &as_set(&truth)).unwrap();
        let warped = nme(
            &transform.apply_set(&as_set(&pred)),
            &transform.apply_set(&as_set(&truth)),
        ).unwrap();
        prop_assert!((base - warped).abs() <= 1e-9 * (1.0 + base), "{base} vs {warped}");
    }

    #[test]
    fn auc_complements_when_pools_swap(scores in arb_scores()) {
        let forward = auc_percent(&scores).unwrap();
        let swapped = auc_percent(&ScoreSet {
            genuine: scores.impostor.clone(),
            impostor: scores.genuine.clone(),
        }).unwrap();
        prop_assert!((forward + swapped - 100.0).abs() < 1e-9, "{forward} + {swapped}");
    }

    #[test]
    fn roc_sweep_is_monotone(scores in arb_scores()) {
        let points = roc_points(&scores).unwrap();
        prop_assert_eq!(points[0].threshold, f64::INFINITY);
        for w in points.windows(2) {
            prop_assert!(w[1].threshold < w[0].threshold);
            prop_assert!(w[1].far >= w[0].far && w[1].tar >= w[0].tar);
        }
        let last = points.last().unwrap();
        prop_assert_eq!((last.far, last.tar), (1.0, 1.0));
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        base in arb_five_points(),
        jitters in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5 * 5),
        rotate_by in 0usize..5,
    ) {
        prop_assume!(spread_points(&base) > 5.0);
        let predictions: Vec<KeypointSet> = (0..5)
            .map(|i| {
                let pts = base
                    .iter()
                    .enumerate()
                    .map(|(j, p)| Point2::new(p.x + jitters[i * 5 + j].0, p.y + jitters[i * 5 + j].1))
                    .collect();
                KeypointSet::new(PointSchema::FivePoint, pts).unwrap()
            })
            .collect();
        let mut rotated = predictions.clone();
        rotated.rotate_left(rotate_by);
        let a = aggregate_keypoints(&predictions, &RansacConfig::default()).unwrap();
        let b = aggregate_keypoints(&rotated, &RansacConfig::default()).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!(p.distance(q) < 1e-9, "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn pair_distance_is_symmetric_and_zero_on_self(
        a in arb_five_points(),
        b in arb_five_points(),
    ) {
        let template = CanonicalTemplate::default();
        let sa = KeypointSet::new(PointSchema::FivePoint, a).unwrap();
        let sb = KeypointSet::new(PointSchema::FivePoint, b).unwrap();
        let ab = pair_distance(&sa, &sb, &template).unwrap();
        let ba = pair_distance(&sb, &sa, &template).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(pair_distance(&sa, &sa, &template).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn smoothed_targets_always_form_a_distribution(
        n in 2usize..300,
        epsilon in 0.0..0.5f64,
        label in 0usize..300,
    ) {
        let label = label % n;
        let t = smoothed_targets(label, n, epsilon).unwrap();
        let q = t.probabilities();
        prop_assert_eq!(q.len(), n);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let expected_on = 1.0 - ((n as f64 - 1.0) / n as f64) * epsilon;
        prop_assert_eq!(q[label], expected_on);
        for (i, &v) in q.iter().enumerate() {
            if i != label {
                prop_assert_eq!(v, epsilon / n as f64);
                prop_assert!(v <= q[label]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn manifest_text_round_trips(
        n_subjects in 1usize..4,
        n_frames in 1usize..4,
        with_kp in any::<bool>(),
        with_emb in any::<bool>(),
        coords in prop::collection::vec(-1000.0..1000.0f64, 10),
    ) {
        let mut manifest = DatasetManifest::default();
        for s in 0..n_subjects {
            let split = if s % 2 == 0 { Split::Train } else { Split::Eval };
            let frames = (0..n_frames as i64)
                .map(|id| Frame {
                    id,
                    image: format!("img/{id}.pgm"),
                    keypoints: with_kp.then(|| {
                        let pts = coords
                            .chunks(2)
                            .map(|c| Point2::new(c[0] + id as f64, c[1]))
                            .collect();
                        KeypointSet::new(PointSchema::FivePoint, pts).unwrap()
                    }),
                    embedding: with_emb.then(|| EmbeddingRef {
                        path: "store.emb".to_string(),
                        index: id as usize,
                    }),
                })
                .collect();
            manifest.subjects.push(Subject {
                id: format!("S{s:03}"),
                split,
                sequences: vec![Sequence {
                    spectrum: Spectrum::Thermal,
                    pose: Pose::Profile,
                    location: Location::Outdoor,
                    range_m: 100.0,
                    tags: vec!["night".to_string()],
                    frames,
                }],
            });
        }
        let text = manifest.to_text();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        manifest.save(&path).unwrap();
        let reparsed = DatasetManifest::load(&path).unwrap();
        prop_assert_eq!(&reparsed, &manifest);
        prop_assert_eq!(reparsed.to_text(), text, "second pass must be byte-stable");
    }
}

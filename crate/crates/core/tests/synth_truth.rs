use scenestat::features::{extract_features, match_features, FeatureConfig};
use scenestat::reproject::{correspondences, estimate_homography, RansacConfig};
use scenestat::stats::luminance;
use scenestat::synth::{
    corpus_manifest, generate, write_sequence, SynthKind, SynthScript, FLICKER_PERIOD,
};

#[test]
fn identical_scripts_write_identical_files() {
    let script = SynthScript {
        n_frames: 6,
        texture_seed: 5,
        luminance_amplitude: 0.1,
        local_motion_fraction: 0.2,
        noise_sigma: 0.01,
        ..SynthScript::new(SynthKind::Mixed)
    };
    let manifest = corpus_manifest("mixed", 10.0);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let w1 = write_sequence(d1.path(), &generate(&script).unwrap(), &manifest).unwrap();
    let w2 = write_sequence(d2.path(), &generate(&script).unwrap(), &manifest).unwrap();
    let paths1 = w1
        .frame_paths
        .iter()
        .chain([&w1.manifest_path, &w1.ground_truth_path]);
    let paths2 = w2
        .frame_paths
        .iter()
        .chain([&w2.manifest_path, &w2.ground_truth_path]);
    for (a, b) in paths1.zip(paths2) {
        assert_eq!(
            std::fs::read(a).unwrap(),
            std::fs::read(b).unwrap(),
            "{}",
            a.display()
        );
    }
}

#[test]
fn translate_pairs_recover_logged_motion() {
    let script = SynthScript {
        n_frames: 20,
        texture_seed: 8,
        motion_px_per_frame: (3.0, -2.0),
        noise_sigma: 0.005,
        ..SynthScript::new(SynthKind::Translate)
    };
    let seq = generate(&script).unwrap();
    let cfg = FeatureConfig::default();
    let features: Vec<_> = seq
        .frames
        .iter()
        .map(|f| extract_features(f, &cfg).unwrap())
        .collect();
    for (t, truth) in seq.truth.pairs.iter().enumerate() {
        let matches = match_features(&features[t], &features[t + 1], cfg.ratio_threshold);
        let pairs = correspondences(&features[t], &features[t + 1], &matches);
        // Correspondences run from the current frame back to the previous one.
        let est = estimate_homography(&pairs, &RansacConfig::default()).unwrap();
        let expected = truth.homography.inverse().unwrap();
        let (ex, ey) = expected.apply((160.0, 120.0)).unwrap();
        let (gx, gy) = est.homography.apply((160.0, 120.0)).unwrap();
        assert!(
            (ex - gx).abs() < 0.5 && (ey - gy).abs() < 0.5,
            "pair {t}: expected ({ex:.3}, {ey:.3}), got ({gx:.3}, {gy:.3})"
        );
    }
}

#[test]
fn flicker_luminance_steps_only_at_wave_edges() {
    let script = SynthScript {
        n_frames: 3 * FLICKER_PERIOD + 1,
        texture_seed: 2,
        luminance_amplitude: 0.2,
        ..SynthScript::new(SynthKind::Flicker)
    };
    let seq = generate(&script).unwrap();
    let peak = seq
        .frames
        .iter()
        .flat_map(|f| f.pixels().iter().copied())
        .fold(0.0, f64::max);
    assert!(peak < 1.0, "frames clamp, property does not apply");
    let mut edges = 0;
    for (t, truth) in seq.truth.pairs.iter().enumerate() {
        let measured = (luminance(&seq.frames[t + 1]) - luminance(&seq.frames[t])).abs();
        let edge = SynthScript::flicker_sign(t) != SynthScript::flicker_sign(t + 1);
        if edge {
            edges += 1;
            assert!(truth.true_d_luminance > 0.01);
            assert!((measured - truth.true_d_luminance).abs() < 1e-6, "pair {t}");
        } else {
            assert_eq!(measured, 0.0, "pair {t}");
            assert_eq!(truth.true_d_luminance, 0.0, "pair {t}");
        }
    }
    assert_eq!(edges, 6);
}

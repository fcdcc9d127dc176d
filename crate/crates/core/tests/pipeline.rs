use std::path::Path;

use scenestat::pixbuf::{encode_netpbm, GrayFrame};
use scenestat::report::{
    analyze_sequence, read_csv, records_to_csv, summarize_records, AnalysisError,
    DistributionSummary, ReportMetadata, RunConfig, StatisticSummary, SummaryReport,
};
use scenestat::sequence::DatasetManifest;
use scenestat::synth::{
    corpus_manifest, generate, write_sequence, SynthKind, SynthScript, ValueNoise,
};

fn config(jobs: usize) -> RunConfig {
    RunConfig {
        jobs,
        ..RunConfig::default()
    }
}

fn write_frames(dir: &Path, frames: &[GrayFrame<f64>]) {
    for (i, f) in frames.iter().enumerate() {
        std::fs::write(dir.join(format!("f{i:04}.pgm")), encode_netpbm(f)).unwrap();
    }
}

fn every_frame(name: &str, dir: &Path) -> DatasetManifest {
    let mut m = DatasetManifest::new(name, dir, 10.0);
    m.skip_frames = 0;
    m
}

#[test]
fn identical_pair_has_zero_change() {
    let dir = tempfile::tempdir().unwrap();
    let f = ValueNoise::new(4).render(160, 120, (0.0, 0.0));
    write_frames(dir.path(), &[f.clone(), f]);
    let a = analyze_sequence(&every_frame("same", dir.path()), &config(1)).unwrap();
    assert_eq!(a.records.len(), 1);
    let p = a.records[0].pair;
    assert_eq!(p.d_luminance, 0.0);
    assert_eq!(p.d_contrast, Some(0.0));
    assert_eq!(p.kl_divergence, 0.0);
    assert_eq!(p.reproj_mse, Some(0.0));
    assert!(p.match_count > 50);
    assert_eq!(a.first_frame, a.records[0].frame);
}

#[test]
fn translate_corpus_reprojects_closely() {
    let dir = tempfile::tempdir().unwrap();
    let script = SynthScript {
        n_frames: 12,
        texture_seed: 21,
        motion_px_per_frame: (3.0, -2.0),
        ..SynthScript::new(SynthKind::Translate)
    };
    let written = write_sequence(
        dir.path(),
        &generate(&script).unwrap(),
        &corpus_manifest("t", 10.0),
    )
    .unwrap();
    let manifest = scenestat::sequence::load_manifest_file(&written.manifest_path).unwrap();
    let a = analyze_sequence(&manifest, &config(2)).unwrap();
    assert_eq!(a.records.len(), 11);
    for r in &a.records {
        let mse = r.pair.reproj_mse.expect("reprojection present");
        assert!(mse < 1e-3, "pair {}: {mse}", r.pair_index);
    }
}

#[test]
fn too_few_sampled_frames_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write_frames(dir.path(), &vec![GrayFrame::constant(40, 40, 0.5); 31]);
    let m = DatasetManifest::new("short", dir.path(), 30.0);
    match analyze_sequence(&m, &config(1)) {
        Err(AnalysisError::EmptySequence { sampled, .. }) => assert_eq!(sampled, 1),
        other => panic!("expected EmptySequence, got {other:?}"),
    }
}

#[test]
fn unreadable_frame_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write_frames(dir.path(), &vec![GrayFrame::constant(40, 40, 0.5); 2]);
    std::fs::write(dir.path().join("f0002.pgm"), b"P5\n40 40\n255\nshort").unwrap();
    let err = analyze_sequence(&every_frame("bad", dir.path()), &config(1)).unwrap_err();
    assert!(matches!(err, AnalysisError::Decode { .. }));
    assert!(err.to_string().contains("f0002.pgm"), "{err}");
}

fn textured_sequence(dir: &Path, n: usize) {
    let seq = generate(&SynthScript {
        n_frames: n,
        texture_seed: 3,
        luminance_amplitude: 0.1,
        local_motion_fraction: 0.1,
        noise_sigma: 0.01,
        width: 160,
        height: 120,
        ..SynthScript::new(SynthKind::Mixed)
    })
    .unwrap();
    write_frames(dir, &seq.frames);
}

#[test]
fn record_counts_and_name_independence() {
    let dir = tempfile::tempdir().unwrap();
    textured_sequence(dir.path(), 14);
    let mut a_manifest = DatasetManifest::new("alpha", dir.path(), 20.0);
    a_manifest.skip_frames = 3;
    let mut b_manifest = a_manifest.clone();
    b_manifest.name = "beta".into();
    let a = analyze_sequence(&a_manifest, &config(1)).unwrap();
    let b = analyze_sequence(&b_manifest, &config(1)).unwrap();
    assert_eq!(a.sampled_indices, vec![3, 5, 7, 9, 11, 13]);
    assert_eq!(a.records.len(), a.sampled_indices.len() - 1);
    assert_eq!(a.frame_stats().len(), a.sampled_indices.len());
    assert_eq!(a.sampled_indices, b.sampled_indices);
    assert_eq!(a.first_frame, b.first_frame);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(
            (ra.pair_index, ra.frame, ra.pair),
            (rb.pair_index, rb.frame, rb.pair)
        );
    }
    assert!(a
        .records
        .windows(2)
        .all(|w| w[0].pair_index < w[1].pair_index));
}

#[test]
fn output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    textured_sequence(dir.path(), 40);
    let m = every_frame("jobs", dir.path());
    let one = records_to_csv(&analyze_sequence(&m, &config(1)).unwrap().records);
    let three = records_to_csv(&analyze_sequence(&m, &config(3)).unwrap().records);
    assert_eq!(one, three);
}

fn close(a: &DistributionSummary, b: &DistributionSummary) -> bool {
    let pairs = [
        (a.min, b.min),
        (a.q1, b.q1),
        (a.median, b.median),
        (a.q3, b.q3),
        (a.max, b.max),
        (a.lower_whisker, b.lower_whisker),
        (a.upper_whisker, b.upper_whisker),
    ];
    a.n == b.n
        && a.n_missing == b.n_missing
        && pairs
            .iter()
            .all(|&(x, y)| (x - y).abs() <= 1e-8 * x.abs().max(1e-300))
}

fn assert_reports_close(a: &SummaryReport, b: &SummaryReport) {
    assert_eq!(
        a.datasets.keys().collect::<Vec<_>>(),
        b.datasets.keys().collect::<Vec<_>>()
    );
    for (name, stats) in &a.datasets {
        for (stat, sa) in stats {
            match (sa, &b.datasets[name][stat]) {
                (StatisticSummary::Ok(x), StatisticSummary::Ok(y)) => {
                    assert!(close(x, y), "{name}/{stat}")
                }
                (x, y) => assert_eq!(x, y, "{name}/{stat}"),
            }
        }
    }
}

#[test]
fn summaries_survive_csv_and_reordering() {
    let dir = tempfile::tempdir().unwrap();
    textured_sequence(dir.path(), 16);
    let mut records = analyze_sequence(&every_frame("a", dir.path()), &config(1))
        .unwrap()
        .records;
    let mut second = records.clone();
    for r in &mut second {
        r.dataset = "b".into();
        r.pair.reproj_mse = None;
    }
    records.extend(second);
    let direct = summarize_records(&records, ReportMetadata::default());

    let mut shuffled = records.clone();
    shuffled.reverse();
    shuffled.rotate_left(5);
    assert_eq!(
        summarize_records(&shuffled, ReportMetadata::default()),
        direct
    );

    let back = read_csv(records_to_csv(&records).as_bytes()).unwrap();
    assert_reports_close(
        &summarize_records(&back, ReportMetadata::default()),
        &direct,
    );
}

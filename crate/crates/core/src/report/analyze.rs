use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AnalysisRecord;
use crate::features::{extract_features, match_features, FeatureConfig, FeatureError, FeatureSet};
use crate::pixbuf::{parse_netpbm, resize_bilinear, GrayFrame, PixbufError};
use crate::reproject::{reprojected_mse_from_matches, RansacConfig};
use crate::sequence::{
    preprocess_frame, sample_indices, DatasetManifest, ManifestError, NormalizeMode,
};
use crate::stats::{
    frame_stats, intensity_histogram, kl_divergence, pair_deltas, FrameStats, Histogram256,
    PairStats,
};
use crate::LAPLACIAN_SIZE;

/// Frames decoded and held in memory at once.
const CHUNK: usize = 32;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("sequence `{dataset}` has {sampled} sampled frame(s); at least 2 are required")]
    EmptySequence { dataset: String, sampled: usize },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: PixbufError,
    },
    #[error("{path}: {source}")]
    Features {
        path: PathBuf,
        #[source]
        source: FeatureError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub features: FeatureConfig,
    pub ransac: RansacConfig,
    pub jobs: usize,
    pub normalize: NormalizeMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            ransac: RansacConfig::default(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            normalize: NormalizeMode::Global,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::Config(m));
        if self.features.budget < 1 {
            return bad("feature budget must be at least 1".into());
        }
        let r = self.features.ratio_threshold;
        if !(r > 0.0 && r < 1.0) {
            return bad(format!("ratio threshold {r} outside (0, 1)"));
        }
        if self.jobs < 1 {
            return bad("jobs must be at least 1".into());
        }
        if !(self.ransac.inlier_threshold.is_finite() && self.ransac.inlier_threshold > 0.0) {
            return bad("RANSAC threshold must be positive".into());
        }
        if !(self.features.fast_threshold.is_finite() && self.features.fast_threshold >= 0.0) {
            return bad("FAST threshold must be non-negative".into());
        }
        Ok(())
    }
}

/// Per-pair RANSAC seed, independent of evaluation order.
pub fn pair_seed(seed: u64, pair_index: usize) -> u64 {
    let mut z = seed ^ (pair_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAnalysis {
    pub dataset: String,
    /// Source index of every sampled frame.
    pub sampled_indices: Vec<usize>,
    pub first_frame: FrameStats,
    pub records: Vec<AnalysisRecord>,
}

impl SequenceAnalysis {
    /// Statistics of every sampled frame, in order.
    pub fn frame_stats(&self) -> Vec<FrameStats> {
        std::iter::once(self.first_frame)
            .chain(self.records.iter().map(|r| r.frame))
            .collect()
    }
}

struct Prepared {
    frame: GrayFrame<f64>,
    stats: FrameStats,
    histogram: Histogram256,
    features: FeatureSet<f64>,
}

fn prepare(frame: GrayFrame<f64>, config: &RunConfig) -> Result<Prepared, FeatureError> {
    let small = resize_bilinear(&frame, LAPLACIAN_SIZE.0, LAPLACIAN_SIZE.1);
    let stats = frame_stats(&frame, &small);
    let histogram = intensity_histogram(&frame);
    let features = extract_features(&frame, &config.features)?;
    Ok(Prepared {
        frame,
        stats,
        histogram,
        features,
    })
}

fn pair(prev: &Prepared, curr: &Prepared, pair_index: usize, config: &RunConfig) -> PairStats {
    let (d_luminance, d_contrast) = pair_deltas(&prev.stats, &curr.stats);
    let kl =
        kl_divergence(&curr.histogram, &prev.histogram).expect("frame histograms are normalized");
    let matches = match_features(
        &prev.features,
        &curr.features,
        config.features.ratio_threshold,
    );
    let ransac = RansacConfig {
        seed: pair_seed(config.ransac.seed, pair_index),
        ..config.ransac
    };
    let reproj_mse = reprojected_mse_from_matches(
        &prev.frame,
        &curr.frame,
        &prev.features,
        &curr.features,
        &matches,
        &ransac,
    );
    PairStats {
        d_luminance,
        d_contrast,
        kl_divergence: kl,
        match_count: matches.len(),
        reproj_mse,
    }
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool, AnalysisError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AnalysisError::Pool(e.to_string()))
}

/// Analyzes an in-memory sequence of preprocessed frames.
///
/// `load(i)` yields frame `i` of `count`; the label is used in error messages.
pub fn analyze_frames<F>(
    dataset: &str,
    count: usize,
    load: F,
    config: &RunConfig,
) -> Result<(FrameStats, Vec<AnalysisRecord>), AnalysisError>
where
    F: Fn(usize) -> Result<(GrayFrame<f64>, PathBuf), AnalysisError> + Sync,
{
    config.validate()?;
    if count < 2 {
        return Err(AnalysisError::EmptySequence {
            dataset: dataset.to_string(),
            sampled: count,
        });
    }
    let pool = build_pool(config.jobs)?;
    pool.install(|| {
        let mut records = Vec::with_capacity(count - 1);
        let mut first = None;
        let mut carry: Option<Prepared> = None;
        let mut start = 0;
        while start < count {
            let end = (start + CHUNK).min(count);
            let prepared: Vec<Prepared> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let (frame, path) = load(i)?;
                    prepare(frame, config)
                        .map_err(|source| AnalysisError::Features { path, source })
                })
                .collect::<Result<_, _>>()?;
            if first.is_none() {
                first = Some(prepared[0].stats);
            }
            let window: Vec<&Prepared> = carry.iter().chain(prepared.iter()).collect();
            let offset = if carry.is_some() { start - 1 } else { start };
            let chunk_records: Vec<AnalysisRecord> = (1..window.len())
                .into_par_iter()
                .map(|j| {
                    let pair_index = offset + j - 1;
                    AnalysisRecord {
                        dataset: dataset.to_string(),
                        pair_index,
                        frame: window[j].stats,
                        pair: pair(window[j - 1], window[j], pair_index, config),
                    }
                })
                .collect();
            records.extend(chunk_records);
            carry = prepared.into_iter().last();
            start = end;
        }
        Ok((first.expect("at least two frames"), records))
    })
}

fn load_frame(
    path: &Path,
    manifest: &DatasetManifest,
    mode: NormalizeMode,
) -> Result<GrayFrame<f64>, AnalysisError> {
    let bytes = std::fs::read(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decode = |source| AnalysisError::Decode {
        path: path.to_path_buf(),
        source,
    };
    let raw = parse_netpbm::<f64>(&bytes).map_err(decode)?;
    preprocess_frame(&raw, manifest.crop, mode).map_err(decode)
}

/// Samples, preprocesses and measures every frame of a dataset.
pub fn analyze_sequence(
    manifest: &DatasetManifest,
    config: &RunConfig,
) -> Result<SequenceAnalysis, AnalysisError> {
    manifest.validate()?;
    let files = manifest.list_frames()?;
    let sampled = sample_indices(manifest, files.len());
    log::info!(
        "{}: {} frames found, {} sampled (stride {}, skip {})",
        manifest.name,
        files.len(),
        sampled.len(),
        manifest.stride(),
        manifest.skip_frames
    );
    let (first_frame, records) = analyze_frames(
        &manifest.name,
        sampled.len(),
        |i| {
            let path = &files[sampled[i]];
            Ok((load_frame(path, manifest, config.normalize)?, path.clone()))
        },
        config,
    )?;
    Ok(SequenceAnalysis {
        dataset: manifest.name.clone(),
        sampled_indices: sampled,
        first_frame,
        records,
    })
}

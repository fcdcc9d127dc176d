//! Multi-scale oriented binary features and ratio-tested brute-force matching.
//!
//! Pipeline per frame: a 4-level pyramid (scale 1.2), FAST-9 corners ranked by
//! Harris response, intensity-centroid orientation over a radius-15 disc, and a
//! 256-bit descriptor from rotated intensity comparisons on a smoothed image.

mod detect;
mod pattern;

pub use pattern::{DescriptorPattern, PatternError, PointPair, DESCRIPTOR_BITS, PATTERN_EXTENT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pixbuf::{resize_bilinear, GrayFrame};
use crate::scalar::Real;
use detect::Gradients;

pub const MIN_FRAME_SIZE: usize = 32;
const ORIENTATION_RADIUS: i32 = 15;
const SMOOTHING_SIGMA: f64 = 2.0;
const SMOOTHING_RADIUS: usize = 3;

/// Keypoints closer than this to a level border are discarded, so that the
/// orientation disc and every rotated pattern offset stay inside the image.
const BORDER: usize = 19;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("frame {width}x{height} is smaller than {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE}")]
    FrameTooSmall { width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub budget: usize,
    /// FAST threshold in normalized intensity.
    pub fast_threshold: f64,
    pub levels: usize,
    pub scale_factor: f64,
    pub ratio_threshold: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            fast_threshold: 0.08,
            levels: 4,
            scale_factor: 1.2,
            ratio_threshold: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint<T> {
    /// Sub-pixel position in the coordinates of pyramid level `level`.
    pub x: T,
    pub y: T,
    pub level: usize,
    pub response: T,
    /// Radians in `[0, 2pi)`.
    pub orientation: T,
}

/// 256-bit binary descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

/// Keypoints (sorted by descending response) with parallel descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    keypoints: Vec<Keypoint<T>>,
    descriptors: Vec<Descriptor>,
    /// Per-level (x, y) factors from level to base-frame pixels.
    level_scales: Vec<(T, T)>,
}

impl<T: Real> FeatureSet<T> {
    /// Builds a set from raw parts; keypoints are not re-sorted.
    pub fn from_parts(
        keypoints: Vec<Keypoint<T>>,
        descriptors: Vec<Descriptor>,
        level_scales: Vec<(T, T)>,
    ) -> Self {
        assert_eq!(keypoints.len(), descriptors.len());
        Self {
            keypoints,
            descriptors,
            level_scales,
        }
    }

    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), Vec::new(), vec![(T::one(), T::one())])
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn keypoints(&self) -> &[Keypoint<T>] {
        &self.keypoints
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    /// Position of keypoint `i` in base-frame pixel coordinates.
    pub fn base_position(&self, i: usize) -> (T, T) {
        let kp = &self.keypoints[i];
        let (sx, sy) = self
            .level_scales
            .get(kp.level)
            .copied()
            .unwrap_or((T::one(), T::one()));
        let half = T::lit(0.5);
        ((kp.x + half) * sx - half, (kp.y + half) * sy - half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: u32,
    /// Best over second-best distance.
    pub ratio: f64,
}

struct Level<T> {
    image: GrayFrame<T>,
    grads: Gradients<T>,
    scale: (T, T),
}

struct Candidate<T> {
    level: usize,
    ix: usize,
    iy: usize,
    x: T,
    y: T,
    response: T,
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with clamped borders.
fn smooth<T: Real>(img: &GrayFrame<T>) -> GrayFrame<T> {
    let kernel: Vec<T> = gaussian_kernel(SMOOTHING_SIGMA, SMOOTHING_RADIUS)
        .into_iter()
        .map(T::lit)
        .collect();
    let r = SMOOTHING_RADIUS as isize;
    let (w, h) = (img.width(), img.height());
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &wt) in kernel.iter().enumerate() {
                acc += wt * row[clamp(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    GrayFrame::from_fn(w, h, |x, y| {
        let mut acc = T::zero();
        for (k, &wt) in kernel.iter().enumerate() {
            acc += wt * tmp[clamp(y as isize + k as isize - r, h) * w + x];
        }
        acc
    })
}

fn build_pyramid<T: Real>(frame: &GrayFrame<T>, cfg: &FeatureConfig) -> Vec<Level<T>> {
    let (w0, h0) = (frame.width(), frame.height());
    let mut levels = Vec::with_capacity(cfg.levels.max(1));
    for l in 0..cfg.levels.max(1) {
        let factor = cfg.scale_factor.powi(l as i32);
        let w = ((w0 as f64 / factor).round() as usize).max(1);
        let h = ((h0 as f64 / factor).round() as usize).max(1);
        let image = if l == 0 {
            frame.clone()
        } else {
            resize_bilinear(frame, w, h)
        };
        let grads = Gradients::new(&image);
        let scale = (T::lit(w0 as f64 / w as f64), T::lit(h0 as f64 / h as f64));
        levels.push(Level {
            image,
            grads,
            scale,
        });
    }
    levels
}

/// Intensity-centroid angle over a radius-15 disc, in `[0, 2pi)`.
fn orientation<T: Real>(img: &GrayFrame<T>, x: usize, y: usize) -> T {
    let (mut m10, mut m01) = (T::zero(), T::zero());
    let r = ORIENTATION_RADIUS;
    for dy in -r..=r {
        let half_width = ((r * r - dy * dy) as f64).sqrt().floor() as i32;
        let row = img.row((y as i32 + dy) as usize);
        for dx in -half_width..=half_width {
            let v = row[(x as i32 + dx) as usize];
            m10 += T::lit(dx as f64) * v;
            m01 += T::lit(dy as f64) * v;
        }
    }
    let mut angle = m01.atan2(m10);
    let two_pi = T::lit(std::f64::consts::TAU);
    if angle < T::zero() {
        angle += two_pi;
    }
    if angle >= two_pi {
        angle = T::zero();
    }
    angle
}

fn describe<T: Real>(
    smoothed: &GrayFrame<T>,
    x: usize,
    y: usize,
    angle: T,
    pattern: &DescriptorPattern,
) -> Descriptor {
    let (s, c) = angle.sin_cos();
    let rotate = |(px, py): (i32, i32)| -> T {
        let (px, py) = (T::lit(px as f64), T::lit(py as f64));
        let rx = (px * c - py * s).round().to_i64().unwrap_or(0);
        let ry = (px * s + py * c).round().to_i64().unwrap_or(0);
        smoothed.get((x as i64 + rx) as usize, (y as i64 + ry) as usize)
    };
    let mut d = Descriptor::default();
    for (i, pair) in pattern.pairs().iter().enumerate() {
        if rotate(pair.a) < rotate(pair.b) {
            d.set_bit(i);
        }
    }
    d
}

/// Detects up to `cfg.budget` keypoints and computes their descriptors.
pub fn extract_features<T: Real>(
    frame: &GrayFrame<T>,
    cfg: &FeatureConfig,
) -> Result<FeatureSet<T>, FeatureError> {
    extract_features_with(frame, cfg, DescriptorPattern::builtin())
}

pub fn extract_features_with<T: Real>(
    frame: &GrayFrame<T>,
    cfg: &FeatureConfig,
    pattern: &DescriptorPattern,
) -> Result<FeatureSet<T>, FeatureError> {
    if frame.width() < MIN_FRAME_SIZE || frame.height() < MIN_FRAME_SIZE {
        return Err(FeatureError::FrameTooSmall {
            width: frame.width(),
            height: frame.height(),
        });
    }
    let levels = build_pyramid(frame, cfg);
    let threshold = T::lit(cfg.fast_threshold);

    let mut candidates: Vec<Candidate<T>> = Vec::new();
    for (l, level) in levels.iter().enumerate() {
        // Harris grows with the fourth power of the downsampling factor;
        // dividing it out makes responses comparable across levels.
        let norm = T::lit(cfg.scale_factor.powi(4 * l as i32));
        for corner in detect::detect(&level.image, &level.grads, threshold, BORDER) {
            let (ox, oy) = detect::refine(&level.grads, &corner);
            candidates.push(Candidate {
                level: l,
                ix: corner.x,
                iy: corner.y,
                x: T::lit(corner.x as f64) + ox,
                y: T::lit(corner.y as f64) + oy,
                response: corner.response / norm,
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.response
            .partial_cmp(&a.response)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.level.cmp(&b.level))
            .then(a.iy.cmp(&b.iy))
            .then(a.ix.cmp(&b.ix))
    });
    candidates.truncate(cfg.budget);

    let mut smoothed: Vec<Option<GrayFrame<T>>> = (0..levels.len()).map(|_| None).collect();
    let mut keypoints = Vec::with_capacity(candidates.len());
    let mut descriptors = Vec::with_capacity(candidates.len());
    for cand in &candidates {
        let level = &levels[cand.level];
        let angle = orientation(&level.image, cand.ix, cand.iy);
        let blurred = smoothed[cand.level].get_or_insert_with(|| smooth(&level.image));
        descriptors.push(describe(blurred, cand.ix, cand.iy, angle, pattern));
        keypoints.push(Keypoint {
            x: cand.x,
            y: cand.y,
            level: cand.level,
            response: cand.response,
            orientation: angle,
        });
    }
    Ok(FeatureSet {
        keypoints,
        descriptors,
        level_scales: levels.iter().map(|l| l.scale).collect(),
    })
}

/// Brute-force Hamming matching from `a` into `b` with a ratio test.
///
/// A match is accepted when `best / second_best < ratio_threshold`; sets `b`
/// with fewer than two descriptors never produce matches. Equal distances
/// resolve to the lower index in `b`.
pub fn match_features<T: Real>(
    a: &FeatureSet<T>,
    b: &FeatureSet<T>,
    ratio_threshold: f64,
) -> Vec<MatchPair> {
    match_descriptors(&a.descriptors, &b.descriptors, ratio_threshold)
}

pub fn match_descriptors(
    a: &[Descriptor],
    b: &[Descriptor],
    ratio_threshold: f64,
) -> Vec<MatchPair> {
    if b.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (ia, da) in a.iter().enumerate() {
        let mut best = (u32::MAX, usize::MAX);
        let mut second = u32::MAX;
        for (ib, db) in b.iter().enumerate() {
            let d = da.hamming(db);
            if d < best.0 {
                second = best.0;
                best = (d, ib);
            } else if d < second {
                second = d;
            }
        }
        // Two equally distant candidates cannot pass; 0/0 is treated as ambiguous.
        if second == 0 {
            continue;
        }
        let ratio = f64::from(best.0) / f64::from(second);
        if ratio < ratio_threshold {
            out.push(MatchPair {
                index_a: ia,
                index_b: best.1,
                distance: best.0,
                ratio,
            });
        }
    }
    out
}

/// Number of ratio-test survivors when matching `prev` into `curr`.
pub fn match_count_stat<T: Real>(
    prev: &GrayFrame<T>,
    curr: &GrayFrame<T>,
    cfg: &FeatureConfig,
) -> Result<usize, FeatureError> {
    let a = extract_features(prev, cfg)?;
    let b = extract_features(curr, cfg)?;
    Ok(match_features(&a, &b, cfg.ratio_threshold).len())
}

//! Per-frame lighting and edge statistics and the histogram divergence
//! between adjacent frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pixbuf::GrayFrame;
use crate::scalar::Real;

pub const HISTOGRAM_BINS: usize = 256;

/// Additive smoothing applied to every bin before taking logarithms.
pub const KL_EPSILON: f64 = 1e-10;

/// Mean below which RMS contrast is reported as missing.
pub const CONTRAST_MEAN_FLOOR: f64 = 1e-9;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("histogram is not normalized (flag unset or bins sum to {0})")]
    NotNormalized(f64),
    #[error("histogram bin {index} is negative or non-finite ({value})")]
    InvalidBin { index: usize, value: f64 },
}

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram256 {
    bins: [f64; HISTOGRAM_BINS],
    normalized: bool,
}

impl Histogram256 {
    pub fn new(bins: [f64; HISTOGRAM_BINS], normalized: bool) -> Result<Self, StatsError> {
        if let Some((index, &value)) = bins
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(StatsError::InvalidBin { index, value });
        }
        if normalized {
            let sum: f64 = bins.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(StatsError::NotNormalized(sum));
            }
        }
        Ok(Self { bins, normalized })
    }

    /// Scales non-negative weights to unit mass.
    pub fn from_weights(weights: [f64; HISTOGRAM_BINS]) -> Result<Self, StatsError> {
        let raw = Self::new(weights, false)?;
        let sum: f64 = raw.bins.iter().sum();
        if sum <= 0.0 {
            return Err(StatsError::NotNormalized(sum));
        }
        let mut bins = raw.bins;
        bins.iter_mut().for_each(|b| *b /= sum);
        Ok(Self {
            bins,
            normalized: true,
        })
    }

    pub fn bins(&self) -> &[f64; HISTOGRAM_BINS] {
        &self.bins
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn smoothed(&self) -> [f64; HISTOGRAM_BINS] {
        let total = 1.0 + KL_EPSILON * HISTOGRAM_BINS as f64;
        let mut out = [0.0; HISTOGRAM_BINS];
        for (o, b) in out.iter_mut().zip(self.bins.iter()) {
            *o = (b + KL_EPSILON) / total;
        }
        out
    }
}

/// Statistics of a single frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub luminance: f64,
    pub rms_contrast: Option<f64>,
    pub laplacian_variance: f64,
}

/// Change statistics between a frame and its predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub d_luminance: f64,
    pub d_contrast: Option<f64>,
    pub kl_divergence: f64,
    pub match_count: usize,
    pub reproj_mse: Option<f64>,
}

/// Population mean and variance, accumulated in `f64`.
fn mean_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let mut it = values.clone();
    let first = it.next().unwrap_or(0.0);
    if it.all(|v| v == first) {
        return (first, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var)
}

/// Mean intensity.
pub fn luminance<T: Real>(frame: &GrayFrame<T>) -> T {
    let sum: f64 = frame.pixels().iter().map(|v| v.as_f64()).sum();
    T::lit(sum / frame.len() as f64)
}

/// Population standard deviation over mean; `None` for (near-)black frames.
pub fn rms_contrast<T: Real>(frame: &GrayFrame<T>) -> Option<T> {
    let (mean, var) = mean_variance(frame.pixels().iter().map(|v| v.as_f64()));
    if mean < CONTRAST_MEAN_FLOOR {
        return None;
    }
    Some(T::lit(var.sqrt() / mean))
}

/// Normalized histogram with bin `min(floor(v * 256), 255)`.
pub fn intensity_histogram<T: Real>(frame: &GrayFrame<T>) -> Histogram256 {
    let mut counts = [0u64; HISTOGRAM_BINS];
    for &v in frame.pixels() {
        let bin = (v.as_f64() * HISTOGRAM_BINS as f64).floor();
        let bin = (bin.max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    let n = frame.len() as f64;
    let mut bins = [0.0; HISTOGRAM_BINS];
    for (b, c) in bins.iter_mut().zip(counts) {
        *b = c as f64 / n;
    }
    Histogram256 {
        bins,
        normalized: true,
    }
}

/// `sum_u p(u) ln(p(u) / q(u))` after epsilon smoothing of both inputs.
///
/// Called with `p` the current frame's histogram and `q` the previous one.
pub fn kl_divergence(p: &Histogram256, q: &Histogram256) -> Result<f64, StatsError> {
    for h in [p, q] {
        let sum: f64 = h.bins.iter().sum();
        if !h.normalized || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(StatsError::NotNormalized(sum));
        }
    }
    let ps = p.smoothed();
    let qs = q.smoothed();
    let kl: f64 = ps
        .iter()
        .zip(qs.iter())
        .map(|(&pu, &qu)| if pu == qu { 0.0 } else { pu * (pu / qu).ln() })
        .sum();
    // Rounding can leave a tiny negative sum for near-identical inputs.
    Ok(kl.max(0.0))
}

#[inline]
fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * n - 2 - i;
        }
    }
    i as usize
}

/// 4-neighbour Laplacian response with reflect-101 borders.
pub fn laplacian<T: Real>(frame: &GrayFrame<T>) -> Vec<T> {
    let (w, h) = (frame.width(), frame.height());
    let four = T::lit(4.0);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = frame.row(reflect101(y as isize - 1, h));
        let mid = frame.row(y);
        let down = frame.row(reflect101(y as isize + 1, h));
        for x in 0..w {
            let l = mid[reflect101(x as isize - 1, w)];
            let r = mid[reflect101(x as isize + 1, w)];
            out.push(up[x] + down[x] + l + r - four * mid[x]);
        }
    }
    out
}

/// Population variance of the Laplacian response.
///
/// Callers compare frames at a common resolution; the analysis pipeline
/// resizes to [`crate::LAPLACIAN_SIZE`] first.
pub fn laplacian_variance<T: Real>(frame: &GrayFrame<T>) -> T {
    let response = laplacian(frame);
    let (_, var) = mean_variance(response.iter().map(|v| v.as_f64()));
    T::lit(var)
}

pub fn frame_stats<T: Real>(frame: &GrayFrame<T>, laplacian_frame: &GrayFrame<T>) -> FrameStats {
    FrameStats {
        luminance: luminance(frame).as_f64(),
        rms_contrast: rms_contrast(frame).map(Real::as_f64),
        laplacian_variance: laplacian_variance(laplacian_frame).as_f64(),
    }
}

/// Absolute luminance and contrast change between two frames.
pub fn pair_deltas(prev: &FrameStats, curr: &FrameStats) -> (f64, Option<f64>) {
    let d_luminance = (curr.luminance - prev.luminance).abs();
    let d_contrast = match (prev.rms_contrast, curr.rms_contrast) {
        (Some(a), Some(b)) => Some((b - a).abs()),
        _ => None,
    };
    (d_luminance, d_contrast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(w: usize, h: usize, px: Vec<f64>) -> GrayFrame<f64> {
        GrayFrame::new(w, h, px).unwrap()
    }

    fn halves(w: usize, h: usize) -> GrayFrame<f64> {
        GrayFrame::from_fn(w, h, |x, _| if x < w / 2 { 0.0 } else { 1.0 })
    }

    #[test]
    fn luminance_cases() {
        assert_eq!(luminance(&GrayFrame::constant(4, 3, 0.5)), 0.5);
        assert_eq!(luminance(&halves(8, 2)), 0.5);
        assert_eq!(luminance(&frame(2, 2, vec![0.0, 0.25, 0.5, 0.25])), 0.25);
    }

    #[test]
    fn contrast_cases() {
        assert_eq!(rms_contrast(&GrayFrame::constant(5, 5, 0.3)), Some(0.0));
        assert_eq!(rms_contrast(&halves(8, 2)), Some(1.0));
        assert_eq!(rms_contrast(&GrayFrame::constant(5, 5, 0.0)), None);
    }

    #[test]
    fn histogram_binning() {
        let h = intensity_histogram(&GrayFrame::constant(3, 3, 0.0));
        assert_eq!(h.bins()[0], 1.0);
        let h = intensity_histogram(&GrayFrame::constant(3, 3, 1.0));
        assert_eq!(h.bins()[255], 1.0);

        let ramp = GrayFrame::from_fn(256, 1, |x, _| x as f64 / 255.0);
        let h = intensity_histogram(&ramp);
        let mut expected = [0.0; 256];
        for k in 0..256usize {
            let bin = ((k as f64 / 255.0) * 256.0).floor().min(255.0) as usize;
            expected[bin] += 1.0 / 256.0;
        }
        assert_eq!(h.bins(), &expected);
        // Each value k/255 with k < 255 maps to bin k; k = 255 clamps to 255.
        assert!(h.bins().iter().all(|&b| b == 1.0 / 256.0));
        assert!((h.bins().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_zero_for_equal_inputs() {
        let u = Histogram256::new([1.0 / 256.0; 256], true).unwrap();
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        let h = intensity_histogram(&halves(16, 4));
        assert_eq!(kl_divergence(&h, &h).unwrap(), 0.0);
    }

    #[test]
    fn kl_rejects_unnormalized() {
        let raw = Histogram256::new([1.0; 256], false).unwrap();
        let u = Histogram256::new([1.0 / 256.0; 256], true).unwrap();
        assert!(matches!(
            kl_divergence(&raw, &u),
            Err(StatsError::NotNormalized(_))
        ));
        assert!(matches!(
            Histogram256::new([0.5; 256], true),
            Err(StatsError::NotNormalized(_))
        ));
    }

    #[test]
    fn kl_is_asymmetric() {
        let mut a = [0.0; 256];
        a[0] = 0.9;
        a[1] = 0.1;
        let mut b = [0.0; 256];
        b[0] = 0.5;
        b[1] = 0.25;
        b[2] = 0.25;
        let p = Histogram256::new(a, true).unwrap();
        let q = Histogram256::new(b, true).unwrap();
        let pq = kl_divergence(&p, &q).unwrap();
        let qp = kl_divergence(&q, &p).unwrap();
        assert!((pq - qp).abs() > 1e-3);
    }

    #[test]
    fn laplacian_single_impulse() {
        // Responses: -4 at the centre, +1 at the four neighbours, 0 elsewhere;
        // mean 0, variance (16 + 4) / 25.
        let f = GrayFrame::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 1.0 } else { 0.0 });
        assert!((laplacian_variance(&f) - 0.8f64).abs() < 1e-15);
    }

    #[test]
    fn laplacian_constant_is_zero() {
        assert_eq!(laplacian_variance(&GrayFrame::constant(9, 7, 0.42f64)), 0.0);
        assert_eq!(laplacian_variance(&GrayFrame::constant(1, 1, 0.42f32)), 0.0);
    }

    #[test]
    fn reflect101_indices() {
        assert_eq!(reflect101(-1, 5), 1);
        assert_eq!(reflect101(5, 5), 3);
        assert_eq!(reflect101(-1, 2), 1);
        assert_eq!(reflect101(2, 2), 0);
        assert_eq!(reflect101(-1, 1), 0);
    }

    #[test]
    fn pair_delta_cases() {
        let a = FrameStats {
            luminance: 0.3,
            rms_contrast: Some(0.2),
            laplacian_variance: 0.0,
        };
        assert_eq!(pair_deltas(&a, &a), (0.0, Some(0.0)));
        let b = FrameStats {
            luminance: 0.5,
            ..a
        };
        assert!((pair_deltas(&a, &b).0 - 0.2).abs() < 1e-15);
        let c = FrameStats {
            rms_contrast: None,
            ..a
        };
        assert_eq!(pair_deltas(&a, &c).1, None);
    }

    fn arb_frame() -> impl Strategy<Value = GrayFrame<f64>> {
        (2usize..10, 2usize..10).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..=0.5, w * h).prop_map(move |px| frame(w, h, px))
        })
    }

    proptest! {
        #[test]
        fn flips_preserve_luminance_and_laplacian(f in arb_frame()) {
            for g in [f.flip_horizontal(), f.flip_vertical()] {
                prop_assert!((luminance(&g) - luminance(&f)).abs() < 1e-12);
                prop_assert!((laplacian_variance(&g) - laplacian_variance(&f)).abs() < 1e-12);
            }
        }

        #[test]
        fn laplacian_ignores_offsets(f in arb_frame(), c in 0.0f64..0.5) {
            let g = f.map(|v| v + c);
            prop_assert!((laplacian_variance(&g) - laplacian_variance(&f)).abs() < 1e-12);
        }

        #[test]
        fn contrast_is_scale_invariant(f in arb_frame(), alpha in 0.01f64..=1.0) {
            prop_assume!(luminance(&f) > 1e-6);
            let g = f.map(|v| v * alpha);
            let (a, b) = (rms_contrast(&f).unwrap(), rms_contrast(&g).unwrap());
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }

        #[test]
        fn histogram_sums_to_one(f in arb_frame()) {
            let s: f64 = intensity_histogram(&f).bins().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

//! Frame-to-frame alignment and the masked reprojection error.

mod homography;
mod linalg;

pub use homography::{
    dlt, estimate_homography, Correspondence, Homography, HomographyEstimate, RansacConfig,
    MIN_DETERMINANT,
};

use thiserror::Error;

use crate::features::{extract_features, match_features, FeatureConfig, FeatureSet, MatchPair};
use crate::pixbuf::GrayFrame;
use crate::scalar::Real;

/// Overlap below this fraction of the frame yields a missing error value.
pub const MIN_VALID_FRACTION: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReprojectError {
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientMatches(usize),
    #[error("no non-degenerate minimal sample found")]
    DegenerateConfiguration,
    #[error("homography is not invertible")]
    NonInvertible,
}

/// A warped frame and the mask of pixels whose source lay inside the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped<T> {
    pub frame: GrayFrame<T>,
    pub valid: Vec<bool>,
}

impl<T> Warped<T> {
    pub fn valid_fraction(&self) -> f64 {
        if self.valid.is_empty() {
            return 0.0;
        }
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }
}

/// Inverse-maps every output pixel through `h` and samples bilinearly.
///
/// Output `(x, y)` reads the source at `h^-1 (x, y)`. Pixels whose source
/// coordinate falls outside the source rectangle are zero and masked invalid.
/// Source coordinates within `sqrt(eps)` of the pixel grid are snapped onto it.
pub fn warp_bilinear<T: Real>(
    frame: &GrayFrame<T>,
    h: &Homography<T>,
    out_width: usize,
    out_height: usize,
) -> Result<Warped<T>, ReprojectError> {
    let inv = h.inverse()?;
    let (sw, sh) = (frame.width(), frame.height());
    let tol = T::epsilon().sqrt();
    let max_x = T::lit((sw - 1) as f64);
    let max_y = T::lit((sh - 1) as f64);
    let mut pixels = Vec::with_capacity(out_width * out_height);
    let mut valid = Vec::with_capacity(out_width * out_height);
    for y in 0..out_height {
        for x in 0..out_width {
            let src = inv.apply((T::lit(x as f64), T::lit(y as f64)));
            match src {
                Some((sx, sy))
                    if sx >= -tol && sy >= -tol && sx <= max_x + tol && sy <= max_y + tol =>
                {
                    let snap = |v: T| {
                        if (v - v.round()).abs() <= tol {
                            v.round()
                        } else {
                            v
                        }
                    };
                    let sx = snap(sx).max(T::zero()).min(max_x);
                    let sy = snap(sy).max(T::zero()).min(max_y);
                    let x0 = sx.floor().to_usize().unwrap_or(0);
                    let y0 = sy.floor().to_usize().unwrap_or(0);
                    let x1 = (x0 + 1).min(sw - 1);
                    let y1 = (y0 + 1).min(sh - 1);
                    let fx = sx - T::lit(x0 as f64);
                    let fy = sy - T::lit(y0 as f64);
                    let top = frame.get(x0, y0) + (frame.get(x1, y0) - frame.get(x0, y0)) * fx;
                    let bottom = frame.get(x0, y1) + (frame.get(x1, y1) - frame.get(x0, y1)) * fx;
                    pixels.push(top + (bottom - top) * fy);
                    valid.push(true);
                }
                _ => {
                    pixels.push(T::zero());
                    valid.push(false);
                }
            }
        }
    }
    Ok(Warped {
        frame: GrayFrame::from_fn(out_width, out_height, |x, y| pixels[y * out_width + x]),
        valid,
    })
}

/// Turns `prev -> curr` matches into `curr -> prev` correspondences in
/// base-frame pixel coordinates.
pub fn correspondences<T: Real>(
    prev: &FeatureSet<T>,
    curr: &FeatureSet<T>,
    matches: &[MatchPair],
) -> Vec<Correspondence<T>> {
    matches
        .iter()
        .map(|m| Correspondence::new(curr.base_position(m.index_b), prev.base_position(m.index_a)))
        .collect()
}

/// Mean squared intensity difference over the valid overlap after
/// warping `curr` into `prev`'s frame; `None` when alignment is impossible.
pub fn reprojected_mse_from_matches<T: Real>(
    prev: &GrayFrame<T>,
    curr: &GrayFrame<T>,
    prev_features: &FeatureSet<T>,
    curr_features: &FeatureSet<T>,
    matches: &[MatchPair],
    ransac: &RansacConfig,
) -> Option<T> {
    let pairs = correspondences(prev_features, curr_features, matches);
    if pairs.len() < 4 {
        return None;
    }
    let est = estimate_homography(&pairs, ransac).ok()?;
    let warped = warp_bilinear(curr, &est.homography, prev.width(), prev.height()).ok()?;
    if warped.valid_fraction() < MIN_VALID_FRACTION {
        return None;
    }
    let (mut sum, mut n) = (0.0f64, 0usize);
    for ((w, p), &ok) in warped
        .frame
        .pixels()
        .iter()
        .zip(prev.pixels())
        .zip(&warped.valid)
    {
        if ok {
            let d = (*w - *p).as_f64();
            sum += d * d;
            n += 1;
        }
    }
    Some(T::lit(sum / n as f64))
}

/// Extracts and matches features, then measures the reprojected MSE.
pub fn reprojected_mse<T: Real>(
    prev: &GrayFrame<T>,
    curr: &GrayFrame<T>,
    features: &FeatureConfig,
    ransac: &RansacConfig,
) -> Option<T> {
    let a = extract_features(prev, features).ok()?;
    let b = extract_features(curr, features).ok()?;
    let matches = match_features(&a, &b, features.ratio_threshold);
    reprojected_mse_from_matches(prev, curr, &a, &b, &matches, ransac)
}

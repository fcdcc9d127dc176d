//! Planar homographies: normalized DLT and a seeded RANSAC estimator.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{det3, inv3, mat3_mul, symmetric_eigen};
use super::ReprojectError;
use crate::scalar::Real;

/// Determinant magnitude below which a matrix is considered singular.
pub const MIN_DETERMINANT: f64 = 1e-12;

const REFIT_ROUNDS: usize = 5;

/// Invertible 3x3 projective transform, scaled so `m[2][2] == 1` when
/// that entry is nonzero and to unit Frobenius norm otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography<T> {
    m: [[T; 3]; 3],
}

impl<T: Real> Homography<T> {
    pub fn new(m: [[T; 3]; 3]) -> Result<Self, ReprojectError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ReprojectError::NonInvertible);
        }
        let m = normalize(m);
        if det3(&m).abs() <= T::lit(MIN_DETERMINANT) {
            return Err(ReprojectError::NonInvertible);
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self::translation(T::zero(), T::zero())
    }

    pub fn translation(dx: T, dy: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, dx], [z, o, dy], [z, z, o]],
        }
    }

    pub fn matrix(&self) -> &[[T; 3]; 3] {
        &self.m
    }

    pub fn inverse(&self) -> Result<Self, ReprojectError> {
        inv3(&self.m)
            .ok_or(ReprojectError::NonInvertible)
            .and_then(Self::new)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    #[inline]
    pub fn apply(&self, (x, y): (T, T)) -> Option<(T, T)> {
        project(&self.m, x, y)
    }

    pub fn compose(&self, rhs: &Self) -> Result<Self, ReprojectError> {
        Self::new(mat3_mul(&self.m, &rhs.m))
    }
}

#[inline]
fn project<T: Real>(m: &[[T; 3]; 3], x: T, y: T) -> Option<(T, T)> {
    let w = m[2][0] * x + m[2][1] * y + m[2][2];
    if w.abs() <= T::epsilon() {
        return None;
    }
    let u = (m[0][0] * x + m[0][1] * y + m[0][2]) / w;
    let v = (m[1][0] * x + m[1][1] * y + m[1][2]) / w;
    (u.is_finite() && v.is_finite()).then_some((u, v))
}

fn normalize<T: Real>(mut m: [[T; 3]; 3]) -> [[T; 3]; 3] {
    let frob = m.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt();
    let scale = if m[2][2].abs() > T::epsilon() * frob {
        m[2][2]
    } else {
        frob
    };
    if scale != T::zero() {
        m.iter_mut().flatten().for_each(|v| *v /= scale);
    }
    m
}

/// A point pair `a -> b` across two frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence<T> {
    pub a: (T, T),
    pub b: (T, T),
}

impl<T: Real> Correspondence<T> {
    pub fn new(a: (T, T), b: (T, T)) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Inlier bound on the symmetric transfer error, in pixels.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            inlier_threshold: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomographyEstimate<T> {
    pub homography: Homography<T>,
    pub inliers: Vec<bool>,
}

impl<T> HomographyEstimate<T> {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Similarity taking the centroid to the origin and the mean distance to sqrt(2).
fn hartley<T: Real>(points: impl Iterator<Item = (T, T)> + Clone) -> Option<[[T; 3]; 3]> {
    let n = T::lit(points.clone().count() as f64);
    let (sx, sy) = points
        .clone()
        .fold((T::zero(), T::zero()), |(ax, ay), (x, y)| (ax + x, ay + y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .map(|(x, y)| ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt())
        .sum::<T>()
        / n;
    if mean_dist.is_nan() || mean_dist <= T::epsilon() {
        return None;
    }
    let s = T::lit(std::f64::consts::SQRT_2) / mean_dist;
    let z = T::zero();
    Some([[s, z, -s * cx], [z, s, -s * cy], [z, z, T::one()]])
}

/// Normalized DLT on all given correspondences; `None` when the system is
/// rank-deficient or the result is singular.
pub fn dlt<T: Real>(pairs: &[Correspondence<T>]) -> Option<Homography<T>> {
    if pairs.len() < 4 {
        return None;
    }
    let ta = hartley(pairs.iter().map(|c| c.a))?;
    let tb = hartley(pairs.iter().map(|c| c.b))?;

    // Accumulate A^T A for the 2n x 9 design matrix.
    let mut ata = [[T::zero(); 9]; 9];
    for c in pairs {
        let (x, y) = project(&ta, c.a.0, c.a.1)?;
        let (u, v) = project(&tb, c.b.0, c.b.1)?;
        let (o, z) = (T::one(), T::zero());
        let rows = [
            [-x, -y, -o, z, z, z, u * x, u * y, u],
            [z, z, z, -x, -y, -o, v * x, v * y, v],
        ];
        for r in &rows {
            for i in 0..9 {
                if r[i] == T::zero() {
                    continue;
                }
                for j in 0..9 {
                    ata[i][j] += r[i] * r[j];
                }
            }
        }
    }
    let (values, vectors) = symmetric_eigen(ata);
    // A second (near-)null direction means the points do not pin down H.
    let scale = values[8].abs().max(T::min_positive_value());
    if values[1].abs() / scale <= T::epsilon() * T::lit(1e3) {
        return None;
    }
    let h = vectors[0];
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];
    let tb_inv = inv3(&tb)?;
    Homography::new(mat3_mul(&mat3_mul(&tb_inv, &hn), &ta)).ok()
}

fn cross((ax, ay): (f64, f64), (bx, by): (f64, f64), (cx, cy): (f64, f64)) -> f64 {
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// True when any three of the four points are (nearly) collinear.
fn degenerate_sample<T: Real>(pts: [(T, T); 4]) -> bool {
    let p: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (x.as_f64(), y.as_f64())).collect();
    let spread = p
        .iter()
        .flat_map(|a| {
            p.iter()
                .map(move |b| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
        })
        .fold(0.0, f64::max);
    let tol = 1e-6 * spread.max(f64::MIN_POSITIVE);
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if cross(p[i], p[j], p[k]).abs() <= tol {
            return true;
        }
    }
    false
}

/// Root mean square of the forward and backward transfer distances.
fn symmetric_transfer_error<T: Real>(
    h: &[[T; 3]; 3],
    h_inv: &[[T; 3]; 3],
    c: &Correspondence<T>,
) -> T {
    let sq = |p: Option<(T, T)>, q: (T, T)| match p {
        Some((x, y)) => (x - q.0) * (x - q.0) + (y - q.1) * (y - q.1),
        None => T::infinity(),
    };
    let fwd = sq(project(h, c.a.0, c.a.1), c.b);
    let bwd = sq(project(h_inv, c.b.0, c.b.1), c.a);
    ((fwd + bwd) / T::lit(2.0)).sqrt()
}

struct Scored {
    count: usize,
    cost: f64,
}

fn score<T: Real>(
    h: &Homography<T>,
    pairs: &[Correspondence<T>],
    threshold: T,
) -> Option<(Scored, Vec<bool>)> {
    let inv = inv3(&h.m)?;
    let mut flags = Vec::with_capacity(pairs.len());
    let mut count = 0;
    let mut cost = 0.0;
    let t2 = (threshold * threshold).as_f64();
    for c in pairs {
        let e = symmetric_transfer_error(&h.m, &inv, c);
        let inlier = e < threshold;
        flags.push(inlier);
        if inlier {
            count += 1;
            cost += (e * e).as_f64();
        } else {
            cost += t2;
        }
    }
    Some((Scored { count, cost }, flags))
}

/// Robust homography mapping `a` points onto `b` points.
///
/// Seeded 4-point RANSAC over normalized-DLT hypotheses, inliers judged by
/// symmetric transfer error, best model refit on all of its inliers.
pub fn estimate_homography<T: Real>(
    pairs: &[Correspondence<T>],
    cfg: &RansacConfig,
) -> Result<HomographyEstimate<T>, ReprojectError> {
    if pairs.len() < 4 {
        return Err(ReprojectError::InsufficientMatches(pairs.len()));
    }
    let threshold = T::lit(cfg.inlier_threshold);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Homography<T>, Scored, Vec<bool>)> = None;

    for _ in 0..cfg.iterations.max(1) {
        let idx = sample(&mut rng, pairs.len(), 4);
        let subset = [
            pairs[idx.index(0)],
            pairs[idx.index(1)],
            pairs[idx.index(2)],
            pairs[idx.index(3)],
        ];
        if degenerate_sample(subset.map(|c| c.a)) || degenerate_sample(subset.map(|c| c.b)) {
            continue;
        }
        let Some(h) = dlt(&subset) else { continue };
        let Some((s, flags)) = score(&h, pairs, threshold) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, b, _)) => s.count > b.count || (s.count == b.count && s.cost < b.cost),
        };
        if better {
            best = Some((h, s, flags));
        }
    }

    let (mut h, _, mut flags) = best.ok_or(ReprojectError::DegenerateConfiguration)?;
    // Refit on the consensus set until it stops changing.
    for _ in 0..REFIT_ROUNDS {
        let inlier_pairs: Vec<Correspondence<T>> = pairs
            .iter()
            .zip(&flags)
            .filter(|(_, &f)| f)
            .map(|(c, _)| *c)
            .collect();
        let Some(refit) = dlt(&inlier_pairs) else {
            break;
        };
        let Some((rs, rflags)) = score(&refit, pairs, threshold) else {
            break;
        };
        if rs.count < 4 {
            break;
        }
        let converged = rflags == flags;
        h = refit;
        flags = rflags;
        if converged {
            break;
        }
    }
    Ok(HomographyEstimate {
        homography: h,
        inliers: flags,
    })
}

//! FAST-9 segment test, Harris scoring and non-maximum suppression.

use crate::pixbuf::GrayFrame;
use crate::scalar::Real;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC: usize = 9;
const HARRIS_K: f64 = 0.04;
const HARRIS_HALF_WINDOW: isize = 3;

/// True when at least `ARC` contiguous circle pixels are all brighter than
/// `p + t` or all darker than `p - t`.
fn is_fast_corner<T: Real>(img: &GrayFrame<T>, x: usize, y: usize, t: T) -> bool {
    let w = img.width() as isize;
    let px = img.pixels();
    let base = y as isize * w + x as isize;
    let p = px[base as usize];
    let hi = p + t;
    let lo = p - t;
    let at = |i: usize| px[(base + CIRCLE[i].1 * w + CIRCLE[i].0) as usize];

    // Any 9-arc covers at least two of the four compass points.
    let compass = [at(0), at(4), at(8), at(12)];
    let brighter = compass.iter().filter(|&&v| v > hi).count();
    let darker = compass.iter().filter(|&&v| v < lo).count();
    if brighter < 2 && darker < 2 {
        return false;
    }

    let mut ring = [0i8; 16];
    for (i, r) in ring.iter_mut().enumerate() {
        let v = at(i);
        *r = if v > hi {
            1
        } else if v < lo {
            -1
        } else {
            0
        };
    }
    for sign in [1i8, -1] {
        let mut run = 0;
        for i in 0..16 + ARC - 1 {
            if ring[i % 16] == sign {
                run += 1;
                if run >= ARC {
                    return true;
                }
            } else {
                run = 0;
            }
        }
    }
    false
}

/// Sobel gradients, zero on the one-pixel border.
pub(crate) struct Gradients<T> {
    width: usize,
    gx: Vec<T>,
    gy: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub(crate) fn new(img: &GrayFrame<T>) -> Self {
        let (w, h) = (img.width(), img.height());
        let mut gx = vec![T::zero(); w * h];
        let mut gy = vec![T::zero(); w * h];
        let two = T::lit(2.0);
        let eighth = T::lit(0.125);
        for y in 1..h.saturating_sub(1) {
            let (a, b, c) = (img.row(y - 1), img.row(y), img.row(y + 1));
            for x in 1..w - 1 {
                let dx =
                    (a[x + 1] - a[x - 1]) + two * (b[x + 1] - b[x - 1]) + (c[x + 1] - c[x - 1]);
                let dy = (c[x - 1] - a[x - 1]) + two * (c[x] - a[x]) + (c[x + 1] - a[x + 1]);
                gx[y * w + x] = dx * eighth;
                gy[y * w + x] = dy * eighth;
            }
        }
        Self { width: w, gx, gy }
    }

    /// Harris response `det(M) - k tr(M)^2` over a 7x7 window.
    ///
    /// The caller guarantees the window lies inside the image.
    pub(crate) fn harris(&self, x: usize, y: usize) -> T {
        let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
        for dy in -HARRIS_HALF_WINDOW..=HARRIS_HALF_WINDOW {
            let row = (y as isize + dy) as usize * self.width;
            for dx in -HARRIS_HALF_WINDOW..=HARRIS_HALF_WINDOW {
                let i = row + (x as isize + dx) as usize;
                let (gx, gy) = (self.gx[i], self.gy[i]);
                sxx += gx * gx;
                syy += gy * gy;
                sxy += gx * gy;
            }
        }
        let tr = sxx + syy;
        sxx * syy - sxy * sxy - T::lit(HARRIS_K) * tr * tr
    }
}

/// A scored corner at integer position in level coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Corner<T> {
    pub x: usize,
    pub y: usize,
    pub response: T,
}

/// FAST-9 corners at least `margin` pixels from the border, scored with
/// Harris, filtered to positive responses and suppressed to 3x3 maxima.
pub(crate) fn detect<T: Real>(
    img: &GrayFrame<T>,
    grads: &Gradients<T>,
    threshold: T,
    margin: usize,
) -> Vec<Corner<T>> {
    let (w, h) = (img.width(), img.height());
    let margin = margin.max(HARRIS_HALF_WINDOW as usize + 2);
    if w <= 2 * margin || h <= 2 * margin {
        return Vec::new();
    }
    let mut score: Vec<Option<T>> = vec![None; w * h];
    let mut candidates = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            if is_fast_corner(img, x, y, threshold) {
                let r = grads.harris(x, y);
                if r > T::zero() {
                    score[y * w + x] = Some(r);
                    candidates.push((x, y));
                }
            }
        }
    }
    candidates
        .into_iter()
        .filter_map(|(x, y)| {
            let idx = y * w + x;
            let r = score[idx]?;
            for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    let n = ny * w + nx;
                    if n == idx {
                        continue;
                    }
                    if let Some(other) = score[n] {
                        // Ties go to the earlier pixel in raster order.
                        if other > r || (other == r && n < idx) {
                            return None;
                        }
                    }
                }
            }
            Some(Corner { x, y, response: r })
        })
        .collect()
}

/// Parabolic sub-pixel offset of the Harris peak along each axis, in `[-0.5, 0.5]`.
pub(crate) fn refine<T: Real>(grads: &Gradients<T>, c: &Corner<T>) -> (T, T) {
    let vertex = |l: T, m: T, r: T| {
        let denom = l - m - m + r;
        if denom < T::zero() {
            let half = T::lit(0.5);
            (half * (l - r) / denom).max(-half).min(half)
        } else {
            T::zero()
        }
    };
    let ox = vertex(
        grads.harris(c.x - 1, c.y),
        c.response,
        grads.harris(c.x + 1, c.y),
    );
    let oy = vertex(
        grads.harris(c.x, c.y - 1),
        c.response,
        grads.harris(c.x, c.y + 1),
    );
    (ox, oy)
}

//! Raster substrate: RGB and normalized grayscale frames, netpbm codecs,
//! luma conversion, bilinear resize and cropping.

mod netpbm;

pub use netpbm::{encode_netpbm, parse_netpbm, Frame};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PixbufError {
    #[error("unsupported netpbm format {0:?} (expected P2, P3, P5 or P6)")]
    UnsupportedFormat(String),
    #[error("maxval {0} exceeds 255")]
    MaxvalTooLarge(u32),
    #[error("truncated payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("crop rectangle {rect:?} exceeds {width}x{height} frame")]
    OutOfBounds {
        rect: CropRect,
        width: usize,
        height: usize,
    },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("expected {expected} pixels, got {found}")]
    PixelCount { expected: usize, found: usize },
    #[error("pixel value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
}

fn check_dims(width: usize, height: usize) -> Result<(), PixbufError> {
    if width == 0 || height == 0 {
        return Err(PixbufError::InvalidDimensions { width, height });
    }
    Ok(())
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, PixbufError> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(PixbufError::PixelCount {
                expected: width * height,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// Single-channel raster with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Real> GrayFrame<T> {
    /// Builds a frame, validating the pixel count and the `[0, 1]` range.
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self, PixbufError> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(PixbufError::PixelCount {
                expected: width * height,
                found: pixels.len(),
            });
        }
        if let Some(bad) = pixels
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(PixbufError::ValueOutOfRange(
                bad.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds a frame from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn constant(width: usize, height: usize, value: T) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every pixel, clamping the result to `[0, 1]`.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| clamp_unit(f(v))).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(x, self.height - 1 - y)
        })
    }

    /// Converts the scalar type, e.g. `f64` to `f32`.
    pub fn cast<U: Real>(&self) -> GrayFrame<U> {
        GrayFrame {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|v| clamp_unit(U::lit(v.as_f64())))
                .collect(),
        }
    }

    /// Stretches intensities so the frame spans `[0, 1]`; constant frames are returned unchanged.
    pub fn stretch_to_unit(&self) -> Self {
        let (lo, hi) = self.min_max();
        if hi - lo <= T::epsilon() {
            return self.clone();
        }
        let span = hi - lo;
        self.map(|v| (v - lo) / span)
    }

    pub fn min_max(&self) -> (T, T) {
        self.pixels
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[inline]
pub(crate) fn clamp_unit<T: Real>(v: T) -> T {
    if v.is_nan() {
        T::zero()
    } else {
        v.max(T::zero()).min(T::one())
    }
}

/// Rectangular region of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CropRect {
    pub left: usize,
    pub top: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    pub fn new(left: usize, top: usize, width: usize, height: usize) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    /// The lower half of a `width`x`height` frame (top half removed).
    pub fn bottom_half(width: usize, height: usize) -> Self {
        let top = height / 2;
        Self::new(0, top, width, height - top)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.left + self.width <= width
            && self.top + self.height <= height
    }
}

/// BT.601 luma, scaled to `[0, 1]`.
pub fn to_gray<T: Real>(frame: &RgbFrame) -> GrayFrame<T> {
    let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
    let scale = T::lit(255.0);
    let pixels = frame
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let luma = wr * T::lit(r as f64) + wg * T::lit(g as f64) + wb * T::lit(b as f64);
            clamp_unit(luma / scale)
        })
        .collect();
    GrayFrame {
        width: frame.width,
        height: frame.height,
        pixels,
    }
}

/// Bilinear resize with pixel-center alignment and edge clamping.
///
/// Output pixel `(x, y)` samples the source at
/// `((x + 0.5) * sw / ow - 0.5, (y + 0.5) * sh / oh - 0.5)`.
pub fn resize_bilinear<T: Real>(
    frame: &GrayFrame<T>,
    out_width: usize,
    out_height: usize,
) -> GrayFrame<T> {
    assert!(
        out_width > 0 && out_height > 0,
        "output dimensions must be positive"
    );
    if out_width == frame.width && out_height == frame.height {
        return frame.clone();
    }
    let half = T::lit(0.5);
    let sx_scale = T::lit(frame.width as f64) / T::lit(out_width as f64);
    let sy_scale = T::lit(frame.height as f64) / T::lit(out_height as f64);
    let max_x = T::lit((frame.width - 1) as f64);
    let max_y = T::lit((frame.height - 1) as f64);

    // Horizontal taps are shared by every row.
    let taps: Vec<(usize, usize, T)> = (0..out_width)
        .map(|x| {
            let sx = ((T::lit(x as f64) + half) * sx_scale - half)
                .max(T::zero())
                .min(max_x);
            let x0 = sx.floor().to_usize().unwrap_or(0);
            let x1 = (x0 + 1).min(frame.width - 1);
            (x0, x1, sx - T::lit(x0 as f64))
        })
        .collect();

    let mut pixels = Vec::with_capacity(out_width * out_height);
    for y in 0..out_height {
        let sy = ((T::lit(y as f64) + half) * sy_scale - half)
            .max(T::zero())
            .min(max_y);
        let y0 = sy.floor().to_usize().unwrap_or(0);
        let y1 = (y0 + 1).min(frame.height - 1);
        let fy = sy - T::lit(y0 as f64);
        let r0 = frame.row(y0);
        let r1 = frame.row(y1);
        for &(x0, x1, fx) in &taps {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            pixels.push(clamp_unit(top + (bottom - top) * fy));
        }
    }
    GrayFrame {
        width: out_width,
        height: out_height,
        pixels,
    }
}

pub fn crop<T: Real>(frame: &GrayFrame<T>, rect: CropRect) -> Result<GrayFrame<T>, PixbufError> {
    if !rect.fits(frame.width, frame.height) {
        return Err(PixbufError::OutOfBounds {
            rect,
            width: frame.width,
            height: frame.height,
        });
    }
    let mut pixels = Vec::with_capacity(rect.width * rect.height);
    for y in rect.top..rect.top + rect.height {
        pixels.extend_from_slice(&frame.row(y)[rect.left..rect.left + rect.width]);
    }
    Ok(GrayFrame {
        width: rect.width,
        height: rect.height,
        pixels,
    })
}

//! Netpbm P2/P3/P5/P6 reader and P5 writer (maxval <= 255).

use super::{GrayFrame, PixbufError, RgbFrame};
use crate::scalar::Real;

/// A decoded netpbm image.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame<T> {
    Gray(GrayFrame<T>),
    Rgb(RgbFrame),
}

impl<T: Real> Frame<T> {
    pub fn width(&self) -> usize {
        match self {
            Frame::Gray(g) => g.width(),
            Frame::Rgb(c) => c.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Frame::Gray(g) => g.height(),
            Frame::Rgb(c) => c.height(),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_uint(&mut self, what: &str) -> Result<u32, PixbufError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PixbufError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PixbufError::MalformedHeader(format!("{what} out of range")))
    }

    /// Reads the next ASCII sample, or `None` at end of input.
    fn ascii_sample(&mut self) -> Result<Option<u32>, PixbufError> {
        self.skip_whitespace_and_comments();
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        self.header_uint("sample").map(Some)
    }
}

fn read_samples(
    cur: &mut Cursor<'_>,
    binary: bool,
    count: usize,
    maxval: u32,
) -> Result<Vec<u8>, PixbufError> {
    let samples = if binary {
        let payload = &cur.bytes[cur.pos..];
        if payload.len() < count {
            return Err(PixbufError::TruncatedPayload {
                expected: count,
                found: payload.len(),
            });
        }
        payload[..count].to_vec()
    } else {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            match cur.ascii_sample()? {
                Some(v) if v <= maxval => out.push(v as u8),
                Some(v) => {
                    return Err(PixbufError::MalformedHeader(format!(
                        "sample {v} exceeds maxval {maxval}"
                    )))
                }
                None => {
                    return Err(PixbufError::TruncatedPayload {
                        expected: count,
                        found: out.len(),
                    })
                }
            }
        }
        out
    };
    if let Some(v) = samples.iter().find(|&&v| u32::from(v) > maxval) {
        return Err(PixbufError::MalformedHeader(format!(
            "sample {v} exceeds maxval {maxval}"
        )));
    }
    Ok(samples)
}

/// Decodes a P2/P3/P5/P6 image. Gray formats are normalized by `maxval`.
pub fn parse_netpbm<T: Real>(bytes: &[u8]) -> Result<Frame<T>, PixbufError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(PixbufError::UnsupportedFormat(magic));
    }
    let (gray, binary) = match bytes[1] {
        b'2' => (true, false),
        b'3' => (false, false),
        b'5' => (true, true),
        b'6' => (false, true),
        other => {
            return Err(PixbufError::UnsupportedFormat(format!(
                "P{}",
                other as char
            )));
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !(bytes[cur.pos].is_ascii_whitespace() || bytes[cur.pos] == b'#') {
        return Err(PixbufError::MalformedHeader(
            "missing whitespace after magic".into(),
        ));
    }
    let width = cur.header_uint("width")? as usize;
    let height = cur.header_uint("height")? as usize;
    let maxval = cur.header_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(PixbufError::InvalidDimensions { width, height });
    }
    if maxval > 255 {
        return Err(PixbufError::MaxvalTooLarge(maxval));
    }
    if maxval == 0 {
        return Err(PixbufError::MalformedHeader(
            "maxval must be positive".into(),
        ));
    }
    // Exactly one whitespace byte separates the header from a binary raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => {
            return Err(PixbufError::MalformedHeader(
                "missing whitespace after maxval".into(),
            ))
        }
        None if binary => {
            return Err(PixbufError::TruncatedPayload {
                expected: width * height * if gray { 1 } else { 3 },
                found: 0,
            })
        }
        None => {}
    }

    if gray {
        let samples = read_samples(&mut cur, binary, width * height, maxval)?;
        let denom = T::lit(maxval as f64);
        let pixels = samples.iter().map(|&v| T::lit(v as f64) / denom).collect();
        Ok(Frame::Gray(GrayFrame::new(width, height, pixels)?))
    } else {
        let samples = read_samples(&mut cur, binary, width * height * 3, maxval)?;
        let rescale = |v: u8| -> u8 {
            if maxval == 255 {
                v
            } else {
                ((u32::from(v) * 255 * 2 + maxval) / (2 * maxval)) as u8
            }
        };
        let pixels = samples
            .chunks_exact(3)
            .map(|c| [rescale(c[0]), rescale(c[1]), rescale(c[2])])
            .collect();
        Ok(Frame::Rgb(RgbFrame::new(width, height, pixels)?))
    }
}

/// Quantizes `v` in `[0, 1]` to a byte with round-half-up.
#[inline]
pub(crate) fn quantize<T: Real>(v: T) -> u8 {
    let scaled = (v.as_f64() * 255.0 + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

/// Encodes a frame as binary P5 with maxval 255.
pub fn encode_netpbm<T: Real>(frame: &GrayFrame<T>) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(frame.pixels().iter().map(|&v| quantize(v)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(bytes: &[u8]) -> GrayFrame<f64> {
        match parse_netpbm::<f64>(bytes).unwrap() {
            Frame::Gray(g) => g,
            Frame::Rgb(_) => panic!("expected gray"),
        }
    }

    #[test]
    fn parses_binary_gray() {
        let mut b = b"P5 2 2 255\n".to_vec();
        b.extend([0, 255, 0, 255]);
        let g = gray(&b);
        assert_eq!((g.width(), g.height()), (2, 2));
        assert_eq!(g.pixels(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn parses_binary_rgb() {
        let mut b = b"P6 1 1 255\n".to_vec();
        b.extend([255, 0, 0]);
        let f = parse_netpbm::<f64>(&b).unwrap();
        assert_eq!(
            f,
            Frame::Rgb(RgbFrame::new(1, 1, vec![[255, 0, 0]]).unwrap())
        );
    }

    #[test]
    fn parses_ascii_with_comments() {
        let g = gray(b"P2\n# a comment\n3 1 # trailing\n4\n0 2 4\n");
        assert_eq!(g.pixels(), &[0.0, 0.5, 1.0]);
        let f = parse_netpbm::<f64>(b"P3 1 1 255 10 20 30").unwrap();
        assert_eq!(
            f,
            Frame::Rgb(RgbFrame::new(1, 1, vec![[10, 20, 30]]).unwrap())
        );
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            parse_netpbm::<f64>(b"P9 2 2 255\n\0\0\0\0"),
            Err(PixbufError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            parse_netpbm::<f64>(b"P5 1 1 65535\n\0\0"),
            Err(PixbufError::MaxvalTooLarge(65535))
        ));
        assert!(matches!(
            parse_netpbm::<f64>(b"P5 2 2 255\n\0\0\0"),
            Err(PixbufError::TruncatedPayload {
                expected: 4,
                found: 3
            })
        ));
        assert!(matches!(
            parse_netpbm::<f64>(b"P2 2 2 255\n1 2 3"),
            Err(PixbufError::TruncatedPayload {
                expected: 4,
                found: 3
            })
        ));
        assert!(matches!(
            parse_netpbm::<f64>(b"P5 x 2 255\n"),
            Err(PixbufError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_netpbm::<f64>(b"P5 1 1 10\n\x0b"),
            Err(PixbufError::MalformedHeader(_))
        ));
        assert!(parse_netpbm::<f64>(b"").is_err());
    }

    #[test]
    fn encode_quantizes_half_up() {
        let one = GrayFrame::new(1, 1, vec![1.0f64]).unwrap();
        assert_eq!(encode_netpbm(&one), b"P5\n1 1\n255\n\xff".to_vec());
        let zero = GrayFrame::new(1, 1, vec![0.0f64]).unwrap();
        assert_eq!(*encode_netpbm(&zero).last().unwrap(), 0);
        let two = GrayFrame::new(2, 1, vec![0.5f64, 0.25]).unwrap();
        assert_eq!(&encode_netpbm(&two)[11..], &[128, 64]);
    }

    proptest! {
        #[test]
        fn p5_payload_round_trips(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let payload: Vec<u8> = (0..w * h)
                .map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8)
                .collect();
            let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
            bytes.extend(&payload);
            let encoded = encode_netpbm(&gray(&bytes));
            prop_assert_eq!(&encoded, &bytes);
            prop_assert_eq!(gray(&encoded), gray(&bytes));
        }
    }
}

//! Dataset manifests, frame sampling and per-frame preprocessing.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pixbuf::{crop, to_gray, CropRect, Frame, GrayFrame, PixbufError};
use crate::scalar::Real;

pub const DEFAULT_TARGET_FPS: f64 = 10.0;
pub const DEFAULT_SKIP_FRAMES: usize = 30;
pub const DEFAULT_FRAME_PATTERN: &str = "*.p[gp]m";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Crop applied after grayscale conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CropSpec {
    /// Removes the top half of each frame.
    BottomHalf,
    Rect(CropRect),
}

impl CropSpec {
    pub fn resolve(&self, width: usize, height: usize) -> CropRect {
        match *self {
            CropSpec::BottomHalf => CropRect::bottom_half(width, height),
            CropSpec::Rect(r) => r,
        }
    }
}

impl FromStr for CropSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "bottom-half" {
            return Ok(CropSpec::BottomHalf);
        }
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("expected `bottom-half` or `L,T,W,H`, got {s:?}"))?;
        match parts[..] {
            [l, t, w, h] if w > 0 && h > 0 => Ok(CropSpec::Rect(CropRect::new(l, t, w, h))),
            [_, _, _, _] => Err("crop width and height must be positive".into()),
            _ => Err(format!("expected `bottom-half` or `L,T,W,H`, got {s:?}")),
        }
    }
}

impl fmt::Display for CropSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CropSpec::BottomHalf => f.write_str("bottom-half"),
            CropSpec::Rect(r) => write!(f, "{},{},{},{}", r.left, r.top, r.width, r.height),
        }
    }
}

/// How intensities are brought into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizeMode {
    /// Divide 8-bit values by 255.
    #[default]
    Global,
    /// Additionally stretch each frame's own range to `[0, 1]`.
    PerFrame,
}

impl FromStr for NormalizeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(Self::Global),
            "per-frame" => Ok(Self::PerFrame),
            other => Err(format!(
                "unknown normalize mode {other:?} (global | per-frame)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub frames_dir: PathBuf,
    pub frame_pattern: String,
    pub native_fps: f64,
    pub target_fps: f64,
    pub skip_frames: usize,
    pub crop: Option<CropSpec>,
    pub notes: String,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, frames_dir: impl Into<PathBuf>, native_fps: f64) -> Self {
        Self {
            name: name.into(),
            frames_dir: frames_dir.into(),
            frame_pattern: DEFAULT_FRAME_PATTERN.into(),
            native_fps,
            // Sources slower than the default target keep their native rate.
            target_fps: DEFAULT_TARGET_FPS.min(native_fps),
            skip_frames: DEFAULT_SKIP_FRAMES,
            crop: None,
            notes: String::new(),
        }
    }

    /// Frames between consecutive samples: `round(native / target)`, at least 1.
    pub fn stride(&self) -> usize {
        ((self.native_fps / self.target_fps).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let invalid = |key: &str, reason: String| ManifestError::InvalidValue {
            key: key.into(),
            reason,
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty".into()));
        }
        for (key, v) in [
            ("native_fps", self.native_fps),
            ("target_fps", self.target_fps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, format!("{v} is not a positive frame rate")));
            }
        }
        if self.target_fps > self.native_fps {
            return Err(invalid(
                "target_fps",
                format!("{} exceeds native_fps {}", self.target_fps, self.native_fps),
            ));
        }
        glob::Pattern::new(&self.frame_pattern)
            .map_err(|e| invalid("frame_pattern", e.to_string()))?;
        Ok(())
    }

    /// Renders the manifest as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "frames_dir = {}", self.frames_dir.display());
        let _ = writeln!(s, "frame_pattern = {}", self.frame_pattern);
        let _ = writeln!(s, "native_fps = {}", self.native_fps);
        let _ = writeln!(s, "target_fps = {}", self.target_fps);
        let _ = writeln!(s, "skip_frames = {}", self.skip_frames);
        if let Some(c) = &self.crop {
            let _ = writeln!(s, "crop = {c}");
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "notes = {}", self.notes);
        }
        s
    }

    /// Frame files matching `frame_pattern`, in lexicographic order.
    pub fn list_frames(&self) -> Result<Vec<PathBuf>, ManifestError> {
        let pattern =
            glob::Pattern::new(&self.frame_pattern).map_err(|e| ManifestError::InvalidValue {
                key: "frame_pattern".into(),
                reason: e.to_string(),
            })?;
        let io_err = |source| ManifestError::Io {
            path: self.frames_dir.clone(),
            source,
        };
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&self.frames_dir).map_err(io_err)? {
            let entry = entry.map_err(io_err)?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if entry.file_type().map_err(io_err)?.is_file() && pattern.matches(name) {
                files.push(entry.path());
            }
        }
        files.sort();
        Ok(files)
    }
}

const KEYS: [&str; 8] = [
    "name",
    "frames_dir",
    "frame_pattern",
    "native_fps",
    "target_fps",
    "skip_frames",
    "crop",
    "notes",
];

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Parses a `key = value` manifest, applying defaults for optional keys.
pub fn load_manifest(text: &str) -> Result<DatasetManifest, ManifestError> {
    let mut values: Vec<Option<String>> = vec![None; KEYS.len()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ManifestError::Syntax { line: i + 1 })?;
        let key = key.trim();
        let slot =
            KEYS.iter()
                .position(|k| *k == key)
                .ok_or_else(|| ManifestError::UnknownKey {
                    line: i + 1,
                    key: key.to_string(),
                })?;
        if values[slot].is_some() {
            return Err(ManifestError::DuplicateKey {
                line: i + 1,
                key: key.to_string(),
            });
        }
        values[slot] = Some(unquote(value).to_string());
    }
    let take = |k: &'static str| values[KEYS.iter().position(|x| *x == k).unwrap()].clone();
    let required = |k: &'static str| take(k).ok_or(ManifestError::MissingKey(k));
    let number = |k: &str, v: String| -> Result<f64, ManifestError> {
        v.parse::<f64>().map_err(|_| ManifestError::InvalidValue {
            key: k.into(),
            reason: format!("{v:?} is not a number"),
        })
    };

    let native_fps = number("native_fps", required("native_fps")?)?;
    let mut m = DatasetManifest::new(
        required("name")?,
        PathBuf::from(required("frames_dir")?),
        native_fps,
    );
    if let Some(v) = take("target_fps") {
        m.target_fps = number("target_fps", v)?;
    }
    if let Some(v) = take("skip_frames") {
        m.skip_frames = v.parse().map_err(|_| ManifestError::InvalidValue {
            key: "skip_frames".into(),
            reason: format!("{v:?} is not a non-negative integer"),
        })?;
    }
    if let Some(v) = take("frame_pattern") {
        m.frame_pattern = v;
    }
    if let Some(v) = take("crop") {
        m.crop = Some(v.parse().map_err(|reason| ManifestError::InvalidValue {
            key: "crop".into(),
            reason,
        })?);
    }
    m.notes = take("notes").unwrap_or_default();
    m.validate()?;
    Ok(m)
}

/// Reads a manifest file; a relative `frames_dir` is resolved against the
/// manifest's directory.
pub fn load_manifest_file(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut m = load_manifest(&text)?;
    if m.frames_dir.is_relative() {
        if let Some(parent) = path.parent() {
            m.frames_dir = parent.join(&m.frames_dir);
        }
    }
    Ok(m)
}

/// Source indices kept after skipping warm-up frames and striding to the
/// target rate: `skip, skip + stride, ... < total`.
pub fn sample_indices(manifest: &DatasetManifest, total_frames: usize) -> Vec<usize> {
    (manifest.skip_frames..total_frames)
        .step_by(manifest.stride())
        .collect()
}

/// A preprocessed frame with its position in the source sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFrame<T> {
    pub index_in_source: usize,
    /// Seconds, `index_in_source / native_fps`.
    pub timestamp: f64,
    pub frame: GrayFrame<T>,
}

/// Grayscale conversion, optional per-frame stretch, then crop.
pub fn preprocess_frame<T: Real>(
    raw: &Frame<T>,
    crop_spec: Option<CropSpec>,
    mode: NormalizeMode,
) -> Result<GrayFrame<T>, PixbufError> {
    let gray = match raw {
        Frame::Gray(g) => g.clone(),
        Frame::Rgb(c) => to_gray(c),
    };
    let gray = match mode {
        NormalizeMode::Global => gray,
        NormalizeMode::PerFrame => gray.stretch_to_unit(),
    };
    match crop_spec {
        Some(spec) => crop(&gray, spec.resolve(gray.width(), gray.height())),
        None => Ok(gray),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pixbuf::RgbFrame;
    use proptest::prelude::*;

    #[test]
    fn defaults_applied() {
        let m = load_manifest("name = demo\nframes_dir = d/\nnative_fps = 30\n").unwrap();
        assert_eq!(m.target_fps, 10.0);
        assert_eq!(m.skip_frames, 30);
        assert_eq!(m.crop, None);
        assert_eq!(m.stride(), 3);
    }

    #[test]
    fn stride_one_when_rates_match() {
        let m = load_manifest("name=demo\nframes_dir=d\nnative_fps=30\ntarget_fps=30").unwrap();
        assert_eq!(m.stride(), 1);
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(matches!(
            load_manifest("name=demo\nframes_dir=d\nnative_fps=0"),
            Err(ManifestError::InvalidValue { .. })
        ));
        assert!(matches!(
            load_manifest("name=demo\nnative_fps=10"),
            Err(ManifestError::MissingKey("frames_dir"))
        ));
        assert!(matches!(
            load_manifest("name=demo\nframes_dir=d\nnative_fps=10\ncolour=red"),
            Err(ManifestError::UnknownKey { line: 4, .. })
        ));
        assert!(matches!(
            load_manifest("name=demo\nframes_dir=d\nnative_fps=10\ncrop=1,2,3"),
            Err(ManifestError::InvalidValue { .. })
        ));
        assert!(matches!(
            load_manifest("name=demo\nframes_dir=d\nnative_fps=10\ntarget_fps=20"),
            Err(ManifestError::InvalidValue { .. })
        ));
        assert!(matches!(
            load_manifest("name=demo\nframes_dir d"),
            Err(ManifestError::Syntax { line: 2 })
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut m = DatasetManifest::new("forest run", "frames", 15.0);
        m.crop = Some(CropSpec::BottomHalf);
        m.notes = "crop ablation".into();
        assert_eq!(load_manifest(&m.to_text()).unwrap(), m);
        m.crop = Some(CropSpec::Rect(CropRect::new(1, 2, 3, 4)));
        assert_eq!(load_manifest(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn sampling_examples() {
        let m = DatasetManifest::new("a", "d", 30.0);
        let idx = sample_indices(&m, 120);
        assert_eq!(idx.len(), 30);
        assert_eq!(idx[0], 30);
        assert_eq!(*idx.last().unwrap(), 117);
        assert!(idx.windows(2).all(|w| w[1] - w[0] == 3));

        let mut m = DatasetManifest::new("a", "d", 10.0);
        m.skip_frames = 0;
        assert_eq!(sample_indices(&m, 5), vec![0, 1, 2, 3, 4]);

        let mut m = DatasetManifest::new("a", "d", 15.0);
        m.skip_frames = 0;
        assert_eq!(m.stride(), 2);
        assert!(sample_indices(&DatasetManifest::new("a", "d", 30.0), 30).is_empty());
    }

    #[test]
    fn preprocess_cases() {
        let rgb = Frame::<f64>::Rgb(RgbFrame::new(2, 2, vec![[128, 128, 128]; 4]).unwrap());
        let g = preprocess_frame(&rgb, None, NormalizeMode::Global).unwrap();
        assert!(g
            .pixels()
            .iter()
            .all(|&v| (v - 128.0 / 255.0).abs() < 1e-12));

        let gray = GrayFrame::from_fn(4, 3, |x, y| (x + y) as f64 / 10.0);
        let out =
            preprocess_frame(&Frame::Gray(gray.clone()), None, NormalizeMode::Global).unwrap();
        assert_eq!(out, gray);

        let big = Frame::Gray(GrayFrame::from_fn(1920, 1080, |_, y| {
            (y % 256) as f64 / 255.0
        }));
        let out =
            preprocess_frame(&big, Some(CropSpec::BottomHalf), NormalizeMode::Global).unwrap();
        assert_eq!((out.width(), out.height()), (1920, 540));
        assert_eq!(out.get(0, 0), (540 % 256) as f64 / 255.0);

        let dim = GrayFrame::from_fn(4, 1, |x, _| 0.2 + 0.1 * x as f64);
        let out = preprocess_frame(&Frame::Gray(dim), None, NormalizeMode::PerFrame).unwrap();
        assert_eq!(out.min_max(), (0.0, 1.0));
    }

    proptest! {
        #[test]
        fn sampled_indices_follow_the_rule(
            native in 1.0f64..120.0, ratio in 1.0f64..8.0, skip in 0usize..50, total in 0usize..400,
        ) {
            let mut m = DatasetManifest::new("p", "d", native);
            m.target_fps = native / ratio;
            m.skip_frames = skip;
            let idx = sample_indices(&m, total);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&i| i >= skip && i < total));
            let expected = total.saturating_sub(skip).div_ceil(m.stride());
            prop_assert_eq!(idx.len(), expected);
            let mut renamed = m.clone();
            renamed.name = "other".into();
            prop_assert_eq!(sample_indices(&renamed, total), idx);
        }

        #[test]
        fn preprocess_is_idempotent_on_gray(px in proptest::collection::vec(0.0f64..=1.0, 12)) {
            let g = GrayFrame::new(4, 3, px).unwrap();
            let once = preprocess_frame(&Frame::Gray(g), None, NormalizeMode::Global).unwrap();
            let twice = preprocess_frame(&Frame::Gray(once.clone()), None, NormalizeMode::Global).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}

//! Synthetic image sequences with scripted lighting, motion and ground truth.
//!
//! Every frame is derived from a deterministic multi-octave value-noise
//! texture. Scripts add a square-wave illumination flicker, a constant
//! translation, or per-frame re-randomization of 8x8 blocks, followed by
//! Gaussian sensor noise.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pixbuf::{encode_netpbm, GrayFrame};
use crate::reproject::Homography;
use crate::sequence::DatasetManifest;
use crate::stats::luminance;

pub const OCTAVES: usize = 4;
/// Lattice spacing of the coarsest octave; each further octave halves it.
pub const LATTICE_SPACING: f64 = 16.0;
pub const BLOCK_SIZE: usize = 8;
/// Frames per full period of the flicker square wave.
pub const FLICKER_PERIOD: usize = 10;

const PERSISTENCE: f64 = 0.6;
/// Texture intensity range; leaves headroom for flicker gains up to 1.25.
const TEXTURE_LOW: f64 = 0.1;
const TEXTURE_HIGH: f64 = 0.8;
const TEXTURE_GAIN: f64 = 2.2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ground-truth log: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthKind {
    Static,
    Flicker,
    Translate,
    Mixed,
}

impl FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Self::Static),
            "flicker" => Ok(Self::Flicker),
            "translate" => Ok(Self::Translate),
            "mixed" => Ok(Self::Mixed),
            other => Err(format!("unknown script kind {other:?}")),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Static => "static",
            Self::Flicker => "flicker",
            Self::Translate => "translate",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthScript {
    pub kind: SynthKind,
    pub n_frames: usize,
    pub width: usize,
    pub height: usize,
    pub texture_seed: u64,
    /// Flicker gain `a`: frames are scaled by `1 +/- a`.
    pub luminance_amplitude: f64,
    /// Content motion in pixels per frame (`translate` only).
    pub motion_px_per_frame: (f64, f64),
    /// Fraction of 8x8 blocks re-randomized per frame (`mixed` only).
    pub local_motion_fraction: f64,
    pub noise_sigma: f64,
}

impl SynthScript {
    pub fn new(kind: SynthKind) -> Self {
        Self {
            kind,
            n_frames: 100,
            width: 320,
            height: 240,
            texture_seed: 0,
            luminance_amplitude: 0.0,
            motion_px_per_frame: (0.0, 0.0),
            local_motion_fraction: 0.0,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidScript(msg));
        if self.n_frames < 2 {
            return bad(format!(
                "n_frames must be at least 2, got {}",
                self.n_frames
            ));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!(
                "dimensions {}x{} must be positive",
                self.width, self.height
            ));
        }
        let a = self.luminance_amplitude;
        if !(a.is_finite() && (0.0..1.0).contains(&a)) {
            return bad(format!("luminance_amplitude {a} outside [0, 1)"));
        }
        let f = self.local_motion_fraction;
        if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
            return bad(format!("local_motion_fraction {f} outside [0, 1]"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        let (dx, dy) = self.motion_px_per_frame;
        if !(dx.is_finite() && dy.is_finite()) {
            return bad("motion must be finite".into());
        }
        Ok(())
    }

    /// Square wave `s_t` in `{+1, -1}`: +1 for the first half of each period.
    pub fn flicker_sign(t: usize) -> f64 {
        if t % FLICKER_PERIOD < FLICKER_PERIOD / 2 {
            1.0
        } else {
            -1.0
        }
    }

    fn gain(&self, t: usize) -> f64 {
        match self.kind {
            SynthKind::Flicker | SynthKind::Mixed => {
                1.0 + self.luminance_amplitude * Self::flicker_sign(t)
            }
            _ => 1.0,
        }
    }

    fn offset(&self, t: usize) -> (f64, f64) {
        match self.kind {
            SynthKind::Translate => (
                self.motion_px_per_frame.0 * t as f64,
                self.motion_px_per_frame.1 * t as f64,
            ),
            _ => (0.0, 0.0),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic multi-octave value noise over the whole plane.
#[derive(Debug, Clone, Copy)]
pub struct ValueNoise {
    seed: u64,
}

impl ValueNoise {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn lattice(&self, octave: usize, i: i64, j: i64) -> f64 {
        let h = splitmix(
            self.seed
                ^ splitmix(octave as u64 ^ splitmix(i as u64 ^ splitmix(j as u64 ^ 0xA5A5_A5A5))),
        );
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn octave(&self, octave: usize, x: f64, y: f64) -> f64 {
        let spacing = LATTICE_SPACING / (1u32 << octave) as f64;
        let (u, v) = (x / spacing, y / spacing);
        let (i, j) = (u.floor(), v.floor());
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (fx, fy) = (smooth(u - i), smooth(v - j));
        let (i, j) = (i as i64, j as i64);
        let a = self.lattice(octave, i, j);
        let b = self.lattice(octave, i + 1, j);
        let c = self.lattice(octave, i, j + 1);
        let d = self.lattice(octave, i + 1, j + 1);
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        top + (bottom - top) * fy
    }

    /// Texture intensity at a continuous position, in `[TEXTURE_LOW, TEXTURE_HIGH]`.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (mut acc, mut norm, mut amp) = (0.0, 0.0, 1.0);
        for o in 0..OCTAVES {
            acc += amp * self.octave(o, x, y);
            norm += amp;
            amp *= PERSISTENCE;
        }
        let n = acc / norm;
        let mid = 0.5 * (TEXTURE_LOW + TEXTURE_HIGH);
        (mid + TEXTURE_GAIN * (TEXTURE_HIGH - TEXTURE_LOW) * (n - 0.5))
            .clamp(TEXTURE_LOW, TEXTURE_HIGH)
    }

    pub fn render(&self, width: usize, height: usize, offset: (f64, f64)) -> GrayFrame<f64> {
        GrayFrame::from_fn(width, height, |x, y| {
            self.sample(x as f64 - offset.0, y as f64 - offset.1)
        })
    }
}

/// Base texture of a script (frame 0 content before flicker and noise).
pub fn texture(script: &SynthScript) -> GrayFrame<f64> {
    ValueNoise::new(script.texture_seed).render(script.width, script.height, (0.0, 0.0))
}

/// Ground truth for the pair `(pair_index, pair_index + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTruth {
    pub pair_index: usize,
    /// Luminance change of the noise-free frames.
    pub true_d_luminance: f64,
    /// Maps pixel coordinates of the earlier frame onto the later one.
    pub homography: Homography<f64>,
    /// `(block_x, block_y)` of blocks re-randomized in the later frame.
    pub perturbed_blocks: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthLog {
    pub pairs: Vec<PairTruth>,
}

impl GroundTruthLog {
    pub const HEADER: [&'static str; 12] = [
        "pair_index",
        "true_d_luminance",
        "h00",
        "h01",
        "h02",
        "h10",
        "h11",
        "h12",
        "h20",
        "h21",
        "h22",
        "perturbed_blocks",
    ];

    pub fn to_csv(&self) -> Result<Vec<u8>, SynthError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        for p in &self.pairs {
            let mut row = vec![
                p.pair_index.to_string(),
                format!("{:e}", p.true_d_luminance),
            ];
            row.extend(
                p.homography
                    .matrix()
                    .iter()
                    .flatten()
                    .map(|v| format!("{v}")),
            );
            row.push(
                p.perturbed_blocks
                    .iter()
                    .map(|(x, y)| format!("{x}:{y}"))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            w.write_record(&row)?;
        }
        w.into_inner()
            .map_err(|e| SynthError::Csv(e.into_error().into()))
    }
}

/// Output of [`generate`]: exact frames before 8-bit quantization.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub frames: Vec<GrayFrame<f64>>,
    pub truth: GroundTruthLog,
}

/// Renders a script. Pure in the script: equal scripts give equal output.
pub fn generate(script: &SynthScript) -> Result<SynthSequence, SynthError> {
    script.validate()?;
    let noise_field = ValueNoise::new(script.texture_seed);
    let (w, h) = (script.width, script.height);
    let base = texture(script);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(script.texture_seed ^ 0x5EED_F00D));
    let sensor = Normal::new(0.0, script.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| SynthError::InvalidScript(e.to_string()))?;

    let (bw, bh) = (w.div_ceil(BLOCK_SIZE), h.div_ceil(BLOCK_SIZE));
    let mut state = base.pixels().to_vec();
    let mut frames = Vec::with_capacity(script.n_frames);
    let mut truth = GroundTruthLog::default();
    let mut prev_clean_luminance = 0.0;

    for t in 0..script.n_frames {
        let mut perturbed = Vec::new();
        let content: Vec<f64> = match script.kind {
            SynthKind::Translate => noise_field.render(w, h, script.offset(t)).into_pixels(),
            SynthKind::Mixed if t > 0 => {
                let count = (script.local_motion_fraction * (bw * bh) as f64).round() as usize;
                let mut chosen: Vec<usize> =
                    sample(&mut rng, bw * bh, count.min(bw * bh)).into_vec();
                chosen.sort_unstable();
                for b in chosen {
                    let (bx, by) = (b % bw, b / bw);
                    let sx = rng.random_range(0..=w.saturating_sub(BLOCK_SIZE));
                    let sy = rng.random_range(0..=h.saturating_sub(BLOCK_SIZE));
                    for dy in 0..BLOCK_SIZE {
                        for dx in 0..BLOCK_SIZE {
                            let (x, y) = (bx * BLOCK_SIZE + dx, by * BLOCK_SIZE + dy);
                            if x < w && y < h {
                                let src = base.get((sx + dx).min(w - 1), (sy + dy).min(h - 1));
                                state[y * w + x] = src;
                            }
                        }
                    }
                    perturbed.push((bx, by));
                }
                state.clone()
            }
            _ => state.clone(),
        };
        let gain = script.gain(t);
        let clean = GrayFrame::from_fn(w, h, |x, y| content[y * w + x] * gain);
        let clean_luminance = luminance(&clean);
        let frame = if script.noise_sigma > 0.0 {
            clean.map(|v| v + sensor.sample(&mut rng))
        } else {
            clean
        };
        frames.push(frame);

        if t > 0 {
            let (dx, dy) = script.motion_px_per_frame;
            let homography = match script.kind {
                SynthKind::Translate => Homography::translation(dx, dy),
                _ => Homography::identity(),
            };
            truth.pairs.push(PairTruth {
                pair_index: t - 1,
                true_d_luminance: (clean_luminance - prev_clean_luminance).abs(),
                homography,
                perturbed_blocks: perturbed,
            });
        }
        prev_clean_luminance = clean_luminance;
    }
    Ok(SynthSequence { frames, truth })
}

/// Named corpora used for comparing scene types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Flicker plus local block motion, like light through moving foliage.
    Forestlike,
    /// Static scene with slow camera drift.
    Officelike,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forestlike" => Ok(Self::Forestlike),
            "officelike" => Ok(Self::Officelike),
            other => Err(format!(
                "unknown preset {other:?} (forestlike | officelike)"
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forestlike => "forestlike",
            Self::Officelike => "officelike",
        })
    }
}

impl Preset {
    pub fn script(self, seed: u64) -> SynthScript {
        match self {
            Preset::Forestlike => SynthScript {
                texture_seed: seed,
                luminance_amplitude: 0.2,
                local_motion_fraction: 0.15,
                noise_sigma: 0.01,
                ..SynthScript::new(SynthKind::Mixed)
            },
            Preset::Officelike => SynthScript {
                texture_seed: seed,
                motion_px_per_frame: (0.2, 0.0),
                noise_sigma: 0.01,
                ..SynthScript::new(SynthKind::Translate)
            },
        }
    }
}

pub const FRAME_PATTERN: &str = "frame_*.pgm";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.pgm")
}

/// Manifest for a generated directory: every frame kept, no warm-up skip.
pub fn corpus_manifest(name: &str, native_fps: f64) -> DatasetManifest {
    let mut m = DatasetManifest::new(name, ".", native_fps);
    m.frame_pattern = FRAME_PATTERN.into();
    m.target_fps = native_fps;
    m.skip_frames = 0;
    m.notes = "synthetic".into();
    m
}

/// Files written by [`write_sequence`].
#[derive(Debug, Clone)]
pub struct WrittenCorpus {
    pub manifest_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub frame_paths: Vec<PathBuf>,
}

/// Writes P5 frames, the manifest (`<name>.manifest`) and the ground-truth log.
pub fn write_sequence(
    dir: &Path,
    seq: &SynthSequence,
    manifest: &DatasetManifest,
) -> Result<WrittenCorpus, SynthError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut frame_paths = Vec::with_capacity(seq.frames.len());
    for (t, frame) in seq.frames.iter().enumerate() {
        let path = dir.join(frame_file_name(t));
        std::fs::write(&path, encode_netpbm(frame)).map_err(io(&path))?;
        frame_paths.push(path);
    }
    let manifest_path = dir.join(format!("{}.manifest", manifest.name));
    std::fs::write(&manifest_path, manifest.to_text()).map_err(io(&manifest_path))?;
    let ground_truth_path = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&ground_truth_path, seq.truth.to_csv()?).map_err(io(&ground_truth_path))?;
    Ok(WrittenCorpus {
        manifest_path,
        ground_truth_path,
        frame_paths,
    })
}

/// Generates a preset corpus (100 frames, 320x240, 10 fps) into `dir`.
pub fn corpus(preset: Preset, seed: u64, dir: &Path) -> Result<WrittenCorpus, SynthError> {
    let seq = generate(&preset.script(seed))?;
    write_sequence(dir, &seq, &corpus_manifest(&preset.to_string(), 10.0))
}

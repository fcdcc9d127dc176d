//! Versioned comparison pattern for the binary descriptor.
//!
//! The table is plain text: `#` comment lines, one of which must read
//! `# version <n>`, followed by exactly 256 rows of four integers
//! `x1 y1 x2 y2`, each in `[-13, 13]`.

use std::sync::OnceLock;

use thiserror::Error;

pub const DESCRIPTOR_BITS: usize = 256;
pub const PATTERN_EXTENT: i32 = 13;

const BUILTIN: &str = include_str!("../../data/brief_pattern_v1.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("expected {DESCRIPTOR_BITS} rows, found {0}")]
    RowCount(usize),
    #[error("missing `# version` line")]
    MissingVersion,
}

/// One intensity comparison: bit is set when `I(a) < I(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointPair {
    pub a: (i32, i32),
    pub b: (i32, i32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptorPattern {
    version: u32,
    pairs: Vec<PointPair>,
}

impl DescriptorPattern {
    pub fn parse(text: &str) -> Result<Self, PatternError> {
        let mut version = None;
        let mut pairs = Vec::with_capacity(DESCRIPTOR_BITS);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version") {
                    version = Some(v.trim().parse().map_err(|_| PatternError::Parse {
                        line: lineno,
                        msg: format!("bad version {:?}", v.trim()),
                    })?);
                }
                continue;
            }
            let nums: Vec<i32> = line
                .split_whitespace()
                .map(|t| t.parse::<i32>())
                .collect::<Result<_, _>>()
                .map_err(|e| PatternError::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
            if nums.len() != 4 {
                return Err(PatternError::Parse {
                    line: lineno,
                    msg: format!("expected 4 offsets, found {}", nums.len()),
                });
            }
            if let Some(v) = nums.iter().find(|v| v.abs() > PATTERN_EXTENT) {
                return Err(PatternError::Parse {
                    line: lineno,
                    msg: format!("offset {v} outside [-{PATTERN_EXTENT}, {PATTERN_EXTENT}]"),
                });
            }
            pairs.push(PointPair {
                a: (nums[0], nums[1]),
                b: (nums[2], nums[3]),
            });
        }
        if pairs.len() != DESCRIPTOR_BITS {
            return Err(PatternError::RowCount(pairs.len()));
        }
        Ok(Self {
            version: version.ok_or(PatternError::MissingVersion)?,
            pairs,
        })
    }

    /// The pattern shipped with the crate.
    pub fn builtin() -> &'static DescriptorPattern {
        static PATTERN: OnceLock<DescriptorPattern> = OnceLock::new();
        PATTERN.get_or_init(|| Self::parse(BUILTIN).expect("shipped pattern table is valid"))
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn pairs(&self) -> &[PointPair] {
        &self.pairs
    }
}

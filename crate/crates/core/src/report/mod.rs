//! Sequence analysis, distribution summaries and CSV/JSON/SVG export.

mod analyze;
mod export;
mod summary;
mod svg;

pub use analyze::{
    analyze_frames, analyze_sequence, pair_seed, AnalysisError, RunConfig, SequenceAnalysis,
};
pub use export::{format_value, read_csv, records_to_csv, write_csv, CsvError, CSV_COLUMNS};
pub use summary::{
    summarize, summarize_records, DistributionSummary, ReportMetadata, Statistic, StatisticSummary,
    SummaryError, SummaryReport,
};
pub use svg::render_svg;

use serde::{Deserialize, Serialize};

use crate::stats::{FrameStats, PairStats};

/// One adjacent-pair row: statistics of the current frame and of its change
/// from the previous sampled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub dataset: String,
    pub pair_index: usize,
    pub frame: FrameStats,
    pub pair: PairStats,
}

use std::io::{Read, Write};

use thiserror::Error;

use super::AnalysisRecord;
use crate::stats::{FrameStats, PairStats};

pub const CSV_COLUMNS: [&str; 10] = [
    "dataset",
    "pair_index",
    "luminance",
    "rms_contrast",
    "laplacian_variance",
    "d_luminance",
    "d_contrast",
    "kl_divergence",
    "match_count",
    "reproj_mse",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("unexpected header: {0:?}")]
    Header(Vec<String>),
    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    Field {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rounds to 9 significant digits, then prints the shortest string that
/// parses back to the rounded value.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[AnalysisRecord], out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.pair_index.to_string(),
            format_value(r.frame.luminance),
            opt(r.frame.rms_contrast),
            format_value(r.frame.laplacian_variance),
            format_value(r.pair.d_luminance),
            opt(r.pair.d_contrast),
            format_value(r.pair.kl_divergence),
            r.pair.match_count.to_string(),
            opt(r.pair.reproj_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv(records: &[AnalysisRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory succeeds");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<AnalysisRecord>, CsvError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(CsvError::Header(header));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let bad = |i: usize| CsvError::Field {
            line,
            column: CSV_COLUMNS[i],
            value: field(i).to_string(),
        };
        let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let count = |i: usize| field(i).parse::<usize>().map_err(|_| bad(i));
        let maybe = |i: usize| {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        records.push(AnalysisRecord {
            dataset: field(0).to_string(),
            pair_index: count(1)?,
            frame: FrameStats {
                luminance: num(2)?,
                rms_contrast: maybe(3)?,
                laplacian_variance: num(4)?,
            },
            pair: PairStats {
                d_luminance: num(5)?,
                d_contrast: maybe(6)?,
                kl_divergence: num(7)?,
                match_count: count(8)?,
                reproj_mse: maybe(9)?,
            },
        });
    }
    Ok(records)
}

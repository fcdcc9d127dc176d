use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AnalysisRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SummaryError {
    #[error("no values present")]
    AllMissing,
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
}

/// The per-pair statistics that get summarized and plotted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Statistic {
    DLuminance,
    DContrast,
    KlDivergence,
    LaplacianVariance,
    MatchCount,
    ReprojMse,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::DLuminance,
        Statistic::DContrast,
        Statistic::KlDivergence,
        Statistic::LaplacianVariance,
        Statistic::MatchCount,
        Statistic::ReprojMse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::DLuminance => "d_luminance",
            Statistic::DContrast => "d_contrast",
            Statistic::KlDivergence => "kl_divergence",
            Statistic::LaplacianVariance => "laplacian_variance",
            Statistic::MatchCount => "match_count",
            Statistic::ReprojMse => "reproj_mse",
        }
    }

    pub fn value(self, record: &AnalysisRecord) -> Option<f64> {
        match self {
            Statistic::DLuminance => Some(record.pair.d_luminance),
            Statistic::DContrast => record.pair.d_contrast,
            Statistic::KlDivergence => Some(record.pair.kl_divergence),
            Statistic::LaplacianVariance => Some(record.frame.laplacian_variance),
            Statistic::MatchCount => Some(record.pair.match_count as f64),
            Statistic::ReprojMse => record.pair.reproj_mse,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = SummaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| SummaryError::UnknownStatistic(s.to_string()))
    }
}

/// Five-number summary with Tukey whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub n_missing: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quartiles by linear interpolation at `p * (n - 1)`; whiskers reach the
/// most extreme values inside `1.5 * IQR` of the box, never retreating
/// inside the box itself.
pub fn summarize(values: &[Option<f64>]) -> Result<DistributionSummary, SummaryError> {
    let mut present: Vec<f64> = values
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    if present.is_empty() {
        return Err(SummaryError::AllMissing);
    }
    present.sort_by(f64::total_cmp);
    let q1 = quantile(&present, 0.25);
    let q3 = quantile(&present, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let lower_whisker = present
        .iter()
        .copied()
        .find(|&v| v >= lo_fence)
        .map_or(q1, |v| v.min(q1));
    let upper_whisker = present
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= hi_fence)
        .map_or(q3, |v| v.max(q3));
    Ok(DistributionSummary {
        n: present.len(),
        n_missing: values.len() - present.len(),
        min: present[0],
        q1,
        median: quantile(&present, 0.5),
        q3,
        max: present[present.len() - 1],
        lower_whisker,
        upper_whisker,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StatisticSummary {
    Ok(DistributionSummary),
    AllMissing { n_missing: usize },
}

impl StatisticSummary {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        match summarize(values) {
            Ok(s) => StatisticSummary::Ok(s),
            Err(_) => StatisticSummary::AllMissing {
                n_missing: values.len(),
            },
        }
    }

    pub fn summary(&self) -> Option<&DistributionSummary> {
        match self {
            StatisticSummary::Ok(s) => Some(s),
            StatisticSummary::AllMissing { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub quantile_method: String,
    pub whisker_rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_ablation: Option<String>,
    #[serde(default)]
    pub sources: Vec<String>,
}

/// Summaries keyed by dataset, then by statistic name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub metadata: ReportMetadata,
    pub datasets: BTreeMap<String, BTreeMap<String, StatisticSummary>>,
}

impl SummaryReport {
    pub fn get(&self, dataset: &str, statistic: Statistic) -> Option<&StatisticSummary> {
        self.datasets.get(dataset)?.get(statistic.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Groups records by dataset and summarizes every statistic.
pub fn summarize_records(records: &[AnalysisRecord], metadata: ReportMetadata) -> SummaryReport {
    let mut grouped: BTreeMap<&str, Vec<&AnalysisRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(&r.dataset).or_default().push(r);
    }
    let datasets = grouped
        .into_iter()
        .map(|(name, rows)| {
            let per_stat = Statistic::ALL
                .into_iter()
                .map(|st| {
                    let values: Vec<Option<f64>> = rows.iter().map(|r| st.value(r)).collect();
                    (
                        st.name().to_string(),
                        StatisticSummary::from_values(&values),
                    )
                })
                .collect();
            (name.to_string(), per_stat)
        })
        .collect();
    SummaryReport { metadata, datasets }
}

impl ReportMetadata {
    pub fn new(crop_ablation: Option<String>, sources: Vec<String>) -> Self {
        Self {
            quantile_method: "linear interpolation at p*(n-1)".into(),
            whisker_rule: "Tukey 1.5*IQR, clipped to data".into(),
            crop_ablation,
            sources,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{FrameStats, PairStats};
    use proptest::prelude::*;

    #[test]
    fn quartiles_of_five() {
        let v: Vec<Option<f64>> = [1.0, 2.0, 3.0, 4.0, 100.0]
            .iter()
            .map(|&x| Some(x))
            .collect();
        let s = summarize(&v).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!(s.lower_whisker, 1.0);
        assert_eq!(s.upper_whisker, 4.0);
        assert_eq!(s.max, 100.0);
    }

    #[test]
    fn interpolates_between_ranks() {
        let s = summarize(&[Some(0.0), Some(1.0), None, Some(2.0), Some(3.0)]).unwrap();
        assert_eq!(s.q1, 0.75);
        assert_eq!(s.median, 1.5);
        assert_eq!(s.q3, 2.25);
        assert_eq!(s.n, 4);
        assert_eq!(s.n_missing, 1);
    }

    #[test]
    fn all_missing() {
        assert_eq!(summarize(&[None, None]), Err(SummaryError::AllMissing));
        assert_eq!(summarize(&[]), Err(SummaryError::AllMissing));
    }

    #[test]
    fn statistic_names_round_trip() {
        for st in Statistic::ALL {
            assert_eq!(st.name().parse::<Statistic>().unwrap(), st);
        }
        assert!("nope".parse::<Statistic>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let rec = |d: &str, i, mse| AnalysisRecord {
            dataset: d.into(),
            pair_index: i,
            frame: FrameStats {
                luminance: 0.4,
                rms_contrast: Some(0.2),
                laplacian_variance: 1e-3,
            },
            pair: PairStats {
                d_luminance: 0.01 * i as f64,
                d_contrast: None,
                kl_divergence: 0.1,
                match_count: 50 + i,
                reproj_mse: mse,
            },
        };
        let records = vec![
            rec("b", 0, Some(0.5)),
            rec("a", 0, None),
            rec("a", 1, None),
            rec("b", 1, Some(0.25)),
        ];
        let report = summarize_records(
            &records,
            ReportMetadata::new(Some("bottom half".into()), vec!["x.csv".into()]),
        );
        assert_eq!(report.datasets.keys().collect::<Vec<_>>(), ["a", "b"]);
        assert!(matches!(
            report.get("a", Statistic::ReprojMse),
            Some(StatisticSummary::AllMissing { n_missing: 2 })
        ));
        let back = SummaryReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    proptest! {
        #[test]
        fn summary_is_ordered(v in prop::collection::vec(prop::option::of(-1e6f64..1e6), 1..60)) {
            match summarize(&v) {
                Ok(s) => {
                    prop_assert!(s.min <= s.lower_whisker);
                    prop_assert!(s.lower_whisker <= s.q1 + 1e-9);
                    prop_assert!(s.q1 <= s.median && s.median <= s.q3);
                    prop_assert!(s.q3 <= s.upper_whisker + 1e-9);
                    prop_assert!(s.upper_whisker <= s.max);
                    prop_assert_eq!(s.n + s.n_missing, v.len());
                }
                Err(_) => prop_assert!(v.iter().all(Option::is_none)),
            }
        }
    }
}

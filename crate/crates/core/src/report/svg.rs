use std::fmt::Write;

use super::summary::{Statistic, SummaryReport};

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 280.0;
const COLUMNS: usize = 3;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 44.0;
const PALETTE: [&str; 6] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Grouped box plots, one panel per statistic and one box per dataset.
pub fn render_svg(report: &SummaryReport) -> String {
    let rows = Statistic::ALL.len().div_ceil(COLUMNS);
    let width = PANEL_W * COLUMNS as f64;
    let height = PANEL_H * rows as f64;
    let names: Vec<&String> = report.datasets.keys().collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (p, stat) in Statistic::ALL.into_iter().enumerate() {
        let ox = PANEL_W * (p % COLUMNS) as f64;
        let oy = PANEL_H * (p / COLUMNS) as f64;
        let (x0, x1) = (ox + MARGIN_L, ox + PANEL_W - MARGIN_R);
        let (y0, y1) = (oy + MARGIN_T, oy + PANEL_H - MARGIN_B);
        let _ = writeln!(s, r#"<g class="panel" data-statistic="{stat}">"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{stat}</text>"#,
            (x0 + x1) / 2.0,
            oy + 20.0
        );
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888"/>"##,
            x1 - x0,
            y1 - y0
        );

        let summaries: Vec<_> = names
            .iter()
            .map(|n| {
                report.datasets[*n]
                    .get(stat.name())
                    .and_then(|x| x.summary())
            })
            .collect();
        let lo = summaries
            .iter()
            .flatten()
            .map(|d| d.min)
            .fold(f64::INFINITY, f64::min);
        let hi = summaries
            .iter()
            .flatten()
            .map(|d| d.max)
            .fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let pad = (lo.abs() * 0.1).max(1e-12);
            (lo - pad, hi + pad)
        } else {
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        };
        let y = |v: f64| y1 - (v - lo) / (hi - lo) * (y1 - y0);

        for v in [lo, (lo + hi) / 2.0, hi] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                y(v) + 4.0,
                tick(v)
            );
        }

        let slot = (x1 - x0) / names.len().max(1) as f64;
        let half = (slot * 0.3).min(30.0);
        for (i, (name, summary)) in names.iter().zip(&summaries).enumerate() {
            let cx = x0 + slot * (i as f64 + 0.5);
            let color = PALETTE[i % PALETTE.len()];
            let name = escape(name);
            let _ = writeln!(
                s,
                r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{name}</text>"#,
                y1 + 16.0
            );
            let Some(d) = summary else {
                let _ = writeln!(
                    s,
                    r##"<text class="missing" data-dataset="{name}" x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="#888">n/a</text>"##,
                    (y0 + y1) / 2.0
                );
                continue;
            };
            let _ = writeln!(s, r#"<g class="box" data-dataset="{name}">"#);
            for (a, b) in [(d.lower_whisker, d.q1), (d.q3, d.upper_whisker)] {
                let _ = writeln!(
                    s,
                    r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                    y(a),
                    y(b)
                );
            }
            for w in [d.lower_whisker, d.upper_whisker] {
                let _ = writeln!(
                    s,
                    r#"<line class="cap" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                    cx - half / 2.0,
                    y(w),
                    cx + half / 2.0,
                    y(w)
                );
            }
            let _ = writeln!(
                s,
                r#"<rect class="iqr" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6" stroke="black"/>"#,
                cx - half,
                y(d.q3),
                2.0 * half,
                (y(d.q1) - y(d.q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r#"<line class="median" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
                cx - half,
                y(d.median),
                cx + half,
                y(d.median)
            );
            for v in [d.min, d.max] {
                if v < d.lower_whisker || v > d.upper_whisker {
                    let _ = writeln!(
                        s,
                        r#"<circle class="extreme" cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="black"/>"#,
                        y(v)
                    );
                }
            }
            let _ = writeln!(s, "</g>");
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::summarize;
    use crate::report::summary::{ReportMetadata, StatisticSummary};
    use std::collections::BTreeMap;

    fn report() -> SummaryReport {
        let mut datasets = BTreeMap::new();
        for (name, base) in [("a<1>", 1.0), ("b", 5.0)] {
            let vals: Vec<Option<f64>> = (0..9).map(|i| Some(base + i as f64 * 0.1)).collect();
            let per: BTreeMap<String, StatisticSummary> = Statistic::ALL
                .into_iter()
                .map(|st| {
                    (
                        st.name().to_string(),
                        StatisticSummary::Ok(summarize(&vals).unwrap()),
                    )
                })
                .collect();
            datasets.insert(name.to_string(), per);
        }
        datasets.get_mut("b").unwrap().insert(
            "reproj_mse".into(),
            StatisticSummary::AllMissing { n_missing: 9 },
        );
        SummaryReport {
            metadata: ReportMetadata::default(),
            datasets,
        }
    }

    #[test]
    fn renders_all_panels() {
        let svg = render_svg(&report());
        assert!(svg.contains(r#"version="1.1""#));
        assert!(svg.contains(r#"width="960""#));
        assert_eq!(svg.matches(r#"<g class="panel""#).count(), 6);
        assert_eq!(svg.matches(r#"class="median""#).count(), 11);
        assert!(svg.contains("a&lt;1&gt;"));
        assert!(svg.contains(r#"class="missing""#));
        assert_eq!(svg, render_svg(&report()));
    }
}

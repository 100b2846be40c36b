//! Per-configuration summaries, box statistics, paired comparisons and an
//! optional SVG boxplot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::experiment::{Configuration, RunRecord};
use crate::stats::{mean, paired_test, quantile, sorted, std_dev, PairedTestResult};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Self {
        let v = sorted(values);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
        Self {
            q1,
            median,
            q3,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: v.into_iter().filter(|x| !(lo..=hi).contains(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSummary {
    pub configuration: Configuration,
    pub n: usize,
    pub n_excluded: usize,
    pub mean: f64,
    pub sd: f64,
    pub boxplot: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    pub baseline: Configuration,
    pub treatment: Configuration,
    pub result: PairedTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// Ascending by mean C-index.
    pub summaries: Vec<ConfigSummary>,
    pub comparisons: Vec<PairedComparison>,
    pub n_excluded: usize,
}

/// Reference line drawn in the boxplot.
pub const CHANCE_LEVEL: f64 = 0.5;

pub fn report(records: &[RunRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let mut by_config: BTreeMap<Configuration, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_config.entry(r.configuration).or_default().push(r);
    }
    let mut summaries: Vec<ConfigSummary> = by_config
        .iter()
        .filter_map(|(&configuration, recs)| {
            let values: Vec<f64> = recs.iter().filter_map(|r| r.c_index).collect();
            (!values.is_empty()).then(|| ConfigSummary {
                configuration,
                n: values.len(),
                n_excluded: recs.len() - values.len(),
                mean: mean(&values),
                sd: std_dev(&values),
                boxplot: BoxStats::from_values(&values),
            })
        })
        .collect();
    summaries.sort_by(|a, b| a.mean.total_cmp(&b.mean).then(a.configuration.cmp(&b.configuration)));

    let k_max = by_config
        .keys()
        .filter_map(|c| match c {
            Configuration::Fed(k) => Some(*k),
            _ => None,
        })
        .max();
    let mut comparisons = Vec::new();
    let mut pairs = Vec::new();
    if let Some(k) = k_max {
        pairs.push((Configuration::Local, Configuration::Fed(k)));
        pairs.push((Configuration::Fed(k), Configuration::CentralizedSrf));
    }
    pairs.push((Configuration::Local, Configuration::CentralizedSrf));
    for (baseline, treatment) in pairs {
        if let Some(result) = compare(records, baseline, treatment)? {
            comparisons.push(PairedComparison {
                baseline,
                treatment,
                result,
            });
        }
    }
    Ok(Report {
        summaries,
        comparisons,
        n_excluded: records.iter().filter(|r| r.excluded()).count(),
    })
}

/// Paired deltas (treatment minus baseline) over evaluations present and
/// included in both configurations.
pub fn paired_deltas(records: &[RunRecord], baseline: Configuration, treatment: Configuration) -> Vec<f64> {
    let index = |cfg: Configuration| -> BTreeMap<(usize, usize, usize), f64> {
        records
            .iter()
            .filter(|r| r.configuration == cfg)
            .filter_map(|r| r.c_index.map(|c| ((r.site_split, r.fold, r.client), c)))
            .collect()
    };
    let base = index(baseline);
    index(treatment)
        .into_iter()
        .filter_map(|(k, t)| base.get(&k).map(|b| t - b))
        .collect()
}

pub fn compare(records: &[RunRecord], baseline: Configuration, treatment: Configuration) -> Result<Option<PairedTestResult>> {
    let deltas = paired_deltas(records, baseline, treatment);
    if deltas.len() < 2 {
        return Ok(None);
    }
    paired_test(&deltas).map(Some)
}

impl Report {
    pub fn summary(&self, cfg: Configuration) -> Option<&ConfigSummary> {
        self.summaries.iter().find(|s| s.configuration == cfg)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "configuration",
            "n",
            "n_excluded",
            "mean",
            "sd",
            "q1",
            "median",
            "q3",
            "whisker_low",
            "whisker_high",
            "n_outliers",
        ])?;
        for s in &self.summaries {
            let b = &s.boxplot;
            w.write_record([
                s.configuration.to_string(),
                s.n.to_string(),
                s.n_excluded.to_string(),
                s.mean.to_string(),
                s.sd.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.whisker_low.to_string(),
                b.whisker_high.to_string(),
                b.outliers.len().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_paired_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "baseline",
            "treatment",
            "n",
            "mean_delta",
            "median_delta",
            "wilcoxon_p",
            "paired_t_p",
        ])?;
        for c in &self.comparisons {
            let r = &c.result;
            w.write_record([
                c.baseline.to_string(),
                c.treatment.to_string(),
                r.n.to_string(),
                r.mean_delta.to_string(),
                r.median_delta.to_string(),
                r.wilcoxon_p.to_string(),
                r.paired_t_p.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}\n", crate::manifest::FED_EVALUATION);
        let _ = writeln!(s, "{:<18} {:>5} {:>8} {:>14}", "configuration", "n", "excluded", "C-index");
        for c in &self.summaries {
            let _ = writeln!(
                s,
                "{:<18} {:>5} {:>8} {:>6.3} ± {:.3}",
                c.configuration.to_string(),
                c.n,
                c.n_excluded,
                c.mean,
                c.sd
            );
        }
        let _ = writeln!(s);
        for c in &self.comparisons {
            let r = &c.result;
            let _ = writeln!(
                s,
                "{} -> {}: mean Δ {:+.4}, median Δ {:+.4}, Wilcoxon p = {:.3e}, paired t p = {:.3e} (n = {})",
                c.baseline, c.treatment, r.mean_delta, r.median_delta, r.wilcoxon_p, r.paired_t_p, r.n
            );
        }
        if self.n_excluded > 0 {
            let _ = writeln!(s, "\n{} evaluations excluded (no comparable pairs)", self.n_excluded);
        }
        s
    }

    /// Boxplot in ascending-mean order with mean ± sd labels and a dotted
    /// line at chance level.
    pub fn to_svg(&self) -> String {
        let (w, h) = (90.0 * self.summaries.len() as f64 + 80.0, 420.0);
        let (top, bottom, left) = (40.0, 340.0, 60.0);
        let (lo, hi) = self
            .summaries
            .iter()
            .flat_map(|s| {
                let b = &s.boxplot;
                std::iter::once(b.whisker_low)
                    .chain(std::iter::once(b.whisker_high))
                    .chain(b.outliers.iter().copied())
            })
            .chain([CHANCE_LEVEL])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = ((lo - 0.05).max(0.0), (hi + 0.05).min(1.0));
        let y = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let mut tick = (lo * 10.0).ceil() / 10.0;
        while tick <= hi + 1e-9 {
            let _ = writeln!(
                s,
                r#"<line x1="{left}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="gainsboro"/><text x="{}" y="{:.1}" text-anchor="end">{tick:.1}</text>"#,
                w - 10.0,
                left - 6.0,
                y(tick) + 4.0,
                y = y(tick)
            );
            tick += 0.1;
        }
        let _ = writeln!(
            s,
            r#"<line x1="{left}" x2="{}" y1="{c:.1}" y2="{c:.1}" stroke="black" stroke-dasharray="2,3"/>"#,
            w - 10.0,
            c = y(CHANCE_LEVEL)
        );
        for (i, sm) in self.summaries.iter().enumerate() {
            let b = &sm.boxplot;
            let cx = left + 45.0 + 90.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{cx}" x2="{cx}" y1="{:.1}" y2="{:.1}" stroke="black"/>"#,
                y(b.whisker_low),
                y(b.whisker_high)
            );
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{:.1}" width="40" height="{:.1}" fill="lightsteelblue" stroke="black"/>"#,
                cx - 20.0,
                y(b.q3),
                y(b.q1) - y(b.q3)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{}" x2="{}" y1="{m:.1}" y2="{m:.1}" stroke="black" stroke-width="2"/>"#,
                cx - 20.0,
                cx + 20.0,
                m = y(b.median)
            );
            for o in &b.outliers {
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{:.1}" r="2" fill="none" stroke="black"/>"#, y(*o));
            }
            let _ = writeln!(
                s,
                r#"<text x="{cx}" y="{:.1}" text-anchor="middle">{:.3}±{:.3}</text>"#,
                top - 8.0 - 12.0 * (i % 2) as f64 + 12.0,
                sm.mean,
                sm.sd
            );
            let _ = writeln!(
                s,
                r#"<text x="{cx}" y="{}" text-anchor="end" transform="rotate(-35 {cx} {})">{}</text>"#,
                bottom + 16.0,
                bottom + 16.0,
                sm.configuration
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">C-index</text>"#,
            (top + bottom) / 2.0,
            (top + bottom) / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

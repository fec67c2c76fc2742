use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ap::{coco_thresholds, map_range};
use super::matching::{precision_recall_f1, ImageDetections};
use crate::error::{Error, Result};

/// Evaluation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub conf_thresh: f64,
    pub iou_thresh: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            conf_thresh: 0.25,
            iou_thresh: 0.5,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.conf_thresh) {
            return Err(Error::param("conf_thresh", "must lie in [0, 1]"));
        }
        if !(self.iou_thresh > 0.0 && self.iou_thresh <= 1.0) {
            return Err(Error::param("iou_thresh", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One run's metrics, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map50: f64,
    pub map5095: f64,
}

impl PointMetrics {
    pub const NAMES: [&'static str; 5] = ["precision", "recall", "f1", "map50", "map5095"];

    pub fn values(&self) -> [f64; 5] {
        [self.precision, self.recall, self.f1, self.map50, self.map5095]
    }
}

/// Scores a test set: P/R/F1 at the configured thresholds, AP at 0.5 and
/// averaged over 0.50:0.05:0.95.
pub fn evaluate(images: &[ImageDetections], cfg: &EvalConfig) -> Result<PointMetrics> {
    cfg.validate()?;
    let prf = precision_recall_f1(images, cfg.conf_thresh, cfg.iou_thresh);
    let (map50, map5095) = map_range(images, &coco_thresholds())?;
    Ok(PointMetrics {
        precision: 100.0 * prf.precision,
        recall: 100.0 * prf.recall,
        f1: 100.0 * prf.f1,
        map50: 100.0 * map50,
        map5095: 100.0 * map5095,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MetricStat {
    /// Sample mean and (n − 1) standard deviation; std 0 for one value.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("run list"));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(Self { mean, std, n })
    }

    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std: 0.0,
            n: 1,
        }
    }
}

/// Mean ± std per metric across runs. JSON form is
/// `{"precision": {"mean", "std", "n"}, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: MetricStat,
    pub recall: MetricStat,
    pub f1: MetricStat,
    pub map50: MetricStat,
    pub map5095: MetricStat,
    /// What the runs vary over (seeds, folds, ...), when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl MetricsReport {
    pub fn stats(&self) -> [MetricStat; 5] {
        [self.precision, self.recall, self.f1, self.map50, self.map5095]
    }

    pub fn from_stats(stats: [MetricStat; 5]) -> Self {
        let [precision, recall, f1, map50, map5095] = stats;
        Self {
            precision,
            recall,
            f1,
            map50,
            map5095,
            aggregation_axis: None,
            config_hash: None,
        }
    }

    /// Every mean in [0, 100] and every std finite and ≥ 0.
    pub fn validate(&self) -> Result<()> {
        for (name, s) in PointMetrics::NAMES.iter().zip(self.stats()) {
            if !(0.0..=100.0).contains(&s.mean) || !(s.std >= 0.0 && s.std.is_finite()) || s.n == 0 {
                return Err(Error::Validation(format!("{name}: {s:?} is not a valid percentage statistic")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))?;
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::format(path, m),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// F1 recomputed from the stored precision and recall means.
    pub fn f1_from_means(&self) -> f64 {
        super::f1_score(self.precision.mean, self.recall.mean)
    }
}

/// Aggregates per-run metrics. The F1 entry is the mean of per-run F1
/// values, not the F1 of the mean precision and recall.
pub fn aggregate_runs(runs: &[PointMetrics]) -> Result<MetricsReport> {
    let column = |k: usize| -> Result<MetricStat> { MetricStat::of(&runs.iter().map(|r| r.values()[k]).collect::<Vec<_>>()) };
    Ok(MetricsReport::from_stats([column(0)?, column(1)?, column(2)?, column(3)?, column(4)?]))
}

const LABELS: [&str; 5] = [
    "Precision (%)",
    "Recall (%)",
    "F1-score (%)",
    "mAP@0.5 (%)",
    "mAP@0.5:0.95 (%)",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub metric: &'static str,
    pub raw: MetricStat,
    pub translated: MetricStat,
    /// `translated − raw` of the means.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportComparison {
    pub rows: Vec<DeltaRow>,
}

impl ReportComparison {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    /// Two-column table, one metric per row, with the signed change.
    pub fn render(&self) -> String {
        let cell = |s: &MetricStat| format!("{:.2} ± {:.2}", s.mean, s.std);
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>18} {:>18} {:>8}", "Metric", "Raw Frames", "Translated Frames", "Delta");
        for (row, label) in self.rows.iter().zip(LABELS) {
            let _ = writeln!(
                out,
                "{:<18} {:>18} {:>18} {:>+8.2}",
                label,
                cell(&row.raw),
                cell(&row.translated),
                row.delta
            );
        }
        out
    }
}

pub fn compare_reports(raw: &MetricsReport, translated: &MetricsReport) -> ReportComparison {
    let rows = PointMetrics::NAMES
        .iter()
        .zip(raw.stats().into_iter().zip(translated.stats()))
        .map(|(&metric, (r, t))| DeltaRow {
            metric,
            raw: r,
            translated: t,
            delta: t.mean - r.mean,
        })
        .collect();
    ReportComparison { rows }
}

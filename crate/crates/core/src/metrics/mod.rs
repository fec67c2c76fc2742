//! Detection evaluation: IoU, greedy matching, P/R/F1, interpolated AP,
//! multi-run aggregation, report comparison and a toy blob detector.

mod ap;
mod detector;
mod detfile;
mod matching;
mod report;

pub use ap::{average_precision, average_precision_ranked, coco_thresholds, map_range, RECALL_POINTS};
pub use detector::{connected_components, toy_blob_detector, BlobDetector};
pub use detfile::{format_detections, load_detections, parse_detections};
pub use matching::{f1_score, iou, match_detections, precision_recall_f1, ImageDetections, MatchResult, Prf};
pub use report::{
    aggregate_runs, compare_reports, evaluate, DeltaRow, EvalConfig, MetricStat, MetricsReport, PointMetrics,
    ReportComparison,
};

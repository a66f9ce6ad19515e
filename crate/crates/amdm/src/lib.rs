//! Streaming multi-dimensional anomaly detection for agentic-workflow
//! telemetry: rolling z-score normalization, per-axis EWMA thresholds, and
//! joint Mahalanobis detection over a five-axis score vector, together with
//! a seeded workflow simulator, baseline detectors, quiet-period calibration,
//! and an evaluation harness producing latency/FPR/ROC reports.

pub mod axis;
pub mod baselines;
pub mod calibration;
pub mod config;
pub mod detector;
pub mod evaluation;
pub mod numerics;
pub mod record;
pub mod simulator;

pub use axis::{AnomalyKind, Axis, AxisSet, DetectorKind, Direction, MetricSpec};
pub use detector::{
    aggregate_axis, attribute, AmdmConfig, AmdmMonitor, AxisScore, Detection, MetricRegistry,
    MetricSample, MonitorError, StreamingDetector, Verdict,
};
pub use simulator::{generate, inject, AnomalyInjection, LabeledStream, WorkflowProfile};

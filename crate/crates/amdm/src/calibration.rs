//! Quiet-period calibration: pick the per-axis multiplier k from a grid to
//! hit a target per-axis false-positive rate, derive the joint threshold
//! from the chi-square quantile, and freeze the per-metric statistics the
//! static and Mahalanobis-only baselines need.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{Axis, AXIS_COUNT};
use crate::baselines::{FrozenStats, StaticLimits};
use crate::detector::{AmdmConfig, AmdmMonitor, MonitorError};
use crate::numerics::{chi_square_quantile, NumericsError};
use crate::simulator::LabeledStream;

/// The candidate k values: 1.5 to 5.0 in steps of 0.25.
pub const K_GRID: [f64; 15] = [
    1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5, 3.75, 4.0, 4.25, 4.5, 4.75, 5.0,
];

#[derive(Debug, Clone, Error)]
pub enum CalibrationError {
    #[error("quiet period of {len} steps is shorter than 10 windows ({required} steps)")]
    QuietTooShort { len: usize, required: usize },
    #[error("calibration stream contains labeled anomalies")]
    ContainsAnomalies,
    #[error(
        "per-axis FPR target {target} unreachable: k = {max_k} still yields {achieved:.6} on axis {axis}"
    )]
    UnreachableTarget { target: f64, max_k: f64, achieved: f64, axis: Axis },
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    /// Desired per-axis false-positive rate per step.
    pub per_axis_fpr: f64,
    /// Desired joint false-alarm rate; sets the chi-square quantile.
    pub joint_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub recommended_k: f64,
    /// chi^2_5(1 - alpha), the joint decision threshold.
    pub joint_threshold: f64,
    pub joint_alpha: f64,
    pub target_per_axis_fpr: f64,
    /// Empirical per-axis FPR at the recommended k on the quiet stream.
    pub per_axis_fpr_at_k: BTreeMap<Axis, f64>,
    /// Empirical joint flag rate on the quiet stream at `joint_alpha`.
    pub measured_joint_fpr: f64,
    pub quiet_steps: usize,
}

/// Selects the smallest grid k whose empirical per-axis FPR is at or below
/// the target on every axis, measures the joint flag rate at the requested
/// alpha, and reports both. Rejects short quiet periods and streams that
/// carry any true-anomaly labels.
pub fn calibrate(
    stream: &LabeledStream,
    cfg: &AmdmConfig,
    targets: &CalibrationTargets,
) -> Result<CalibrationReport, CalibrationError> {
    if stream.truth.iter().any(|t| t.is_some()) {
        return Err(CalibrationError::ContainsAnomalies);
    }
    let required = 10 * cfg.window;
    if stream.len() < required {
        return Err(CalibrationError::QuietTooShort { len: stream.len(), required });
    }

    let mut probe_cfg = *cfg;
    probe_cfg.alpha = targets.joint_alpha;
    let mut monitor = AmdmMonitor::new(stream.profile.metrics.clone(), probe_cfg)?;

    // One pass collects the per-axis deviation ratios |S - theta| / sigma_S;
    // the axis rule at any k is a threshold on that ratio, so the whole grid
    // is evaluated from the same trace.
    let mut ratios: [Vec<f64>; AXIS_COUNT] = std::array::from_fn(|_| Vec::new());
    let mut joint_flags = 0usize;
    let mut joint_steps = 0usize;
    for step in 0..stream.len() {
        let verdict = monitor.observe_ordered(step as u64, stream.row(step))?;
        let snapshot = monitor.axis_snapshot();
        for axis in Axis::ALL {
            let s = snapshot[axis.index()];
            if step >= cfg.window {
                let ratio = (s.score - s.threshold).abs() / s.score_std.max(1e-12);
                ratios[axis.index()].push(ratio);
            }
        }
        if monitor.joint_ready() {
            joint_steps += 1;
            if verdict.detection.joint_flag {
                joint_flags += 1;
            }
        }
    }

    let fpr_at = |axis: usize, k: f64| -> f64 {
        let hits = ratios[axis].iter().filter(|&&r| r > k).count();
        hits as f64 / ratios[axis].len().max(1) as f64
    };

    let mut recommended = None;
    for &k in K_GRID.iter() {
        let worst = Axis::ALL
            .iter()
            .map(|&a| fpr_at(a.index(), k))
            .fold(0.0f64, f64::max);
        if worst <= targets.per_axis_fpr {
            recommended = Some(k);
            break;
        }
    }
    let recommended_k = match recommended {
        Some(k) => k,
        None => {
            let max_k = *K_GRID.last().unwrap();
            let (worst_axis, achieved) = Axis::ALL
                .iter()
                .map(|&a| (a, fpr_at(a.index(), max_k)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            return Err(CalibrationError::UnreachableTarget {
                target: targets.per_axis_fpr,
                max_k,
                achieved,
                axis: worst_axis,
            });
        }
    };

    let per_axis_fpr_at_k = Axis::ALL
        .iter()
        .map(|&a| (a, fpr_at(a.index(), recommended_k)))
        .collect();
    let joint_threshold = chi_square_quantile(AXIS_COUNT as u32, 1.0 - targets.joint_alpha)?;
    Ok(CalibrationReport {
        recommended_k,
        joint_threshold,
        joint_alpha: targets.joint_alpha,
        target_per_axis_fpr: targets.per_axis_fpr,
        per_axis_fpr_at_k,
        measured_joint_fpr: joint_flags as f64 / joint_steps.max(1) as f64,
        quiet_steps: stream.len(),
    })
}

/// Plain mean and population std of every metric over the quiet stream.
pub fn fit_frozen_stats(stream: &LabeledStream) -> FrozenStats {
    let m = stream.metric_count();
    let n = stream.len() as f64;
    let mut stats = BTreeMap::new();
    for i in 0..m {
        let mean: f64 = (0..stream.len()).map(|t| stream.row(t)[i]).sum::<f64>() / n;
        let var: f64 = (0..stream.len())
            .map(|t| {
                let d = stream.row(t)[i] - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        stats.insert(stream.profile.metrics[i].name.clone(), (mean, var.sqrt()));
    }
    FrozenStats { stats }
}

/// Static limits at mean +/- n_sigma * std measured on the quiet stream.
pub fn fit_static_limits(stream: &LabeledStream, n_sigma: f64) -> StaticLimits {
    let frozen = fit_frozen_stats(stream);
    let limits = frozen
        .stats
        .into_iter()
        .map(|(name, (mean, std))| (name, (mean - n_sigma * std, mean + n_sigma * std)))
        .collect();
    StaticLimits { limits }
}

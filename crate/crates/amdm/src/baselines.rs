//! The three comparison detectors, behind the same streaming interface as
//! the full monitor so the evaluation harness treats all four uniformly:
//!
//! * static per-metric limits with no adaptation at all,
//! * the per-axis EWMA path alone (joint detection disabled),
//! * the joint Mahalanobis test alone, over quiet-period-frozen per-metric
//!   normalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::axis::{Axis, AxisSet, DetectorKind, MetricSpec, AXIS_COUNT};
use crate::detector::{
    axis_only_monitor, AmdmConfig, AmdmMonitor, Detection, MetricRegistry, MetricSample,
    MonitorError, StreamingDetector, Verdict,
};
use crate::numerics::{chi_square_quantile, zscore, CovarianceConfig, OnlineCovariance};

/// Fixed per-metric limits; flags whenever a raw value leaves its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticLimits {
    /// metric name -> (lower, upper)
    pub limits: BTreeMap<String, (f64, f64)>,
}

impl StaticLimits {
    pub fn validate(&self) -> Result<(), MonitorError> {
        for (name, (lo, hi)) in &self.limits {
            if !(lo < hi) {
                return Err(MonitorError::Config(format!(
                    "static limits for {name:?} must satisfy lower < upper, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Quiet-period per-metric means and standard deviations, used to freeze the
/// normalization of the Mahalanobis-only baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenStats {
    /// metric name -> (mean, std)
    pub stats: BTreeMap<String, (f64, f64)>,
}

/// Static thresholds monitoring each metric independently with fixed limits.
#[derive(Debug, Clone)]
pub struct StaticThresholdMonitor {
    registry: MetricRegistry,
    /// (lower, upper, center, half_width) per metric, registry order.
    bounds: Vec<(f64, f64, f64, f64)>,
    last_step: Option<u64>,
}

impl StaticThresholdMonitor {
    pub fn new(specs: Vec<MetricSpec>, limits: &StaticLimits) -> Result<Self, MonitorError> {
        limits.validate()?;
        let registry = MetricRegistry::new(specs)?;
        let mut bounds = Vec::with_capacity(registry.len());
        for spec in registry.specs() {
            let (lo, hi) = limits.limits.get(&spec.name).copied().ok_or_else(|| {
                MonitorError::Config(format!("no static limits for metric {:?}", spec.name))
            })?;
            bounds.push((lo, hi, 0.5 * (lo + hi), 0.5 * (hi - lo)));
        }
        Ok(StaticThresholdMonitor { registry, bounds, last_step: None })
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.registry
    }

    pub fn observe_ordered(&mut self, step: u64, values: &[f64]) -> Result<Verdict, MonitorError> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(MonitorError::NonMonotonicStep { step, last });
            }
        }
        self.last_step = Some(step);
        let mut axis_flags = AxisSet::EMPTY;
        let mut max_ratio = 0.0f64;
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MonitorError::NonFiniteValue {
                    metric: self.registry.name_of(idx).to_string(),
                    step,
                    value: v,
                });
            }
            let (lo, hi, center, half) = self.bounds[idx];
            if v < lo || v > hi {
                axis_flags.insert(self.registry.specs()[idx].axis);
            }
            // Violation ratio: distance from the interval center in units of
            // the half-width; >1 means outside the limits.
            max_ratio = max_ratio.max((v - center).abs() / half.max(1e-300));
        }
        let alarm = !axis_flags.is_empty();
        let detection = Detection {
            step,
            axis_flags,
            joint_flag: false,
            d_squared: None,
            joint_threshold: f64::INFINITY,
            attribution: None,
        };
        Ok(Verdict { detection, score: max_ratio, alarm })
    }
}

impl StreamingDetector for StaticThresholdMonitor {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Static
    }

    fn step(&mut self, sample: &MetricSample) -> Result<Verdict, MonitorError> {
        let mut values = Vec::with_capacity(self.registry.len());
        for spec in self.registry.specs() {
            let v = sample.values.get(&spec.name).copied().ok_or_else(|| {
                MonitorError::UnregisteredMetric { name: spec.name.clone(), step: sample.step }
            })?;
            values.push(v);
        }
        self.observe_ordered(sample.step, &values)
    }
}

/// Free-standing form of the static test for one sample against explicit
/// limits.
pub fn static_step(
    limits: &StaticLimits,
    specs: &[MetricSpec],
    sample: &MetricSample,
) -> Result<Detection, MonitorError> {
    let mut monitor = StaticThresholdMonitor::new(specs.to_vec(), limits)?;
    Ok(monitor.step(sample)?.detection)
}

/// Per-axis EWMA monitoring without joint detection. Axis decisions are
/// bit-identical to the full detector's for equal configs and inputs; the
/// counted alarm is "any axis flagged".
#[derive(Debug, Clone)]
pub struct EwmaOnlyMonitor {
    inner: AmdmMonitor,
}

impl EwmaOnlyMonitor {
    pub fn new(specs: Vec<MetricSpec>, cfg: AmdmConfig) -> Result<Self, MonitorError> {
        Ok(EwmaOnlyMonitor { inner: axis_only_monitor(specs, cfg)? })
    }

    pub fn registry(&self) -> &MetricRegistry {
        self.inner.registry()
    }

    pub fn observe_ordered(&mut self, step: u64, values: &[f64]) -> Result<Verdict, MonitorError> {
        let v = self.inner.observe_ordered(step, values)?;
        Ok(redirect_alarm_to_axes(v))
    }
}

fn redirect_alarm_to_axes(v: Verdict) -> Verdict {
    let alarm = !v.detection.axis_flags.is_empty();
    Verdict { alarm, ..v }
}

impl StreamingDetector for EwmaOnlyMonitor {
    fn kind(&self) -> DetectorKind {
        DetectorKind::EwmaOnly
    }

    fn step(&mut self, sample: &MetricSample) -> Result<Verdict, MonitorError> {
        let v = self.inner.observe(sample)?;
        Ok(redirect_alarm_to_axes(v))
    }
}

/// Joint Mahalanobis monitoring without adaptive thresholding: per-metric
/// normalization is frozen at quiet-period statistics, axis scores feed the
/// online joint state, and only the chi-square test fires. Axis flags are
/// always empty.
///
/// The joint state is this baseline's only adaptive element, so it runs at a
/// window-scale exponential weight (1.5 / window by default) rather than the
/// full detector's deliberately long joint memory.
#[derive(Debug, Clone)]
pub struct MahalanobisOnlyMonitor {
    registry: MetricRegistry,
    /// (mean, std floor-guarded) per metric, registry order.
    frozen: Vec<(f64, f64)>,
    joint: OnlineCovariance,
    joint_threshold: f64,
    warmup: usize,
    joint_updates: usize,
    last_step: Option<u64>,
    zbuf: Vec<f64>,
}

impl MahalanobisOnlyMonitor {
    pub fn new(
        specs: Vec<MetricSpec>,
        frozen_stats: &FrozenStats,
        cfg: AmdmConfig,
    ) -> Result<Self, MonitorError> {
        cfg.validate()?;
        let registry = MetricRegistry::new(specs)?;
        let mut frozen = Vec::with_capacity(registry.len());
        for spec in registry.specs() {
            let (mean, std) = frozen_stats.stats.get(&spec.name).copied().ok_or_else(|| {
                MonitorError::Config(format!("no frozen statistics for metric {:?}", spec.name))
            })?;
            frozen.push((mean, std));
        }
        let joint_weight = cfg.joint_weight.unwrap_or(1.5 / cfg.window as f64);
        let joint = OnlineCovariance::new(
            AXIS_COUNT,
            CovarianceConfig {
                shrinkage: cfg.shrinkage,
                epsilon: cfg.epsilon,
                ewma_weight: Some(joint_weight),
                refresh_interval: cfg.refresh_interval,
            },
        )?;
        let joint_threshold = chi_square_quantile(AXIS_COUNT as u32, 1.0 - cfg.alpha)?;
        let m = registry.len();
        Ok(MahalanobisOnlyMonitor {
            registry,
            frozen,
            joint,
            joint_threshold,
            warmup: cfg.warmup,
            joint_updates: 0,
            last_step: None,
            zbuf: vec![0.0; m],
        })
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.registry
    }

    pub fn joint_state(&self) -> &OnlineCovariance {
        &self.joint
    }

    pub fn observe_ordered(&mut self, step: u64, values: &[f64]) -> Result<Verdict, MonitorError> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(MonitorError::NonMonotonicStep { step, last });
            }
        }
        self.last_step = Some(step);
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MonitorError::NonFiniteValue {
                    metric: self.registry.name_of(idx).to_string(),
                    step,
                    value: v,
                });
            }
            let (mean, std) = self.frozen[idx];
            let floor = 1e-6 * (1.0 + mean.abs());
            self.zbuf[idx] = zscore(v, mean, std, floor);
        }
        let mut scores = [0.0; AXIS_COUNT];
        for axis in Axis::ALL {
            let a = axis.index();
            let mut s = 0.0;
            for &(idx, signed_w) in self.registry.axis_members(axis) {
                s += signed_w * self.zbuf[idx];
            }
            scores[a] = s;
        }
        self.joint.update(&scores)?;
        self.joint_updates += 1;
        let mut d_squared = None;
        let mut joint_flag = false;
        if self.joint.is_ready() {
            let d2 = self.joint.mahalanobis_sq(&scores)?;
            d_squared = Some(d2);
            joint_flag = self.joint_updates >= self.warmup && d2 > self.joint_threshold;
        }
        let score = d_squared.unwrap_or(0.0);
        let detection = Detection {
            step,
            axis_flags: AxisSet::EMPTY,
            joint_flag,
            d_squared,
            joint_threshold: self.joint_threshold,
            attribution: None,
        };
        Ok(Verdict { detection, score, alarm: joint_flag })
    }
}

impl StreamingDetector for MahalanobisOnlyMonitor {
    fn kind(&self) -> DetectorKind {
        DetectorKind::MahalanobisOnly
    }

    fn step(&mut self, sample: &MetricSample) -> Result<Verdict, MonitorError> {
        let mut values = Vec::with_capacity(self.registry.len());
        for spec in self.registry.specs() {
            let v = sample.values.get(&spec.name).copied().ok_or_else(|| {
                MonitorError::UnregisteredMetric { name: spec.name.clone(), step: sample.step }
            })?;
            values.push(v);
        }
        self.observe_ordered(sample.step, &values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::Direction;

    fn five_specs() -> Vec<MetricSpec> {
        Axis::ALL
            .iter()
            .map(|&a| MetricSpec::new(format!("m_{a}"), a, Direction::HigherIsWorse))
            .collect()
    }

    fn limits_for(specs: &[MetricSpec], lo: f64, hi: f64) -> StaticLimits {
        StaticLimits {
            limits: specs.iter().map(|s| (s.name.clone(), (lo, hi))).collect(),
        }
    }

    #[test]
    fn static_within_limits_never_flags() {
        let specs = five_specs();
        let mut m = StaticThresholdMonitor::new(specs.clone(), &limits_for(&specs, -3.0, 3.0)).unwrap();
        for step in 0..100 {
            let v = m.observe_ordered(step, &[0.5, -0.5, 1.0, -1.0, 0.0]).unwrap();
            assert!(!v.alarm);
            assert!(v.detection.axis_flags.is_empty());
            assert!(v.detection.d_squared.is_none());
        }
    }

    #[test]
    fn static_boundary_exit_flags_exactly_that_axis() {
        let specs = five_specs();
        let mut m = StaticThresholdMonitor::new(specs.clone(), &limits_for(&specs, -3.0, 3.0)).unwrap();
        let v = m.observe_ordered(0, &[0.0, 0.0, 3.0 + 1e-9, 0.0, 0.0]).unwrap();
        assert!(v.alarm);
        assert_eq!(v.detection.axis_flags.len(), 1);
        assert!(v.detection.axis_flags.contains(Axis::Safety));
    }

    #[test]
    fn static_missing_limit_rejected() {
        let specs = five_specs();
        let mut limits = limits_for(&specs, -3.0, 3.0);
        limits.limits.remove("m_human");
        assert!(matches!(
            StaticThresholdMonitor::new(specs, &limits),
            Err(MonitorError::Config(_))
        ));
    }

    #[test]
    fn static_inverted_limits_rejected() {
        let specs = five_specs();
        let mut limits = limits_for(&specs, -3.0, 3.0);
        limits.limits.insert("m_human".into(), (2.0, -2.0));
        assert!(StaticThresholdMonitor::new(specs, &limits).is_err());
    }

    #[test]
    fn mahalanobis_only_is_quiet_at_the_frozen_mean() {
        let specs = five_specs();
        let frozen = FrozenStats {
            stats: specs.iter().map(|s| (s.name.clone(), (2.0, 1.0))).collect(),
        };
        let mut m =
            MahalanobisOnlyMonitor::new(specs, &frozen, AmdmConfig::default()).unwrap();
        for step in 0..200 {
            let v = m.observe_ordered(step, &[2.0; 5]).unwrap();
            assert!(!v.alarm, "flagged at {step}");
            if let Some(d2) = v.detection.d_squared {
                assert!(d2 < 1e-9);
            }
            assert!(v.detection.axis_flags.is_empty());
        }
    }

    #[test]
    fn ewma_only_joint_is_disabled() {
        let mut m = EwmaOnlyMonitor::new(five_specs(), AmdmConfig::default()).unwrap();
        for step in 0..200 {
            let v = m.observe_ordered(step, &[(step % 7) as f64, 0.0, 1.0, 2.0, 3.0]).unwrap();
            assert!(v.detection.d_squared.is_none());
            assert!(!v.detection.joint_flag);
            assert_eq!(v.alarm, !v.detection.axis_flags.is_empty());
        }
    }
}

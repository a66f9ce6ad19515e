//! The adaptive multi-dimensional monitor: per-metric rolling z-scores, axis
//! aggregation, per-axis EWMA thresholds, and joint Mahalanobis detection
//! over the five-axis score vector, with per-axis attribution of joint
//! anomalies.
//!
//! One monitor instance watches one stream. Instances are single-writer: no
//! internal locking, safe to move between threads between calls, never to be
//! mutated concurrently. Per-step cost is O(M) for the rolling statistics
//! plus O(A^2) for the joint update.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{Axis, AxisSet, DetectorKind, MetricSpec, AXIS_COUNT};
use crate::numerics::{
    chi_square_quantile, zscore, CovarianceConfig, EwmaState, NumericsError, OnlineCovariance,
    RollingWindow,
};

/// One observation row: every registered metric's value at a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub step: u64,
    pub values: BTreeMap<String, f64>,
}

/// Detector configuration. The defaults are the simulation defaults:
/// lambda 0.25, window 80, joint threshold chi^2_5(0.99).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmdmConfig {
    /// EWMA smoothing for the per-axis thresholds, in (0, 1].
    pub lambda: f64,
    /// Rolling-window length w, shared by per-metric normalization and the
    /// axis-score standard deviation.
    pub window: usize,
    /// Per-axis anomaly multiplier: flag when |S - theta| > k * sigma_S.
    pub k: f64,
    /// Joint false-alarm target; the joint threshold is chi^2_5(1 - alpha).
    pub alpha: f64,
    /// Diagonal shrinkage intensity of the joint covariance.
    pub shrinkage: f64,
    /// Joint flags are suppressed until this many joint updates have
    /// accumulated (after the rolling windows fill).
    pub warmup: usize,
    /// Exponential weight of the joint state once past warm-up; `None`
    /// derives 1/(4 * window), giving the joint state a memory of several
    /// windows. Count-weighted (sample) updates apply while 1/n exceeds it.
    pub joint_weight: Option<f64>,
    /// Ridge floor on the joint covariance eigenvalues.
    pub epsilon: f64,
    /// Updates between full re-inversions of the joint covariance.
    pub refresh_interval: usize,
}

impl Default for AmdmConfig {
    fn default() -> Self {
        AmdmConfig {
            lambda: 0.25,
            window: 80,
            k: 3.0,
            alpha: 0.01,
            shrinkage: 0.1,
            warmup: (2 * AXIS_COUNT).max(25),
            joint_weight: None,
            epsilon: 1e-6,
            refresh_interval: 512,
        }
    }
}

impl AmdmConfig {
    pub fn validate(&self) -> Result<(), MonitorError> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(MonitorError::Config(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if self.window == 0 {
            return Err(MonitorError::Config("window must be positive".into()));
        }
        if !(self.k > 0.0) {
            return Err(MonitorError::Config(format!("k must be positive, got {}", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MonitorError::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.shrinkage >= 0.0 && self.shrinkage <= 1.0) {
            return Err(MonitorError::Config(format!(
                "shrinkage must be in [0, 1], got {}",
                self.shrinkage
            )));
        }
        if self.warmup == 0 {
            return Err(MonitorError::Config("warmup must be positive".into()));
        }
        Ok(())
    }

    /// Effective joint-state exponential weight.
    pub fn effective_joint_weight(&self) -> f64 {
        self.joint_weight.unwrap_or(1.0 / (4.0 * self.window as f64))
    }
}

/// One axis's score, adaptive threshold, and rolling score deviation at a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScore {
    pub axis: Axis,
    pub score: f64,
    pub threshold: f64,
    pub score_std: f64,
}

/// Per-step decision record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub step: u64,
    pub axis_flags: AxisSet,
    pub joint_flag: bool,
    /// `None` while the joint state is warming up.
    pub d_squared: Option<f64>,
    pub joint_threshold: f64,
    /// Present only when the joint flag is raised; entries sum to 1.
    pub attribution: Option<[f64; AXIS_COUNT]>,
}

/// A detection plus the uniform quantities the evaluation harness consumes:
/// the detector's continuous score and its counted alarm for this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub detection: Detection,
    /// Continuous decision statistic for ROC construction.
    pub score: f64,
    /// The detector's alarm as counted for latency and false positives.
    pub alarm: bool,
}

/// Uniform streaming interface all four detectors implement; the evaluation
/// harness never branches on the concrete kind.
pub trait StreamingDetector {
    fn kind(&self) -> DetectorKind;
    fn step(&mut self, sample: &MetricSample) -> Result<Verdict, MonitorError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("metric registry is empty")]
    EmptyRegistry,
    #[error("duplicate metric name {0:?}")]
    DuplicateMetric(String),
    #[error("axis {0} has no metrics")]
    UncoveredAxis(Axis),
    #[error("metric {name:?} has non-positive weight {weight}")]
    BadWeight { name: String, weight: f64 },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("step {step} does not exceed previous step {last}")]
    NonMonotonicStep { step: u64, last: u64 },
    #[error("unregistered metric {name:?} at step {step}")]
    UnregisteredMetric { name: String, step: u64 },
    #[error("non-finite value {value} for metric {metric:?} at step {step}")]
    NonFiniteValue { metric: String, step: u64, value: f64 },
    #[error("metric {metric:?} missing at step {step} with no prior value")]
    MissingAtStart { metric: String, step: u64 },
    #[error("metric {metric:?} missing for more than {limit} consecutive steps at step {step}")]
    MetricStale { metric: String, step: u64, limit: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Validated metric registry: unique names, all five axes covered, weights
/// normalized to sum 1 within each axis.
#[derive(Debug, Clone)]
pub struct MetricRegistry {
    specs: Vec<MetricSpec>,
    by_name: BTreeMap<String, usize>,
    /// Per axis: (metric index, direction-signed normalized weight).
    members: [Vec<(usize, f64)>; AXIS_COUNT],
}

impl MetricRegistry {
    pub fn new(specs: Vec<MetricSpec>) -> Result<Self, MonitorError> {
        if specs.is_empty() {
            return Err(MonitorError::EmptyRegistry);
        }
        let mut by_name = BTreeMap::new();
        for (i, spec) in specs.iter().enumerate() {
            if !(spec.weight > 0.0) {
                return Err(MonitorError::BadWeight {
                    name: spec.name.clone(),
                    weight: spec.weight,
                });
            }
            if by_name.insert(spec.name.clone(), i).is_some() {
                return Err(MonitorError::DuplicateMetric(spec.name.clone()));
            }
        }
        let mut members: [Vec<(usize, f64)>; AXIS_COUNT] = std::array::from_fn(|_| Vec::new());
        for (i, spec) in specs.iter().enumerate() {
            members[spec.axis.index()].push((i, spec.weight));
        }
        for axis in Axis::ALL {
            let group = &mut members[axis.index()];
            if group.is_empty() {
                return Err(MonitorError::UncoveredAxis(axis));
            }
            let total: f64 = group.iter().map(|(_, w)| w).sum();
            for (idx, w) in group.iter_mut() {
                *w = *w / total * specs[*idx].direction.sign();
            }
        }
        Ok(MetricRegistry { specs, by_name, members })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[MetricSpec] {
        &self.specs
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn name_of(&self, index: usize) -> &str {
        &self.specs[index].name
    }

    /// (metric index, direction-signed normalized weight) pairs for an axis.
    pub(crate) fn axis_members(&self, axis: Axis) -> &[(usize, f64)] {
        &self.members[axis.index()]
    }
}

/// Weighted mean of direction-adjusted z-scores for one axis. Higher-is-worse
/// metrics contribute +z, lower-is-worse contribute -z; weights are
/// normalized to sum 1 within the axis.
pub fn aggregate_axis(
    z: &BTreeMap<String, f64>,
    registry: &MetricRegistry,
    axis: Axis,
) -> Result<f64, MonitorError> {
    let mut total = 0.0;
    for &(idx, signed_w) in &registry.members[axis.index()] {
        let name = registry.name_of(idx);
        let value = z.get(name).ok_or_else(|| MonitorError::UnregisteredMetric {
            name: name.to_string(),
            step: 0,
        })?;
        total += signed_w * value;
    }
    Ok(total)
}

/// Decomposes a squared Mahalanobis distance into per-axis shares:
/// `r_a = resid_a * (inv(Sigma) resid)_a`, negatives clamped to zero, then
/// normalized to sum 1. The unclamped shares sum to D^2 exactly.
pub fn attribute(joint: &OnlineCovariance, s: &[f64]) -> Result<[f64; AXIS_COUNT], NumericsError> {
    let weights = joint.inverse_residual(s)?;
    let mean = joint.mean();
    let mut shares = [0.0; AXIS_COUNT];
    let mut total = 0.0;
    for i in 0..AXIS_COUNT {
        let r = (s[i] - mean[i]) * weights[i];
        shares[i] = r.max(0.0);
        total += shares[i];
    }
    if total > 0.0 {
        for v in shares.iter_mut() {
            *v /= total;
        }
    } else {
        shares = [1.0 / AXIS_COUNT as f64; AXIS_COUNT];
    }
    Ok(shares)
}

/// The AMDM detector over one stream.
#[derive(Debug, Clone)]
pub struct AmdmMonitor {
    registry: MetricRegistry,
    cfg: AmdmConfig,
    joint_enabled: bool,
    windows: Vec<RollingWindow>,
    last_values: Vec<f64>,
    has_value: Vec<bool>,
    staleness: Vec<usize>,
    axis_ewma: Vec<EwmaState>,
    axis_std: Vec<RollingWindow>,
    joint: OnlineCovariance,
    joint_threshold: f64,
    joint_updates: usize,
    last_step: Option<u64>,
    axes: [AxisScore; AXIS_COUNT],
    zbuf: Vec<f64>,
    valbuf: Vec<f64>,
}

impl AmdmMonitor {
    /// Registers the metric specs and allocates one rolling window per
    /// metric, one EWMA per axis, and a joint state of dimension five.
    pub fn new(specs: Vec<MetricSpec>, cfg: AmdmConfig) -> Result<Self, MonitorError> {
        Self::build(specs, cfg, true)
    }

    fn build(specs: Vec<MetricSpec>, cfg: AmdmConfig, joint_enabled: bool) -> Result<Self, MonitorError> {
        cfg.validate()?;
        let registry = MetricRegistry::new(specs)?;
        let m = registry.len();
        let joint = OnlineCovariance::new(
            AXIS_COUNT,
            CovarianceConfig {
                shrinkage: cfg.shrinkage,
                epsilon: cfg.epsilon,
                ewma_weight: Some(cfg.effective_joint_weight()),
                refresh_interval: cfg.refresh_interval,
            },
        )?;
        let joint_threshold = chi_square_quantile(AXIS_COUNT as u32, 1.0 - cfg.alpha)?;
        let axes = Axis::ALL.map(|axis| AxisScore {
            axis,
            score: 0.0,
            threshold: 0.0,
            score_std: 0.0,
        });
        Ok(AmdmMonitor {
            registry,
            cfg,
            joint_enabled,
            windows: (0..m).map(|_| RollingWindow::new(cfg.window)).collect(),
            last_values: vec![0.0; m],
            has_value: vec![false; m],
            staleness: vec![0; m],
            axis_ewma: (0..AXIS_COUNT)
                .map(|_| EwmaState::new(cfg.lambda))
                .collect::<Result<_, _>>()?,
            axis_std: (0..AXIS_COUNT).map(|_| RollingWindow::new(cfg.window)).collect(),
            joint,
            joint_threshold,
            joint_updates: 0,
            last_step: None,
            axes,
            zbuf: vec![0.0; m],
            valbuf: vec![0.0; m],
        })
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.registry
    }

    pub fn config(&self) -> &AmdmConfig {
        &self.cfg
    }

    pub fn joint_threshold(&self) -> f64 {
        self.joint_threshold
    }

    pub fn joint_state(&self) -> &OnlineCovariance {
        &self.joint
    }

    /// Axis scores, thresholds, and rolling deviations after the last step.
    pub fn axis_snapshot(&self) -> &[AxisScore; AXIS_COUNT] {
        &self.axes
    }

    /// True once the rolling windows are saturated and the joint state is
    /// past its warm-up, i.e. joint flags are no longer suppressed.
    pub fn joint_ready(&self) -> bool {
        self.joint_enabled && self.joint_updates >= self.cfg.warmup
    }

    /// Full-map entry point: validates names, rejects non-finite values with
    /// the metric and step named, and carries stale metrics forward for at
    /// most one window length.
    pub fn observe(&mut self, sample: &MetricSample) -> Result<Verdict, MonitorError> {
        self.check_step(sample.step)?;
        for (name, &value) in &sample.values {
            let idx = self
                .registry
                .index_of(name)
                .ok_or_else(|| MonitorError::UnregisteredMetric {
                    name: name.clone(),
                    step: sample.step,
                })?;
            if !value.is_finite() {
                return Err(MonitorError::NonFiniteValue {
                    metric: name.clone(),
                    step: sample.step,
                    value,
                });
            }
            self.last_values[idx] = value;
            self.has_value[idx] = true;
            self.staleness[idx] = 0;
        }
        for idx in 0..self.registry.len() {
            if !sample.values.contains_key(self.registry.name_of(idx)) {
                if !self.has_value[idx] {
                    return Err(MonitorError::MissingAtStart {
                        metric: self.registry.name_of(idx).to_string(),
                        step: sample.step,
                    });
                }
                self.staleness[idx] += 1;
                if self.staleness[idx] > self.cfg.window {
                    return Err(MonitorError::MetricStale {
                        metric: self.registry.name_of(idx).to_string(),
                        step: sample.step,
                        limit: self.cfg.window,
                    });
                }
            }
            self.valbuf[idx] = self.last_values[idx];
        }
        let values = std::mem::take(&mut self.valbuf);
        let out = self.advance(sample.step, &values);
        self.valbuf = values;
        out
    }

    /// Ordered fast path: `values[i]` is the i-th registered metric. The
    /// caller guarantees completeness; step monotonicity and finiteness are
    /// still enforced.
    pub fn observe_ordered(&mut self, step: u64, values: &[f64]) -> Result<Verdict, MonitorError> {
        self.check_step(step)?;
        debug_assert_eq!(values.len(), self.registry.len());
        self.advance(step, values)
    }

    /// Total metrics carried forward over the stream so far.
    pub fn staleness_events(&self) -> usize {
        self.staleness.iter().sum()
    }

    fn check_step(&self, step: u64) -> Result<(), MonitorError> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(MonitorError::NonMonotonicStep { step, last });
            }
        }
        Ok(())
    }

    /// One full iteration: rolling statistics and z-scores, axis aggregation,
    /// EWMA thresholds and the k-sigma axis test, then the joint update and
    /// chi-square test with attribution.
    fn advance(&mut self, step: u64, values: &[f64]) -> Result<Verdict, MonitorError> {
        self.last_step = Some(step);
        for (idx, &v) in values.iter().enumerate() {
            let (mean, std) = self.windows[idx].update(v).map_err(|e| match e {
                NumericsError::NonFinite { value } => MonitorError::NonFiniteValue {
                    metric: self.registry.name_of(idx).to_string(),
                    step,
                    value,
                },
                other => MonitorError::Numerics(other),
            })?;
            let floor = 1e-6 * (1.0 + mean.abs());
            self.zbuf[idx] = zscore(v, mean, std, floor);
        }

        let mut axis_flags = AxisSet::EMPTY;
        let mut scores = [0.0; AXIS_COUNT];
        let mut axes_ready = true;
        let mut max_ratio = 0.0f64;
        for axis in Axis::ALL {
            let a = axis.index();
            let mut s = 0.0;
            for &(idx, signed_w) in &self.registry.members[a] {
                s += signed_w * self.zbuf[idx];
            }
            scores[a] = s;
            let theta = self.axis_ewma[a].update(s);
            let (_, sigma_s) = self.axis_std[a].update(s)?;
            let ready = self.axis_std[a].is_full();
            axes_ready &= ready;
            let deviation = (s - theta).abs();
            if ready && deviation > self.cfg.k * sigma_s {
                axis_flags.insert(axis);
            }
            let ratio = deviation / sigma_s.max(1e-12);
            max_ratio = max_ratio.max(ratio);
            self.axes[a] = AxisScore { axis, score: s, threshold: theta, score_std: sigma_s };
        }

        let mut d_squared = None;
        let mut joint_flag = false;
        let mut attribution = None;
        if self.joint_enabled && axes_ready {
            self.joint.update(&scores)?;
            self.joint_updates += 1;
            if self.joint.is_ready() {
                let d2 = self.joint.mahalanobis_sq(&scores)?;
                d_squared = Some(d2);
                if self.joint_updates >= self.cfg.warmup && d2 > self.joint_threshold {
                    joint_flag = true;
                    attribution = Some(attribute(&self.joint, &scores)?);
                }
            }
        }

        let score = match d_squared {
            Some(d2) if self.joint_updates >= self.cfg.warmup => d2,
            _ => max_ratio,
        };
        let detection = Detection {
            step,
            axis_flags,
            joint_flag,
            d_squared,
            joint_threshold: self.joint_threshold,
            attribution,
        };
        Ok(Verdict { detection, score, alarm: joint_flag })
    }
}

impl StreamingDetector for AmdmMonitor {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Amdm
    }

    fn step(&mut self, sample: &MetricSample) -> Result<Verdict, MonitorError> {
        self.observe(sample)
    }
}

/// AMDM's per-axis path with joint detection disabled; axis decisions are
/// bit-identical to the full detector's at equal configs. Construction lives
/// here so the two share every line of the axis path.
pub(crate) fn axis_only_monitor(
    specs: Vec<MetricSpec>,
    cfg: AmdmConfig,
) -> Result<AmdmMonitor, MonitorError> {
    AmdmMonitor::build(specs, cfg, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::Direction;

    fn spec(name: &str, axis: Axis) -> MetricSpec {
        MetricSpec::new(name, axis, Direction::HigherIsWorse)
    }

    fn five_metric_specs() -> Vec<MetricSpec> {
        Axis::ALL.iter().map(|&a| spec(&format!("m_{a}"), a)).collect()
    }

    fn fifteen_metric_specs() -> Vec<MetricSpec> {
        let mut specs = Vec::new();
        for axis in Axis::ALL {
            for i in 0..3 {
                specs.push(spec(&format!("m_{axis}_{i}"), axis));
            }
        }
        specs
    }

    #[test]
    fn registers_fifteen_metrics() {
        let m = AmdmMonitor::new(fifteen_metric_specs(), AmdmConfig::default()).unwrap();
        assert_eq!(m.registry().len(), 15);
    }

    #[test]
    fn minimal_registry_is_valid() {
        assert!(AmdmMonitor::new(five_metric_specs(), AmdmConfig::default()).is_ok());
    }

    #[test]
    fn uncovered_axis_rejected() {
        let specs: Vec<MetricSpec> = Axis::ALL[..4].iter().map(|&a| spec(&format!("m_{a}"), a)).collect();
        assert!(matches!(
            AmdmMonitor::new(specs, AmdmConfig::default()),
            Err(MonitorError::UncoveredAxis(Axis::Economic))
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut specs = five_metric_specs();
        specs.push(spec("m_capability", Axis::Capability));
        assert!(matches!(
            AmdmMonitor::new(specs, AmdmConfig::default()),
            Err(MonitorError::DuplicateMetric(_))
        ));
    }

    #[test]
    fn constant_streams_never_flag() {
        let mut m = AmdmMonitor::new(five_metric_specs(), AmdmConfig::default()).unwrap();
        for step in 0..500 {
            let values = vec![3.25; 5];
            let v = m.observe_ordered(step, &values).unwrap();
            assert!(v.detection.axis_flags.is_empty(), "axis flag at {step}");
            assert!(!v.detection.joint_flag, "joint flag at {step}");
        }
    }

    #[test]
    fn non_monotonic_step_rejected() {
        let mut m = AmdmMonitor::new(five_metric_specs(), AmdmConfig::default()).unwrap();
        m.observe_ordered(5, &[0.0; 5]).unwrap();
        assert!(matches!(
            m.observe_ordered(5, &[0.0; 5]),
            Err(MonitorError::NonMonotonicStep { step: 5, last: 5 })
        ));
    }

    #[test]
    fn unregistered_metric_named_in_error() {
        let mut m = AmdmMonitor::new(five_metric_specs(), AmdmConfig::default()).unwrap();
        let mut values = BTreeMap::new();
        for axis in Axis::ALL {
            values.insert(format!("m_{axis}"), 0.0);
        }
        values.insert("bogus".to_string(), 1.0);
        let err = m.observe(&MetricSample { step: 0, values }).unwrap_err();
        assert!(matches!(err, MonitorError::UnregisteredMetric { ref name, step: 0 } if name == "bogus"));
    }

    #[test]
    fn non_finite_value_names_metric_and_step() {
        let mut m = AmdmMonitor::new(five_metric_specs(), AmdmConfig::default()).unwrap();
        let mut values = BTreeMap::new();
        for axis in Axis::ALL {
            values.insert(format!("m_{axis}"), 0.0);
        }
        values.insert("m_safety".to_string(), f64::NAN);
        let err = m.observe(&MetricSample { step: 7, values }).unwrap_err();
        assert!(matches!(err, MonitorError::NonFiniteValue { ref metric, step: 7, .. } if metric == "m_safety"));
    }

    #[test]
    fn missing_value_carries_forward_then_goes_stale() {
        let cfg = AmdmConfig { window: 4, ..Default::default() };
        let mut m = AmdmMonitor::new(five_metric_specs(), cfg).unwrap();
        let full: BTreeMap<String, f64> =
            Axis::ALL.iter().map(|a| (format!("m_{a}"), 1.0)).collect();
        m.observe(&MetricSample { step: 0, values: full.clone() }).unwrap();
        let mut partial = full.clone();
        partial.remove("m_economic");
        for step in 1..=4 {
            m.observe(&MetricSample { step, values: partial.clone() }).unwrap();
        }
        assert_eq!(m.staleness_events(), 4);
        let err = m.observe(&MetricSample { step: 5, values: partial }).unwrap_err();
        assert!(matches!(err, MonitorError::MetricStale { ref metric, .. } if metric == "m_economic"));
    }

    #[test]
    fn missing_at_first_step_rejected() {
        let mut m = AmdmMonitor::new(five_metric_specs(), AmdmConfig::default()).unwrap();
        let mut values: BTreeMap<String, f64> =
            Axis::ALL.iter().map(|a| (format!("m_{a}"), 1.0)).collect();
        values.remove("m_human");
        let err = m.observe(&MetricSample { step: 0, values }).unwrap_err();
        assert!(matches!(err, MonitorError::MissingAtStart { ref metric, .. } if metric == "m_human"));
    }

    #[test]
    fn aggregate_axis_examples() {
        let specs = vec![
            MetricSpec::new("a", Axis::Capability, Direction::HigherIsWorse),
            MetricSpec::new("b", Axis::Robustness, Direction::HigherIsWorse),
            MetricSpec::new("c", Axis::Robustness, Direction::LowerIsWorse),
            MetricSpec::new("d", Axis::Safety, Direction::HigherIsWorse).with_weight(1.0),
            MetricSpec::new("e", Axis::Safety, Direction::HigherIsWorse).with_weight(1.0),
            MetricSpec::new("f", Axis::Safety, Direction::HigherIsWorse).with_weight(2.0),
            MetricSpec::new("g", Axis::Human, Direction::HigherIsWorse),
            MetricSpec::new("h", Axis::Economic, Direction::HigherIsWorse),
        ];
        let registry = MetricRegistry::new(specs).unwrap();
        let z: BTreeMap<String, f64> = [
            ("a", 1.7),
            ("b", 2.0),
            ("c", 2.0),
            ("d", 1.0),
            ("e", 2.0),
            ("f", 3.0),
            ("g", 0.0),
            ("h", 0.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        // Singleton axis passes the z-score through.
        assert!((aggregate_axis(&z, &registry, Axis::Capability).unwrap() - 1.7).abs() < 1e-12);
        // Direction adjustment cancels equal-and-opposite contributions.
        assert!(aggregate_axis(&z, &registry, Axis::Robustness).unwrap().abs() < 1e-12);
        // Weighted mean: (1*1 + 1*2 + 2*3) / 4.
        assert!((aggregate_axis(&z, &registry, Axis::Safety).unwrap() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn attribution_identity_cases() {
        let mut cov = vec![0.0; 25];
        for i in 0..5 {
            cov[i * 5 + i] = 1.0;
        }
        let joint = OnlineCovariance::from_parts(
            vec![0.0; 5],
            cov,
            crate::numerics::CovarianceConfig::default(),
        )
        .unwrap();
        let shares = attribute(&joint, &[3.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((shares[0] - 1.0).abs() < 1e-12);
        let shares = attribute(&joint, &[1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        for s in shares {
            assert!((s - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn flag_predicate_is_strict_and_matches_snapshot() {
        // The constant-stream test covers the exact-equality boundary
        // (0 > 0 never flags); here the predicate is re-derived from the
        // snapshot at every step and must use the strict inequality.
        let cfg = AmdmConfig { window: 4, k: 2.0, ..Default::default() };
        let mut m = AmdmMonitor::new(five_metric_specs(), cfg).unwrap();
        for step in 0..200u64 {
            let x = if step % 2 == 0 { 1.0 } else { -1.0 };
            let v = m.observe_ordered(step, &[x; 5]).unwrap();
            let snap = m.axis_snapshot();
            for a in Axis::ALL {
                let s = snap[a.index()];
                let expect = m.axis_std[a.index()].is_full()
                    && (s.score - s.threshold).abs() > 2.0 * s.score_std;
                assert_eq!(v.detection.axis_flags.contains(a), expect, "step {step}");
            }
        }
    }

    #[test]
    fn spike_raises_axis_flag_then_joint() {
        let mut specs = fifteen_metric_specs();
        specs.rotate_left(1); // registry order should not matter
        // k = 2 is the regime calibration lands in; the score-std window sees
        // the jump itself, so k = 3 sits right at the 8-sigma boundary.
        let cfg = AmdmConfig { window: 40, k: 2.0, warmup: 25, ..Default::default() };
        let mut m = AmdmMonitor::new(specs, cfg).unwrap();
        // Deterministic pseudo-noise, then an 8-sigma persistent jump on one
        // safety metric.
        let noise = |step: u64, idx: usize| ((step * 31 + idx as u64 * 17) % 97) as f64 / 97.0 - 0.5;
        let mut axis_flag_step = None;
        let mut joint_flag_step = None;
        for step in 0..1200u64 {
            let mut values: Vec<f64> = (0..15).map(|i| noise(step, i)).collect();
            if step >= 1000 {
                // Metric 0 after rotation belongs to capability group; find a
                // specific metric by name instead.
                let idx = m.registry().index_of("m_safety_1").unwrap();
                values[idx] += 8.0 * 0.29; // about 8 sigma of the uniform noise
            }
            let v = m.observe_ordered(step, &values).unwrap();
            if step >= 1000 {
                if axis_flag_step.is_none() && v.detection.axis_flags.contains(Axis::Safety) {
                    axis_flag_step = Some(step);
                }
                if joint_flag_step.is_none() && v.detection.joint_flag {
                    joint_flag_step = Some(step);
                    assert!(v.detection.d_squared.unwrap() > v.detection.joint_threshold);
                    let attr = v.detection.attribution.unwrap();
                    let sum: f64 = attr.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-9);
                    assert!(attr[Axis::Safety.index()] > 0.5);
                }
            }
        }
        assert!(axis_flag_step.unwrap() <= 1003, "axis flag too slow: {axis_flag_step:?}");
        assert!(joint_flag_step.unwrap() <= 1003, "joint flag too slow: {joint_flag_step:?}");
    }
}

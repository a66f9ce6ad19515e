//! Deterministic seeded generator of synthetic workflow telemetry across the
//! five axes, with anomaly injection and ground-truth labels.
//!
//! Each metric follows an AR(1) process with Gaussian innovations around its
//! baseline, parameterized so the stationary standard deviation equals the
//! configured baseline std. Injections superimpose kind-specific additive
//! perturbations, so off-axis values are bit-identical with and without an
//! injection under the same seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{AnomalyKind, Axis, Direction, MetricSpec, AXIS_COUNT};
use crate::detector::MetricSample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("profile invalid: {0}")]
    InvalidProfile(String),
    #[error("injections at steps {a} and {b} overlap")]
    OverlappingInjections { a: u64, b: u64 },
    #[error("injection at step {onset} with duration {duration} exceeds run length {length}")]
    InjectionOutOfRange { onset: u64, duration: u64, length: u64 },
    #[error("injection axes {given:?} do not match {kind}'s definition {expected:?}")]
    AxesMismatch { kind: AnomalyKind, given: Vec<Axis>, expected: Vec<Axis> },
    #[error("run length must be positive")]
    ZeroLength,
}

/// Telemetry profile of one emulated workflow: the metric registry plus the
/// baseline process parameters, one entry per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowProfile {
    pub name: String,
    pub metrics: Vec<MetricSpec>,
    pub baseline_means: Vec<f64>,
    pub baseline_stds: Vec<f64>,
    /// AR(1) coefficients, each in [0, 1).
    pub ar_coefficients: Vec<f64>,
}

impl WorkflowProfile {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let m = self.metrics.len();
        if m != 3 * AXIS_COUNT {
            return Err(SimulationError::InvalidProfile(format!(
                "expected {} metrics, got {m}",
                3 * AXIS_COUNT
            )));
        }
        for axis in Axis::ALL {
            let count = self.metrics.iter().filter(|s| s.axis == axis).count();
            if count != 3 {
                return Err(SimulationError::InvalidProfile(format!(
                    "axis {axis} has {count} metrics, expected 3"
                )));
            }
        }
        if self.baseline_means.len() != m
            || self.baseline_stds.len() != m
            || self.ar_coefficients.len() != m
        {
            return Err(SimulationError::InvalidProfile(
                "baseline vectors must match the metric count".into(),
            ));
        }
        for (i, &std) in self.baseline_stds.iter().enumerate() {
            if !(std > 0.0) {
                return Err(SimulationError::InvalidProfile(format!(
                    "metric {:?} has non-positive std {std}",
                    self.metrics[i].name
                )));
            }
        }
        for (i, &phi) in self.ar_coefficients.iter().enumerate() {
            if !(0.0..1.0).contains(&phi) {
                return Err(SimulationError::InvalidProfile(format!(
                    "metric {:?} has AR coefficient {phi} outside [0, 1)",
                    self.metrics[i].name
                )));
            }
        }
        Ok(())
    }

    /// The three built-in workflow profiles.
    pub fn builtin(name: &str) -> Option<WorkflowProfile> {
        match name {
            "modernisation" => Some(modernisation_profile()),
            "data-quality" => Some(data_quality_profile()),
            "credit-memo" => Some(credit_memo_profile()),
            _ => None,
        }
    }
}

/// One injected anomaly: its kind, placement, strength in units of each
/// affected metric's baseline sigma, and the axes it perturbs (which must
/// match the kind's definition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyInjection {
    pub kind: AnomalyKind,
    pub onset: u64,
    pub duration: u64,
    pub magnitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affected_axes: Option<Vec<Axis>>,
}

impl AnomalyInjection {
    pub fn new(kind: AnomalyKind, onset: u64, duration: u64, magnitude: f64) -> Self {
        AnomalyInjection { kind, onset, duration, magnitude, affected_axes: None }
    }

    pub fn axes(&self) -> &[Axis] {
        match &self.affected_axes {
            Some(axes) => axes,
            None => self.kind.default_axes(),
        }
    }

    fn validate(&self, length: u64) -> Result<(), SimulationError> {
        if self.duration == 0 || self.onset + self.duration > length {
            return Err(SimulationError::InjectionOutOfRange {
                onset: self.onset,
                duration: self.duration,
                length,
            });
        }
        if let Some(axes) = &self.affected_axes {
            let mut given = axes.clone();
            given.sort();
            given.dedup();
            let mut expected = self.kind.default_axes().to_vec();
            expected.sort();
            if given != expected {
                return Err(SimulationError::AxesMismatch {
                    kind: self.kind,
                    given,
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Kind-specific perturbation shape at an in-window step, as a fraction of
/// the full magnitude: goal drift ramps linearly from zero to one across the
/// window, the three shock kinds are unit steps.
fn shape_fraction(kind: AnomalyKind, t: u64, onset: u64, duration: u64) -> f64 {
    debug_assert!(t >= onset && t < onset + duration);
    if kind.is_gradual() {
        if duration <= 1 {
            1.0
        } else {
            (t - onset) as f64 / (duration - 1) as f64
        }
    } else {
        1.0
    }
}

/// Additive raw-unit perturbation each metric receives from an injection at
/// step `t` within its window; zero vector outside. Affected metrics move in
/// their own "worse" direction: positive for higher-is-worse metrics,
/// negative for lower-is-worse.
pub fn inject(
    kind: AnomalyKind,
    profile: &WorkflowProfile,
    t: u64,
    onset: u64,
    duration: u64,
    magnitude: f64,
) -> Vec<f64> {
    let m = profile.metrics.len();
    let mut out = vec![0.0; m];
    if t < onset || t >= onset + duration {
        return out;
    }
    let fraction = shape_fraction(kind, t, onset, duration);
    for (i, spec) in profile.metrics.iter().enumerate() {
        if kind.default_axes().contains(&spec.axis) {
            let worse = match spec.direction {
                Direction::HigherIsWorse => 1.0,
                Direction::LowerIsWorse => -1.0,
            };
            out[i] = worse * magnitude * fraction * profile.baseline_stds[i];
        }
    }
    out
}

/// A generated stream: metric rows in registry order, per-step ground truth,
/// and the provenance needed to regenerate it bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub profile: WorkflowProfile,
    /// Flat row-major values: `values[step * m + metric]`.
    values: Vec<f64>,
    pub truth: Vec<Option<AnomalyKind>>,
    pub seed: u64,
    pub step_seconds: f64,
}

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn metric_count(&self) -> usize {
        self.profile.metrics.len()
    }

    pub fn row(&self, step: usize) -> &[f64] {
        let m = self.metric_count();
        &self.values[step * m..(step + 1) * m]
    }

    /// Materializes one step as the map-keyed wire form.
    pub fn sample(&self, step: usize) -> MetricSample {
        let values: BTreeMap<String, f64> = self
            .profile
            .metrics
            .iter()
            .zip(self.row(step))
            .map(|(spec, &v)| (spec.name.clone(), v))
            .collect();
        MetricSample { step: step as u64, values }
    }

    /// Contiguous truth windows as (kind, onset, duration).
    pub fn truth_windows(&self) -> Vec<(AnomalyKind, u64, u64)> {
        let mut windows = Vec::new();
        let mut open: Option<(AnomalyKind, u64)> = None;
        for (step, label) in self.truth.iter().enumerate() {
            match (open, label) {
                (None, Some(kind)) => open = Some((*kind, step as u64)),
                (Some((kind, onset)), Some(next)) if *next != kind => {
                    windows.push((kind, onset, step as u64 - onset));
                    open = Some((*next, step as u64));
                }
                (Some((kind, onset)), None) => {
                    windows.push((kind, onset, step as u64 - onset));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some((kind, onset)) = open {
            windows.push((kind, onset, self.truth.len() as u64 - onset));
        }
        windows
    }
}

/// Standard normal draw, Marsaglia polar method.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Generates a labeled stream: seeded AR(1)-plus-Gaussian baselines with the
/// injections' perturbations superimposed and truth marking every in-window
/// step with its kind.
pub fn generate(
    profile: &WorkflowProfile,
    length: u64,
    injections: &[AnomalyInjection],
    seed: u64,
    step_seconds: f64,
) -> Result<LabeledStream, SimulationError> {
    profile.validate()?;
    if length == 0 {
        return Err(SimulationError::ZeroLength);
    }
    let mut sorted: Vec<&AnomalyInjection> = injections.iter().collect();
    sorted.sort_by_key(|inj| inj.onset);
    for inj in &sorted {
        inj.validate(length)?;
    }
    for pair in sorted.windows(2) {
        if pair[0].onset + pair[0].duration > pair[1].onset {
            return Err(SimulationError::OverlappingInjections {
                a: pair[0].onset,
                b: pair[1].onset,
            });
        }
    }

    let m = profile.metrics.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stationary start: x_0 ~ N(0, sigma^2).
    let mut state: Vec<f64> = (0..m).map(|i| profile.baseline_stds[i] * gaussian(&mut rng)).collect();
    let mut values = Vec::with_capacity(length as usize * m);
    let mut truth = vec![None; length as usize];
    for inj in &sorted {
        for t in inj.onset..inj.onset + inj.duration {
            truth[t as usize] = Some(inj.kind);
        }
    }

    for t in 0..length {
        let active = sorted
            .iter()
            .find(|inj| t >= inj.onset && t < inj.onset + inj.duration);
        let perturbation = active.map(|inj| {
            inject(inj.kind, profile, t, inj.onset, inj.duration, inj.magnitude)
        });
        for i in 0..m {
            if t > 0 {
                let phi = profile.ar_coefficients[i];
                let innovation_scale = profile.baseline_stds[i] * (1.0 - phi * phi).sqrt();
                state[i] = phi * state[i] + innovation_scale * gaussian(&mut rng);
            }
            let mut v = profile.baseline_means[i] + state[i];
            if let Some(p) = &perturbation {
                v += p[i];
            }
            values.push(v);
        }
    }

    Ok(LabeledStream {
        profile: profile.clone(),
        values,
        truth,
        seed,
        step_seconds,
    })
}

fn profile_from_rows(
    name: &str,
    rows: Vec<(&str, Axis, Direction, f64, f64)>,
    phi: f64,
) -> WorkflowProfile {
    let metrics = rows
        .iter()
        .map(|&(n, axis, dir, _, _)| MetricSpec::new(n, axis, dir))
        .collect();
    let baseline_means = rows.iter().map(|r| r.3).collect();
    let baseline_stds = rows.iter().map(|r| r.4).collect();
    let ar_coefficients = vec![phi; rows.len()];
    WorkflowProfile {
        name: name.to_string(),
        metrics,
        baseline_means,
        baseline_stds,
        ar_coefficients,
    }
}

fn modernisation_profile() -> WorkflowProfile {
    use Direction::{HigherIsWorse as Hw, LowerIsWorse as Lw};
    profile_from_rows(
        "modernisation",
        vec![
            ("build_latency_s", Axis::Capability, Hw, 340.0, 42.0),
            ("tasks_per_hour", Axis::Capability, Lw, 12.5, 1.8),
            ("review_pass_rate", Axis::Capability, Lw, 0.82, 0.05),
            ("retry_rate", Axis::Robustness, Hw, 0.06, 0.015),
            ("regression_count", Axis::Robustness, Hw, 2.1, 0.7),
            ("recovery_time_s", Axis::Robustness, Hw, 95.0, 18.0),
            ("policy_violation_rate", Axis::Safety, Hw, 0.012, 0.004),
            ("hallucinated_api_rate", Axis::Safety, Hw, 0.031, 0.008),
            ("license_flag_rate", Axis::Safety, Hw, 0.008, 0.003),
            ("reviewer_trust_score", Axis::Human, Lw, 3.9, 0.35),
            ("override_rate", Axis::Human, Hw, 0.12, 0.03),
            ("clarification_requests", Axis::Human, Hw, 1.4, 0.45),
            ("cost_per_task_usd", Axis::Economic, Hw, 1.9, 0.3),
            ("tokens_per_task", Axis::Economic, Hw, 48_000.0, 7_000.0),
            ("energy_kwh_per_task", Axis::Economic, Hw, 0.92, 0.14),
        ],
        0.6,
    )
}

fn data_quality_profile() -> WorkflowProfile {
    use Direction::{HigherIsWorse as Hw, LowerIsWorse as Lw};
    profile_from_rows(
        "data-quality",
        vec![
            ("scan_latency_s", Axis::Capability, Hw, 58.0, 9.0),
            ("records_per_min", Axis::Capability, Lw, 4_200.0, 520.0),
            ("detection_recall", Axis::Capability, Lw, 0.88, 0.04),
            ("false_merge_rate", Axis::Robustness, Hw, 0.021, 0.006),
            ("schema_drift_errors", Axis::Robustness, Hw, 1.3, 0.5),
            ("reprocess_rate", Axis::Robustness, Hw, 0.045, 0.012),
            ("pii_exposure_rate", Axis::Safety, Hw, 0.004, 0.0015),
            ("toxic_label_rate", Axis::Safety, Hw, 0.009, 0.003),
            ("bias_alert_rate", Axis::Safety, Hw, 0.016, 0.005),
            ("analyst_trust_score", Axis::Human, Lw, 4.1, 0.3),
            ("manual_review_rate", Axis::Human, Hw, 0.18, 0.04),
            ("escalation_count", Axis::Human, Hw, 0.9, 0.35),
            ("cost_per_kilorecord", Axis::Economic, Hw, 0.62, 0.09),
            ("api_calls_per_record", Axis::Economic, Hw, 3.4, 0.5),
            ("energy_kwh_per_run", Axis::Economic, Hw, 1.7, 0.25),
        ],
        0.6,
    )
}

fn credit_memo_profile() -> WorkflowProfile {
    use Direction::{HigherIsWorse as Hw, LowerIsWorse as Lw};
    profile_from_rows(
        "credit-memo",
        vec![
            ("draft_latency_min", Axis::Capability, Hw, 46.0, 7.0),
            ("memos_per_day", Axis::Capability, Lw, 18.0, 2.4),
            ("section_completeness", Axis::Capability, Lw, 0.91, 0.03),
            ("source_mismatch_rate", Axis::Robustness, Hw, 0.034, 0.01),
            ("stale_data_rate", Axis::Robustness, Hw, 0.05, 0.014),
            ("rework_rate", Axis::Robustness, Hw, 0.11, 0.028),
            ("unsupported_claim_rate", Axis::Safety, Hw, 0.018, 0.006),
            ("compliance_flag_rate", Axis::Safety, Hw, 0.007, 0.0025),
            ("fairness_alert_rate", Axis::Safety, Hw, 0.011, 0.004),
            ("banker_trust_score", Axis::Human, Lw, 3.7, 0.4),
            ("confidence_override_rate", Axis::Human, Hw, 0.15, 0.035),
            ("followup_questions", Axis::Human, Hw, 2.2, 0.6),
            ("cost_per_memo_usd", Axis::Economic, Hw, 5.8, 0.85),
            ("tool_calls_per_memo", Axis::Economic, Hw, 41.0, 6.0),
            ("energy_kwh_per_memo", Axis::Economic, Hw, 0.35, 0.06),
        ],
        0.6,
    )
}

//! The five monitored axes and the metric specifications that map raw
//! telemetry onto them.

use serde::{Deserialize, Serialize};
use std::fmt;

/// The five evaluation dimensions every monitored stream is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Capability,
    Robustness,
    Safety,
    Human,
    Economic,
}

pub const AXIS_COUNT: usize = 5;

impl Axis {
    pub const ALL: [Axis; AXIS_COUNT] = [
        Axis::Capability,
        Axis::Robustness,
        Axis::Safety,
        Axis::Human,
        Axis::Economic,
    ];

    pub fn index(self) -> usize {
        match self {
            Axis::Capability => 0,
            Axis::Robustness => 1,
            Axis::Safety => 2,
            Axis::Human => 3,
            Axis::Economic => 4,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Capability => "capability",
            Axis::Robustness => "robustness",
            Axis::Safety => "safety",
            Axis::Human => "human",
            Axis::Economic => "economic",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Small set of axes, used for per-step flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxisSet(u8);

impl AxisSet {
    pub const EMPTY: AxisSet = AxisSet(0);

    pub fn insert(&mut self, axis: Axis) {
        self.0 |= 1 << axis.index();
    }

    pub fn contains(&self, axis: Axis) -> bool {
        self.0 & (1 << axis.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = Axis> + '_ {
        Axis::ALL.into_iter().filter(|a| self.contains(*a))
    }
}

impl FromIterator<Axis> for AxisSet {
    fn from_iter<T: IntoIterator<Item = Axis>>(iter: T) -> Self {
        let mut set = AxisSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl Serialize for AxisSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for AxisSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let axes = Vec::<Axis>::deserialize(deserializer)?;
        Ok(axes.into_iter().collect())
    }
}

/// Whether larger raw values are bad (latency, cost) or good (throughput,
/// trust); aggregation sign-adjusts so every axis score grows with badness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HigherIsWorse,
    LowerIsWorse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::HigherIsWorse => 1.0,
            Direction::LowerIsWorse => -1.0,
        }
    }
}

/// One registered metric: its name, axis assignment, direction, and
/// aggregation weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub axis: Axis,
    pub direction: Direction,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl MetricSpec {
    pub fn new(name: impl Into<String>, axis: Axis, direction: Direction) -> Self {
        MetricSpec { name: name.into(), axis, direction, weight: 1.0 }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// The four injected anomaly classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyKind {
    GoalDrift,
    SafetyViolation,
    TrustShock,
    CostSpike,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 4] = [
        AnomalyKind::GoalDrift,
        AnomalyKind::SafetyViolation,
        AnomalyKind::TrustShock,
        AnomalyKind::CostSpike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::GoalDrift => "goal-drift",
            AnomalyKind::SafetyViolation => "safety-violation",
            AnomalyKind::TrustShock => "trust-shock",
            AnomalyKind::CostSpike => "cost-spike",
        }
    }

    /// Axes a default injection of this kind perturbs. Goal drift is a ramp
    /// across capability and robustness; the other three are steps on a
    /// single axis.
    pub fn default_axes(self) -> &'static [Axis] {
        match self {
            AnomalyKind::GoalDrift => &[Axis::Capability, Axis::Robustness],
            AnomalyKind::SafetyViolation => &[Axis::Safety],
            AnomalyKind::TrustShock => &[Axis::Human],
            AnomalyKind::CostSpike => &[Axis::Economic],
        }
    }

    /// Gradual anomalies ramp in; sudden ones arrive as steps.
    pub fn is_gradual(self) -> bool {
        matches!(self, AnomalyKind::GoalDrift)
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four detectors the evaluation harness compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Static,
    EwmaOnly,
    MahalanobisOnly,
    Amdm,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Static,
        DetectorKind::EwmaOnly,
        DetectorKind::MahalanobisOnly,
        DetectorKind::Amdm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Static => "static",
            DetectorKind::EwmaOnly => "ewma-only",
            DetectorKind::MahalanobisOnly => "mahalanobis-only",
            DetectorKind::Amdm => "amdm",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(DetectorKind::Static),
            "ewma-only" => Ok(DetectorKind::EwmaOnly),
            "mahalanobis-only" => Ok(DetectorKind::MahalanobisOnly),
            "amdm" => Ok(DetectorKind::Amdm),
            other => Err(format!(
                "unknown detector {other:?}; expected one of static, ewma-only, mahalanobis-only, amdm"
            )),
        }
    }
}

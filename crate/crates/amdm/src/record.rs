//! The on-disk interchange format: JSONL event streams with a versioned
//! schema header line, one event record per line (timestamp, metric vector,
//! truth label, and optional per-detector decisions), plus atomic file
//! writes for every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{AnomalyKind, AxisSet, DetectorKind};
use crate::detector::{MetricSample, Verdict};
use crate::simulator::LabeledStream;

pub const SCHEMA_VERSION: &str = "amdm.events.v1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("missing schema header line")]
    MissingHeader,
}

/// First line of every stream file: schema version and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub schema: String,
    pub profile: String,
    pub seed: u64,
    pub step_seconds: f64,
    /// Steps before this index are the quiet prefix used for warm-up and
    /// calibration; evaluation measures from here on.
    pub quiet_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<AnomalyKind>,
}

/// Per-detector decision summary embedded in annotated streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub axis_flags: AxisSet,
    pub joint: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    pub score: f64,
    pub alarm: bool,
}

impl From<&Verdict> for DecisionSummary {
    fn from(v: &Verdict) -> Self {
        DecisionSummary {
            axis_flags: v.detection.axis_flags,
            joint: v.detection.joint_flag,
            d2: v.detection.d_squared,
            score: v.score,
            alarm: v.alarm,
        }
    }
}

/// One log row. Field names are fixed; strict parsing rejects unknown ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub step: u64,
    /// Seconds since stream start; step * step_seconds.
    pub timestamp: f64,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<AnomalyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<BTreeMap<DetectorKind, DecisionSummary>>,
}

impl EventRecord {
    pub fn sample(&self) -> MetricSample {
        MetricSample { step: self.step, values: self.metrics.clone() }
    }
}

const EVENT_FIELDS: [&str; 5] = ["step", "timestamp", "metrics", "label", "decisions"];
const HEADER_FIELDS: [&str; 6] =
    ["schema", "profile", "seed", "step_seconds", "quiet_steps", "scenario"];

/// A parsed stream: header plus records.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub records: Vec<EventRecord>,
}

impl EventStream {
    pub fn from_labeled(stream: &LabeledStream, scenario: Option<AnomalyKind>, quiet_steps: u64) -> Self {
        let header = StreamHeader {
            schema: SCHEMA_VERSION.to_string(),
            profile: stream.profile.name.clone(),
            seed: stream.seed,
            step_seconds: stream.step_seconds,
            quiet_steps,
            scenario,
        };
        let records = (0..stream.len())
            .map(|t| EventRecord {
                step: t as u64,
                timestamp: t as f64 * stream.step_seconds,
                metrics: stream.sample(t).values,
                label: stream.truth[t],
                decisions: None,
            })
            .collect();
        EventStream { header, records }
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(serde_json::to_string(&self.header).unwrap().as_bytes());
        out.push(b'\n');
        for record in &self.records {
            out.extend_from_slice(serde_json::to_string(record).unwrap().as_bytes());
            out.push(b'\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), RecordError> {
        write_atomic(path, &self.to_jsonl())?;
        Ok(())
    }
}

fn unknown_field_check(
    value: &serde_json::Value,
    allowed: &[&str],
    line: usize,
) -> Result<(), RecordError> {
    let obj = value.as_object().ok_or_else(|| RecordError::Schema {
        line,
        message: "expected a JSON object".into(),
    })?;
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(RecordError::Schema {
                line,
                message: format!("unknown field {key:?} (strict mode)"),
            });
        }
    }
    Ok(())
}

/// Parses a JSONL stream. Strict mode rejects unknown fields, requires the
/// versioned header, and enforces strictly increasing steps and
/// non-decreasing timestamps; lenient mode skips the unknown-field check.
/// Errors carry the 1-based line number.
pub fn parse_stream(bytes: &[u8], strict: bool) -> Result<EventStream, RecordError> {
    let reader = BufReader::new(bytes);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or(RecordError::MissingHeader)?;
    let first = first?;
    let header_value: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| RecordError::Parse { line: 1, message: e.to_string() })?;
    if strict {
        unknown_field_check(&header_value, &HEADER_FIELDS, 1)?;
    }
    let header: StreamHeader = serde_json::from_value(header_value)
        .map_err(|e| RecordError::Parse { line: 1, message: e.to_string() })?;
    if header.schema != SCHEMA_VERSION {
        return Err(RecordError::Schema {
            line: 1,
            message: format!("unsupported schema {:?}, expected {SCHEMA_VERSION:?}", header.schema),
        });
    }

    let mut records = Vec::new();
    let mut last: Option<(u64, f64)> = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| RecordError::Parse { line: line_no, message: e.to_string() })?;
        if strict {
            unknown_field_check(&value, &EVENT_FIELDS, line_no)?;
        }
        let record: EventRecord = serde_json::from_value(value)
            .map_err(|e| RecordError::Parse { line: line_no, message: e.to_string() })?;
        if let Some((last_step, last_ts)) = last {
            if record.step <= last_step {
                return Err(RecordError::Schema {
                    line: line_no,
                    message: format!("step {} does not increase past {}", record.step, last_step),
                });
            }
            if record.timestamp < last_ts {
                return Err(RecordError::Schema {
                    line: line_no,
                    message: format!(
                        "timestamp {} decreases below {}",
                        record.timestamp, last_ts
                    ),
                });
            }
        }
        last = Some((record.step, record.timestamp));
        records.push(record);
    }
    Ok(EventStream { header, records })
}

pub fn read_stream(path: &Path, strict: bool) -> Result<EventStream, RecordError> {
    let bytes = fs::read(path)?;
    parse_stream(&bytes, strict)
}

/// Write-then-rename so readers never observe partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::Axis;

    fn record(step: u64) -> EventRecord {
        let mut metrics = BTreeMap::new();
        metrics.insert("lat".into(), 0.1234567890123 * step as f64);
        metrics.insert("thr".into(), -7.25);
        let mut decisions = BTreeMap::new();
        let mut flags = AxisSet::EMPTY;
        flags.insert(Axis::Safety);
        decisions.insert(
            DetectorKind::Amdm,
            DecisionSummary { axis_flags: flags, joint: true, d2: Some(17.25), score: 17.25, alarm: true },
        );
        EventRecord {
            step,
            timestamp: step as f64 * 0.5,
            metrics,
            label: Some(AnomalyKind::TrustShock),
            decisions: Some(decisions),
        }
    }

    fn header() -> StreamHeader {
        StreamHeader {
            schema: SCHEMA_VERSION.into(),
            profile: "modernisation".into(),
            seed: 1337,
            step_seconds: 0.5,
            quiet_steps: 10,
            scenario: Some(AnomalyKind::TrustShock),
        }
    }

    #[test]
    fn record_roundtrips_losslessly() {
        let r = record(42);
        let json = serde_json::to_string(&r).unwrap();
        let back: EventRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn stream_roundtrips_and_is_deterministic() {
        let stream = EventStream { header: header(), records: (0..5).map(record).collect() };
        let a = stream.to_jsonl();
        let b = stream.to_jsonl();
        assert_eq!(a, b);
        let parsed = parse_stream(&a, true).unwrap();
        assert_eq!(parsed, stream);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let stream = EventStream { header: header(), records: (0..5).map(record).collect() };
        let mut bytes = stream.to_jsonl();
        // Corrupt the record on line 4 (header is line 1).
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "{not json";
        bytes = lines.join("\n").into_bytes();
        let err = parse_stream(&bytes, true).unwrap_err();
        match err {
            RecordError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn strict_mode_rejects_unknown_fields() {
        let stream = EventStream { header: header(), records: vec![record(0)] };
        let text = String::from_utf8(stream.to_jsonl()).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[1] = lines[1].replacen("{", "{\"surprise\":1,", 1);
        let bytes = lines.join("\n").into_bytes();
        assert!(matches!(
            parse_stream(&bytes, true),
            Err(RecordError::Schema { line: 2, .. })
        ));
        // Lenient mode tolerates it.
        assert!(parse_stream(&bytes, false).is_ok());
    }

    #[test]
    fn non_increasing_steps_rejected() {
        let stream = EventStream {
            header: header(),
            records: vec![record(3), record(3)],
        };
        let err = parse_stream(&stream.to_jsonl(), true).unwrap_err();
        assert!(matches!(err, RecordError::Schema { line: 3, .. }));
    }

    #[test]
    fn atomic_write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("stream.jsonl");
        let stream = EventStream { header: header(), records: (0..3).map(record).collect() };
        stream.write(&path).unwrap();
        let back = read_stream(&path, true).unwrap();
        assert_eq!(back, stream);
    }
}

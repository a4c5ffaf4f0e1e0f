//! Report envelope, timing log and CSV writers.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::conjugacy::ConjugacySample;
use crate::polyline::LeafPolyline;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl CheckEntry {
    pub fn new(name: &str, passed: bool, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            tolerance,
            tail_bound: None,
            detail: Value::Null,
        }
    }

    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value <= tolerance, value, tolerance)
    }

    /// Passes when `value > bound`.
    pub fn above(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value > bound, value, bound)
    }

    pub fn with_tail(mut self, tail: f64) -> Self {
        self.tail_bound = Some(tail);
        self
    }

    pub fn with_detail<T: Serialize>(mut self, detail: &T) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }

    pub fn failed(name: &str, error: &str) -> Self {
        Self::new(name, false, f64::NAN, f64::NAN)
            .with_detail(&serde_json::json!({ "error": error }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageEntry {
    pub name: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEnvelope {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageEntry>,
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopped_at: Option<String>,
    pub passed: bool,
}

impl ReportEnvelope {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.into(),
            config: config.clone(),
            stages: Vec::new(),
            checks: Vec::new(),
            stopped_at: None,
            passed: true,
        }
    }

    pub fn check(&mut self, c: CheckEntry) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn stage_ok(&mut self, name: &str) {
        self.stages.push(StageEntry {
            name: name.into(),
            status: StageStatus::Ok,
            error: None,
        });
    }

    /// Records a stage error; later stages are marked skipped by the caller.
    pub fn stage_failed(&mut self, name: &str, error: impl ToString) {
        self.passed = false;
        self.stopped_at.get_or_insert_with(|| name.to_string());
        self.stages.push(StageEntry {
            name: name.into(),
            status: StageStatus::Failed,
            error: Some(error.to_string()),
        });
    }

    pub fn stage_skipped(&mut self, name: &str) {
        self.stages.push(StageEntry {
            name: name.into(),
            status: StageStatus::Skipped,
            error: None,
        });
    }

    pub fn find(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

/// Wall-clock durations per stage, kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub experiment: String,
    pub stages: Vec<(String, f64)>,
    #[serde(skip)]
    started: Option<(String, Instant)>,
}

impl Timing {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            stages: Vec::new(),
            started: None,
        }
    }

    pub fn start(&mut self, name: &str) {
        self.stop();
        self.started = Some((name.into(), Instant::now()));
    }

    pub fn stop(&mut self) {
        if let Some((name, t)) = self.started.take() {
            self.stages.push((name, t.elapsed().as_secs_f64()));
        }
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.1).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("timing serialises");
        s.push('\n');
        s
    }
}

#[derive(Serialize)]
struct LeafRow<'a> {
    leaf_id: &'a str,
    t: f64,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct HRow {
    leaf_id: usize,
    s: f64,
    x: f64,
    y: f64,
    hx: f64,
    hy: f64,
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// `leaf_id,t,x,y` with `t` the arclength from the first vertex.
pub fn leaves_csv<'a>(leaves: impl IntoIterator<Item = (String, &'a LeafPolyline)>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut empty = true;
    for (id, l) in leaves {
        for (&t, v) in l.arclength().iter().zip(l.vertices()) {
            w.serialize(LeafRow {
                leaf_id: &id,
                t,
                x: v.x,
                y: v.y,
            })
            .expect("in-memory writer");
            empty = false;
        }
    }
    if empty {
        return "leaf_id,t,x,y\n".into();
    }
    into_string(w)
}

/// `leaf_id,s,x,y,hx,hy`.
pub fn h_samples_csv(samples: &[ConjugacySample]) -> String {
    if samples.is_empty() {
        return "leaf_id,s,x,y,hx,hy\n".into();
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in samples {
        w.serialize(HRow {
            leaf_id: c.leaf_id,
            s: c.s,
            x: c.p[0],
            y: c.p[1],
            hx: c.h[0],
            hy: c.h[1],
        })
        .expect("in-memory writer");
    }
    into_string(w)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn envelope_tracks_failures() {
        let cfg = ExperimentConfig::default();
        let mut r = ReportEnvelope::new("demo", &cfg);
        r.check(CheckEntry::at_most("small", 1e-9, 1e-6));
        assert!(r.passed);
        r.check(CheckEntry::above("big", 0.5, 1.0));
        assert!(!r.passed);
        let j = r.to_json();
        assert!(j.contains("\"name\": \"small\""));
        assert!(!j.contains("tail_bound"));
        r.stage_failed("cone", "margin negative");
        assert_eq!(r.stopped_at.as_deref(), Some("cone"));
    }

    #[test]
    fn csv_layout() {
        let l = LeafPolyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)]).unwrap();
        let s = leaves_csv([("c0".to_string(), &l)]);
        assert_eq!(s, "leaf_id,t,x,y\nc0,0.0,0.0,0.0\nc0,5.0,3.0,4.0\n");
        assert_eq!(leaves_csv(std::iter::empty()), "leaf_id,t,x,y\n");
        let h = h_samples_csv(&[ConjugacySample {
            leaf_id: 2,
            s: 0.5,
            p: [1.0, 2.0],
            h: [1.5, 2.5],
            t_used: 1.1,
        }]);
        assert_eq!(h, "leaf_id,s,x,y,hx,hy\n2,0.5,1.0,2.0,1.5,2.5\n");
    }
}

use std::collections::BTreeMap;
use std::time::Duration;

use ppgvc_core::pipeline::{latency_of, LatencyBudget, Mode, StageTimings};
use serde::Serialize;

/// Summary of one run, printed as a single JSON object on stderr.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub command: &'static str,
    pub mode: String,
    pub audio_seconds: f64,
    pub processing_seconds: f64,
    /// Processing time over audio duration.
    pub rtf: f64,
    pub latency_ms: f64,
    pub frames: usize,
    /// Seconds per pipeline stage.
    pub stages: BTreeMap<&'static str, f64>,
}

impl RunReport {
    pub fn new(
        command: &'static str,
        mode: Mode,
        audio_seconds: f64,
        wall: Duration,
        frames: usize,
        timings: &StageTimings,
    ) -> Self {
        let processing_seconds = wall.as_secs_f64();
        Self {
            command,
            mode: mode.to_string(),
            audio_seconds,
            processing_seconds,
            rtf: if audio_seconds > 0.0 { processing_seconds / audio_seconds } else { 0.0 },
            latency_ms: latency_of(&LatencyBudget::for_mode(mode)),
            frames,
            stages: timings.rows().iter().map(|(k, d)| (*k, d.as_secs_f64())).collect(),
        }
    }

    pub fn stage_total(&self) -> f64 {
        self.stages.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

//! Cooperative time limits and anytime traces shared by all solvers.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Best objective known at some elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub elapsed_ms: f64,
    pub sse: f64,
}

/// Deadline plus incumbent trace for one solver run. Solvers poll
/// [`RunControl::expired`] between iterations and report incumbents through
/// [`RunControl::record`].
#[derive(Debug, Clone)]
pub struct RunControl {
    start: Instant,
    deadline: Option<Instant>,
    trace: Vec<TracePoint>,
}

impl Default for RunControl {
    fn default() -> Self {
        Self::unlimited()
    }
}

impl RunControl {
    pub fn unlimited() -> Self {
        Self { start: Instant::now(), deadline: None, trace: Vec::new() }
    }

    pub fn with_limit(limit: Duration) -> Self {
        let start = Instant::now();
        Self { start, deadline: Some(start + limit), trace: Vec::new() }
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    /// Appends a trace point if `sse` improves on the last one.
    pub fn record(&mut self, sse: f64) {
        if self.trace.last().is_some_and(|t| sse >= t.sse) {
            return;
        }
        let elapsed_ms = self.start.elapsed().as_secs_f64() * 1e3;
        self.trace.push(TracePoint { elapsed_ms, sse });
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TracePoint> {
        self.trace
    }
}

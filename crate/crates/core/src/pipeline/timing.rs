//! Stage timing.
//!
//! Barrier modes report each stage's wall time. Overlapped (streaming) runs
//! report the sum of per-batch durations divided by the stage's worker count;
//! `total_s` is always end-to-end wall time.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Load,
    Transform,
    Embed,
    Upsert,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Load, Stage::Transform, Stage::Embed, Stage::Upsert];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Transform => "transform",
            Stage::Embed => "embed",
            Stage::Upsert => "upsert",
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// Run `work` and return its result with the monotonic wall time it took.
pub fn measure_stage<R>(label: &str, work: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let out = work();
    let d = t.elapsed();
    log::trace!("stage {label}: {:.6} s", d.as_secs_f64());
    (out, d)
}

#[derive(Debug, Default)]
struct StageClock {
    busy_ns: AtomicU64,
    items: AtomicU64,
    samples: Mutex<Vec<Duration>>,
    /// First sample start and last sample end.
    span: Mutex<Option<(Instant, Instant)>>,
}

/// Thread-safe per-stage sample collector with progress counters.
#[derive(Debug)]
pub struct StageRecorder {
    origin: Instant,
    clocks: [StageClock; 4],
}

impl Default for StageRecorder {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
            clocks: Default::default(),
        }
    }
}

impl StageRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a sample of duration `d` that ended just now.
    pub fn record(&self, stage: Stage, d: Duration, items: u64) {
        let c = &self.clocks[stage.idx()];
        c.busy_ns.fetch_add(d.as_nanos() as u64, Ordering::Relaxed);
        c.items.fetch_add(items, Ordering::Relaxed);
        c.samples.lock().expect("samples lock").push(d);
        let end = Instant::now();
        let start = end.checked_sub(d).unwrap_or(end);
        let mut span = c.span.lock().expect("span lock");
        *span = Some(match *span {
            None => (start, end),
            Some((s, e)) => (s.min(start), e.max(end)),
        });
    }

    /// Offsets of the stage's first sample start and last sample end from
    /// the recorder's creation.
    pub fn span(&self, stage: Stage) -> Option<(Duration, Duration)> {
        let span = *self.clocks[stage.idx()].span.lock().expect("span lock");
        span.map(|(s, e)| {
            (
                s.saturating_duration_since(self.origin),
                e.saturating_duration_since(self.origin),
            )
        })
    }

    pub fn measure<R>(&self, stage: Stage, items: u64, work: impl FnOnce() -> R) -> R {
        let (out, d) = measure_stage(stage.label(), work);
        self.record(stage, d, items);
        out
    }

    pub fn busy(&self, stage: Stage) -> Duration {
        Duration::from_nanos(self.clocks[stage.idx()].busy_ns.load(Ordering::Relaxed))
    }

    pub fn items(&self, stage: Stage) -> u64 {
        self.clocks[stage.idx()].items.load(Ordering::Relaxed)
    }

    pub fn samples(&self, stage: Stage) -> Vec<Duration> {
        self.clocks[stage.idx()].samples.lock().expect("samples lock").clone()
    }

    /// Monotone progress fingerprint across all stages.
    pub fn progress(&self) -> u64 {
        Stage::ALL.iter().map(|&s| self.items(s)).sum()
    }

    pub fn diagnostics(&self) -> String {
        Stage::ALL
            .iter()
            .map(|&s| format!("{}: {} items", s.label(), self.items(s)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StageTimings {
    pub load_s: f64,
    pub transform_s: f64,
    pub embed_s: f64,
    pub upsert_s: f64,
    pub total_s: f64,
    pub chunk_count: usize,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.load_s + self.transform_s + self.embed_s + self.upsert_s
    }

    pub fn get(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Load => self.load_s,
            Stage::Transform => self.transform_s,
            Stage::Embed => self.embed_s,
            Stage::Upsert => self.upsert_s,
        }
    }

    pub fn set(&mut self, stage: Stage, secs: f64) {
        match stage {
            Stage::Load => self.load_s = secs,
            Stage::Transform => self.transform_s = secs,
            Stage::Embed => self.embed_s = secs,
            Stage::Upsert => self.upsert_s = secs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_work_is_fast() {
        let ((), d) = measure_stage("noop", || ());
        assert!(d < Duration::from_millis(1));
    }

    #[test]
    fn repeated_stage_keeps_samples() {
        let r = StageRecorder::new();
        r.measure(Stage::Embed, 2, || std::thread::sleep(Duration::from_millis(2)));
        r.measure(Stage::Embed, 3, || ());
        assert_eq!(r.samples(Stage::Embed).len(), 2);
        assert_eq!(r.items(Stage::Embed), 5);
        assert!(r.busy(Stage::Embed) >= Duration::from_millis(2));
        assert_eq!(r.progress(), 5);
        assert!(r.diagnostics().contains("embed: 5 items"));
        let (start, end) = r.span(Stage::Embed).unwrap();
        assert!(end - start >= Duration::from_millis(2));
        assert!(r.span(Stage::Load).is_none());
    }
}

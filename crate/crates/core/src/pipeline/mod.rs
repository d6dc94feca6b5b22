//! Load -> Transform -> Embed -> Upsert execution under five scheduling modes.
//!
//! | mode | load | transform | embed | upsert |
//! |---|---|---|---|---|
//! | `sequential` | serial | serial | serial, batch 1 | serial |
//! | `reader-parallel` | W readers | serial | serial, batch 1 | serial |
//! | `pipeline-parallel-sync` | W readers | W workers | E workers, batch BE | U workers |
//! | `async-parallel-only` | serial | serial | per item, at most E in flight | serial |
//! | `streaming` | 1 loader | W workers | E workers, batch BE | U workers, coalesced |
//!
//! W = `workers`, E = `embed_workers`, U = `upsert_workers`.
//! Every barrier-separated mode finishes a stage before starting the next.
//! Streaming connects stages with bounded channels so they overlap.

mod channel;
mod timing;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_document, load_documents, split_by_delimiter, ChunkRecord, CorpusManifest, Document};
use crate::embedder::{Embedder, EmbedderConfig, Embedding, LatencyParams, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::vecindex::{coalesce_upserts, FlatIndex, Metric, VectorIndex};

pub use channel::{bounded_channel, Consumer, Producer};
pub use timing::{measure_stage, Stage, StageRecorder, StageTimings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sequential,
    ReaderParallel,
    PipelineParallelSync,
    AsyncParallelOnly,
    Streaming,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Sequential,
        Mode::ReaderParallel,
        Mode::PipelineParallelSync,
        Mode::AsyncParallelOnly,
        Mode::Streaming,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Sequential => "sequential",
            Mode::ReaderParallel => "reader-parallel",
            Mode::PipelineParallelSync => "pipeline-parallel-sync",
            Mode::AsyncParallelOnly => "async-parallel-only",
            Mode::Streaming => "streaming",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Mode::ALL
            .into_iter()
            .find(|m| m.name().replace('-', "") == key)
            .ok_or_else(|| {
                let valid: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!("unknown mode {s:?}; valid modes: {}", valid.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub workers: usize,
    pub embed_workers: usize,
    pub upsert_workers: usize,
    pub embed_batch: usize,
    pub upsert_batch: usize,
    pub queue_capacity: usize,
    pub coalesce_target: usize,
    pub latency: LatencyParams,
    pub dim: usize,
    pub metric: Metric,
    pub seed: u64,
    pub watchdog_ms: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Streaming,
            workers: 16,
            embed_workers: 32,
            upsert_workers: 16,
            embed_batch: 32,
            upsert_batch: 64,
            queue_capacity: 2,
            coalesce_target: 128,
            latency: LatencyParams::default(),
            dim: DEFAULT_DIM,
            metric: Metric::Ip,
            seed: 42,
            watchdog_ms: 30_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("workers", self.workers),
            ("embed_workers", self.embed_workers),
            ("upsert_workers", self.upsert_workers),
            ("embed_batch", self.embed_batch),
            ("upsert_batch", self.upsert_batch),
            ("queue_capacity", self.queue_capacity),
            ("coalesce_target", self.coalesce_target),
            ("dim", self.dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        self.latency.validate()
    }

    pub fn embedder(&self) -> Result<Embedder> {
        Ok(Embedder::new(EmbedderConfig {
            dim: self.dim,
            latency: self.latency,
            normalize: self.metric == Metric::Ip,
        })?
        .with_exec(Exec::Serial))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: PipelineConfig,
    pub timings: StageTimings,
    pub index_size: usize,
    pub speedup_vs: BTreeMap<String, f64>,
}

/// Index partitions behind one lock each; ids route by `id mod partitions`.
struct IndexSink {
    parts: Vec<Mutex<FlatIndex>>,
    sharded: bool,
}

impl IndexSink {
    fn new(index: VectorIndex) -> Self {
        let sharded = matches!(index, VectorIndex::Sharded(_));
        Self {
            parts: index.into_partitions().into_iter().map(Mutex::new).collect(),
            sharded,
        }
    }

    fn add(&self, items: Vec<(u64, Embedding)>) -> Result<()> {
        let n = self.parts.len() as u64;
        if n == 1 {
            return self.parts[0].lock().expect("index lock").add_batch(&items);
        }
        let mut routed: Vec<Vec<(u64, Embedding)>> = vec![Vec::new(); self.parts.len()];
        for item in items {
            routed[(item.0 % n) as usize].push(item);
        }
        for (part, batch) in self.parts.iter().zip(routed) {
            if !batch.is_empty() {
                part.lock().expect("index lock").add_batch(&batch)?;
            }
        }
        Ok(())
    }

    fn into_index(self) -> Result<VectorIndex> {
        let parts = self
            .parts
            .into_iter()
            .map(|m| m.into_inner().expect("index lock"))
            .collect();
        VectorIndex::from_partitions(parts, self.sharded)
    }
}

/// Run `f` over `items` on `workers` scoped threads pulling from a shared cursor.
fn parallel_for<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() || failed.load(Ordering::Relaxed) {
                    break;
                }
                let r = f(&items[i]);
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .filter_map(|s| s.into_inner().expect("slot lock"))
        .collect()
}

fn split_all(docs: &[Document], delimiter: &str) -> Vec<ChunkRecord> {
    docs.iter().flat_map(|d| split_by_delimiter(d, delimiter)).collect()
}

fn upsert_serial(sink: &IndexSink, embedded: Vec<(u64, Embedding)>, batch: usize) -> Result<()> {
    for b in coalesce_upserts(embedded, batch)? {
        sink.add(b)?;
    }
    Ok(())
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Ingest the corpus into `index` (which must be empty) under `cfg.mode`.
/// Returns the timings and the filled index.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    corpus: &CorpusManifest,
    index: VectorIndex,
) -> Result<(BenchmarkResult, VectorIndex)> {
    cfg.validate()?;
    if !index.is_empty() {
        return Err(Error::InvalidArgument("pipeline requires an empty index".into()));
    }
    if index.dim() != cfg.dim || index.metric() != cfg.metric {
        return Err(Error::InvalidArgument(format!(
            "index (dim {}, {}) does not match config (dim {}, {})",
            index.dim(),
            index.metric().name(),
            cfg.dim,
            cfg.metric.name()
        )));
    }
    let embedder = cfg.embedder()?;
    let sink = IndexSink::new(index);
    let delimiter = corpus.spec.delimiter.as_str();

    let start = Instant::now();
    let mut timings = match cfg.mode {
        Mode::Streaming => run_streaming(cfg, corpus, &embedder, &sink)?,
        mode => run_barrier(mode, cfg, corpus, delimiter, &embedder, &sink)?,
    };
    timings.total_s = secs(start.elapsed());

    let index = sink.into_index()?;
    let expected = corpus.total_nodes();
    if timings.chunk_count != expected || index.len() != expected {
        return Err(Error::Invariant(format!(
            "expected {expected} chunks, transformed {} and indexed {}",
            timings.chunk_count,
            index.len()
        )));
    }
    let result = BenchmarkResult {
        config: cfg.clone(),
        timings,
        index_size: index.len(),
        speedup_vs: BTreeMap::new(),
    };
    Ok((result, index))
}

fn run_barrier(
    mode: Mode,
    cfg: &PipelineConfig,
    corpus: &CorpusManifest,
    delimiter: &str,
    embedder: &Embedder,
    sink: &IndexSink,
) -> Result<StageTimings> {
    let p = cfg.workers;
    let mut t = StageTimings::default();

    let readers = match mode {
        Mode::ReaderParallel | Mode::PipelineParallelSync => p,
        _ => 1,
    };
    let (docs, d) = measure_stage("load", || load_documents(corpus, readers));
    let docs = docs?;
    t.load_s = secs(d);

    let (chunks, d) = measure_stage("transform", || -> Result<Vec<ChunkRecord>> {
        if mode == Mode::PipelineParallelSync {
            let parts = parallel_for(&docs, p, |doc| Ok(split_by_delimiter(doc, delimiter)))?;
            Ok(parts.concat())
        } else {
            Ok(split_all(&docs, delimiter))
        }
    });
    let chunks = chunks?;
    t.transform_s = secs(d);
    t.chunk_count = chunks.len();
    drop(docs);

    let (embedded, d) = measure_stage("embed", || -> Result<Vec<(u64, Embedding)>> {
        let embed = |batch: &[ChunkRecord]| -> Vec<(u64, Embedding)> {
            let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
            batch
                .iter()
                .map(|c| c.chunk_id)
                .zip(embedder.embed_batch(&texts))
                .collect()
        };
        match mode {
            Mode::PipelineParallelSync => {
                let batches: Vec<&[ChunkRecord]> = chunks.chunks(cfg.embed_batch).collect();
                Ok(parallel_for(&batches, cfg.embed_workers, |b| Ok(embed(b)))?.concat())
            }
            Mode::AsyncParallelOnly => {
                Ok(parallel_for(&chunks, cfg.embed_workers, |c| Ok(embed(std::slice::from_ref(c))))?.concat())
            }
            _ => Ok(chunks.iter().flat_map(|c| embed(std::slice::from_ref(c))).collect()),
        }
    });
    let embedded = embedded?;
    t.embed_s = secs(d);

    let (done, d) = measure_stage("upsert", || -> Result<()> {
        if mode == Mode::PipelineParallelSync {
            let batches = coalesce_upserts(embedded, cfg.upsert_batch)?;
            let batches: Vec<Mutex<Option<Embedded>>> = batches.into_iter().map(|b| Mutex::new(Some(b))).collect();
            parallel_for(&batches, cfg.upsert_workers, |b| {
                let items = b.lock().expect("batch lock").take().unwrap_or_default();
                sink.add(items)
            })?;
            Ok(())
        } else {
            upsert_serial(sink, embedded, cfg.upsert_batch)
        }
    });
    done?;
    t.upsert_s = secs(d);
    Ok(t)
}

type Batch = Vec<ChunkRecord>;
type Embedded = Vec<(u64, Embedding)>;

/// Shared failure slot; the first error wins and cancels every worker.
struct Abort<'a> {
    cancel: &'a AtomicBool,
    error: Mutex<Option<Error>>,
}

impl Abort<'_> {
    fn fail(&self, e: Error) {
        let mut slot = self.error.lock().expect("error lock");
        if slot.is_none() {
            *slot = Some(e);
        }
        self.cancel.store(true, Ordering::Relaxed);
    }

    fn check(&self, r: Result<bool>) -> bool {
        match r {
            Ok(sent) => sent,
            Err(e) => {
                self.fail(e);
                false
            }
        }
    }
}

fn run_streaming(
    cfg: &PipelineConfig,
    corpus: &CorpusManifest,
    embedder: &Embedder,
    sink: &IndexSink,
) -> Result<StageTimings> {
    let cap = cfg.queue_capacity;
    let delimiter = corpus.spec.delimiter.as_str();
    let cancel = AtomicBool::new(false);
    let abort = Abort {
        cancel: &cancel,
        error: Mutex::new(None),
    };
    let rec = StageRecorder::new();
    let chunk_count = AtomicUsize::new(0);
    let finished = AtomicUsize::new(0);

    let (doc_tx, doc_rx) = bounded_channel::<Document>(cap)?;
    let (chunk_tx, chunk_rx) = bounded_channel::<Vec<ChunkRecord>>(cap)?;
    let (batch_tx, batch_rx) = bounded_channel::<Batch>(cap)?;
    let (emb_tx, emb_rx) = bounded_channel::<Embedded>(cap)?;
    let (ups_tx, ups_rx) = bounded_channel::<Embedded>(cap)?;

    let threads = 1 + cfg.workers + 1 + cfg.embed_workers + 1 + cfg.upsert_workers;
    let mut stall: Option<(Duration, String)> = None;

    std::thread::scope(|s| {
        let (abort, rec, cancel, finished, chunk_count) = (&abort, &rec, &cancel, &finished, &chunk_count);

        // loader
        {
            let tx = doc_tx;
            s.spawn(move || {
                for i in 0..corpus.files.len() {
                    let doc = match rec.measure(Stage::Load, 1, || load_document(corpus, i)) {
                        Ok(d) => d,
                        Err(e) => {
                            abort.fail(e);
                            break;
                        }
                    };
                    if !abort.check(tx.send_cancellable(doc, cancel)) {
                        break;
                    }
                }
                finished.fetch_add(1, Ordering::Relaxed);
            });
        }

        // transform workers
        for _ in 0..cfg.workers {
            let (rx, tx) = (doc_rx.clone(), chunk_tx.clone());
            s.spawn(move || {
                while let Some(doc) = rx.recv_cancellable(cancel) {
                    let chunks = rec.measure(Stage::Transform, 1, || split_by_delimiter(&doc, delimiter));
                    chunk_count.fetch_add(chunks.len(), Ordering::Relaxed);
                    // one message per document keeps channel traffic off the per-chunk path
                    if !abort.check(tx.send_cancellable(chunks, cancel)) {
                        break;
                    }
                }
                finished.fetch_add(1, Ordering::Relaxed);
            });
        }
        drop((doc_rx, chunk_tx));

        // micro-batcher: chunks -> BE-sized batches
        {
            let (rx, tx) = (chunk_rx, batch_tx);
            let be = cfg.embed_batch;
            s.spawn(move || {
                let mut pending: Batch = Vec::with_capacity(be);
                let mut ok = true;
                'docs: while let Some(chunks) = rx.recv_cancellable(cancel) {
                    for c in chunks {
                        pending.push(c);
                        if pending.len() == be {
                            ok = abort.check(tx.send_cancellable(std::mem::take(&mut pending), cancel));
                            if !ok {
                                break 'docs;
                            }
                        }
                    }
                }
                if ok && !pending.is_empty() {
                    abort.check(tx.send_cancellable(pending, cancel));
                }
                finished.fetch_add(1, Ordering::Relaxed);
            });
        }

        // embed pool
        for _ in 0..cfg.embed_workers {
            let (rx, tx) = (batch_rx.clone(), emb_tx.clone());
            s.spawn(move || {
                while let Some(batch) = rx.recv_cancellable(cancel) {
                    let t0 = Instant::now();
                    let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
                    let Some(vectors) = embedder.embed_batch_cancellable(&texts, Some(cancel)) else {
                        break;
                    };
                    rec.record(Stage::Embed, t0.elapsed(), 1);
                    let out: Embedded = batch.iter().map(|c| c.chunk_id).zip(vectors).collect();
                    if !abort.check(tx.send_cancellable(out, cancel)) {
                        break;
                    }
                }
                finished.fetch_add(1, Ordering::Relaxed);
            });
        }
        drop((batch_rx, emb_tx));

        // coalescer: embed outputs -> coalesce_target-sized upsert batches
        {
            let (rx, tx) = (emb_rx, ups_tx);
            let target = cfg.coalesce_target;
            s.spawn(move || {
                let mut pending: Embedded = Vec::with_capacity(2 * target);
                let mut ok = true;
                while let Some(part) = rx.recv_cancellable(cancel) {
                    pending.extend(part);
                    if pending.len() >= target {
                        let full = pending.len() / target * target;
                        let rest = pending.split_off(full);
                        let batches =
                            coalesce_upserts(std::mem::replace(&mut pending, rest), target).expect("target >= 1");
                        for b in batches {
                            ok = abort.check(tx.send_cancellable(b, cancel));
                            if !ok {
                                break;
                            }
                        }
                        if !ok {
                            break;
                        }
                    }
                }
                if ok && !pending.is_empty() {
                    abort.check(tx.send_cancellable(pending, cancel));
                }
                finished.fetch_add(1, Ordering::Relaxed);
            });
        }

        // upsert pool
        for _ in 0..cfg.upsert_workers {
            let rx = ups_rx.clone();
            let bu = cfg.upsert_batch;
            s.spawn(move || {
                while let Some(batch) = rx.recv_cancellable(cancel) {
                    let n = batch.len() as u64;
                    let r = rec.measure(Stage::Upsert, n, || -> Result<()> {
                        for b in coalesce_upserts(batch, bu)? {
                            sink.add(b)?;
                        }
                        Ok(())
                    });
                    if let Err(e) = r {
                        abort.fail(e);
                        break;
                    }
                }
                finished.fetch_add(1, Ordering::Relaxed);
            });
        }
        drop(ups_rx);

        // watchdog
        let limit = Duration::from_millis(cfg.watchdog_ms);
        let mut last = rec.progress();
        let mut since = Instant::now();
        while finished.load(Ordering::Relaxed) < threads {
            std::thread::sleep(Duration::from_millis(2));
            if cancel.load(Ordering::Relaxed) {
                continue;
            }
            let now = rec.progress();
            if now != last {
                last = now;
                since = Instant::now();
            } else if since.elapsed() > limit {
                stall = Some((since.elapsed(), rec.diagnostics()));
                cancel.store(true, Ordering::Relaxed);
            }
        }
    });

    if let Some((idle, diagnostics)) = stall {
        return Err(Error::Stalled {
            idle_ms: idle.as_millis(),
            diagnostics,
        });
    }
    if let Some(e) = abort.error.into_inner().expect("error lock") {
        return Err(e);
    }

    for stage in Stage::ALL {
        if let Some((from, to)) = rec.span(stage) {
            log::debug!(
                "{}: active {:.4}..{:.4} s, busy {:.4} s",
                stage.label(),
                from.as_secs_f64(),
                to.as_secs_f64(),
                secs(rec.busy(stage))
            );
        }
    }
    let per_worker = |stage: Stage, workers: usize| secs(rec.busy(stage)) / workers as f64;
    Ok(StageTimings {
        load_s: per_worker(Stage::Load, 1),
        transform_s: per_worker(Stage::Transform, cfg.workers),
        embed_s: per_worker(Stage::Embed, cfg.embed_workers),
        upsert_s: per_worker(Stage::Upsert, cfg.upsert_workers),
        total_s: 0.0,
        chunk_count: chunk_count.into_inner(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusSpec};

    fn corpus(n: usize, f: usize) -> (tempfile::TempDir, CorpusManifest) {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            total_nodes: n,
            file_count: f,
            node_chars: 64,
            ..CorpusSpec::default()
        };
        let m = generate_corpus(&spec, dir.path()).unwrap();
        (dir, m)
    }

    fn cfg(mode: Mode) -> PipelineConfig {
        PipelineConfig {
            mode,
            workers: 4,
            embed_workers: 4,
            upsert_workers: 2,
            embed_batch: 8,
            upsert_batch: 16,
            queue_capacity: 2,
            coalesce_target: 32,
            dim: 16,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn mode_names_parse() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("AsyncParallelOnly".parse::<Mode>().unwrap(), Mode::AsyncParallelOnly);
        let err = "turbo".parse::<Mode>().unwrap_err().to_string();
        assert!(err.contains("streaming") && err.contains("sequential"));
    }

    #[test]
    fn all_modes_build_the_same_index() {
        let (_d, m) = corpus(300, 7);
        let mut reference = None;
        for mode in Mode::ALL {
            for sharded in [false, true] {
                let index = if sharded {
                    VectorIndex::sharded(16, Metric::Ip, 3).unwrap()
                } else {
                    VectorIndex::flat(16, Metric::Ip)
                };
                let (res, idx) = run_pipeline(&cfg(mode), &m, index).unwrap();
                assert_eq!(res.index_size, 300, "{mode}");
                assert_eq!(res.timings.chunk_count, 300);
                let entries = idx.entries_by_id();
                assert_eq!(entries.first().unwrap().0, 0);
                match &reference {
                    None => reference = Some(entries),
                    Some(r) => assert!(r == &entries, "{mode} sharded={sharded}"),
                }
            }
        }
    }

    #[test]
    fn sequential_embed_matches_latency_sum() {
        let (_d, m) = corpus(100, 4);
        let mut c = cfg(Mode::Sequential);
        c.latency = LatencyParams::new(1.0, 0.0);
        let (res, _) = run_pipeline(&c, &m, VectorIndex::flat(16, Metric::Ip)).unwrap();
        let t = res.timings;
        assert!((t.embed_s - 0.100).abs() <= 0.020, "embed_s = {}", t.embed_s);
        assert!(t.total_s + 1e-3 >= t.stage_sum());
    }

    #[test]
    fn rejects_non_empty_or_mismatched_index() {
        let (_d, m) = corpus(10, 2);
        let mut idx = VectorIndex::flat(16, Metric::Ip);
        idx.add_batch(&[(99, Embedding::zeros(16))]).unwrap();
        assert!(run_pipeline(&cfg(Mode::Sequential), &m, idx).is_err());
        assert!(run_pipeline(&cfg(Mode::Sequential), &m, VectorIndex::flat(8, Metric::Ip)).is_err());
        let mut bad = cfg(Mode::Streaming);
        bad.queue_capacity = 0;
        assert!(run_pipeline(&bad, &m, VectorIndex::flat(16, Metric::Ip)).is_err());
    }

    #[test]
    fn stalled_embed_trips_watchdog() {
        let (_d, m) = corpus(20, 2);
        let mut c = cfg(Mode::Streaming);
        c.latency = LatencyParams::new(60_000.0, 0.0);
        c.watchdog_ms = 200;
        let t = Instant::now();
        let err = run_pipeline(&c, &m, VectorIndex::flat(16, Metric::Ip)).unwrap_err();
        assert!(matches!(err, Error::Stalled { .. }), "{err}");
        assert!(err.to_string().contains("embed: 0 items"), "{err}");
        assert!(t.elapsed() < Duration::from_secs(10));
    }

    #[test]
    fn missing_file_fails_streaming_run() {
        let (_d, m) = corpus(20, 4);
        std::fs::remove_file(m.path_of(2)).unwrap();
        let err = run_pipeline(&cfg(Mode::Streaming), &m, VectorIndex::flat(16, Metric::Ip)).unwrap_err();
        assert!(matches!(err, Error::Load { .. }), "{err}");
    }

    #[test]
    fn streaming_overlaps_stages() {
        let (_d, m) = corpus(512, 16);
        let mut c = cfg(Mode::Streaming);
        c.latency = LatencyParams::new(5.0, 0.1);
        c.embed_batch = 16;
        let (res, _) = run_pipeline(&c, &m, VectorIndex::flat(16, Metric::Ip)).unwrap();
        // 32 batches over 4 workers: 8 waves of 6.6 ms
        assert!(res.timings.embed_s >= 0.050, "{:?}", res.timings);
        assert!(res.timings.total_s >= res.timings.embed_s);
    }
}

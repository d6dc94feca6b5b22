//! Benchmark drivers and CSV reports.
//!
//! Every run is described by a [`RunSpec`]; [`execute`] echoes the resolved
//! spec to `out_dir/config.json` before doing any work, so a run can be
//! repeated exactly from that file. Timing columns vary between runs; every
//! other artifact (corpus files, index snapshot, rankings, quality and hit
//! rates) is a pure function of the spec.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    build_conversational_cases, generate_corpus, load_documents, split_by_delimiter, ChunkRecord, ConversationCase,
    CorpusManifest, CorpusSpec,
};
use crate::costmodel::{predict_overlap, CostParams, Model, OverlapParams};
use crate::embedder::{normalize, Embedder, EmbedderConfig, Embedding};
use crate::error::{Error, Result};
use crate::evalmetrics::{
    summarize_latency, summarize_quality, LatencySample, LatencySummary, QualitySummary, RankOutcome,
};
use crate::exec::Exec;
use crate::lexical::HybridIndex;
use crate::memory::{
    cache_lookup, expand_query_with_memory, ltm_update, stm_update, write_gates, Candidate, MemoryAgent, MemoryConfig,
    SemanticCache, DEFAULT_CACHE_THRESHOLD,
};
use crate::pipeline::{run_pipeline, BenchmarkResult, Mode, PipelineConfig};
use crate::vecindex::{write_snapshot, VectorIndex};

pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const RETRIEVAL_SUMMARY_CSV: &str = "retrieval_summary.csv";
pub const RANKINGS_CSV: &str = "rankings.csv";
pub const COST_CSV: &str = "cost_predictions.csv";
pub const INDEX_SNAPSHOT: &str = "index.agvx";
pub const INDEX_DIGESTS: &str = "index_digests.json";
pub const MEMORY_DUMP: &str = "memory_dump.json";
pub const CORPUS_DIR: &str = "corpus";

pub const SUMMARY_HEADER: [&str; 9] = [
    "config",
    "mode",
    "chunks",
    "load_s",
    "transform_s",
    "embed_s",
    "upsert_s",
    "total_s",
    "speedup_vs_sequential",
];
pub const RETRIEVAL_HEADER: [&str; 5] = ["system", "count", "top1_accuracy", "hit_at_k_accuracy", "mrr"];
pub const LATENCY_HEADER: [&str; 8] = [
    "system",
    "count",
    "hit_rate",
    "lookup_ms",
    "retrieval_ms",
    "memory_load_ms",
    "memory_store_ms",
    "total_ms",
];
pub const COST_HEADER: [&str; 8] = ["model", "N", "b", "P", "alpha", "beta", "extra_terms", "predicted_ms"];

pub const AGENTIC: &str = "agentic";
pub const BASELINE: &str = "baseline";

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub modes: Vec<Mode>,
    pub pipeline: PipelineConfig,
    /// 1 builds a flat index, more builds an `id mod shards` sharded index.
    pub shards: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Distinct queries; each is asked once to warm the cache.
    pub queries: usize,
    /// Measured lookups cycling over the warmed queries.
    pub repeats: usize,
    pub k: usize,
    pub cache_threshold: f64,
    pub memory: MemoryConfig,
    pub exec: Exec,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            queries: 64,
            repeats: 1600,
            k: 10,
            cache_threshold: DEFAULT_CACHE_THRESHOLD,
            memory: MemoryConfig::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvConfig {
    pub cases: usize,
    pub k: usize,
    /// Seed for gold-chunk sampling and topic tokens.
    pub seed: u64,
    pub memory: MemoryConfig,
    pub exec: Exec,
}

impl Default for ConvConfig {
    fn default() -> Self {
        Self {
            cases: 200,
            k: 10,
            seed: 42,
            memory: MemoryConfig::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub models: Vec<Model>,
    pub params: CostParams,
    pub overlap: Option<OverlapParams>,
}

/// Fully resolved description of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunSpec {
    GenCorpus {
        corpus: CorpusSpec,
    },
    IngestBench {
        corpus: CorpusSpec,
        ingest: IngestConfig,
    },
    RetrievalBench {
        corpus: CorpusSpec,
        retrieval: RetrievalConfig,
    },
    ConvBench {
        corpus: CorpusSpec,
        conv: ConvConfig,
    },
    CostPredict {
        cost: CostConfig,
    },
}

impl RunSpec {
    pub fn command(&self) -> &'static str {
        match self {
            RunSpec::GenCorpus { .. } => "gen-corpus",
            RunSpec::IngestBench { .. } => "ingest-bench",
            RunSpec::RetrievalBench { .. } => "retrieval-bench",
            RunSpec::ConvBench { .. } => "conv-bench",
            RunSpec::CostPredict { .. } => "cost-predict",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RunSpec::GenCorpus { corpus } => corpus.validate(),
            RunSpec::IngestBench { corpus, ingest } => {
                corpus.validate()?;
                ingest.pipeline.validate()?;
                if ingest.modes.is_empty() {
                    return Err(Error::InvalidArgument("at least one mode is required".into()));
                }
                if ingest.shards == 0 {
                    return Err(Error::InvalidArgument("shards must be >= 1".into()));
                }
                Ok(())
            }
            RunSpec::RetrievalBench { corpus, retrieval } => {
                corpus.validate()?;
                if retrieval.queries == 0 || retrieval.repeats == 0 {
                    return Err(Error::EmptyInput("retrieval bench needs at least one query".into()));
                }
                if retrieval.k == 0 {
                    return Err(Error::InvalidArgument("k must be >= 1".into()));
                }
                SemanticCache::new(retrieval.cache_threshold).map(|_| ())
            }
            RunSpec::ConvBench { corpus, conv } => {
                corpus.validate()?;
                if conv.cases == 0 {
                    return Err(Error::EmptyInput("conversation bench needs at least one case".into()));
                }
                if conv.k == 0 {
                    return Err(Error::InvalidArgument("k must be >= 1".into()));
                }
                Ok(())
            }
            RunSpec::CostPredict { cost } => {
                if cost.models.is_empty() {
                    return Err(Error::InvalidArgument("at least one model is required".into()));
                }
                cost.params.validate()
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// What a run produced, for display.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Corpus(CorpusManifest),
    Ingest(Vec<BenchmarkResult>),
    Retrieval(Vec<(String, LatencySummary)>),
    Conversation(Vec<(String, QualitySummary)>),
    Cost(Vec<CostRow>),
}

/// Validate, write `config.json`, then run the benchmark into `out_dir`.
pub fn execute(spec: &RunSpec, out_dir: &Path) -> Result<RunOutcome> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    spec.save(&out_dir.join(CONFIG_FILE))?;
    log::info!("{} -> {}", spec.command(), out_dir.display());
    match spec {
        RunSpec::GenCorpus { corpus } => Ok(RunOutcome::Corpus(generate_corpus(corpus, &out_dir.join(CORPUS_DIR))?)),
        RunSpec::IngestBench { corpus, ingest } => {
            let manifest = generate_corpus(corpus, &out_dir.join(CORPUS_DIR))?;
            let results = ingest_bench(&manifest, ingest, out_dir)?;
            write_summary_csv(&out_dir.join(SUMMARY_CSV), &results)?;
            Ok(RunOutcome::Ingest(results))
        }
        RunSpec::RetrievalBench { corpus, retrieval } => {
            let manifest = generate_corpus(corpus, &out_dir.join(CORPUS_DIR))?;
            let rows = retrieval_bench(&manifest, retrieval)?;
            write_latency_csv(&out_dir.join(SUMMARY_CSV), &rows)?;
            Ok(RunOutcome::Retrieval(rows))
        }
        RunSpec::ConvBench { corpus, conv } => {
            let manifest = generate_corpus(corpus, &out_dir.join(CORPUS_DIR))?;
            let report = conv_bench(&manifest, conv)?;
            write_quality_csv(&out_dir.join(RETRIEVAL_SUMMARY_CSV), &report.summaries)?;
            write_rankings_csv(&out_dir.join(RANKINGS_CSV), &report.rankings)?;
            if let Some(agent) = &report.sample_agent {
                let mut w = BufWriter::new(File::create(out_dir.join(MEMORY_DUMP))?);
                serde_json::to_writer_pretty(&mut w, &agent.memory.dump())?;
                w.flush()?;
            }
            Ok(RunOutcome::Conversation(report.summaries))
        }
        RunSpec::CostPredict { cost } => {
            let rows = cost_predict(cost)?;
            write_cost_csv(&out_dir.join(COST_CSV), &rows)?;
            Ok(RunOutcome::Cost(rows))
        }
    }
}

/// Chunk the whole corpus in document order.
pub fn corpus_chunks(manifest: &CorpusManifest) -> Result<Vec<ChunkRecord>> {
    let docs = load_documents(manifest, 1)?;
    Ok(docs
        .iter()
        .flat_map(|d| split_by_delimiter(d, &manifest.spec.delimiter))
        .collect())
}

fn index_for(ingest: &IngestConfig) -> Result<VectorIndex> {
    let p = &ingest.pipeline;
    if ingest.shards > 1 {
        VectorIndex::sharded(p.dim, p.metric, ingest.shards)
    } else {
        Ok(VectorIndex::flat(p.dim, p.metric))
    }
}

/// Hex SHA-256 of the id-sorted snapshot encoding of `index`.
pub fn index_digest(index: &VectorIndex) -> Result<String> {
    let mut buf = Vec::new();
    write_snapshot(index, &mut buf)?;
    Ok(hex(&Sha256::digest(&buf)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run every requested mode on a fresh index. Writes the snapshot of the
/// first run plus every mode's index digest; fails if any two modes disagree.
pub fn ingest_bench(manifest: &CorpusManifest, ingest: &IngestConfig, out_dir: &Path) -> Result<Vec<BenchmarkResult>> {
    let mut results = Vec::with_capacity(ingest.modes.len());
    let mut digests: BTreeMap<String, String> = BTreeMap::new();
    for &mode in &ingest.modes {
        let cfg = PipelineConfig {
            mode,
            ..ingest.pipeline.clone()
        };
        log::info!("ingest: running {mode}");
        let (res, index) = run_pipeline(&cfg, manifest, index_for(ingest)?)?;
        let digest = index_digest(&index)?;
        if digests.is_empty() {
            let mut w = BufWriter::new(File::create(out_dir.join(INDEX_SNAPSHOT))?);
            write_snapshot(&index, &mut w)?;
            w.flush()?;
        } else if let Some((first, d)) = digests.iter().next().filter(|(_, d)| **d != digest) {
            return Err(Error::Invariant(format!(
                "mode {mode} built index {digest}, but {first} built {d}"
            )));
        }
        digests.insert(mode.name().to_string(), digest);
        results.push(res);
    }
    attach_speedups(&mut results);
    let mut w = BufWriter::new(File::create(out_dir.join(INDEX_DIGESTS))?);
    serde_json::to_writer_pretty(&mut w, &digests)?;
    w.flush()?;
    Ok(results)
}

/// `speedup_vs["sequential"] = sequential.total_s / total_s` when a
/// sequential run is present.
pub fn attach_speedups(results: &mut [BenchmarkResult]) {
    let Some(seq) = results
        .iter()
        .find(|r| r.config.mode == Mode::Sequential)
        .map(|r| r.timings.total_s)
    else {
        return;
    };
    for r in results.iter_mut() {
        if r.timings.total_s > 0.0 {
            r.speedup_vs
                .insert(Mode::Sequential.name().to_string(), seq / r.timings.total_s);
        }
    }
}

pub fn config_label(p: &PipelineConfig) -> String {
    format!(
        "w{}_ew{}_uw{}_be{}_bu{}_q{}_c{}",
        p.workers,
        p.embed_workers,
        p.upsert_workers,
        p.embed_batch,
        p.upsert_batch,
        p.queue_capacity,
        p.coalesce_target
    )
}

pub fn write_summary_csv(path: &Path, results: &[BenchmarkResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in results {
        let t = &r.timings;
        let speedup = r
            .speedup_vs
            .get(Mode::Sequential.name())
            .map(|&s| fmt4(s))
            .unwrap_or_default();
        w.write_record([
            config_label(&r.config),
            r.config.mode.name().to_string(),
            t.chunk_count.to_string(),
            fmt4(t.load_s),
            fmt4(t.transform_s),
            fmt4(t.embed_s),
            fmt4(t.upsert_s),
            fmt4(t.total_s),
            speedup,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub config: String,
    pub mode: String,
    pub chunks: usize,
    pub load_s: f64,
    pub transform_s: f64,
    pub embed_s: f64,
    pub upsert_s: f64,
    pub total_s: f64,
    pub speedup_vs_sequential: Option<f64>,
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path, &SUMMARY_HEADER)
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::InvalidArgument(format!(
            "{}: header {got:?} does not match {header:?}",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn embedder_for(memory: &MemoryConfig) -> Result<Embedder> {
    Embedder::new(EmbedderConfig {
        dim: memory.dim,
        normalize: true,
        ..EmbedderConfig::default()
    })
}

/// Session state of the memory-enabled system in the retrieval bench.
struct MemorySession {
    agent: MemoryAgent,
    step: u64,
}

impl MemorySession {
    /// Read path: expand with session memory and probe LTM. Returns the
    /// expanded query and the elapsed milliseconds.
    fn load(&self, query: &str, z: &Embedding) -> Result<(String, f64)> {
        let t = Instant::now();
        let expanded = expand_query_with_memory(query, &self.agent.memory);
        let m = &self.agent.memory;
        if !m.ltm_index.is_empty() {
            m.ltm_index.search(z.as_slice(), self.agent.config.k_ltm)?;
        }
        Ok((expanded, t.elapsed().as_secs_f64() * 1e3))
    }

    /// Write path: gated STM append and thresholded LTM write.
    fn store(&mut self, query: &str, z: &Embedding) -> Result<f64> {
        let t = Instant::now();
        self.step += 1;
        let gates = write_gates(z, 0.0, &self.agent.gates);
        let cand = Candidate {
            embedding: z.clone(),
            text: query.to_string(),
        };
        stm_update(&mut self.agent.memory, &cand, gates.stm, self.step);
        ltm_update(
            &mut self.agent.memory,
            &cand,
            gates.ltm,
            self.agent.gates.tau_l,
            self.step,
        )?;
        Ok(t.elapsed().as_secs_f64() * 1e3)
    }
}

fn timed<R>(f: impl FnOnce() -> Result<R>) -> Result<(R, f64)> {
    let t = Instant::now();
    let r = f()?;
    Ok((r, t.elapsed().as_secs_f64() * 1e3))
}

/// One query through either system. The cache is skipped when `cache` is `None`.
fn serve(
    query: &str,
    hybrid: &HybridIndex,
    k: usize,
    cache: Option<&mut SemanticCache>,
    session: Option<&mut MemorySession>,
) -> Result<LatencySample> {
    let start = Instant::now();
    let mut s = LatencySample::default();
    let z = normalize(&hybrid.embedder.embed_one(query))?;
    let hit = match &cache {
        Some(c) => {
            let (hit, ms) = timed(|| Ok(cache_lookup(&z, c).is_some()))?;
            s.lookup_ms = ms;
            hit
        }
        None => false,
    };
    let text = match session.as_deref() {
        Some(sess) => {
            let (expanded, ms) = sess.load(query, &z)?;
            s.memory_load_ms = ms;
            expanded
        }
        None => query.to_string(),
    };
    if !hit {
        let (hits, ms) = timed(|| hybrid.search(&text, k))?;
        s.retrieval_ms = ms;
        if let Some(c) = cache {
            let ids: Vec<String> = hits.iter().map(|h| h.id.to_string()).collect();
            c.insert(z.clone(), ids.join(" "));
        }
    }
    if let Some(sess) = session {
        s.memory_store_ms = sess.store(query, &z)?;
    }
    s.cache_hit = hit;
    s.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(s)
}

/// Queries used by the retrieval bench: topic questions over sampled chunks.
pub fn retrieval_queries(chunks: &[ChunkRecord], n: usize, seed: u64) -> Result<(Vec<String>, Vec<ChunkRecord>)> {
    let set = build_conversational_cases(chunks, n, seed)?;
    Ok((set.cases.into_iter().map(|c| c.turn1_query).collect(), set.chunks))
}

/// Semantic-cache and hybrid-retrieval scenarios for the memory-enabled
/// (`agentic`) and memory-free (`baseline`) systems.
pub fn retrieval_bench(manifest: &CorpusManifest, cfg: &RetrievalConfig) -> Result<Vec<(String, LatencySummary)>> {
    if cfg.queries == 0 || cfg.repeats == 0 {
        return Err(Error::EmptyInput("retrieval bench needs at least one query".into()));
    }
    let (queries, chunks) = retrieval_queries(&corpus_chunks(manifest)?, cfg.queries, manifest.spec.seed)?;
    let hybrid = HybridIndex::build(&chunks, embedder_for(&cfg.memory)?, cfg.memory.metric, cfg.exec)?;
    let mut rows = Vec::new();

    for (system, with_memory) in [(AGENTIC, true), (BASELINE, false)] {
        // semantic cache: warm every distinct query once, then measure repeats
        let mut cache = SemanticCache::new(cfg.cache_threshold)?;
        let mut session = with_memory
            .then(|| MemoryAgent::new(cfg.memory.clone()).map(|agent| MemorySession { agent, step: 0 }))
            .transpose()?;
        for q in &queries {
            serve(q, &hybrid, cfg.k, Some(&mut cache), session.as_mut())?;
        }
        let samples = (0..cfg.repeats)
            .map(|i| {
                serve(
                    &queries[i % queries.len()],
                    &hybrid,
                    cfg.k,
                    Some(&mut cache),
                    session.as_mut(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((format!("{system}_semantic_cache"), summarize_latency(&samples)?));

        // hybrid retrieval: every query goes to the index
        let mut session = with_memory
            .then(|| MemoryAgent::new(cfg.memory.clone()).map(|agent| MemorySession { agent, step: 0 }))
            .transpose()?;
        let samples = queries
            .iter()
            .map(|q| serve(q, &hybrid, cfg.k, None, session.as_mut()))
            .collect::<Result<Vec<_>>>()?;
        rows.push((format!("{system}_hybrid"), summarize_latency(&samples)?));
    }
    Ok(rows)
}

pub fn write_latency_csv(path: &Path, rows: &[(String, LatencySummary)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LATENCY_HEADER)?;
    for (system, s) in rows {
        w.write_record([
            system.clone(),
            s.count.to_string(),
            fmt4(s.hit_rate),
            fmt4(s.lookup_ms),
            fmt4(s.retrieval_ms),
            fmt4(s.memory_load_ms),
            fmt4(s.memory_store_ms),
            fmt4(s.total_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LatencyRow {
    pub system: String,
    pub count: usize,
    pub hit_rate: f64,
    pub lookup_ms: f64,
    pub retrieval_ms: f64,
    pub memory_load_ms: f64,
    pub memory_store_ms: f64,
    pub total_ms: f64,
}

pub fn read_latency_csv(path: &Path) -> Result<Vec<LatencyRow>> {
    read_rows(path, &LATENCY_HEADER)
}

/// Ranked ids returned for one case by one system.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRanking {
    pub system: String,
    pub case_id: usize,
    pub gold_chunk_id: u64,
    pub ranking: Vec<u64>,
}

impl CaseRanking {
    pub fn outcome(&self) -> RankOutcome {
        RankOutcome::from_ranking(self.case_id, &self.ranking, self.gold_chunk_id)
    }
}

pub struct ConvReport {
    pub cases: Vec<ConversationCase>,
    pub rankings: Vec<CaseRanking>,
    pub summaries: Vec<(String, QualitySummary)>,
    /// Agent of the first case after its episode closed.
    pub sample_agent: Option<MemoryAgent>,
}

/// Two-turn conversations: the topic is named in turn one, the follow-up
/// refers to it only by pronoun. The memory system expands the follow-up
/// with its session STM; the baseline searches with the follow-up alone.
/// Each case runs in its own session.
pub fn conv_bench(manifest: &CorpusManifest, cfg: &ConvConfig) -> Result<ConvReport> {
    let set = build_conversational_cases(&corpus_chunks(manifest)?, cfg.cases, cfg.seed)?;
    let hybrid = HybridIndex::build(&set.chunks, embedder_for(&cfg.memory)?, cfg.memory.metric, cfg.exec)?;
    let kb = &hybrid.dense;

    let run_case = |case: &ConversationCase| -> Result<(CaseRanking, CaseRanking, MemoryAgent)> {
        let mut agent = MemoryAgent::new(cfg.memory.clone())?;
        agent.step(&case.turn1_query, kb, None)?;
        let expanded = expand_query_with_memory(&case.followup_query, &agent.memory);
        let ranked = |q: &str, system: &str| -> Result<CaseRanking> {
            Ok(CaseRanking {
                system: system.to_string(),
                case_id: case.case_id,
                gold_chunk_id: case.gold_chunk_id,
                ranking: hybrid.search(q, cfg.k)?.into_iter().map(|h| h.id).collect(),
            })
        };
        let with_memory = ranked(&expanded, AGENTIC)?;
        agent.step(&case.followup_query, kb, None)?;
        agent.end_episode(&case.session_id)?;
        Ok((with_memory, ranked(&case.followup_query, BASELINE)?, agent))
    };
    let per_case = cfg.exec.map(&set.cases, run_case);

    let mut agentic = Vec::with_capacity(per_case.len());
    let mut baseline = Vec::with_capacity(per_case.len());
    let mut sample_agent = None;
    for r in per_case {
        let (a, b, agent) = r?;
        sample_agent.get_or_insert(agent);
        agentic.push(a);
        baseline.push(b);
    }
    let summary =
        |rs: &[CaseRanking]| summarize_quality(&rs.iter().map(CaseRanking::outcome).collect::<Vec<_>>(), cfg.k);
    let summaries = vec![
        (AGENTIC.to_string(), summary(&agentic)?),
        (BASELINE.to_string(), summary(&baseline)?),
    ];
    agentic.extend(baseline);
    Ok(ConvReport {
        cases: set.cases,
        rankings: agentic,
        summaries,
        sample_agent,
    })
}

pub fn write_quality_csv(path: &Path, rows: &[(String, QualitySummary)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RETRIEVAL_HEADER)?;
    for (system, q) in rows {
        w.write_record([
            system.clone(),
            q.count.to_string(),
            fmt4(q.top1),
            fmt4(q.hit_at_k),
            fmt4(q.mrr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct QualityRow {
    pub system: String,
    pub count: usize,
    pub top1_accuracy: f64,
    pub hit_at_k_accuracy: f64,
    pub mrr: f64,
}

pub fn read_quality_csv(path: &Path) -> Result<Vec<QualityRow>> {
    read_rows(path, &RETRIEVAL_HEADER)
}

pub fn write_rankings_csv(path: &Path, rankings: &[CaseRanking]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["system", "case_id", "gold_chunk_id", "rank", "ranking"])?;
    for r in rankings {
        let rank = r.outcome().rank.map(|x| x.to_string()).unwrap_or_default();
        let ids: Vec<String> = r.ranking.iter().map(u64::to_string).collect();
        w.write_record([
            r.system.clone(),
            r.case_id.to_string(),
            r.gold_chunk_id.to_string(),
            rank,
            ids.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub model: String,
    pub params: CostParams,
    pub extra_terms: String,
    pub predicted_ms: f64,
}

pub fn cost_predict(cfg: &CostConfig) -> Result<Vec<CostRow>> {
    cfg.params.validate()?;
    let p = &cfg.params;
    let mut rows: Vec<CostRow> = cfg
        .models
        .iter()
        .map(|&m| CostRow {
            model: m.name().to_string(),
            params: p.clone(),
            extra_terms: m.extra_terms(p),
            predicted_ms: m.predict(p),
        })
        .collect();
    if let Some(o) = &cfg.overlap {
        let times: Vec<String> = o.stage_batch_times.iter().map(f64::to_string).collect();
        rows.push(CostRow {
            model: "overlap".into(),
            params: p.clone(),
            extra_terms: format!(
                "t_startup={};t_drain={};t_k={};M={}",
                o.t_startup,
                o.t_drain,
                times.join("|"),
                o.m
            ),
            predicted_ms: predict_overlap(o)?,
        });
    }
    Ok(rows)
}

pub fn write_cost_csv(path: &Path, rows: &[CostRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COST_HEADER)?;
    for r in rows {
        let p = &r.params;
        w.write_record([
            r.model.clone(),
            p.n.to_string(),
            p.b.to_string(),
            p.p.to_string(),
            p.alpha.to_string(),
            p.beta.to_string(),
            r.extra_terms.clone(),
            fmt4(r.predicted_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CostCsvRow {
    pub model: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub b: u64,
    #[serde(rename = "P")]
    pub p: u64,
    pub alpha: f64,
    pub beta: f64,
    pub extra_terms: String,
    pub predicted_ms: f64,
}

pub fn read_cost_csv(path: &Path) -> Result<Vec<CostCsvRow>> {
    read_rows(path, &COST_HEADER)
}

/// Resolve the output directory: explicit flag, then `AAFLOW_OUT_DIR`, then `./out`.
pub fn resolve_out_dir(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os("AAFLOW_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
            .join(command)
    })
}

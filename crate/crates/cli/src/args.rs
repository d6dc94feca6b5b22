//! Command-line flags and their translation into a [`RunSpec`].

use std::path::PathBuf;

use agentrag_core::bench::{ConvConfig, CostConfig, IngestConfig, RetrievalConfig, RunSpec};
use agentrag_core::corpus::{CorpusSpec, DEFAULT_DELIMITER};
use agentrag_core::costmodel::{
    predict_seq_continuous, BspTerms, CostParams, DaskTerms, Model, OverlapParams, RayTerms, Superstep,
};
use agentrag_core::embedder::{LatencyParams, DEFAULT_DIM};
use agentrag_core::memory::{MemoryConfig, DEFAULT_CACHE_THRESHOLD};
use agentrag_core::pipeline::{Mode, PipelineConfig};
use agentrag_core::vecindex::Metric;
use agentrag_core::Exec;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "agentrag", version, about = "Agentic RAG ingestion and retrieval benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus and its manifest.
    GenCorpus {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ingest the corpus under one or more execution modes; writes summary.csv.
    IngestBench {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Semantic-cache and hybrid-retrieval latency with and without memory.
    RetrievalBench {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        /// Distinct queries (each warms the cache once).
        #[arg(long, default_value_t = 64)]
        cases: usize,
        /// Measured warm lookups.
        #[arg(long, default_value_t = 1600)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_CACHE_THRESHOLD)]
        cache_threshold: f64,
        /// Disable data-parallel index construction.
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Two-turn conversational retrieval quality; writes retrieval_summary.csv.
    ConvBench {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        vectors: VectorArgs,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Disable data-parallel case evaluation.
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Analytic runtime predictions; writes cost_predictions.csv.
    CostPredict(CostArgs),
    /// Re-run a previous invocation from its config.json.
    Replay {
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory [default: $AAFLOW_OUT_DIR/<command>, else ./out/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 20_000)]
    nodes: usize,
    #[arg(long, default_value_t = 200)]
    files: usize,
    #[arg(long, default_value_t = 800)]
    node_chars: usize,
    #[arg(long, default_value = DEFAULT_DELIMITER)]
    delimiter: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl CorpusArgs {
    fn spec(&self) -> CorpusSpec {
        CorpusSpec {
            total_nodes: self.nodes,
            file_count: self.files,
            node_chars: self.node_chars,
            delimiter: self.delimiter.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct VectorArgs {
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Similarity metric: l2 or ip.
    #[arg(long, default_value = "ip", value_parser = parse_metric)]
    metric: Metric,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Execution mode; repeat for several. Defaults to all five.
    #[arg(long = "mode", value_parser = parse_mode)]
    modes: Vec<Mode>,
    #[arg(long, default_value_t = 16)]
    workers: usize,
    #[arg(long, default_value_t = 32)]
    embed_workers: usize,
    #[arg(long, default_value_t = 16)]
    upsert_workers: usize,
    #[arg(long, default_value_t = 32)]
    embed_batch: usize,
    #[arg(long, default_value_t = 64)]
    upsert_batch: usize,
    #[arg(long, default_value_t = 2)]
    queue_size: usize,
    #[arg(long, default_value_t = 128)]
    coalesce_target: usize,
    #[arg(long, default_value_t = 0.0)]
    request_overhead_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    per_item_ms: f64,
    /// Index shards (1 = flat index).
    #[arg(long, default_value_t = 1)]
    shards: usize,
    /// Abort a streaming run after this long without progress.
    #[arg(long, default_value_t = 30_000)]
    watchdog_ms: u64,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Model to evaluate (seq, async, ray, dask, bsp); repeat for several.
    /// Defaults to async, ray, dask and bsp.
    #[arg(long = "model", value_parser = parse_model)]
    models: Vec<Model>,
    #[arg(long = "n", default_value_t = 1000)]
    n: u64,
    #[arg(long = "b", default_value_t = 10)]
    b: u64,
    #[arg(long = "p", default_value_t = 4)]
    p: u64,
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Ray per-batch overhead [default: --alpha].
    #[arg(long)]
    alpha_r: Option<f64>,
    /// Ray per-item cost [default: --beta].
    #[arg(long)]
    beta_r: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    sigma_r: f64,
    #[arg(long, default_value_t = 0.0)]
    delta_r: f64,
    /// Dask per-batch overhead [default: --alpha].
    #[arg(long)]
    alpha_d: Option<f64>,
    /// Dask per-item cost [default: --beta].
    #[arg(long)]
    beta_d: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    gamma_d: f64,
    #[arg(long, default_value_t = 0.0)]
    eta_d: f64,
    /// BSP superstep as `work:words`; repeat for several.
    /// Default: one superstep holding all serial work, no communication.
    #[arg(long = "bsp-step", value_parser = parse_superstep)]
    bsp_steps: Vec<Superstep>,
    #[arg(long, default_value_t = 0.0)]
    bsp_g: f64,
    #[arg(long, default_value_t = 0.0)]
    bsp_l: f64,
    /// Per-stage batch time for the overlap model; repeat per stage.
    #[arg(long = "stage-ms")]
    stage_ms: Vec<f64>,
    /// Batch count M for the overlap model [default: ceil(N/b)].
    #[arg(long)]
    batches: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    startup_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    drain_ms: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: agentrag_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: agentrag_core::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<Model, String> {
    Model::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| {
            let valid: Vec<_> = Model::ALL.iter().map(|m| m.name()).collect();
            format!("unknown model {s:?}; valid models: {}", valid.join(", "))
        })
}

fn parse_superstep(s: &str) -> Result<Superstep, String> {
    let (w, h) = s.split_once(':').ok_or("expected work:words")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok(Superstep { w: num(w)?, h: num(h)? })
}

fn memory(vectors: &VectorArgs) -> MemoryConfig {
    MemoryConfig {
        dim: vectors.dim,
        metric: vectors.metric,
        ..MemoryConfig::default()
    }
}

fn exec(serial: bool) -> Exec {
    if serial {
        Exec::Serial
    } else {
        Exec::Parallel
    }
}

impl CostArgs {
    fn config(&self) -> CostConfig {
        let mut params = CostParams::new(self.n, self.b, self.p, self.alpha, self.beta);
        params.ray = RayTerms {
            alpha_r: self.alpha_r.unwrap_or(self.alpha),
            beta_r: self.beta_r.unwrap_or(self.beta),
            sigma_r: self.sigma_r,
            delta_r: self.delta_r,
        };
        params.dask = DaskTerms {
            alpha_d: self.alpha_d.unwrap_or(self.alpha),
            beta_d: self.beta_d.unwrap_or(self.beta),
            gamma_d: self.gamma_d,
            eta_d: self.eta_d,
        };
        let supersteps = if self.bsp_steps.is_empty() {
            vec![Superstep {
                w: predict_seq_continuous(&params),
                h: 0.0,
            }]
        } else {
            self.bsp_steps.clone()
        };
        params.bsp = BspTerms {
            supersteps,
            g: self.bsp_g,
            l: self.bsp_l,
        };
        let overlap = (!self.stage_ms.is_empty()).then(|| OverlapParams {
            t_startup: self.startup_ms,
            t_drain: self.drain_ms,
            stage_batch_times: self.stage_ms.clone(),
            m: self.batches.unwrap_or_else(|| params.batches()),
        });
        let models = if self.models.is_empty() {
            vec![Model::Async, Model::Ray, Model::Dask, Model::Bsp]
        } else {
            self.models.clone()
        };
        CostConfig {
            models,
            params,
            overlap,
        }
    }
}

impl Command {
    /// Resolved run description and explicit output directory, if any.
    /// `Replay` loads its spec from disk.
    pub fn into_spec(self) -> anyhow::Result<(RunSpec, Option<PathBuf>)> {
        Ok(match self {
            Command::GenCorpus { corpus, out } => (RunSpec::GenCorpus { corpus: corpus.spec() }, out.out),
            Command::IngestBench {
                corpus,
                vectors,
                pipeline: p,
                out,
            } => {
                let modes = if p.modes.is_empty() {
                    Mode::ALL.to_vec()
                } else {
                    p.modes
                };
                let pipeline = PipelineConfig {
                    mode: modes[0],
                    workers: p.workers,
                    embed_workers: p.embed_workers,
                    upsert_workers: p.upsert_workers,
                    embed_batch: p.embed_batch,
                    upsert_batch: p.upsert_batch,
                    queue_capacity: p.queue_size,
                    coalesce_target: p.coalesce_target,
                    latency: LatencyParams::new(p.request_overhead_ms, p.per_item_ms),
                    dim: vectors.dim,
                    metric: vectors.metric,
                    seed: corpus.seed,
                    watchdog_ms: p.watchdog_ms,
                };
                let ingest = IngestConfig {
                    modes,
                    pipeline,
                    shards: p.shards,
                };
                (
                    RunSpec::IngestBench {
                        corpus: corpus.spec(),
                        ingest,
                    },
                    out.out,
                )
            }
            Command::RetrievalBench {
                corpus,
                vectors,
                cases,
                repeats,
                k,
                cache_threshold,
                serial,
                out,
            } => {
                let retrieval = RetrievalConfig {
                    queries: cases,
                    repeats,
                    k,
                    cache_threshold,
                    memory: memory(&vectors),
                    exec: exec(serial),
                };
                (
                    RunSpec::RetrievalBench {
                        corpus: corpus.spec(),
                        retrieval,
                    },
                    out.out,
                )
            }
            Command::ConvBench {
                corpus,
                vectors,
                cases,
                k,
                serial,
                out,
            } => {
                let conv = ConvConfig {
                    cases,
                    k,
                    seed: corpus.seed,
                    memory: memory(&vectors),
                    exec: exec(serial),
                };
                (
                    RunSpec::ConvBench {
                        corpus: corpus.spec(),
                        conv,
                    },
                    out.out,
                )
            }
            Command::CostPredict(args) => (RunSpec::CostPredict { cost: args.config() }, args.out.out),
            Command::Replay { config, out } => (RunSpec::load(&config)?, out.out),
        })
    }
}

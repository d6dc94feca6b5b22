//! Hierarchical agent memory: a bounded short-term buffer (STM), a
//! threshold-gated long-term store (LTM) and per-episode summaries (EM).
//!
//! One interaction step runs
//!
//! ```text
//! z_t   = encode(x_t, M_{t-1})
//! C_t   = fuse(top-k KB, top-k_S STM, top-k_L LTM)
//! h_t   = normalize(0.5 h_{t-1} + 0.5 centroid({z_t} ∪ C_t))
//! gates = sigmoid(W h_t + b)
//! STM  <- truncate(STM ∪ {α_S m̃}, N_S)
//! LTM  <- LTM ∪ {m̃}  iff α_L > τ_L
//! ```
//!
//! and episodes close with `EM <- EM ∪ {α_E normalize(mean h)}`.

mod cache;
mod fusion;
mod gates;

use std::collections::VecDeque;
use std::time::Instant;

use serde::Serialize;

use crate::embedder::{embed_text, normalize, Embedding};
use crate::error::Result;
use crate::vecindex::{FlatIndex, Metric, VectorIndex};

pub use cache::{cache_lookup, CacheHit, SemanticCache, DEFAULT_CACHE_THRESHOLD};
pub use fusion::{
    agent_step, retrieve_fused, AgentState, FusedContext, FusedItem, FusionWeights, OutputRecord, Source,
};
pub use gates::{sigmoid, write_gates, GateParams, Gates};

/// Number of recent STM entries folded into queries.
pub const MEMORY_DIGEST_ENTRIES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StmEntry {
    pub embedding: Embedding,
    pub text: String,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LtmEntry {
    pub embedding: Embedding,
    pub summary: String,
    pub gate_value: f64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Episode {
    pub episode_id: String,
    pub summary_embedding: Embedding,
    pub turns: Vec<(String, String)>,
}

/// A memory write candidate `m̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub embedding: Embedding,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    pub stm: VecDeque<StmEntry>,
    pub stm_capacity: usize,
    pub ltm_index: FlatIndex,
    pub ltm: Vec<LtmEntry>,
    pub em: Vec<Episode>,
}

impl MemoryState {
    pub fn new(dim: usize, metric: Metric, stm_capacity: usize) -> Self {
        Self {
            stm: VecDeque::with_capacity(stm_capacity),
            stm_capacity: stm_capacity.max(1),
            ltm_index: FlatIndex::new(dim, metric),
            ltm: Vec::new(),
            em: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.ltm_index.dim()
    }

    /// Texts of the most recent STM entries, newest first.
    pub fn recent_texts(&self, limit: usize) -> Vec<&str> {
        self.stm.iter().rev().take(limit).map(|e| e.text.as_str()).collect()
    }

    pub fn dump(&self) -> MemoryDump {
        MemoryDump {
            stm: self
                .stm
                .iter()
                .map(|e| DumpStm {
                    text: e.text.clone(),
                    step: e.step,
                    vector_head: e.embedding.values.iter().take(4).copied().collect(),
                })
                .collect(),
            ltm: self
                .ltm
                .iter()
                .enumerate()
                .map(|(id, e)| DumpLtm {
                    id: id as u64,
                    summary: e.summary.clone(),
                    gate_value: e.gate_value,
                    step: e.step,
                })
                .collect(),
            episodes: self
                .em
                .iter()
                .map(|e| DumpEpisode {
                    episode_id: e.episode_id.clone(),
                    turns: e.turns.clone(),
                    summary_head: e.summary_embedding.values.iter().take(4).copied().collect(),
                })
                .collect(),
        }
    }
}

/// JSON inspection view of a [`MemoryState`]; vectors are truncated.
#[derive(Debug, Clone, Serialize)]
pub struct MemoryDump {
    pub stm: Vec<DumpStm>,
    pub ltm: Vec<DumpLtm>,
    pub episodes: Vec<DumpEpisode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DumpStm {
    pub text: String,
    pub step: u64,
    pub vector_head: Vec<f32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DumpLtm {
    pub id: u64,
    pub summary: String,
    pub gate_value: f64,
    pub step: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DumpEpisode {
    pub episode_id: String,
    pub turns: Vec<(String, String)>,
    pub summary_head: Vec<f32>,
}

fn digest(m: &MemoryState) -> String {
    m.recent_texts(MEMORY_DIGEST_ENTRIES).join(" ")
}

/// Memory-conditioned query embedding.
pub fn encode_query(x: &str, m: &MemoryState, dim: usize) -> Result<Embedding> {
    let raw = if m.stm.is_empty() {
        embed_text(x, dim)?
    } else {
        embed_text(&format!("{x} {}", digest(m)), dim)?
    };
    normalize(&raw)
}

/// Append the gate-scaled candidate and drop the oldest entries beyond capacity.
pub fn stm_update(m: &mut MemoryState, candidate: &Candidate, alpha_s: f64, step: u64) {
    m.stm.push_back(StmEntry {
        embedding: candidate.embedding.scaled(alpha_s as f32),
        text: candidate.text.clone(),
        step,
    });
    while m.stm.len() > m.stm_capacity {
        m.stm.pop_front();
    }
}

/// Store the candidate iff `alpha_l > tau_l`. Returns whether a write happened.
pub fn ltm_update(m: &mut MemoryState, candidate: &Candidate, alpha_l: f64, tau_l: f64, step: u64) -> Result<bool> {
    if alpha_l <= tau_l {
        return Ok(false);
    }
    let id = m.ltm.len() as u64;
    m.ltm_index.add_batch(&[(id, candidate.embedding.clone())])?;
    m.ltm.push(LtmEntry {
        embedding: candidate.embedding.clone(),
        summary: candidate.text.clone(),
        gate_value: alpha_l,
        step,
    });
    Ok(true)
}

/// One completed interaction within an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub query: String,
    pub h: Embedding,
    pub output: OutputRecord,
}

/// Close an episode: append `α_E · normalize(mean h)` with the turn digests,
/// then clear the session STM. No-op unless `end_of_episode` is set.
pub fn episodic_update(
    m: &mut MemoryState,
    episode_id: &str,
    history: &[Turn],
    alpha_e: f64,
    end_of_episode: bool,
) -> Result<bool> {
    if !end_of_episode {
        return Ok(false);
    }
    if history.is_empty() {
        log::warn!("episode {episode_id} ended with no turns; no summary written");
        return Ok(false);
    }
    let dim = m.dim();
    let mut mean = vec![0.0f64; dim];
    for t in history {
        for (acc, &x) in mean.iter_mut().zip(&t.h.values) {
            *acc += f64::from(x);
        }
    }
    let n = history.len() as f64;
    let mean = Embedding::new(mean.into_iter().map(|x| (x / n) as f32).collect());
    let summary = normalize(&mean)?.scaled(alpha_e as f32);
    m.em.push(Episode {
        episode_id: episode_id.to_string(),
        summary_embedding: summary,
        turns: history
            .iter()
            .map(|t| (t.query.clone(), t.output.state_digest.clone()))
            .collect(),
    });
    m.stm.clear();
    Ok(true)
}

/// `followup` plus up to four session STM texts, newest first.
pub fn expand_query_with_memory(followup: &str, m: &MemoryState) -> String {
    if m.stm.is_empty() {
        return followup.to_string();
    }
    format!("{followup} {}", digest(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct MemoryConfig {
    pub dim: usize,
    pub metric: Metric,
    pub stm_capacity: usize,
    pub tau_l: f64,
    pub k: usize,
    pub k_stm: usize,
    pub k_ltm: usize,
    pub weights: FusionWeights,
    pub seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            dim: crate::embedder::DEFAULT_DIM,
            metric: Metric::Ip,
            stm_capacity: 8,
            tau_l: 0.5,
            k: 10,
            k_stm: 4,
            k_ltm: 4,
            weights: FusionWeights::default(),
            seed: 7,
        }
    }
}

/// Result of [`MemoryAgent::step`], with the two memory latency fields.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub z: Embedding,
    pub context: FusedContext,
    pub output: OutputRecord,
    pub gates: Gates,
    pub ltm_written: bool,
    pub memory_load_ms: f64,
    pub memory_store_ms: f64,
}

/// Drives the full memory-aware update for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryAgent {
    pub config: MemoryConfig,
    pub gates: GateParams,
    pub state: AgentState,
    pub memory: MemoryState,
    pub history: Vec<Turn>,
}

impl MemoryAgent {
    pub fn new(config: MemoryConfig) -> Result<Self> {
        let gates = GateParams::from_seed(config.dim, config.tau_l, config.seed);
        let state = AgentState::initial(config.dim, config.seed)?;
        let memory = MemoryState::new(config.dim, config.metric, config.stm_capacity);
        Ok(Self {
            config,
            gates,
            state,
            memory,
            history: Vec::new(),
        })
    }

    /// Run one interaction against `kb` with optional feedback `r_t` (default 0).
    pub fn step(&mut self, x: &str, kb: &VectorIndex, feedback: Option<f64>) -> Result<StepReport> {
        let cfg = &self.config;
        let z = encode_query(x, &self.memory, cfg.dim)?;

        let load = Instant::now();
        let context = retrieve_fused(&z, kb, &self.memory, cfg.k, cfg.k_stm, cfg.k_ltm, cfg.weights)?;
        let memory_load_ms = load.elapsed().as_secs_f64() * 1e3;

        let (state, output) = agent_step(&self.state, &z, &context)?;
        self.state = state;

        let store = Instant::now();
        let gates = write_gates(&self.state.h, feedback.unwrap_or(0.0), &self.gates);
        let step = self.state.step;
        let candidate = Candidate {
            embedding: self.state.h.clone(),
            text: x.to_string(),
        };
        stm_update(&mut self.memory, &candidate, gates.stm, step);
        let ltm_written = ltm_update(&mut self.memory, &candidate, gates.ltm, self.gates.tau_l, step)?;
        let memory_store_ms = store.elapsed().as_secs_f64() * 1e3;

        self.history.push(Turn {
            query: x.to_string(),
            h: self.state.h.clone(),
            output: output.clone(),
        });
        Ok(StepReport {
            z,
            context,
            output,
            gates,
            ltm_written,
            memory_load_ms,
            memory_store_ms,
        })
    }

    /// Summarize the episode into EM using the EM gate at the final state.
    pub fn end_episode(&mut self, episode_id: &str) -> Result<bool> {
        let alpha_e = write_gates(&self.state.h, 0.0, &self.gates).em;
        let history = std::mem::take(&mut self.history);
        episodic_update(&mut self.memory, episode_id, &history, alpha_e, true)
    }
}

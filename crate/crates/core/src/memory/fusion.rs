use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MemoryState;
use crate::embedder::{embed_text, normalize, Embedding};
use crate::error::Result;
use crate::vecindex::{Metric, SearchHit, VectorIndex};

/// Retrieval source; the declaration order is the tie-break priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    Kb,
    Stm,
    Ltm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub kb: f64,
    pub stm: f64,
    pub ltm: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            kb: 0.6,
            stm: 0.25,
            ltm: 0.15,
        }
    }
}

impl FusionWeights {
    pub fn of(&self, s: Source) -> f64 {
        match s {
            Source::Kb => self.kb,
            Source::Stm => self.stm,
            Source::Ltm => self.ltm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedItem {
    pub source: Source,
    pub id: u64,
    pub similarity: f64,
    pub score: f64,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedContext {
    pub kb_hits: Vec<SearchHit>,
    pub stm_hits: Vec<SearchHit>,
    pub ltm_hits: Vec<SearchHit>,
    pub merged: Vec<FusedItem>,
    pub weights: FusionWeights,
}

/// Larger is more similar for both metrics.
fn similarity(metric: Metric, score: f32) -> f64 {
    match metric {
        Metric::Ip => f64::from(score),
        Metric::L2 => -f64::from(score),
    }
}

fn stm_search(z: &[f32], m: &MemoryState, k: usize, metric: Metric) -> Vec<SearchHit> {
    let hits = m
        .stm
        .iter()
        .map(|e| SearchHit {
            id: e.step,
            score: metric.score(z, e.embedding.as_slice()),
        })
        .collect();
    crate::vecindex::select_top_k(hits, k, metric)
}

/// Tri-source top-k retrieval fused by weighted linear re-ranking.
/// Sources with zero weight are retrieved but contribute nothing to `merged`.
pub fn retrieve_fused(
    z: &Embedding,
    kb: &VectorIndex,
    m: &MemoryState,
    k: usize,
    k_stm: usize,
    k_ltm: usize,
    weights: FusionWeights,
) -> Result<FusedContext> {
    let metric = kb.metric();
    let q = z.as_slice();
    let kb_hits = kb.search(q, k)?;
    let stm_hits = stm_search(q, m, k_stm, metric);
    let ltm_hits = if k_ltm == 0 {
        Vec::new()
    } else {
        m.ltm_index.search(q, k_ltm)?
    };

    let mut merged = Vec::with_capacity(kb_hits.len() + stm_hits.len() + ltm_hits.len());
    let mut push = |source: Source, hits: &[SearchHit], lookup: &dyn Fn(u64) -> Vec<f32>| {
        let w = weights.of(source);
        if w == 0.0 {
            return;
        }
        for h in hits {
            let sim = similarity(metric, h.score);
            merged.push(FusedItem {
                source,
                id: h.id,
                similarity: sim,
                score: w * sim,
                vector: lookup(h.id),
            });
        }
    };
    push(Source::Kb, &kb_hits, &|id| {
        kb.get(id).map(<[f32]>::to_vec).unwrap_or_default()
    });
    push(Source::Stm, &stm_hits, &|id| {
        m.stm
            .iter()
            .find(|e| e.step == id)
            .map(|e| e.embedding.values.clone())
            .unwrap_or_default()
    });
    push(Source::Ltm, &ltm_hits, &|id| {
        m.ltm[id as usize].embedding.values.clone()
    });
    merged.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.source.cmp(&b.source))
            .then(a.id.cmp(&b.id))
    });

    Ok(FusedContext {
        kb_hits,
        stm_hits,
        ltm_hits,
        merged,
        weights,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub h: Embedding,
    pub step: u64,
}

impl AgentState {
    pub fn initial(dim: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            h: normalize(&embed_text(&format!("agent-state-{seed}"), dim)?)?,
            step: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    /// Best fused item, if any.
    pub top: Option<(Source, u64)>,
    /// Hex prefix of SHA-256 over the state vector bytes.
    pub state_digest: String,
}

fn state_digest(h: &Embedding) -> String {
    let mut hasher = Sha256::new();
    for x in &h.values {
        hasher.update(x.to_le_bytes());
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `h_t = normalize(0.5 h_{t-1} + 0.5 centroid({z_t} ∪ retrieved))`.
/// A degenerate zero update keeps the previous state.
pub fn agent_step(prev: &AgentState, z: &Embedding, ctx: &FusedContext) -> Result<(AgentState, OutputRecord)> {
    let dim = prev.h.dim();
    let mut centroid = vec![0.0f64; dim];
    let mut count = 0usize;
    for v in std::iter::once(z.as_slice()).chain(ctx.merged.iter().map(|i| i.vector.as_slice())) {
        if v.len() != dim {
            continue;
        }
        for (acc, &x) in centroid.iter_mut().zip(v) {
            *acc += f64::from(x);
        }
        count += 1;
    }
    let mix: Vec<f32> = prev
        .h
        .values
        .iter()
        .zip(&centroid)
        .map(|(&h, &c)| (0.5 * f64::from(h) + 0.5 * c / count as f64) as f32)
        .collect();
    let h = normalize(&Embedding::new(mix)).unwrap_or_else(|_| prev.h.clone());
    let output = OutputRecord {
        top: ctx.merged.first().map(|i| (i.source, i.id)),
        state_digest: state_digest(&h),
    };
    Ok((AgentState { h, step: prev.step + 1 }, output))
}

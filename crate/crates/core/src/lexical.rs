//! Hybrid (dense + lexical) retrieval over a chunk collection.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::ChunkRecord;
use crate::embedder::Embedder;
use crate::error::Result;
use crate::exec::Exec;
use crate::vecindex::{FlatIndex, Metric, SearchHit, VectorIndex};

/// Function words carrying no topical signal; dropped from both chunks and queries.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "by", "for", "from", "how", "i", "in", "is", "it", "its", "me",
    "my", "of", "on", "or", "that", "the", "this", "to", "was", "what", "when", "where", "which", "who", "why", "with",
    "you",
];

/// Lowercased whitespace tokens, stopwords removed.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
}

/// Inverted index with idf-weighted token overlap scoring.
#[derive(Debug, Clone, Default)]
pub struct LexicalIndex {
    postings: HashMap<String, Vec<u64>>,
    docs: usize,
}

impl LexicalIndex {
    pub fn build(chunks: &[ChunkRecord]) -> Self {
        let mut postings: HashMap<String, Vec<u64>> = HashMap::new();
        for c in chunks {
            let distinct: BTreeSet<String> = tokenize(&c.text).collect();
            for t in distinct {
                postings.entry(t).or_default().push(c.chunk_id);
            }
        }
        Self {
            postings,
            docs: chunks.len(),
        }
    }

    pub fn idf(&self, token: &str) -> f64 {
        let df = self.postings.get(token).map_or(0, Vec::len);
        (1.0 + self.docs as f64 / (df as f64 + 1.0)).ln()
    }

    /// Matched idf mass over the idf mass of the in-vocabulary query tokens,
    /// in `[0, 1]`, for every chunk sharing at least one token with the query.
    /// Tokens absent from every chunk cannot discriminate and are ignored.
    pub fn score(&self, query: &str) -> HashMap<u64, f64> {
        let tokens: BTreeSet<String> = tokenize(query).filter(|t| self.postings.contains_key(t)).collect();
        let total: f64 = tokens.iter().map(|t| self.idf(t)).sum();
        let mut out: HashMap<u64, f64> = HashMap::new();
        if total <= 0.0 {
            return out;
        }
        for t in &tokens {
            if let Some(ids) = self.postings.get(t) {
                let w = self.idf(t) / total;
                for &id in ids {
                    *out.entry(id).or_default() += w;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridWeights {
    pub dense: f64,
    pub lexical: f64,
}

impl Default for HybridWeights {
    fn default() -> Self {
        Self {
            dense: 0.5,
            lexical: 0.5,
        }
    }
}

/// Dense index plus lexical postings over the same chunk ids.
pub struct HybridIndex {
    pub dense: VectorIndex,
    pub lexical: LexicalIndex,
    pub embedder: Embedder,
    pub weights: HybridWeights,
}

impl HybridIndex {
    pub fn build(chunks: &[ChunkRecord], embedder: Embedder, metric: Metric, exec: Exec) -> Result<Self> {
        let vectors = exec.map(chunks, |c| embedder.embed_one(&c.text));
        let items: Vec<_> = chunks.iter().map(|c| c.chunk_id).zip(vectors).collect();
        let mut flat = FlatIndex::new(embedder.config.dim, metric);
        flat.add_batch(&items)?;
        Ok(Self {
            dense: VectorIndex::Flat(flat),
            lexical: LexicalIndex::build(chunks),
            embedder,
            weights: HybridWeights::default(),
        })
    }

    fn dense_similarity(&self, score: f32) -> f64 {
        match self.dense.metric() {
            Metric::Ip => f64::from(score),
            Metric::L2 => -f64::from(score),
        }
    }

    /// Exact top-k by `w_dense * sim + w_lex * lexical`. Candidates are the
    /// dense top-k plus every lexical match; any other chunk has zero lexical
    /// score and a dense score no better than the dense k-th, so it cannot
    /// outrank the candidates.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let q = self.embedder.embed_one(query);
        let lex = self.lexical.score(query);
        let mut cand: HashMap<u64, f64> = HashMap::new();
        for h in self.dense.search_with(&q.values, k, Exec::Serial)? {
            cand.insert(h.id, self.weights.dense * self.dense_similarity(h.score));
        }
        for &id in lex.keys() {
            if cand.contains_key(&id) {
                continue;
            }
            if let Some(v) = self.dense.get(id) {
                let s = self.dense.metric().score(&q.values, v);
                cand.insert(id, self.weights.dense * self.dense_similarity(s));
            }
        }
        let mut hits: Vec<(u64, f64)> = cand
            .into_iter()
            .map(|(id, d)| (id, d + self.weights.lexical * lex.get(&id).copied().unwrap_or(0.0)))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        Ok(hits
            .into_iter()
            .map(|(id, score)| SearchHit {
                id,
                score: score as f32,
            })
            .collect())
    }
}

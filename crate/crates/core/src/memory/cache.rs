use serde::{Deserialize, Serialize};

use crate::embedder::{dot, Embedding};
use crate::error::{Error, Result};

pub const DEFAULT_CACHE_THRESHOLD: f64 = 0.95;

/// Query-embedding keyed response cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCache {
    entries: Vec<(Embedding, String)>,
    threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheHit<'a> {
    pub payload: &'a str,
    pub similarity: f64,
}

fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    f64::from(dot(a.as_slice(), b.as_slice())) / denom
}

impl SemanticCache {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cache threshold {threshold} outside (0, 1]"
            )));
        }
        Ok(Self {
            entries: Vec::new(),
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, query: Embedding, payload: impl Into<String>) {
        self.entries.push((query, payload.into()));
    }
}

/// Best cached entry with cosine similarity at or above the threshold;
/// equal similarities resolve to the earliest insertion.
pub fn cache_lookup<'a>(query: &Embedding, cache: &'a SemanticCache) -> Option<CacheHit<'a>> {
    let mut best: Option<CacheHit<'a>> = None;
    for (key, payload) in &cache.entries {
        if key.dim() != query.dim() {
            continue;
        }
        // f32 rounding can push an exact repeat slightly above 1.0
        let sim = cosine(query, key).min(1.0);
        if sim < cache.threshold {
            continue;
        }
        if best.as_ref().is_none_or(|b| sim > b.similarity) {
            best = Some(CacheHit {
                payload,
                similarity: sim,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::{embed_text, normalize};

    fn e(t: &str) -> Embedding {
        normalize(&embed_text(t, 64).unwrap()).unwrap()
    }

    #[test]
    fn exact_repeat_hits() {
        let mut c = SemanticCache::new(DEFAULT_CACHE_THRESHOLD).unwrap();
        assert!(cache_lookup(&e("q"), &c).is_none());
        c.insert(e("q"), "answer");
        c.insert(e("other"), "nope");
        let hit = cache_lookup(&e("q"), &c).unwrap();
        assert_eq!(hit.payload, "answer");
        assert!((hit.similarity - 1.0).abs() < 1e-6);
        assert!(cache_lookup(&e("unrelated"), &c).is_none());
    }

    #[test]
    fn threshold_is_respected() {
        let mut c = SemanticCache::new(0.9).unwrap();
        c.insert(Embedding::new(vec![1.0, 0.0]), "x");
        // cos = 0.8
        assert!(cache_lookup(&Embedding::new(vec![0.8, 0.6]), &c).is_none());
        let mut loose = SemanticCache::new(0.5).unwrap();
        loose.insert(Embedding::new(vec![1.0, 0.0]), "x");
        assert!(cache_lookup(&Embedding::new(vec![0.8, 0.6]), &loose).is_some());
        assert!(SemanticCache::new(0.0).is_err());
        assert!(SemanticCache::new(1.5).is_err());
    }
}

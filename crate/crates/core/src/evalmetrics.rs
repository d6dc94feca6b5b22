//! Retrieval-quality and latency aggregates.
//!
//! Quality metrics are computed over the rank of the first correct result;
//! a case whose gold item is not found within the evaluated depth contributes
//! zero to every metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default retrieval depth for Hit@k.
pub const DEFAULT_HIT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankOutcome {
    pub case_id: usize,
    /// 1-based rank of the first correct result, `None` when not retrieved.
    pub rank: Option<usize>,
}

impl RankOutcome {
    pub fn new(case_id: usize, rank: Option<usize>) -> Result<Self> {
        if rank == Some(0) {
            return Err(Error::InvalidArgument(format!("case {case_id}: rank must be >= 1")));
        }
        Ok(Self { case_id, rank })
    }

    /// Rank of `gold` within `ranking`, if present.
    pub fn from_ranking(case_id: usize, ranking: &[u64], gold: u64) -> Self {
        Self {
            case_id,
            rank: ranking.iter().position(|&id| id == gold).map(|i| i + 1),
        }
    }
}

fn mean_of(outcomes: &[RankOutcome], f: impl Fn(Option<usize>) -> f64) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(|o| f(o.rank)).sum::<f64>() / outcomes.len() as f64
}

pub fn top1(outcomes: &[RankOutcome]) -> f64 {
    mean_of(outcomes, |r| f64::from(u8::from(r == Some(1))))
}

pub fn hit_at_k(outcomes: &[RankOutcome], k: usize) -> f64 {
    mean_of(outcomes, |r| f64::from(u8::from(r.is_some_and(|r| r <= k))))
}

pub fn mrr(outcomes: &[RankOutcome]) -> f64 {
    mean_of(outcomes, |r| r.map_or(0.0, |r| 1.0 / r as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub count: usize,
    pub top1: f64,
    pub hit_at_k: f64,
    pub mrr: f64,
    pub k: usize,
}

pub fn summarize_quality(outcomes: &[RankOutcome], k: usize) -> Result<QualitySummary> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("no retrieval outcomes".into()));
    }
    Ok(QualitySummary {
        count: outcomes.len(),
        top1: top1(outcomes),
        hit_at_k: hit_at_k(outcomes, k),
        mrr: mrr(outcomes),
        k,
    })
}

/// Per-query latency breakdown in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySample {
    pub cache_hit: bool,
    pub lookup_ms: f64,
    pub retrieval_ms: f64,
    pub memory_load_ms: f64,
    pub memory_store_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub hit_rate: f64,
    pub lookup_ms: f64,
    pub retrieval_ms: f64,
    pub memory_load_ms: f64,
    pub memory_store_ms: f64,
    pub total_ms: f64,
}

/// Arithmetic mean; errors on empty input.
pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("mean of no samples".into()));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn summarize_latency(samples: &[LatencySample]) -> Result<LatencySummary> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no latency samples".into()));
    }
    let field = |f: fn(&LatencySample) -> f64| -> Result<f64> { mean(&samples.iter().map(f).collect::<Vec<_>>()) };
    Ok(LatencySummary {
        count: samples.len(),
        hit_rate: field(|s| f64::from(u8::from(s.cache_hit)))?,
        lookup_ms: field(|s| s.lookup_ms)?,
        retrieval_ms: field(|s| s.retrieval_ms)?,
        memory_load_ms: field(|s| s.memory_load_ms)?,
        memory_store_ms: field(|s| s.memory_store_ms)?,
        total_ms: field(|s| s.total_ms)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcomes(ranks: &[Option<usize>]) -> Vec<RankOutcome> {
        ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| RankOutcome::new(i, r).unwrap())
            .collect()
    }

    #[test]
    fn quality_examples() {
        let o = outcomes(&[Some(1), Some(2), Some(4)]);
        assert!((top1(&o) - 1.0 / 3.0).abs() < 1e-12);
        assert!((hit_at_k(&o, 2) - 2.0 / 3.0).abs() < 1e-12);
        assert!((mrr(&o) - 1.75 / 3.0).abs() < 1e-12);
        assert_eq!(hit_at_k(&o, 4), 1.0);

        let all_first = outcomes(&[Some(1); 5]);
        assert_eq!(top1(&all_first), 1.0);
        assert_eq!(mrr(&all_first), 1.0);

        let missing = outcomes(&[None]);
        assert_eq!(mrr(&missing), 0.0);
        assert_eq!(hit_at_k(&missing, 100), 0.0);
        assert!(RankOutcome::new(0, Some(0)).is_err());
        assert!(summarize_quality(&[], 10).is_err());
    }

    #[test]
    fn rank_from_ranking() {
        assert_eq!(RankOutcome::from_ranking(0, &[5, 9, 2], 2).rank, Some(3));
        assert_eq!(RankOutcome::from_ranking(0, &[5, 9, 2], 7).rank, None);
    }

    #[test]
    fn latency_examples() {
        let s = |ms: f64| LatencySample {
            total_ms: ms,
            lookup_ms: ms,
            ..LatencySample::default()
        };
        let sum = summarize_latency(&[s(1.0), s(2.0), s(3.0)]).unwrap();
        assert_eq!(sum.total_ms, 2.0);
        assert_eq!(sum.count, 3);
        assert_eq!(summarize_latency(&[s(4.5)]).unwrap().lookup_ms, 4.5);
        assert!(matches!(summarize_latency(&[]), Err(Error::EmptyInput(_))));
        let hits = [
            LatencySample {
                cache_hit: true,
                ..LatencySample::default()
            },
            LatencySample::default(),
        ];
        assert_eq!(summarize_latency(&hits).unwrap().hit_rate, 0.5);
    }

    proptest! {
        #[test]
        fn metric_ordering(ranks in prop::collection::vec(prop::option::of(1usize..50), 1..200), k in 1usize..60) {
            let o = outcomes(&ranks);
            let (t, h, m) = (top1(&o), hit_at_k(&o, k), mrr(&o));
            prop_assert!(t <= m + 1e-12);
            prop_assert!(t <= h + 1e-12);
            for v in [t, h, m] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn permutation_invariant(ranks in prop::collection::vec(prop::option::of(1usize..50), 1..100), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let o = outcomes(&ranks);
            let mut shuffled = o.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert!((top1(&o) - top1(&shuffled)).abs() < 1e-12);
            prop_assert!((mrr(&o) - mrr(&shuffled)).abs() < 1e-12);
            prop_assert!((hit_at_k(&o, 10) - hit_at_k(&shuffled, 10)).abs() < 1e-12);
        }
    }
}

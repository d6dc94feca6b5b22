//! Deterministic hash embedder standing in for a remote embedding service.
//!
//! Byte stream: `d0 = SHA256(text)`, `dk = SHA256(d0 || k_be32)` for `k >= 1`,
//! concatenated until `4 * dim` bytes are available. Each big-endian `u32`
//! maps to `2 * u / 2^32 - 1`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const DEFAULT_DIM: usize = 768;

/// Largest f32 strictly below 1.0.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f32>,
    pub normalized: bool,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Self {
        Self {
            values,
            normalized: false,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f32) -> Embedding {
        Embedding {
            values: self.values.iter().map(|x| x * factor).collect(),
            normalized: self.normalized && factor == 1.0,
        }
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn unit_interval(word: [u8; 4]) -> f32 {
    let u = u32::from_be_bytes(word);
    // The top few u32 values round up to 1.0 in f32; keep the range half-open.
    ((2.0 * (f64::from(u) / 4_294_967_296.0) - 1.0) as f32).min(BELOW_ONE)
}

/// Raw (unnormalized) embedding of `text`.
pub fn embed_text(text: &str, dim: usize) -> Result<Embedding> {
    if dim == 0 {
        return Err(Error::InvalidArgument("embedding dim must be >= 1".into()));
    }
    let d0 = Sha256::digest(text.as_bytes());
    let mut values = Vec::with_capacity(dim);
    push_words(&d0, dim, &mut values);
    let mut k: u32 = 1;
    while values.len() < dim {
        let mut h = Sha256::new();
        h.update(d0);
        h.update(k.to_be_bytes());
        push_words(&h.finalize(), dim, &mut values);
        k += 1;
    }
    Ok(Embedding::new(values))
}

fn push_words(digest: &[u8], dim: usize, out: &mut Vec<f32>) {
    for word in digest.chunks_exact(4) {
        if out.len() == dim {
            return;
        }
        out.push(unit_interval([word[0], word[1], word[2], word[3]]));
    }
}

pub fn normalize(v: &Embedding) -> Result<Embedding> {
    let norm = v.norm();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::Numeric(format!("cannot normalize vector with norm {norm}")));
    }
    Ok(Embedding {
        values: v.values.iter().map(|&x| (f64::from(x) / norm) as f32).collect(),
        normalized: true,
    })
}

/// Affine per-request latency: `request_overhead_ms + per_item_ms * batch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LatencyParams {
    pub request_overhead_ms: f64,
    pub per_item_ms: f64,
}

impl LatencyParams {
    pub fn new(request_overhead_ms: f64, per_item_ms: f64) -> Self {
        Self {
            request_overhead_ms,
            per_item_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.request_overhead_ms < 0.0 || self.per_item_ms < 0.0 {
            return Err(Error::InvalidArgument("latency parameters must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn simulated_latency_ms(batch_size: usize, p: &LatencyParams) -> f64 {
    p.request_overhead_ms + p.per_item_ms * batch_size as f64
}

pub fn simulated_latency(batch_size: usize, p: &LatencyParams) -> Duration {
    Duration::from_secs_f64(simulated_latency_ms(batch_size, p).max(0.0) / 1e3)
}

/// Occupy the calling thread for `d`. Returns false when `cancel` was raised
/// before the deadline.
pub fn occupy(d: Duration, cancel: Option<&AtomicBool>) -> bool {
    occupy_until(Instant::now() + d, cancel)
}

/// Occupy the calling thread until `deadline`; see [`occupy`].
pub fn occupy_until(deadline: Instant, cancel: Option<&AtomicBool>) -> bool {
    const SLICE: Duration = Duration::from_millis(20);
    loop {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        let left = deadline - now;
        match cancel {
            Some(_) => std::thread::sleep(left.min(SLICE)),
            None => std::thread::sleep(left),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub latency: LatencyParams,
    /// Unit-normalize outputs (used with inner-product indices).
    pub normalize: bool,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            latency: LatencyParams::default(),
            normalize: true,
        }
    }
}

/// Stateless batch embedder. Each call charges the simulated service latency
/// to the calling thread only.
#[derive(Debug, Clone)]
pub struct Embedder {
    pub config: EmbedderConfig,
    pub exec: Exec,
}

impl Embedder {
    pub fn new(config: EmbedderConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be >= 1".into()));
        }
        config.latency.validate()?;
        Ok(Self {
            config,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Embedding of one text without any latency charge.
    pub fn embed_one(&self, text: &str) -> Embedding {
        let raw = embed_text(text, self.config.dim).expect("dim validated at construction");
        if self.config.normalize {
            normalize(&raw).expect("hash-derived vectors have non-zero norm")
        } else {
            raw
        }
    }

    pub fn embed_batch<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<Embedding> {
        self.embed_batch_cancellable(texts, None)
            .expect("uncancellable call completes")
    }

    /// Hash every text, then hold the thread for the simulated request latency,
    /// so a call costs the modeled latency plus the real hashing time.
    /// `None` means the call was cancelled mid-request.
    pub fn embed_batch_cancellable<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
        cancel: Option<&AtomicBool>,
    ) -> Option<Vec<Embedding>> {
        if texts.is_empty() {
            return Some(Vec::new());
        }
        let out = self.exec.map(texts, |t| self.embed_one(t.as_ref()));
        occupy(simulated_latency(texts.len(), &self.config.latency), cancel).then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Frozen from an independent SHA-256 (Python hashlib) plus the word mapping.
    const A4: [f32; 4] = [0.582_748_53, 0.578_971_6, 0.959_051_3, 0.204_219_37];
    const A10_TAIL: [f32; 2] = [-0.707_018_7, 0.864_011_1];
    const B4: [f32; 4] = [-0.514_529_2, -0.998_249_8, -0.597_372_1, -0.211_862_42];

    #[test]
    fn matches_reference_digest_mapping() {
        let a = embed_text("a", 4).unwrap();
        assert_eq!(a.values, A4);
        assert_eq!(
            a.values[0],
            (2.0 * (0xCA97_8112u32 as f64 / 4_294_967_296.0) - 1.0) as f32
        );
        // components 8 and 9 come from the first chained digest
        let a10 = embed_text("a", 10).unwrap();
        assert_eq!(&a10.values[8..], &A10_TAIL);
        assert_eq!(&a10.values[..4], &A4);
        assert_eq!(embed_text("b", 4).unwrap().values, B4);
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(matches!(embed_text("a", 0), Err(Error::InvalidArgument(_))));
        assert!(Embedder::new(EmbedderConfig {
            dim: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn latency_formula() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(simulated_latency_ms(32, &LatencyParams::new(5.0, 1.0)), 37.0));
        assert!(close(simulated_latency_ms(1, &LatencyParams::new(0.0, 0.0)), 0.0));
        assert!(close(simulated_latency_ms(64, &LatencyParams::new(5.0, 0.5)), 37.0));
        assert_eq!(
            simulated_latency(32, &LatencyParams::new(5.0, 1.0)),
            Duration::from_millis(37)
        );
        // 4096 texts in batches of 64 at {5,1}: 64 serial calls of 69 ms
        let total: f64 = (0..64)
            .map(|_| simulated_latency_ms(64, &LatencyParams::new(5.0, 1.0)))
            .sum();
        assert!(close(total, 4416.0));
        assert!(LatencyParams::new(-1.0, 0.0).validate().is_err());
    }

    #[test]
    fn normalize_examples() {
        let v = normalize(&Embedding::new(vec![3.0, 4.0])).unwrap();
        assert!((v.values[0] - 0.6).abs() < 1e-6 && (v.values[1] - 0.8).abs() < 1e-6);
        assert!(v.normalized);
        let unit = Embedding::new(vec![1.0, 0.0, 0.0]);
        assert_eq!(normalize(&unit).unwrap().values, unit.values);
        assert!(matches!(normalize(&Embedding::zeros(3)), Err(Error::Numeric(_))));
    }

    #[test]
    fn batch_equals_singles_and_is_stateless() {
        let e = Embedder::new(EmbedderConfig {
            dim: 16,
            ..Default::default()
        })
        .unwrap();
        let texts = ["alpha", "beta", "gamma", "delta"];
        let whole = e.embed_batch(&texts);
        let mut parts = e.embed_batch(&texts[..1]);
        parts.extend(e.embed_batch(&texts[1..]));
        assert_eq!(whole, parts);
        assert_eq!(whole[2], e.embed_one("gamma"));
        let serial = e.clone().with_exec(Exec::Serial).embed_batch(&texts);
        assert_eq!(serial, whole);
    }

    #[test]
    fn batch_call_charges_latency() {
        let e = Embedder::new(EmbedderConfig {
            dim: 8,
            latency: LatencyParams::new(20.0, 1.0),
            normalize: true,
        })
        .unwrap();
        let t = Instant::now();
        e.embed_batch(&["x"; 10]);
        assert!(t.elapsed() >= Duration::from_millis(30));
    }

    #[test]
    fn cancelled_call_returns_early() {
        let e = Embedder::new(EmbedderConfig {
            dim: 8,
            latency: LatencyParams::new(5_000.0, 0.0),
            normalize: true,
        })
        .unwrap();
        let flag = AtomicBool::new(true);
        let t = Instant::now();
        assert!(e.embed_batch_cancellable(&["x"], Some(&flag)).is_none());
        assert!(t.elapsed() < Duration::from_secs(1));
    }

    proptest! {
        #[test]
        fn raw_range_and_unit_norm(text in ".{0,64}", dim in 1usize..200) {
            let raw = embed_text(&text, dim).unwrap();
            prop_assert_eq!(raw.dim(), dim);
            prop_assert!(raw.values.iter().all(|&x| (-1.0..1.0).contains(&x)));
            prop_assert_eq!(&raw, &embed_text(&text, dim).unwrap());
            let n = normalize(&raw).unwrap();
            prop_assert!((n.norm() - 1.0).abs() < 1e-6);
            let nn = normalize(&n).unwrap();
            for (a, b) in n.values.iter().zip(&nn.values) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}

//! Analytic runtime predictors for batched execution strategies.
//!
//! All predictors return milliseconds. The discrete forms count whole waves
//! (`ceil(M / P)` with `M = ceil(N / b)` batches); the `*_continuous` forms
//! drop the ceilings and are the ones that are monotone in `P` and `b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RayTerms {
    pub alpha_r: f64,
    pub beta_r: f64,
    /// Per-task scheduling overhead.
    pub sigma_r: f64,
    /// Fixed cluster / driver overhead.
    pub delta_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DaskTerms {
    pub alpha_d: f64,
    pub beta_d: f64,
    /// Task-graph management cost.
    pub gamma_d: f64,
    /// Communication cost.
    pub eta_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Superstep {
    /// Total local work of the superstep (ms of single-worker compute).
    pub w: f64,
    /// Words communicated.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BspTerms {
    pub supersteps: Vec<Superstep>,
    /// Per-word communication cost.
    pub g: f64,
    /// Barrier latency.
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub n: u64,
    pub b: u64,
    pub p: u64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub ray: RayTerms,
    #[serde(default)]
    pub dask: DaskTerms,
    #[serde(default)]
    pub bsp: BspTerms,
}

impl CostParams {
    pub fn new(n: u64, b: u64, p: u64, alpha: f64, beta: f64) -> Self {
        Self {
            n,
            b,
            p,
            alpha,
            beta,
            ray: RayTerms {
                alpha_r: alpha,
                beta_r: beta,
                ..RayTerms::default()
            },
            dask: DaskTerms {
                alpha_d: alpha,
                beta_d: beta,
                ..DaskTerms::default()
            },
            bsp: BspTerms::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.b == 0 || self.p == 0 {
            return Err(Error::InvalidArgument(format!(
                "N, b and P must be >= 1 (got N={}, b={}, P={})",
                self.n, self.b, self.p
            )));
        }
        let r = &self.ray;
        let d = &self.dask;
        let mut costs = vec![
            self.alpha, self.beta, r.alpha_r, r.beta_r, r.sigma_r, r.delta_r, d.alpha_d, d.beta_d, d.gamma_d, d.eta_d,
            self.bsp.g, self.bsp.l,
        ];
        costs.extend(self.bsp.supersteps.iter().flat_map(|s| [s.w, s.h]));
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("cost terms must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Number of batches `M = ceil(N / b)`.
    pub fn batches(&self) -> u64 {
        self.n.div_ceil(self.b)
    }

    /// Number of waves `ceil(M / P)`.
    pub fn waves(&self) -> u64 {
        self.batches().div_ceil(self.p)
    }

    fn batch_ms(&self, alpha: f64, beta: f64) -> f64 {
        alpha + beta * self.b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    pub t_startup: f64,
    pub t_drain: f64,
    pub stage_batch_times: Vec<f64>,
    pub m: u64,
}

/// `N(α + β)` for `b = 1`, otherwise `ceil(N/b)(α + βb)`.
pub fn predict_seq(p: &CostParams) -> f64 {
    p.batches() as f64 * p.batch_ms(p.alpha, p.beta)
}

/// `Nα/b + Nβ`.
pub fn predict_seq_continuous(p: &CostParams) -> f64 {
    let n = p.n as f64;
    n * p.alpha / p.b as f64 + n * p.beta
}

/// `ceil(ceil(N/b) / P) · (α + βb)`.
pub fn predict_async(p: &CostParams) -> f64 {
    p.waves() as f64 * p.batch_ms(p.alpha, p.beta)
}

/// `Nα/(bP) + Nβ/P`.
pub fn predict_async_continuous(p: &CostParams) -> f64 {
    let (n, b, w) = (p.n as f64, p.b as f64, p.p as f64);
    n * p.alpha / (b * w) + n * p.beta / w
}

/// `ceil(M/P) · (α_r + σ_r + β_r b) + δ_r`.
pub fn predict_ray(p: &CostParams) -> f64 {
    let r = &p.ray;
    p.waves() as f64 * p.batch_ms(r.alpha_r + r.sigma_r, r.beta_r) + r.delta_r
}

/// `N(α_r + σ_r)/(bP) + Nβ_r/P + δ_r`.
pub fn predict_ray_continuous(p: &CostParams) -> f64 {
    let r = &p.ray;
    let (n, b, w) = (p.n as f64, p.b as f64, p.p as f64);
    n * (r.alpha_r + r.sigma_r) / (b * w) + n * r.beta_r / w + r.delta_r
}

/// `ceil(M/P) · (α_d + β_d b) + γ_d + η_d`.
pub fn predict_dask(p: &CostParams) -> f64 {
    let d = &p.dask;
    p.waves() as f64 * p.batch_ms(d.alpha_d, d.beta_d) + d.gamma_d + d.eta_d
}

/// `Nα_d/(bP) + Nβ_d/P + γ_d + η_d`.
pub fn predict_dask_continuous(p: &CostParams) -> f64 {
    let d = &p.dask;
    let (n, b, w) = (p.n as f64, p.b as f64, p.p as f64);
    n * d.alpha_d / (b * w) + n * d.beta_d / w + d.gamma_d + d.eta_d
}

/// `Σ_s (w_s/P + g·h_s + L)`.
pub fn predict_bsp(p: &CostParams) -> f64 {
    let bsp = &p.bsp;
    bsp.supersteps
        .iter()
        .map(|s| s.w / p.p as f64 + bsp.g * s.h + bsp.l)
        .sum()
}

/// `T_startup + (M − 1)·max_k t_k + T_drain`.
pub fn predict_overlap(o: &OverlapParams) -> Result<f64> {
    if o.m == 0 {
        return Err(Error::InvalidArgument("overlap batch count must be >= 1".into()));
    }
    let bottleneck = o.stage_batch_times.iter().copied().fold(0.0, f64::max);
    Ok(o.t_startup + (o.m - 1) as f64 * bottleneck + o.t_drain)
}

/// Signed residual `measured − predict_async(params)`; negative values mean
/// the model overestimates.
pub fn fit_omega(measured_ms: f64, params: &CostParams) -> Result<f64> {
    if measured_ms.is_nan() || measured_ms < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "measured time {measured_ms} must be >= 0"
        )));
    }
    Ok(measured_ms - predict_async(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Seq,
    Async,
    Ray,
    Dask,
    Bsp,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Seq, Model::Async, Model::Ray, Model::Dask, Model::Bsp];

    pub fn name(self) -> &'static str {
        match self {
            Model::Seq => "seq",
            Model::Async => "async",
            Model::Ray => "ray",
            Model::Dask => "dask",
            Model::Bsp => "bsp",
        }
    }

    pub fn predict(self, p: &CostParams) -> f64 {
        match self {
            Model::Seq => predict_seq(p),
            Model::Async => predict_async(p),
            Model::Ray => predict_ray(p),
            Model::Dask => predict_dask(p),
            Model::Bsp => predict_bsp(p),
        }
    }

    /// Model-specific terms in `key=value` form, `;`-separated.
    pub fn extra_terms(self, p: &CostParams) -> String {
        match self {
            Model::Seq | Model::Async => String::new(),
            Model::Ray => format!(
                "alpha_r={};beta_r={};sigma_r={};delta_r={}",
                p.ray.alpha_r, p.ray.beta_r, p.ray.sigma_r, p.ray.delta_r
            ),
            Model::Dask => format!(
                "alpha_d={};beta_d={};gamma_d={};eta_d={}",
                p.dask.alpha_d, p.dask.beta_d, p.dask.gamma_d, p.dask.eta_d
            ),
            Model::Bsp => {
                let steps: Vec<String> = p.bsp.supersteps.iter().map(|s| format!("{}/{}", s.w, s.h)).collect();
                format!("supersteps={};g={};L={}", steps.join("|"), p.bsp.g, p.bsp.l)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn seq_examples() {
        assert_eq!(predict_seq(&CostParams::new(100, 1, 1, 1.0, 0.0)), 100.0);
        assert_eq!(predict_seq(&CostParams::new(100, 100, 1, 1.0, 1.0)), 101.0);
        assert_eq!(predict_seq(&CostParams::new(1000, 10, 1, 5.0, 1.0)), 1500.0);
    }

    #[test]
    fn async_examples() {
        let p = CostParams::new(1000, 10, 4, 5.0, 1.0);
        assert_eq!(predict_async(&p), 375.0);
        assert_eq!(predict_async_continuous(&p), 375.0);
        let one_wave = CostParams::new(50, 1, 50, 2.0, 3.0);
        assert_eq!(predict_async(&one_wave), 5.0);
        // embed stage of the tuned pipeline: 64 batches over 32 workers
        assert_eq!(predict_async(&CostParams::new(4096, 64, 32, 5.0, 1.0)), 138.0);
    }

    #[test]
    fn ray_examples() {
        let mut p = CostParams::new(1000, 10, 4, 5.0, 1.0);
        p.ray = RayTerms {
            alpha_r: 5.0,
            beta_r: 1.0,
            sigma_r: 5.0,
            delta_r: 100.0,
        };
        // 25 waves of (5 + 5 + 10) plus 100
        assert_eq!(predict_ray(&p), 600.0);
        assert_eq!(predict_ray_continuous(&p), 600.0);
        let mut only_delta = CostParams::new(1000, 10, 4, 0.0, 0.0);
        only_delta.ray.delta_r = 42.0;
        assert_eq!(predict_ray(&only_delta), 42.0);
    }

    #[test]
    fn dask_examples() {
        let mut p = CostParams::new(1000, 10, 4, 5.0, 1.0);
        assert_eq!(predict_dask(&p), 375.0);
        p.dask.gamma_d = 10.0;
        p.dask.eta_d = 5.0;
        assert_eq!(predict_dask(&p), 390.0);
        let mut only = CostParams::new(1000, 10, 4, 0.0, 0.0);
        only.dask.eta_d = 7.0;
        assert_eq!(predict_dask(&only), 7.0);
    }

    #[test]
    fn bsp_examples() {
        let mut p = CostParams::new(1, 1, 4, 0.0, 0.0);
        p.bsp.supersteps = vec![Superstep { w: 100.0, h: 0.0 }];
        assert_eq!(predict_bsp(&p), 25.0);
        p.bsp = BspTerms {
            supersteps: vec![Superstep::default(); 3],
            g: 1.0,
            l: 2.0,
        };
        assert_eq!(predict_bsp(&p), 6.0);
        p.bsp = BspTerms {
            supersteps: vec![
                Superstep { w: 40.0, h: 10.0 },
                Superstep { w: 400.0, h: 20.0 },
                Superstep { w: 80.0, h: 0.0 },
            ],
            g: 0.5,
            l: 1.0,
        };
        // (10 + 5 + 1) + (100 + 10 + 1) + (20 + 0 + 1)
        assert_eq!(predict_bsp(&p), 148.0);
    }

    #[test]
    fn overlap_examples() {
        let o = |ts: Vec<f64>, m, s, d| OverlapParams {
            t_startup: s,
            t_drain: d,
            stage_batch_times: ts,
            m,
        };
        assert_eq!(predict_overlap(&o(vec![9.0], 1, 3.0, 4.0)).unwrap(), 7.0);
        assert_eq!(predict_overlap(&o(vec![2.0, 2.0], 5, 1.0, 1.0)).unwrap(), 10.0);
        assert_eq!(predict_overlap(&o(vec![2.0, 5.0, 3.0], 10, 0.0, 0.0)).unwrap(), 45.0);
        assert!(predict_overlap(&o(vec![1.0], 0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn omega_is_signed_residual() {
        let p = CostParams::new(1000, 10, 4, 5.0, 1.0);
        assert_eq!(fit_omega(375.0, &p).unwrap(), 0.0);
        assert_eq!(fit_omega(425.0, &p).unwrap(), 50.0);
        assert_eq!(fit_omega(300.0, &p).unwrap(), -75.0);
        assert!(fit_omega(-1.0, &p).is_err());
    }

    #[test]
    fn validation() {
        assert!(CostParams::new(0, 1, 1, 1.0, 1.0).validate().is_err());
        assert!(CostParams::new(1, 1, 1, -1.0, 1.0).validate().is_err());
        assert!(CostParams::new(1, 1, 1, 1.0, 1.0).validate().is_ok());
    }

    fn params() -> impl Strategy<Value = CostParams> {
        (1u64..100_000, 1u64..512, 1u64..128, 0.0f64..50.0, 0.0f64..5.0)
            .prop_map(|(n, b, p, a, be)| CostParams::new(n, b, p, a, be))
    }

    proptest! {
        #[test]
        fn reductions_hold(p in params()) {
            prop_assert_eq!(predict_ray(&p), predict_async(&p));
            prop_assert_eq!(predict_dask(&p), predict_async(&p));
            let mut serial = p.clone();
            serial.p = 1;
            prop_assert_eq!(predict_async(&serial), predict_seq(&serial));
            prop_assert!(close(predict_ray_continuous(&p), predict_async_continuous(&p)));
        }

        #[test]
        fn continuous_forms_monotone(p in params(), dp in 1u64..16, db in 1u64..16) {
            let base = predict_async_continuous(&p);
            let mut more_workers = p.clone();
            more_workers.p += dp;
            prop_assert!(predict_async_continuous(&more_workers) <= base + 1e-9);
            let mut bigger_batch = p.clone();
            bigger_batch.b += db;
            prop_assert!(predict_async_continuous(&bigger_batch) <= base + 1e-9);
        }

        #[test]
        fn async_is_cheapest(p in params(), s in 0.0f64..10.0, d in 0.0f64..100.0, g in 0.0f64..50.0) {
            let mut q = p.clone();
            q.ray.sigma_r = s;
            q.ray.delta_r = d;
            q.dask.gamma_d = g;
            q.dask.eta_d = d;
            prop_assert!(predict_async(&q) <= predict_ray(&q));
            prop_assert!(predict_async(&q) <= predict_dask(&q));
            prop_assert!(predict_async(&q) <= predict_seq(&q));
        }
    }
}

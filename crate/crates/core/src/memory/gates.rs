use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedder::{dot, Embedding};

/// Write-gate parameters. `w_r` is the single extra LTM weight applied to the
/// feedback scalar, i.e. the `r_t` column of `W_L [h; r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w_s: Vec<f32>,
    pub w_l: Vec<f32>,
    pub w_e: Vec<f32>,
    pub w_r: f32,
    pub b_s: f64,
    pub b_l: f64,
    pub b_e: f64,
    pub tau_l: f64,
    pub seed: u64,
}

impl GateParams {
    /// Weights uniform in `[-1, 1]` from a ChaCha8 stream; zero biases.
    pub fn from_seed(dim: usize, tau_l: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-1.0f32..=1.0)).collect() };
        let w_s = draw(dim);
        let w_l = draw(dim);
        let w_e = draw(dim);
        let w_r = draw(1)[0];
        Self {
            w_s,
            w_l,
            w_e,
            w_r,
            b_s: 0.0,
            b_l: 0.0,
            b_e: 0.0,
            tau_l,
            seed,
        }
    }

    pub fn zeros(dim: usize, tau_l: f64) -> Self {
        Self {
            w_s: vec![0.0; dim],
            w_l: vec![0.0; dim],
            w_e: vec![0.0; dim],
            w_r: 0.0,
            b_s: 0.0,
            b_l: 0.0,
            b_e: 0.0,
            tau_l,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gates {
    pub stm: f64,
    pub ltm: f64,
    pub em: f64,
}

/// Logistic function clamped to the open interval (0, 1).
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

pub fn write_gates(h: &Embedding, feedback: f64, g: &GateParams) -> Gates {
    let h = h.as_slice();
    Gates {
        stm: sigmoid(f64::from(dot(&g.w_s, h)) + g.b_s),
        ltm: sigmoid(f64::from(dot(&g.w_l, h)) + f64::from(g.w_r) * feedback + g.b_l),
        em: sigmoid(f64::from(dot(&g.w_e, h)) + g.b_e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_half() {
        let g = GateParams::zeros(4, 0.5);
        let h = Embedding::new(vec![0.5; 4]);
        let gates = write_gates(&h, 3.0, &g);
        assert_eq!((gates.stm, gates.ltm, gates.em), (0.5, 0.5, 0.5));
    }

    #[test]
    fn saturation_stays_open() {
        let mut g = GateParams::zeros(4, 0.5);
        g.b_s = 20.0;
        g.b_e = -800.0;
        let gates = write_gates(&Embedding::new(vec![0.5; 4]), 0.0, &g);
        assert!(gates.stm > 0.999_999 && gates.stm < 1.0);
        assert!(gates.em > 0.0);
        assert!(sigmoid(1e6) < 1.0);
    }

    #[test]
    fn seeded_params_reproduce() {
        let a = GateParams::from_seed(32, 0.5, 9);
        assert_eq!(a, GateParams::from_seed(32, 0.5, 9));
        assert_ne!(a.w_s, GateParams::from_seed(32, 0.5, 10).w_s);
        assert!(a.w_l.iter().all(|w| (-1.0..=1.0).contains(w)));
        let h = Embedding::new(vec![0.1; 32]);
        assert_eq!(write_gates(&h, 0.0, &a), write_gates(&h, 0.0, &a));
        // feedback shifts only the LTM gate
        let g0 = write_gates(&h, 0.0, &a);
        let g1 = write_gates(&h, 2.0, &a);
        assert_eq!(g0.stm, g1.stm);
        assert_ne!(g0.ltm, g1.ltm);
    }
}

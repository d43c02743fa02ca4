//! Tanh-squashed Gaussian policy over the five planner weights.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::Mlp;
use super::observation::{Observation, OBS_DIM};
use crate::controller::CostWeights;
use crate::error::DrlError;

pub const ACTION_DIM: usize = 5;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Closed interval per weight, in action order `[w_d, w_h, w_v, w_o, w_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub low: [f64; ACTION_DIM],
    pub high: [f64; ACTION_DIM],
}

impl ActionSpec {
    /// Per-weight ranges.
    pub const TABLE: ActionSpec = ActionSpec {
        low: [0.1, 0.1, 0.1, 0.5, 0.5],
        high: [1.5, 1.0, 1.0, 3.0, 3.0],
    };

    /// One shared range for every weight.
    pub const GLOBAL: ActionSpec = ActionSpec {
        low: [0.1; ACTION_DIM],
        high: [5.0; ACTION_DIM],
    };

    pub fn mid(&self, i: usize) -> f64 {
        0.5 * (self.low[i] + self.high[i])
    }

    pub fn half(&self, i: usize) -> f64 {
        0.5 * (self.high[i] - self.low[i])
    }

    pub fn midpoint(&self) -> [f64; ACTION_DIM] {
        std::array::from_fn(|i| self.mid(i))
    }

    /// Maps `[-1, 1]` onto the interval, clamped against rounding.
    pub fn from_unit(&self, t: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
        std::array::from_fn(|i| (self.mid(i) + self.half(i) * t[i]).clamp(self.low[i], self.high[i]))
    }

    pub fn to_unit(&self, a: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
        std::array::from_fn(|i| ((a[i] - self.mid(i)) / self.half(i)).clamp(-1.0, 1.0))
    }

    pub fn contains(&self, a: &[f64; ACTION_DIM]) -> bool {
        (0..ACTION_DIM).all(|i| a[i] >= self.low[i] && a[i] <= self.high[i])
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; ACTION_DIM] {
        std::array::from_fn(|i| rng.random_range(self.low[i]..=self.high[i]))
    }
}

impl Default for ActionSpec {
    fn default() -> Self {
        Self::TABLE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Stochastic,
    Deterministic,
}

/// `ln(1 − tanh²u)` without cancellation.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// A batch of reparameterized samples with everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub mean: Array2<f64>,
    /// Clamped log standard deviations.
    pub log_std: Array2<f64>,
    /// True where the raw log-std was inside the clamp range.
    pub log_std_free: Array2<bool>,
    pub eps: Array2<f64>,
    pub u: Array2<f64>,
    /// Squashed action in `[-1, 1]`.
    pub t: Array2<f64>,
    pub log_prob: Array1<f64>,
}

/// `u = μ + σ·ε`, `t = tanh u`, log-density of `t` including the squash term.
pub fn squash(out: ArrayView2<'_, f64>, eps: ArrayView2<'_, f64>) -> SquashedSample {
    let b = out.nrows();
    let mean = out.slice(s![.., ..ACTION_DIM]).to_owned();
    let raw = out.slice(s![.., ACTION_DIM..2 * ACTION_DIM]);
    let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    let log_std_free = raw.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
    let mut u = Array2::zeros((b, ACTION_DIM));
    let mut t = Array2::zeros((b, ACTION_DIM));
    let mut log_prob = Array1::zeros(b);
    for r in 0..b {
        let mut lp = 0.0;
        for j in 0..ACTION_DIM {
            let e = eps[[r, j]];
            let ls = log_std[[r, j]];
            let uj = mean[[r, j]] + ls.exp() * e;
            u[[r, j]] = uj;
            t[[r, j]] = uj.tanh();
            lp += -0.5 * e * e - ls - HALF_LN_2PI - log_one_minus_tanh_sq(uj);
        }
        log_prob[r] = lp;
    }
    SquashedSample {
        mean,
        log_std,
        log_std_free,
        eps: eps.to_owned(),
        u,
        t,
        log_prob,
    }
}

/// Actor network plus the interval map for its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub net: Mlp,
    pub spec: ActionSpec,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(hidden: usize, spec: ActionSpec, rng: &mut R) -> Self {
        Self {
            net: Mlp::new(&[OBS_DIM, hidden, hidden, 2 * ACTION_DIM], rng),
            spec,
        }
    }

    /// Weights and log-probability of the squashed action. Deterministic mode
    /// uses the mean and never touches `rng`.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        mode: PolicyMode,
        rng: &mut R,
    ) -> Result<(CostWeights, f64), DrlError> {
        let eps = match mode {
            PolicyMode::Deterministic => [0.0; ACTION_DIM],
            PolicyMode::Stochastic => std::array::from_fn(|_| rng.sample(StandardNormal)),
        };
        self.act_with_noise(obs, &eps)
    }

    pub fn act_with_noise(&self, obs: &Observation, eps: &[f64; ACTION_DIM]) -> Result<(CostWeights, f64), DrlError> {
        if !obs.is_finite() {
            return Err(DrlError::NonFinite("observation"));
        }
        let x = ArrayView2::from_shape((1, OBS_DIM), obs.as_slice()).expect("observation shape");
        let out = self.net.forward(x);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(DrlError::NonFinite("policy output"));
        }
        let eps = ArrayView2::from_shape((1, ACTION_DIM), eps).expect("noise shape");
        let smp = squash(out.view(), eps);
        let t: [f64; ACTION_DIM] = std::array::from_fn(|j| smp.t[[0, j]]);
        let a = self.spec.from_unit(&t);
        Ok((CostWeights::from_action(&a), smp.log_prob[0]))
    }

    pub fn deterministic(&self, obs: &Observation) -> Result<CostWeights, DrlError> {
        self.act_with_noise(obs, &[0.0; ACTION_DIM]).map(|(w, _)| w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Observation(std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
    }

    #[test]
    fn zero_network_gives_midpoints() {
        let p = Policy {
            net: Mlp::zeros(&[OBS_DIM, 8, 8, 2 * ACTION_DIM]),
            spec: ActionSpec::TABLE,
        };
        let w = p.deterministic(&obs(1)).unwrap();
        assert_eq!(w.to_action(), ActionSpec::TABLE.midpoint());
    }

    #[test]
    fn deterministic_log_prob_is_density_at_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = Policy::new(16, ActionSpec::TABLE, &mut rng);
        let o = obs(2);
        let (_, lp) = p.act(&o, PolicyMode::Deterministic, &mut rng).unwrap();
        let out = p.net.forward(ArrayView2::from_shape((1, OBS_DIM), o.as_slice()).unwrap());
        let mut want = 0.0;
        for j in 0..ACTION_DIM {
            let mu: f64 = out[[0, j]];
            let sigma = out[[0, ACTION_DIM + j]].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
            let density_at_mean = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            want += density_at_mean.ln() - (1.0 - mu.tanh().powi(2)).ln();
        }
        assert!((lp - want).abs() < 1e-9, "{lp} vs {want}");
    }

    #[test]
    fn stable_squash_correction() {
        for u in [-30.0, -3.0, -0.1, 0.0, 0.7, 5.0, 40.0] {
            let direct = (1.0 - f64::tanh(u).powi(2)).ln();
            if direct.is_finite() && u.abs() < 10.0 {
                assert!((log_one_minus_tanh_sq(u) - direct).abs() < 1e-9);
            }
            assert!(log_one_minus_tanh_sq(u).is_finite());
        }
    }

    #[test]
    fn non_finite_observation_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = Policy::new(8, ActionSpec::TABLE, &mut rng);
        let mut o = obs(3);
        o.0[10] = f64::NAN;
        assert!(matches!(p.deterministic(&o), Err(DrlError::NonFinite(_))));
    }

    #[test]
    fn unit_round_trip() {
        let spec = ActionSpec::TABLE;
        let a = [1.0, 0.6, 0.8, 2.0, 2.0];
        let back = spec.from_unit(&spec.to_unit(&a));
        for i in 0..ACTION_DIM {
            assert!((back[i] - a[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn actions_stay_in_range(seed in 0u64..10_000, scale in 0.1f64..50.0, stochastic in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = Policy::new(8, ActionSpec::TABLE, &mut rng);
            for l in &mut p.net.layers {
                l.w.mapv_inplace(|v| v * scale);
            }
            let mode = if stochastic { PolicyMode::Stochastic } else { PolicyMode::Deterministic };
            let (w, lp) = p.act(&obs(seed), mode, &mut rng).unwrap();
            prop_assert!(ActionSpec::TABLE.contains(&w.to_action()));
            prop_assert!(!lp.is_nan());
        }
    }
}

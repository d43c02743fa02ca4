//! Soft actor-critic learner: twin critics with Polyak targets, squashed
//! Gaussian actor and automatic temperature.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::{Adam, AdamConfig, Mlp, MlpGrads, ScalarAdam};
use super::observation::OBS_DIM;
use super::policy::{squash, ActionSpec, Policy, ACTION_DIM};
use super::replay::Batch;
use crate::error::DrlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacHyper {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_entropy: f64,
    pub initial_alpha: f64,
    pub hidden: usize,
}

impl Default for SacHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 256,
            replay_capacity: 100_000,
            target_entropy: -(ACTION_DIM as f64),
            initial_alpha: 0.2,
            hidden: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    /// Mean of the two critic losses.
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    /// Temperature used during this update.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    pub hyper: SacHyper,
    pub policy: Policy,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub actor_opt: Adam,
    pub critic1_opt: Adam,
    pub critic2_opt: Adam,
    pub log_alpha: f64,
    pub alpha_opt: ScalarAdam,
}

pub fn critic_input(obs: ArrayView2<'_, f64>, unit_actions: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate![Axis(1), obs, unit_actions]
}

/// `mean((Q(x) − y)²)` and its parameter gradient.
pub fn critic_loss_grad(critic: &Mlp, x: ArrayView2<'_, f64>, y: &Array1<f64>) -> (f64, MlpGrads) {
    let n = x.nrows() as f64;
    let (q, cache) = critic.forward_cached(x);
    let diff = q.column(0).to_owned() - y;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let g = (diff * (2.0 / n)).insert_axis(Axis(1));
    let (grads, _) = critic.backward(&cache, g);
    (loss, grads)
}

/// `mean(α·logπ(a|s) − min(Q1, Q2)(s, a))` with `a` reparameterized by `eps`,
/// its actor gradient, and the per-sample log-probabilities.
pub fn actor_loss_grad(
    actor: &Mlp,
    critic1: &Mlp,
    critic2: &Mlp,
    obs: ArrayView2<'_, f64>,
    eps: ArrayView2<'_, f64>,
    alpha: f64,
) -> (f64, MlpGrads, Array1<f64>) {
    let b = obs.nrows();
    let n = b as f64;
    let obs_dim = obs.ncols();
    let (out, cache) = actor.forward_cached(obs);
    let smp = squash(out.view(), eps);
    let x = critic_input(obs, smp.t.view());
    let (q1, c1) = critic1.forward_cached(x.view());
    let (q2, c2) = critic2.forward_cached(x.view());
    let pick_first: Vec<bool> = (0..b).map(|r| q1[[r, 0]] <= q2[[r, 0]]).collect();
    let mut loss = 0.0;
    for r in 0..b {
        let qmin = if pick_first[r] { q1[[r, 0]] } else { q2[[r, 0]] };
        loss += alpha * smp.log_prob[r] - qmin;
    }
    loss /= n;

    // dQmin/dt through whichever critic is smaller for each row.
    let sel1 = Array2::from_shape_fn((b, 1), |(r, _)| if pick_first[r] { 1.0 } else { 0.0 });
    let sel2 = Array2::from_shape_fn((b, 1), |(r, _)| if pick_first[r] { 0.0 } else { 1.0 });
    let (_, gx1) = critic1.backward(&c1, sel1);
    let (_, gx2) = critic2.backward(&c2, sel2);
    let dq_dt = (gx1 + gx2).slice(s![.., obs_dim..]).to_owned();

    let mut g_out = Array2::zeros((b, 2 * ACTION_DIM));
    for r in 0..b {
        for j in 0..ACTION_DIM {
            let t = smp.t[[r, j]];
            let sigma_eps = smp.log_std[[r, j]].exp() * smp.eps[[r, j]];
            // d/du of (α·logπ − Qmin) at fixed ε.
            let dl_du = alpha * 2.0 * t - dq_dt[[r, j]] * (1.0 - t * t);
            g_out[[r, j]] = dl_du / n;
            if smp.log_std_free[[r, j]] {
                g_out[[r, ACTION_DIM + j]] = (dl_du * sigma_eps - alpha) / n;
            }
        }
    }
    let (grads, _) = actor.backward(&cache, g_out);
    (loss, grads, smp.log_prob)
}

/// `−mean(log α · (logπ + H̄))` and its derivative in `log α`.
pub fn alpha_loss_grad(log_alpha: f64, log_prob: &Array1<f64>, target_entropy: f64) -> (f64, f64) {
    let m = log_prob.mapv(|lp| lp + target_entropy).mean().unwrap_or(0.0);
    (-log_alpha * m, -m)
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, ACTION_DIM), || rng.sample(StandardNormal))
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(hyper: SacHyper, spec: ActionSpec, rng: &mut R) -> Self {
        let policy = Policy::new(hyper.hidden, spec, rng);
        let critic_sizes = [OBS_DIM + ACTION_DIM, hyper.hidden, hyper.hidden, 1];
        let critic1 = Mlp::new(&critic_sizes, rng);
        let critic2 = Mlp::new(&critic_sizes, rng);
        Self {
            actor_opt: Adam::new(&policy.net),
            critic1_opt: Adam::new(&critic1),
            critic2_opt: Adam::new(&critic2),
            target1: critic1.clone(),
            target2: critic2.clone(),
            critic1,
            critic2,
            policy,
            log_alpha: hyper.initial_alpha.ln(),
            alpha_opt: ScalarAdam::default(),
            hyper,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Soft TD targets: `r` on terminal transitions, otherwise
    /// `r + γ·(min Q_target(s', a') − α·logπ(a'|s'))` with `a'` drawn via `eps_next`.
    pub fn td_targets(&self, batch: &Batch, eps_next: ArrayView2<'_, f64>) -> Array1<f64> {
        let alpha = self.alpha();
        let out = self.policy.net.forward(batch.next_obs.view());
        let smp = squash(out.view(), eps_next);
        let x = critic_input(batch.next_obs.view(), smp.t.view());
        let q1 = self.target1.forward(x.view());
        let q2 = self.target2.forward(x.view());
        Array1::from_shape_fn(batch.len(), |r| {
            if batch.dones[r] {
                batch.rewards[r]
            } else {
                let q = q1[[r, 0]].min(q2[[r, 0]]);
                batch.rewards[r] + self.hyper.gamma * (q - alpha * smp.log_prob[r])
            }
        })
    }

    /// One gradient step on both critics, the actor and the temperature,
    /// followed by the Polyak target update.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats, DrlError> {
        if batch.is_empty() {
            return Err(DrlError::EmptyBatch);
        }
        let adam = AdamConfig::with_lr(self.hyper.lr);
        let alpha = self.alpha();
        let b = batch.len();

        let eps_next = normal_matrix(b, rng);
        let y = self.td_targets(batch, eps_next.view());
        let x = critic_input(batch.obs.view(), batch.actions.view());
        let (l1, g1) = critic_loss_grad(&self.critic1, x.view(), &y);
        let (l2, g2) = critic_loss_grad(&self.critic2, x.view(), &y);
        self.critic1_opt.step(&mut self.critic1, &g1, &adam);
        self.critic2_opt.step(&mut self.critic2, &g2, &adam);

        let eps = normal_matrix(b, rng);
        let (la, ga, log_prob) = actor_loss_grad(
            &self.policy.net,
            &self.critic1,
            &self.critic2,
            batch.obs.view(),
            eps.view(),
            alpha,
        );
        self.actor_opt.step(&mut self.policy.net, &ga, &adam);

        let (lt, gt) = alpha_loss_grad(self.log_alpha, &log_prob, self.hyper.target_entropy);
        self.alpha_opt.step(&mut self.log_alpha, gt, &adam);

        self.target1.polyak_from(&self.critic1, self.hyper.tau);
        self.target2.polyak_from(&self.critic2, self.hyper.tau);

        let stats = UpdateStats {
            critic_loss: 0.5 * (l1 + l2),
            actor_loss: la,
            alpha_loss: lt,
            alpha,
        };
        if !(stats.critic_loss.is_finite() && stats.actor_loss.is_finite() && self.log_alpha.is_finite()) {
            return Err(DrlError::NonFinite("losses"));
        }
        if !(self.policy.net.all_finite() && self.critic1.all_finite() && self.critic2.all_finite()) {
            return Err(DrlError::NonFinite("network parameters"));
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drl::observation::Observation;
    use crate::drl::replay::Transition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_agent(seed: u64) -> SacAgent {
        let hyper = SacHyper {
            hidden: 8,
            batch_size: 4,
            ..Default::default()
        };
        SacAgent::new(hyper, ActionSpec::TABLE, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn batch(done: bool, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts: Vec<Transition> = (0..6)
            .map(|i| Transition {
                obs: Observation(std::array::from_fn(|_| rng.random_range(-1.0..1.0))),
                action: ActionSpec::TABLE.sample_uniform(&mut rng),
                reward: i as f64 - 2.5,
                next_obs: Observation(std::array::from_fn(|_| rng.random_range(-1.0..1.0))),
                done,
            })
            .collect();
        Batch::from_transitions(&ts, &ActionSpec::TABLE)
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let agent = small_agent(1);
        let b = batch(true, 2);
        let eps = normal_matrix(b.len(), &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(agent.td_targets(&b, eps.view()), b.rewards);
        let b = batch(false, 2);
        assert_ne!(agent.td_targets(&b, eps.view()), b.rewards);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut agent = small_agent(5);
        agent.hyper.lr = 0.0;
        let before = agent.clone();
        agent.update(&batch(false, 6), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(agent.policy, before.policy);
        assert_eq!(agent.critic1, before.critic1);
        assert_eq!(agent.critic2, before.critic2);
        assert_eq!(agent.log_alpha, before.log_alpha);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut agent = small_agent(5);
        let empty = Batch::from_transitions(std::iter::empty(), &ActionSpec::TABLE);
        assert!(matches!(
            agent.update(&empty, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(DrlError::EmptyBatch)
        ));
    }

    #[test]
    fn updates_reduce_critic_loss_on_a_fixed_batch() {
        let mut agent = small_agent(9);
        agent.hyper.lr = 3e-3;
        let b = batch(true, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let first = agent.update(&b, &mut rng).unwrap().critic_loss;
        let mut last = first;
        for _ in 0..300 {
            last = agent.update(&b, &mut rng).unwrap().critic_loss;
        }
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn temperature_grad_sign() {
        let lp = Array1::from(vec![-8.0, -7.0]);
        // Entropy above target → lower α.
        let (_, g) = alpha_loss_grad(0.0, &lp, -5.0);
        assert!(g > 0.0);
    }
}

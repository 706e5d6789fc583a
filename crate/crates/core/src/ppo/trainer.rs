//! Rollout collection and minibatch updates.

use std::collections::VecDeque;
use std::ops::ControlFlow;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::checkpoint::{Checkpoint, CheckpointError};
use super::config::{ConfigError, TrainingConfig};
use super::env::{EnvError, Environment, EvacuationEnv};
use super::gae::compute_gae;
use super::loss::{normalize_advantages, ppo_loss, Batch, LossCoefficients};
use super::network::{log_softmax, Network, NetworkConfig};
use super::sample_index;
use crate::dynamics::ActionPair;
use crate::reward::WINDOW;
use crate::world::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub gae_lambda: f64,
    /// Steps per agent between updates.
    pub rollout_horizon: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub num_parallel_agents: usize,
    /// Total agent steps (summed over agents).
    pub total_steps: u64,
    pub seed: u64,
    /// Global gradient-norm clip; 0 disables.
    pub max_grad_norm: f64,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    /// Adds a hold action to each branch.
    pub allow_hold: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            learning_rate: 3e-4,
            clip_epsilon: 0.2,
            gae_lambda: 0.95,
            rollout_horizon: 256,
            minibatch_size: 1024,
            epochs_per_update: 3,
            entropy_coeff: 0.005,
            value_coeff: 0.5,
            num_parallel_agents: 60,
            total_steps: 14_550_000,
            seed: 0,
            max_grad_norm: 0.5,
            hidden_width: 512,
            hidden_depth: 2,
            allow_hold: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if self.rollout_horizon == 0 || self.minibatch_size == 0 || self.epochs_per_update == 0 {
            return bad("rollout_horizon, minibatch_size and epochs_per_update must be positive");
        }
        if self.num_parallel_agents == 0 {
            return bad("num_parallel_agents must be at least 1");
        }
        if self.hidden_width == 0 || self.hidden_depth == 0 {
            return bad("hidden layers must be non-empty");
        }
        if !(self.entropy_coeff >= 0.0 && self.value_coeff >= 0.0 && self.max_grad_norm >= 0.0) {
            return bad("coefficients must be non-negative");
        }
        Ok(())
    }

    pub fn network(&self, input_dim: usize) -> NetworkConfig {
        let b = if self.allow_hold { 3 } else { 2 };
        NetworkConfig {
            input_dim,
            hidden_width: self.hidden_width,
            hidden_depth: self.hidden_depth,
            branch_sizes: [b, b],
        }
    }

    fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_epsilon: self.clip_epsilon,
            entropy_coeff: self.entropy_coeff,
            value_coeff: self.value_coeff,
        }
    }
}

/// One metrics record, emitted after every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub step: u64,
    /// Mean return of the last 20 finished episodes; `None` before the first.
    pub mean_return_20: Option<f64>,
    pub unlocked_areas: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl Metrics {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("training diverged at step {step}: non-finite loss")]
    Diverged {
        step: u64,
        /// Checkpoint taken at the start of the failed update.
        last_good: Vec<u8>,
    },
}

/// Rounds to the nearest `f32` so checkpoints are lossless.
fn quantize(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = f64::from(*x as f32));
}

struct Rollout {
    obs: Array2<f64>,
    actions: Vec<(usize, usize)>,
    log_probs: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

/// Network, optimizer, counters and RNG: everything needed to continue training.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainingConfig,
    pub net: Network<f64>,
    pub adam: Adam,
    pub steps: u64,
    pub updates: u64,
    rng: ChaCha8Rng,
    recent: VecDeque<f64>,
}

impl Trainer {
    pub fn new(config: TrainingConfig, input_dim: usize) -> Result<Self, ConfigError> {
        config.trainer.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.trainer.seed);
        let mut net = Network::init(config.trainer.network(input_dim), &mut rng);
        quantize(&mut net.params);
        let adam = Adam::new(
            AdamConfig {
                learning_rate: config.trainer.learning_rate,
                ..Default::default()
            },
            net.params.len(),
        );
        Ok(Self {
            config,
            net,
            adam,
            steps: 0,
            updates: 0,
            rng,
            recent: VecDeque::with_capacity(WINDOW),
        })
    }

    pub fn mean_return_20(&self) -> Option<f64> {
        (!self.recent.is_empty())
            .then(|| self.recent.iter().sum::<f64>() / self.recent.len() as f64)
    }

    /// Serializes the full training state together with `env`'s runtime state.
    pub fn save_checkpoint<E: Environment>(&self, env: &E) -> Vec<u8> {
        let f32s = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<_>>();
        Checkpoint {
            network: self.net.config,
            params: f32s(&self.net.params),
            adam_m: f32s(&self.adam.m),
            adam_v: f32s(&self.adam.v),
            adam_t: self.adam.t,
            steps: self.steps,
            updates: self.updates,
            curriculum: env.curriculum().cloned(),
            rng: self.rng.clone(),
            config: self.config.clone(),
            env_state: env.save_state(),
            recent_returns: self.recent.iter().copied().collect(),
        }
        .to_bytes()
    }

    /// Restores a trainer and loads the saved runtime state into `env`.
    pub fn load_checkpoint<E: Environment>(
        bytes: &[u8],
        env: &mut E,
    ) -> Result<Self, CheckpointError> {
        let ckpt = Checkpoint::from_bytes(bytes)?;
        if ckpt.network.input_dim != env.observation_len() {
            return Err(CheckpointError::Incompatible(format!(
                "network input {} vs observation length {}",
                ckpt.network.input_dim,
                env.observation_len()
            )));
        }
        ckpt.config
            .trainer
            .validate()
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let f64s = |v: &[f32]| v.iter().map(|x| f64::from(*x)).collect::<Vec<_>>();
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: ckpt.config.trainer.learning_rate,
                ..Default::default()
            },
            ckpt.params.len(),
        );
        adam.m = f64s(&ckpt.adam_m);
        adam.v = f64s(&ckpt.adam_v);
        adam.t = ckpt.adam_t;
        env.load_state(&ckpt.env_state)?;
        if let Some(c) = ckpt.curriculum {
            env.set_curriculum(c);
        }
        Ok(Self {
            config: ckpt.config,
            net: Network {
                config: ckpt.network,
                params: f64s(&ckpt.params),
            },
            adam,
            steps: ckpt.steps,
            updates: ckpt.updates,
            rng: ckpt.rng,
            recent: ckpt.recent_returns.into_iter().collect(),
        })
    }

    /// Trains until `total_steps` or until `on_metrics` breaks.
    pub fn run<E: Environment>(
        &mut self,
        env: &mut E,
        mut on_metrics: impl FnMut(&Metrics) -> ControlFlow<()>,
    ) -> Result<(), TrainError> {
        while self.steps < self.config.trainer.total_steps {
            let metrics = self.iterate(env)?;
            if on_metrics(&metrics).is_break() {
                break;
            }
        }
        Ok(())
    }

    /// One rollout followed by one update. On a non-finite loss the trainer
    /// is left at the checkpoint taken before the rollout.
    pub fn iterate<E: Environment>(&mut self, env: &mut E) -> Result<Metrics, TrainError> {
        let last_good = self.save_checkpoint(env);
        let rollout = self.collect(env);
        match self.update(rollout) {
            Some((policy_loss, value_loss, entropy)) => {
                self.updates += 1;
                Ok(Metrics {
                    step: self.steps,
                    mean_return_20: self.mean_return_20(),
                    unlocked_areas: env.curriculum().map_or(1, |c| c.unlocked_count),
                    policy_loss,
                    value_loss,
                    entropy,
                })
            }
            None => {
                let step = self.steps;
                *self = Self::load_checkpoint(&last_good, env).expect("own checkpoint reloads");
                Err(TrainError::Diverged { step, last_good })
            }
        }
    }

    fn collect<E: Environment>(&mut self, env: &mut E) -> Rollout {
        let n = env.agent_count();
        let h = self.config.trainer.rollout_horizon;
        let dim = env.observation_len();
        let b0 = self.net.config.branch_sizes[0];
        // sample index = agent · h + t
        let mut obs = Array2::<f64>::zeros((n * h, dim));
        let mut actions = vec![(0, 0); n * h];
        let mut log_probs = vec![0.0; n * h];
        let mut values = vec![0.0; n * h];
        let mut rewards = vec![0.0; n * h];
        let mut dones = vec![false; n * h];
        let mut step_obs = Array2::<f64>::zeros((n, dim));

        let observe_all = |env: &E, m: &mut Array2<f64>| {
            for a in 0..n {
                env.observe(a, m.row_mut(a).as_slice_mut().expect("row-major"));
            }
        };

        for t in 0..h {
            observe_all(env, &mut step_obs);
            let fwd = self.net.forward_batch(step_obs.view());
            for a in 0..n {
                let i = a * h + t;
                let logits = fwd.logits.row(a);
                let logits = logits.as_slice().expect("row-major");
                let (lh, lv) = logits.split_at(b0);
                let (ah, av) = (
                    sample_index(lh, &mut self.rng),
                    sample_index(lv, &mut self.rng),
                );
                let (tr, record) = env.step(a, ActionPair::from_indices(ah, av));
                obs.row_mut(i).assign(&step_obs.row(a));
                actions[i] = (ah, av);
                log_probs[i] = log_softmax(lh)[ah] + log_softmax(lv)[av];
                values[i] = fwd.values[a];
                rewards[i] = tr.reward;
                dones[i] = tr.done;
                if let Some(rec) = record {
                    if self.recent.len() == WINDOW {
                        self.recent.pop_front();
                    }
                    self.recent.push_back(rec.episode_return);
                }
            }
            self.steps += n as u64;
        }

        observe_all(env, &mut step_obs);
        let bootstrap = self.net.forward_batch(step_obs.view()).values;
        let mut advantages = Vec::with_capacity(n * h);
        let mut returns = Vec::with_capacity(n * h);
        let tc = &self.config.trainer;
        for a in 0..n {
            let span = a * h..(a + 1) * h;
            let mut v = values[span.clone()].to_vec();
            v.push(bootstrap[a]);
            let (adv, ret) = compute_gae(
                &rewards[span.clone()],
                &v,
                &dones[span],
                tc.gamma,
                tc.gae_lambda,
            )
            .expect("rollout buffers agree");
            advantages.extend(adv);
            returns.extend(ret);
        }
        Rollout {
            obs,
            actions,
            log_probs,
            advantages,
            returns,
        }
    }

    /// Returns mean (policy loss, value loss, entropy) over all minibatches,
    /// or `None` on a non-finite loss or gradient.
    fn update(&mut self, r: Rollout) -> Option<(f64, f64, f64)> {
        let tc = self.config.trainer.clone();
        let coeffs = tc.coefficients();
        let total = r.actions.len();
        let mut order: Vec<usize> = (0..total).collect();
        let (mut pl, mut vl, mut ent, mut count) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..tc.epochs_per_update {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(tc.minibatch_size) {
                let mut batch = Batch {
                    observations: r.obs.select(ndarray::Axis(0), chunk),
                    actions: chunk.iter().map(|&i| r.actions[i]).collect(),
                    old_log_probs: chunk.iter().map(|&i| r.log_probs[i]).collect(),
                    advantages: chunk.iter().map(|&i| r.advantages[i]).collect(),
                    returns: chunk.iter().map(|&i| r.returns[i]).collect(),
                };
                normalize_advantages(&mut batch.advantages);
                let (report, mut grad) = ppo_loss(&self.net, &batch, &coeffs).ok()?;
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !report.total.is_finite() || !norm.is_finite() {
                    return None;
                }
                if tc.max_grad_norm > 0.0 && norm > tc.max_grad_norm {
                    let s = tc.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
                self.adam.step(&mut self.net.params, &grad);
                quantize(&mut self.net.params);
                quantize(&mut self.adam.m);
                quantize(&mut self.adam.v);
                pl += report.policy;
                vl += report.value;
                ent += report.entropy;
                count += 1;
            }
        }
        if self.net.params.iter().any(|p| !p.is_finite()) {
            return None;
        }
        let c = count as f64;
        Some((pl / c, vl / c, ent / c))
    }
}

/// Builds the training environment for `scenario` and trains a fresh policy.
pub fn train(
    scenario: &Scenario,
    config: &TrainingConfig,
    on_metrics: impl FnMut(&Metrics) -> ControlFlow<()>,
) -> Result<(Trainer, EvacuationEnv), TrainError> {
    config.validate()?;
    let tc = &config.trainer;
    let mut env = EvacuationEnv::new(
        scenario,
        config.reward.clone(),
        config.perception.clone(),
        tc.num_parallel_agents,
        tc.seed,
    )?;
    let mut trainer = Trainer::new(config.clone(), env.observation_len())?;
    trainer.run(&mut env, on_metrics)?;
    Ok((trainer, env))
}

//! Proximal policy optimization over the two-branch action space.

mod adam;
mod checkpoint;
mod config;
mod env;
mod gae;
mod loss;
mod network;
mod trainer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ActionPair;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{CheckpointError, Policy, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ConfigError, TrainingConfig};
pub use env::{EnvError, Environment, EpisodeRecord, EvacuationEnv, Transition};
pub use gae::{compute_gae, ShapeError};
pub use loss::{normalize_advantages, ppo_loss, Batch, LossCoefficients, LossError, LossReport};
pub use network::{entropy, log_softmax, softmax, Forward, Network, NetworkConfig, Real};
pub use trainer::{train, Metrics, TrainError, Trainer, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    Sample,
    #[default]
    Greedy,
}

/// Index of the first maximal logit.
pub fn argmax<T: Real>(logits: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate().skip(1) {
        if *v > logits[best] {
            best = i;
        }
    }
    best
}

/// Draws a branch index from the categorical over `logits` with one uniform.
pub fn sample_index<T: Real, R: Rng + ?Sized>(logits: &[T], rng: &mut R) -> usize {
    let probs = softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Chooses an action for one observation.
pub fn act<T: Real, R: Rng + ?Sized>(
    net: &Network<T>,
    obs: &[T],
    mode: ActMode,
    rng: &mut R,
) -> ActionPair {
    let (h, v, _) = net.forward(obs);
    act_from_logits(&h, &v, mode, rng)
}

pub fn act_from_logits<T: Real, R: Rng + ?Sized>(
    h: &[T],
    v: &[T],
    mode: ActMode,
    rng: &mut R,
) -> ActionPair {
    match mode {
        ActMode::Greedy => ActionPair::from_indices(argmax(h), argmax(v)),
        ActMode::Sample => {
            let a_h = sample_index(h, rng);
            let a_v = sample_index(v, rng);
            ActionPair::from_indices(a_h, a_v)
        }
    }
}

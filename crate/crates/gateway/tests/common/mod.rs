#![allow(dead_code)]

use std::ops::ControlFlow;
use std::path::Path;

use metis_core::ppo::{train, TrainingConfig};
use metis_core::samples;

/// A few updates on the single room: enough for a valid checkpoint.
pub fn tiny_policy() -> Vec<u8> {
    let mut cfg = TrainingConfig::default();
    let t = &mut cfg.trainer;
    t.num_parallel_agents = 4;
    t.rollout_horizon = 32;
    t.minibatch_size = 64;
    t.hidden_width = 16;
    t.total_steps = 256;
    t.seed = 3;
    let (trainer, env) = train(&samples::single_room(), &cfg, |_| ControlFlow::Continue(())).unwrap();
    trainer.save_checkpoint(&env)
}

pub fn write_policy(path: &Path) {
    std::fs::write(path, tiny_policy()).unwrap();
}

pub fn write_scenario(path: &Path, name: &str) {
    let s = samples::all().into_iter().find(|(n, _)| *n == name).unwrap().1;
    std::fs::write(path, metis_core::world::save_scenario(&s)).unwrap();
}

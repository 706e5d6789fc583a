mod common;

use std::ops::ControlFlow;

use metis_core::geometry::{Aabb, Vec2};
use metis_core::ppo::{
    compute_gae, log_softmax, ppo_loss, softmax, train, Batch, LossCoefficients, Network, NetworkConfig,
    TrainingConfig,
};
use metis_core::samples;
use metis_core::world::{save_scenario, SpawnArea};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Direct double sum: A_t = Σ_k (γλ)^(k−t) δ_k, stopping after the first terminal.
fn gae_oracle(rewards: &[f64], values: &[f64], terminals: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut sum = 0.0;
            for k in t..rewards.len() {
                let next = if terminals[k] { 0.0 } else { values[k + 1] };
                let delta = rewards[k] + gamma * next - values[k];
                sum += (gamma * lambda).powi((k - t) as i32) * delta;
                if terminals[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

fn normal(r: &mut impl Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, r)
}

fn random_batch(net: &Network<f64>, n: usize, r: &mut impl Rng) -> Batch<f64> {
    let obs = Array2::from_shape_fn((n, net.config.input_dim), |_| normal(r));
    let fwd = net.forward_batch(obs.view());
    let b0 = net.config.branch_sizes[0];
    let mut actions = Vec::new();
    let mut old = Vec::new();
    for i in 0..n {
        let row = fwd.logits.row(i).to_vec();
        let (h, v) = (r.random_range(0..b0), r.random_range(0..row.len() - b0));
        let lp = log_softmax(&row[..b0])[h] + log_softmax(&row[b0..])[v];
        actions.push((h, v));
        old.push(lp - r.random_range(0.6f64..1.4).ln());
    }
    Batch {
        observations: obs,
        actions,
        old_log_probs: old,
        advantages: (0..n).map(|_| normal(r)).collect(),
        returns: (0..n).map(|_| normal(r)).collect(),
    }
}

proptest! {
    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-50.0f64..50.0, 2..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn gae_matches_direct_sum(
        steps in prop::collection::vec((-1.0f64..1.0, -2.0f64..2.0, prop::bool::weighted(0.1)), 50),
        bootstrap in -2.0f64..2.0,
        gamma in 0.5f64..1.0,
        lambda in 0.0f64..=1.0,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let mut values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        values.push(bootstrap);
        let terminals: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &terminals, gamma, lambda).unwrap();
        let oracle = gae_oracle(&rewards, &values, &terminals, gamma, lambda);
        for t in 0..50 {
            prop_assert!((adv[t] - oracle[t]).abs() < 1e-10, "t={} {} vs {}", t, adv[t], oracle[t]);
            prop_assert!((ret[t] - (oracle[t] + values[t])).abs() < 1e-10);
        }
    }
}

#[test]
fn unclipped_loss_is_the_policy_gradient() {
    // No hidden layers and a zero input: only the policy-head biases act, so
    // each branch is a softmax bandit with ∂log π(a)/∂b_j = 1[a = j] − p_j.
    let cfg = NetworkConfig { input_dim: 1, hidden_width: 1, hidden_depth: 0, branch_sizes: [2, 2] };
    let coeffs = LossCoefficients { clip_epsilon: 1e9, entropy_coeff: 0.0, value_coeff: 0.0 };
    let mut r = common::rng(5);
    for on_policy in [true, false] {
        let mut net = Network::<f64>::zeros(cfg);
        for b in 4..8 {
            net.params[b] = normal(&mut r);
        }
        let n = 64;
        let mut batch = random_batch(&net, n, &mut r);
        batch.observations.fill(0.0);
        let p = [softmax(&net.params[4..6]), softmax(&net.params[6..8])];
        let logp = |a: (usize, usize)| p[0][a.0].ln() + p[1][a.1].ln();
        let ratios: Vec<f64> = (0..n)
            .map(|_| if on_policy { 1.0 } else { r.random_range(0.5..2.0) })
            .collect();
        for (i, a) in batch.actions.iter().enumerate() {
            batch.old_log_probs[i] = logp(*a) - ratios[i].ln();
        }
        let (_, grad) = ppo_loss(&net, &batch, &coeffs).unwrap();
        for branch in 0..2 {
            for j in 0..2 {
                let expected = -(0..n)
                    .map(|i| {
                        let a = if branch == 0 { batch.actions[i].0 } else { batch.actions[i].1 };
                        let indicator = if a == j { 1.0 } else { 0.0 };
                        ratios[i] * batch.advantages[i] * (indicator - p[branch][j])
                    })
                    .sum::<f64>()
                    / n as f64;
                let k = 4 + 2 * branch + j;
                assert!((grad[k] - expected).abs() < 1e-12, "bias {k}: {} vs {expected}", grad[k]);
            }
        }
        // the weights see a zero input and the value head has no weight in the loss
        assert!(grad[..4].iter().chain(&grad[8..]).all(|g| *g == 0.0));
    }
}

#[test]
fn single_precision_gradient_tracks_double() {
    let coeffs = LossCoefficients { clip_epsilon: 0.2, entropy_coeff: 0.01, value_coeff: 0.5 };
    let cfg = NetworkConfig { input_dim: 70, hidden_width: 16, hidden_depth: 2, branch_sizes: [2, 2] };
    let mut r = common::rng(8);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let mut net = Network::<f64>::init(cfg, &mut r);
        net.params.iter_mut().for_each(|p| *p += 0.1 * normal(&mut r));
        let batch = random_batch(&net, 32, &mut r);
        let net = net.cast::<f32>().cast::<f64>();
        let (_, g64) = ppo_loss(&net, &batch, &coeffs).unwrap();
        let b32 = Batch::<f32> {
            observations: batch.observations.mapv(|v| v as f32),
            actions: batch.actions.clone(),
            old_log_probs: batch.old_log_probs.iter().map(|&v| v as f32).collect(),
            advantages: batch.advantages.iter().map(|&v| v as f32).collect(),
            returns: batch.returns.iter().map(|&v| v as f32).collect(),
        };
        let (_, g32) = ppo_loss(&net.cast::<f32>(), &b32, &coeffs).unwrap();
        let scale = g64.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for (a, b) in g32.iter().zip(&g64) {
            let err = (*a as f64 - b).abs() / b.abs().max(1e-3 * scale);
            worst = worst.max(err);
        }
    }
    assert!(worst <= 1e-2, "worst relative error {worst}");
}

#[test]
fn one_metre_from_the_exit_is_learned_quickly() {
    let mut s = samples::single_room();
    s.spawn_areas = vec![SpawnArea { order: 1, region: Aabb::from_corners(Vec2::new(2.0, 1.0), Vec2::new(3.0, 1.2)) }];
    let before = save_scenario(&s);
    let mut cfg = TrainingConfig::default();
    let t = &mut cfg.trainer;
    t.num_parallel_agents = 8;
    t.rollout_horizon = 64;
    t.minibatch_size = 128;
    t.hidden_width = 32;
    t.total_steps = 100_000;
    t.seed = 4;
    let mut reached = None;
    train(&s, &cfg, |m| match m.mean_return_20 {
        Some(v) if v >= 0.95 => {
            reached = Some(m.step);
            ControlFlow::Break(())
        }
        _ => ControlFlow::Continue(()),
    })
    .unwrap();
    assert!(reached.is_some(), "mean return never reached 0.95 within 100k steps");
    assert_eq!(save_scenario(&s), before, "training changed the scenario");
}

#[test]
fn shipped_config_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml");
    let cfg = TrainingConfig::from_toml_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.trainer.num_parallel_agents, 8);
    assert_eq!(cfg.trainer.hidden_depth, 2);
}

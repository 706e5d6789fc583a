//! Clipped-surrogate PPO loss with its exact analytic gradient.

use ndarray::{Array1, Array2};

use super::network::{log_softmax, Network, Real};

/// One minibatch. Advantages are expected to be normalized already.
#[derive(Debug, Clone)]
pub struct Batch<T: Real> {
    pub observations: Array2<T>,
    /// (horizontal, vertical) branch indices.
    pub actions: Vec<(usize, usize)>,
    pub old_log_probs: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T: Real> Batch<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_epsilon: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub total: f64,
    /// −mean(min(ρA, clip(ρ)A))
    pub policy: f64,
    /// mean((v − R)²), before the coefficient
    pub value: f64,
    /// mean joint entropy
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch fields disagree in length")]
    ShapeMismatch,
}

/// Shift and scale to zero mean, unit variance. Leaves a constant vector at zero.
pub fn normalize_advantages<T: Real>(adv: &mut [T]) {
    if adv.is_empty() {
        return;
    }
    let n = T::lit(adv.len() as f64);
    let mean = adv.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let var = adv
        .iter()
        .map(|&a| (a - mean) * (a - mean))
        .fold(T::zero(), |a, b| a + b)
        / n;
    let std = var.sqrt() + T::lit(1e-8);
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
}

/// loss = −mean(min(ρA, clip(ρ, 1−ε, 1+ε)A)) + c_v·mean((v − R)²) − c_e·mean(H)
pub fn ppo_loss<T: Real>(
    net: &Network<T>,
    batch: &Batch<T>,
    coeffs: &LossCoefficients,
) -> Result<(LossReport, Vec<T>), LossError> {
    let n = batch.len();
    if n == 0 {
        return Err(LossError::EmptyBatch);
    }
    if batch.observations.nrows() != n
        || batch.old_log_probs.len() != n
        || batch.advantages.len() != n
        || batch.returns.len() != n
    {
        return Err(LossError::ShapeMismatch);
    }

    let fwd = net.forward_batch(batch.observations.view());
    let b0 = net.config.branch_sizes[0];
    let width = net.config.logits();
    let inv_n = T::one() / T::lit(n as f64);
    let eps = T::lit(coeffs.clip_epsilon);
    let c_e = T::lit(coeffs.entropy_coeff);
    let c_v = T::lit(coeffs.value_coeff);
    let (lo, hi) = (T::one() - eps, T::one() + eps);

    let mut d_logits = Array2::<T>::zeros((n, width));
    let mut d_values = Array1::<T>::zeros(n);
    let (mut policy, mut value, mut ent, mut clipped) = (T::zero(), T::zero(), T::zero(), 0usize);

    for i in 0..n {
        let row = fwd.logits.row(i);
        let row = row.as_slice().expect("contiguous logits");
        let (a_h, a_v) = batch.actions[i];
        let adv = batch.advantages[i];
        let mut d_logp = T::zero();
        {
            let lp_h = log_softmax(&row[..b0]);
            let lp_v = log_softmax(&row[b0..]);
            let logp = lp_h[a_h] + lp_v[a_v];
            let ratio = (logp - batch.old_log_probs[i]).exp();
            let unclipped = ratio * adv;
            let clip_term = ratio.max(lo).min(hi) * adv;
            if unclipped <= clip_term {
                policy = policy - unclipped * inv_n;
                d_logp = -unclipped * inv_n;
            } else {
                policy = policy - clip_term * inv_n;
                clipped += 1;
            }

            let mut d_row = d_logits.row_mut(i);
            for (offset, lps, taken) in [(0, &lp_h, a_h), (b0, &lp_v, a_v)] {
                let h = lps
                    .iter()
                    .map(|&lp| -lp.exp() * lp)
                    .fold(T::zero(), |a, b| a + b);
                ent = ent + h * inv_n;
                for (k, &lp) in lps.iter().enumerate() {
                    let p = lp.exp();
                    let onehot = if k == taken { T::one() } else { T::zero() };
                    // d logp/dz = onehot − p ;  d(−c_e H)/dz = c_e · p (lp + H)
                    d_row[offset + k] = d_logp * (onehot - p) + c_e * inv_n * p * (lp + h);
                }
            }
        }
        let diff = fwd.values[i] - batch.returns[i];
        value = value + diff * diff * inv_n;
        d_values[i] = T::lit(2.0) * c_v * diff * inv_n;
    }

    let total = policy + c_v * value - c_e * ent;
    let grad = net.backward(&fwd, d_logits.view(), d_values.view());
    let report = LossReport {
        total: total.as_f64(),
        policy: policy.as_f64(),
        value: value.as_f64(),
        entropy: ent.as_f64(),
        clip_fraction: clipped as f64 / n as f64,
    };
    Ok((report, grad))
}

//! Generalized advantage estimation.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("sequence lengths disagree: {rewards} rewards, {values} values (expected rewards + 1), {terminals} terminal flags")]
pub struct ShapeError {
    pub rewards: usize,
    pub values: usize,
    pub terminals: usize,
}

/// Advantages and returns for one trajectory segment.
///
/// `values` holds one entry per step plus a trailing bootstrap value for the
/// state after the last step (ignored when that step is terminal). A terminal
/// flag cuts both the TD target and the advantage recursion.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminals: &[bool],
    gamma: f64,
    gae_lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), ShapeError> {
    let t_len = rewards.len();
    if values.len() != t_len + 1 || terminals.len() != t_len {
        return Err(ShapeError {
            rewards: t_len,
            values: values.len(),
            terminals: terminals.len(),
        });
    }
    let mut adv = vec![0.0; t_len];
    let mut next = 0.0;
    for t in (0..t_len).rev() {
        let live = if terminals[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * gae_lambda * live * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_gae(&[1.0], &[0.2, 123.0], &[true], 0.99, 0.95).unwrap();
        assert!((a[0] - 0.8).abs() < 1e-15);
        assert!((r[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zeros_give_zeros() {
        let (a, _) = compute_gae(&[0.0; 10], &[0.0; 11], &[false; 10], 0.995, 0.95).unwrap();
        assert!(a.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[0.0; 3], &[0.0; 3], &[false; 3], 0.9, 0.9).is_err());
        assert!(compute_gae(&[0.0; 3], &[0.0; 4], &[false; 2], 0.9, 0.9).is_err());
    }
}

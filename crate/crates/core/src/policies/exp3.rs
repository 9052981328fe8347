use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Policy, PolicyConfig, PolicyKind, PolicyState};
use crate::error::{Error, Result};
use crate::seeds;

/// `p_c = (1 - alpha) w_c / sum(w) + alpha / N_C`.
pub fn exp3_probabilities(weights: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let mut probs = Vec::with_capacity(weights.len());
    probabilities_into(weights, alpha, &mut probs)?;
    Ok(probs)
}

fn probabilities_into(weights: &[f64], alpha: f64, out: &mut Vec<f64>) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::contract("Exp3 needs at least one arm"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::contract(format!("Exp3 weight {w} must be positive and finite")));
    }
    let total: f64 = weights.iter().sum();
    let floor = alpha / weights.len() as f64;
    out.clear();
    out.extend(weights.iter().map(|w| (1.0 - alpha) * w / total + floor));
    Ok(())
}

/// Multiplies the chosen arm's weight by `exp(alpha * reward / (N_C * p_c))`.
/// Unchosen arms carry an importance-weighted reward of 0 and keep their weight.
pub fn exp3_update(
    weights: &mut [f64],
    chosen: usize,
    reward: f64,
    probs: &[f64],
    alpha: f64,
) -> Result<()> {
    if chosen >= weights.len() || probs.len() != weights.len() {
        return Err(Error::contract("Exp3 update with mismatched arm count"));
    }
    let p = probs[chosen];
    if !(p > 0.0) {
        return Err(Error::contract(format!("Exp3 probability {p} of the chosen arm")));
    }
    weights[chosen] *= (alpha * reward / (weights.len() as f64 * p)).exp();
    Ok(())
}

/// Weights above this are rescaled by a power of two, which leaves the
/// probabilities bit-identical.
const RESCALE_ABOVE: f64 = 1e150;

#[derive(Debug)]
pub struct Exp3Policy {
    alpha: f64,
    state: PolicyState,
    rng: ChaCha8Rng,
}

impl Exp3Policy {
    pub(super) fn new(cfg: &PolicyConfig, player: usize, n_players: usize, n_arms: usize) -> Self {
        let mut state = PolicyState::new(player, n_players, n_arms);
        state.weights = vec![1.0; n_arms];
        state.probs = vec![1.0 / n_arms as f64; n_arms];
        Exp3Policy {
            alpha: cfg.alpha,
            state,
            rng: seeds::rng(cfg.seed),
        }
    }

    fn rescale(&mut self) {
        let max = self.state.weights.iter().copied().fold(0.0, f64::max);
        if max <= RESCALE_ABOVE {
            return;
        }
        let scale = 2f64.powi(-(max.log2().floor() as i32));
        for w in &mut self.state.weights {
            *w = (*w * scale).max(f64::MIN_POSITIVE);
        }
    }
}

impl Policy for Exp3Policy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Exp3
    }

    fn select(&mut self, subframe: u64) -> Result<usize> {
        if subframe == 0 {
            return Err(Error::contract("subframes are numbered from 1"));
        }
        let st = &mut self.state;
        probabilities_into(&st.weights, self.alpha, &mut st.probs)?;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (c, p) in st.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(c);
            }
        }
        Ok(st.n_arms - 1)
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.state.record(arm, reward)?;
        exp3_update(&mut self.state.weights, arm, reward, &self.state.probs, self.alpha)?;
        self.rescale();
        Ok(())
    }

    fn state(&self) -> &PolicyState {
        &self.state
    }
}

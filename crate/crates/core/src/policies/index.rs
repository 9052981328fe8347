use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{assign_rank, init_selection, Policy, PolicyConfig, PolicyKind, PolicyState};
use crate::error::{Error, Result};
use crate::seeds;

#[inline]
fn radius(ln_n: f64, count: u64) -> f64 {
    (2.0 * ln_n / count as f64).sqrt()
}

fn check_index_args(count: u64, subframe: u64) -> Result<()> {
    if count == 0 {
        return Err(Error::contract("confidence index of an unplayed arm"));
    }
    if subframe == 0 {
        return Err(Error::contract("subframes are numbered from 1"));
    }
    Ok(())
}

/// `mean + sqrt(2 ln(n) / count)`.
pub fn ucb1_index(mean: f64, count: u64, subframe: u64) -> Result<f64> {
    check_index_args(count, subframe)?;
    Ok(mean + radius((subframe as f64).ln(), count))
}

/// `mean - sqrt(2 ln(n) / count)`.
pub fn lcb_index(mean: f64, count: u64, subframe: u64) -> Result<f64> {
    check_index_args(count, subframe)?;
    Ok(mean - radius((subframe as f64).ln(), count))
}

fn ucb_all(state: &PolicyState, subframe: u64, out: &mut Vec<f64>) -> Result<()> {
    if subframe == 0 {
        return Err(Error::contract("subframes are numbered from 1"));
    }
    if state.counts.contains(&0) {
        return Err(Error::contract("index selection before every arm was sampled"));
    }
    let ln_n = (subframe as f64).ln();
    out.clear();
    out.extend(
        state
            .means
            .iter()
            .zip(&state.counts)
            .map(|(&m, &y)| m + radius(ln_n, y)),
    );
    Ok(())
}

/// Arm with the largest UCB1 index; ties go to the lowest arm.
pub fn select_ucb1(state: &PolicyState, subframe: u64) -> Result<usize> {
    let mut ucb = Vec::with_capacity(state.n_arms);
    ucb_all(state, subframe, &mut ucb)?;
    Ok(argmax(&ucb))
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// The `k` arms with the largest UCB1 indices, ordered by (index desc, arm asc).
pub fn top_k_by_ucb(state: &PolicyState, subframe: u64, k: usize) -> Result<Vec<usize>> {
    let mut ucb = Vec::with_capacity(state.n_arms);
    let mut order = Vec::with_capacity(state.n_arms);
    top_k_into(state, subframe, k, &mut ucb, &mut order)?;
    Ok(order)
}

fn top_k_into(
    state: &PolicyState,
    subframe: u64,
    k: usize,
    ucb: &mut Vec<f64>,
    order: &mut Vec<usize>,
) -> Result<()> {
    if k == 0 || k > state.n_arms {
        return Err(Error::contract(format!("rank {k} outside 1..={}", state.n_arms)));
    }
    ucb_all(state, subframe, ucb)?;
    order.clear();
    order.extend(0..state.n_arms);
    order.sort_by(|&a, &b| ucb[b].total_cmp(&ucb[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(())
}

/// Within the top-`k` UCB set, the arm with the smallest LCB (ties: lowest arm).
pub fn select_dlf(state: &PolicyState, subframe: u64, k: usize) -> Result<usize> {
    let top = top_k_by_ucb(state, subframe, k)?;
    Ok(dlf_pick(state, subframe, &top))
}

fn dlf_pick(state: &PolicyState, subframe: u64, top: &[usize]) -> usize {
    let ln_n = (subframe as f64).ln();
    let lcb = |a: usize| state.means[a] - radius(ln_n, state.counts[a]);
    let mut best = top[0];
    let mut best_lcb = lcb(best);
    for &a in &top[1..] {
        let v = lcb(a);
        if v < best_lcb || (v == best_lcb && a < best) {
            best = a;
            best_lcb = v;
        }
    }
    best
}

/// `min(beta / n, 1)`.
pub fn epsilon_schedule(beta: f64, subframe: u64) -> f64 {
    (beta / subframe as f64).min(1.0)
}

/// Within the top-`k` UCB set: with probability `1 - eps_n` the arm with the
/// smallest UCB index (ties: lowest arm), otherwise a uniform member of the set.
pub fn select_kth_ucb1<R: Rng + ?Sized>(
    state: &PolicyState,
    subframe: u64,
    k: usize,
    beta: f64,
    rng: &mut R,
) -> Result<usize> {
    let mut ucb = Vec::with_capacity(state.n_arms);
    let mut order = Vec::with_capacity(state.n_arms);
    top_k_into(state, subframe, k, &mut ucb, &mut order)?;
    Ok(kth_pick(&ucb, &order, epsilon_schedule(beta, subframe), rng))
}

fn kth_pick<R: Rng + ?Sized>(ucb: &[f64], top: &[usize], eps: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < eps {
        return top[rng.random_range(0..top.len())];
    }
    let mut best = top[0];
    for &a in &top[1..] {
        if ucb[a] < ucb[best] || (ucb[a] == ucb[best] && a < best) {
            best = a;
        }
    }
    best
}

/// UCB1, MP-UCB1, DLF and fair kth-UCB1.
#[derive(Debug)]
pub struct IndexPolicy {
    kind: PolicyKind,
    beta: f64,
    state: PolicyState,
    rng: ChaCha8Rng,
    ucb: Vec<f64>,
    order: Vec<usize>,
}

impl IndexPolicy {
    pub(super) fn new(cfg: &PolicyConfig, player: usize, n_players: usize, n_arms: usize) -> Self {
        IndexPolicy {
            kind: cfg.kind,
            beta: cfg.beta,
            state: PolicyState::new(player, n_players, n_arms),
            rng: seeds::rng(cfg.seed),
            ucb: Vec::with_capacity(n_arms),
            order: Vec::with_capacity(n_arms),
        }
    }
}

impl Policy for IndexPolicy {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn select(&mut self, subframe: u64) -> Result<usize> {
        let st = &mut self.state;
        if self.kind.is_ranked() {
            st.rank = Some(assign_rank(st.player, subframe, st.n_players));
        }
        if subframe <= st.n_arms as u64 {
            return init_selection(st.player, subframe, st.n_arms);
        }
        match self.kind {
            PolicyKind::Dlf => {
                let k = st.rank.unwrap_or(1) as usize;
                top_k_into(st, subframe, k, &mut self.ucb, &mut self.order)?;
                Ok(dlf_pick(st, subframe, &self.order))
            }
            PolicyKind::KthUcb1 => {
                let k = st.rank.unwrap_or(1) as usize;
                top_k_into(st, subframe, k, &mut self.ucb, &mut self.order)?;
                let eps = epsilon_schedule(self.beta, subframe);
                Ok(kth_pick(&self.ucb, &self.order, eps, &mut self.rng))
            }
            _ => {
                ucb_all(st, subframe, &mut self.ucb)?;
                Ok(argmax(&self.ucb))
            }
        }
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.state.record(arm, reward)
    }

    fn state(&self) -> &PolicyState {
        &self.state
    }
}

//! Per-player learning policies.
//!
//! Every policy is driven the same way: `select(n)` picks a CU for subframe
//! `n` (1-based), then `observe(cu, reward)` feeds back the reward the BS
//! produced. A collision is indistinguishable from a bad channel: it arrives
//! as reward 0 and still advances the arm's counter and mean.
//!
//! Arms and players are 0-based here. The round-robin formulas are written
//! for 1-based players `d = player + 1` and 1-based CUs `c = arm + 1`.

mod exp3;
mod index;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use exp3::{exp3_probabilities, exp3_update, Exp3Policy};
pub use index::{
    epsilon_schedule, lcb_index, select_dlf, select_kth_ucb1, select_ucb1, top_k_by_ucb,
    ucb1_index, IndexPolicy,
};

use crate::error::{Error, Result};
use crate::phy::RewardModel;

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_BETA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Single-player UCB1.
    Ucb1,
    /// Every player runs UCB1 independently.
    MpUcb1,
    /// Rotating ranks; minimum LCB within the top-K UCB set.
    Dlf,
    /// Rotating ranks; minimum UCB within the top-K set with decaying uniform exploration.
    KthUcb1,
    /// Independent Exp3 learner per player on Bernoulli rewards.
    Exp3,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Ucb1,
        PolicyKind::MpUcb1,
        PolicyKind::Dlf,
        PolicyKind::KthUcb1,
        PolicyKind::Exp3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::MpUcb1 => "mp_ucb1",
            PolicyKind::Dlf => "dlf",
            PolicyKind::KthUcb1 => "kth_ucb1",
            PolicyKind::Exp3 => "exp3",
        }
    }

    pub fn reward_model(self) -> RewardModel {
        match self {
            PolicyKind::Exp3 => RewardModel::Bernoulli,
            _ => RewardModel::Normalized,
        }
    }

    pub fn is_ranked(self) -> bool {
        matches!(self, PolicyKind::Dlf | PolicyKind::KthUcb1)
    }

    /// Index policies sample every CU once in round-robin order before learning.
    pub fn has_init_phase(self) -> bool {
        self != PolicyKind::Exp3
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config("policy", format!("unknown policy `{s}` (ucb1|mp_ucb1|dlf|kth_ucb1|exp3)"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Exp3 exploration mass, in (0, 1].
    pub alpha: f64,
    /// kth-UCB1 exploration schedule `min(beta / n, 1)`.
    pub beta: f64,
    /// Seed of this player's private randomness.
    pub seed: u64,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", format!("must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", format!("must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Learning state of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub player: usize,
    pub n_players: usize,
    pub n_arms: usize,
    /// Times each arm was selected.
    pub counts: Vec<u64>,
    /// Empirical mean reward per arm.
    pub means: Vec<f64>,
    /// Exp3 weights; empty for index policies.
    pub weights: Vec<f64>,
    /// Exp3 selection distribution of the last `select`; empty for index policies.
    pub probs: Vec<f64>,
    /// Rank in the current subframe, for ranked policies.
    pub rank: Option<u32>,
    /// Number of observations so far.
    pub clock: u64,
}

impl PolicyState {
    pub fn new(player: usize, n_players: usize, n_arms: usize) -> Self {
        PolicyState {
            player,
            n_players,
            n_arms,
            counts: vec![0; n_arms],
            means: vec![0.0; n_arms],
            weights: Vec::new(),
            probs: Vec::new(),
            rank: None,
            clock: 0,
        }
    }

    fn record(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.n_arms {
            return Err(Error::contract(format!("arm {arm} out of range 0..{}", self.n_arms)));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::contract(format!("reward {reward} outside [0, 1]")));
        }
        self.counts[arm] += 1;
        self.means[arm] = update_mean(self.means[arm], self.counts[arm], reward);
        self.clock += 1;
        Ok(())
    }
}

pub trait Policy: Send + fmt::Debug {
    fn kind(&self) -> PolicyKind;

    /// CU choice for subframe `subframe` (1-based).
    fn select(&mut self, subframe: u64) -> Result<usize>;

    /// Feeds back the reward obtained on `arm`.
    fn observe(&mut self, arm: usize, reward: f64) -> Result<()>;

    fn state(&self) -> &PolicyState;

    fn rank(&self) -> Option<u32> {
        self.state().rank
    }

    fn step(&mut self, arm: usize, reward: f64, next_subframe: u64) -> Result<usize> {
        self.observe(arm, reward)?;
        self.select(next_subframe)
    }
}

pub fn build_policy(
    cfg: &PolicyConfig,
    player: usize,
    n_players: usize,
    n_arms: usize,
) -> Result<Box<dyn Policy>> {
    cfg.validate()?;
    if n_arms == 0 || n_players == 0 || player >= n_players {
        return Err(Error::contract(format!(
            "player {player} of {n_players} with {n_arms} arms"
        )));
    }
    if n_players > n_arms && cfg.kind.has_init_phase() {
        return Err(Error::contract("index policies need at least as many CUs as players"));
    }
    Ok(match cfg.kind {
        PolicyKind::Exp3 => Box::new(Exp3Policy::new(cfg, player, n_players, n_arms)),
        _ => Box::new(IndexPolicy::new(cfg, player, n_players, n_arms)),
    })
}

/// Round-robin arm for `player` in initialization subframe `subframe`,
/// i.e. CU `((n + d) mod N_C) + 1` in 1-based terms.
pub fn init_selection(player: usize, subframe: u64, n_arms: usize) -> Result<usize> {
    if subframe == 0 || subframe > n_arms as u64 {
        return Err(Error::contract(format!(
            "subframe {subframe} outside the initialization window 1..={n_arms}"
        )));
    }
    Ok(((subframe + player as u64 + 1) % n_arms as u64) as usize)
}

/// Rotating rank `((n + d) mod N_D) + 1` of `player` in `subframe`.
pub fn assign_rank(player: usize, subframe: u64, n_players: usize) -> u32 {
    ((subframe + player as u64 + 1) % n_players as u64) as u32 + 1
}

/// Running mean after the `count`-th observation `x`.
#[inline]
pub fn update_mean(prev: f64, count: u64, x: f64) -> f64 {
    let n = count as f64;
    ((n - 1.0) * prev + x) / n
}

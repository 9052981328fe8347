use crate::channel::{draw_channel_into, ChannelConfig, ChannelDraw, LargeScaleGains};
use crate::error::{Error, Result};
use crate::phy::{sole_selector_reward, PhyConfig, RewardModel};

pub const MIN_ORACLE_SAMPLES: u64 = 10_000;
pub const DEFAULT_ORACLE_SAMPLES: u64 = 100_000;

/// True mean reward of every (player, CU) pair, as known to the simulator
/// but never to the players.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMeansOracle {
    pub n_players: usize,
    pub n_arms: usize,
    pub model: RewardModel,
    /// Row-major `n_players x n_arms`.
    pub means: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per player, means in descending order.
    pub sorted_means: Vec<Vec<f64>>,
    pub best_arm: Vec<usize>,
    pub samples: u64,
}

impl ArmMeansOracle {
    /// Oracle from known means (zero standard error).
    pub fn from_means(
        n_players: usize,
        n_arms: usize,
        means: Vec<f64>,
        model: RewardModel,
    ) -> Result<Self> {
        let stderr = vec![0.0; means.len()];
        Self::build(n_players, n_arms, means, stderr, model, 0)
    }

    fn build(
        n_players: usize,
        n_arms: usize,
        means: Vec<f64>,
        stderr: Vec<f64>,
        model: RewardModel,
        samples: u64,
    ) -> Result<Self> {
        if n_players == 0 || n_arms == 0 || means.len() != n_players * n_arms {
            return Err(Error::contract(format!(
                "{} means for {n_players} players x {n_arms} arms",
                means.len()
            )));
        }
        if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::contract("arm means must lie in [0, 1]"));
        }
        let mut sorted_means = Vec::with_capacity(n_players);
        let mut best_arm = Vec::with_capacity(n_players);
        for row in means.chunks(n_arms) {
            let mut best = 0;
            for (c, &m) in row.iter().enumerate() {
                if m > row[best] {
                    best = c;
                }
            }
            best_arm.push(best);
            let mut sorted = row.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted_means.push(sorted);
        }
        Ok(ArmMeansOracle {
            n_players,
            n_arms,
            model,
            means,
            stderr,
            sorted_means,
            best_arm,
            samples,
        })
    }

    #[inline]
    pub fn mu(&self, player: usize, arm: usize) -> f64 {
        self.means[player * self.n_arms + arm]
    }

    pub fn stderr(&self, player: usize, arm: usize) -> f64 {
        self.stderr[player * self.n_arms + arm]
    }

    pub fn mu_star(&self, player: usize) -> f64 {
        self.sorted_means[player][0]
    }

    /// Mean of the `rank`-th best arm (1-based) for `player`.
    #[inline]
    pub fn kth_mean(&self, player: usize, rank: u32) -> f64 {
        self.sorted_means[player][rank as usize - 1]
    }

    pub fn sum_mu_star(&self) -> f64 {
        (0..self.n_players).map(|d| self.mu_star(d)).sum()
    }
}

/// Monte Carlo estimate of every arm mean for a collision-free player.
///
/// Each sample draws a fresh channel from the oracle's own fading stream
/// `seed` and evaluates the reward every player would get alone on every CU.
pub fn estimate_arm_means(
    large: &LargeScaleGains,
    phy: &PhyConfig,
    channel_cfg: &ChannelConfig,
    samples: u64,
    seed: u64,
    model: RewardModel,
) -> Result<ArmMeansOracle> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Error::contract(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples}"
        )));
    }
    let (n_players, n_arms) = (large.n_d2d, large.n_cu);
    let pairs = n_players * n_arms;
    // Shifted sums around the first sample: exact when the reward is constant.
    let mut first = vec![0.0; pairs];
    let mut sum = vec![0.0; pairs];
    let mut sum_sq = vec![0.0; pairs];
    let mut draw = ChannelDraw::from_large_scale(large, 0);
    for s in 0..samples {
        draw_channel_into(large, channel_cfg, seed, s, &mut draw);
        for d in 0..n_players {
            for c in 0..n_arms {
                let i = d * n_arms + c;
                let x = sole_selector_reward(c, d, &draw, phy, model);
                if s == 0 {
                    first[i] = x;
                    continue;
                }
                let dx = x - first[i];
                sum[i] += dx;
                sum_sq[i] += dx * dx;
            }
        }
    }
    let n = samples as f64;
    let mut means = Vec::with_capacity(pairs);
    let mut stderr = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let shift = sum[i] / n;
        means.push((first[i] + shift).clamp(0.0, 1.0));
        let var = ((sum_sq[i] - n * shift * shift) / (n - 1.0)).max(0.0);
        stderr.push((var / n).sqrt());
    }
    ArmMeansOracle::build(n_players, n_arms, means, stderr, model, samples)
}

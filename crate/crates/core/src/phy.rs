//! BS-side arbitration: collisions, SINR-protected power allocation,
//! D2D throughput and the two reward models.

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, noise_power, ChannelDraw, THERMAL_NOISE_DENSITY_DBM_HZ};
use crate::error::{Error, Result};

/// Physical-layer parameters in configuration units (mW, dB, Hz, bit/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyParams {
    pub p_c_mw: f64,
    pub p_max_mw: f64,
    pub gamma_tgt_db: f64,
    pub bandwidth: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_bs_db: f64,
    pub noise_figure_ue_db: f64,
    /// SINR at which the normalized reward saturates at 1.
    pub r_norm_sinr_cap_db: f64,
    /// Explicit normalization rate in bit/s; overrides `r_norm_sinr_cap_db`.
    pub r_norm: Option<f64>,
    /// Bernoulli reward threshold in bit/s.
    pub r_prime: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        PhyParams {
            p_c_mw: 250.0,
            p_max_mw: 200.0,
            gamma_tgt_db: 10.0,
            bandwidth: 180e3,
            noise_density_dbm_hz: THERMAL_NOISE_DENSITY_DBM_HZ,
            noise_figure_bs_db: 5.0,
            noise_figure_ue_db: 9.0,
            r_norm_sinr_cap_db: 40.0,
            r_norm: None,
            r_prime: 64e3,
        }
    }
}

impl PhyParams {
    pub fn resolve(&self) -> Result<PhyConfig> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        };
        let bandwidth = positive("phy.bandwidth", self.bandwidth)?;
        let r_norm = match self.r_norm {
            Some(r) => positive("phy.r_norm", r)?,
            None => bandwidth * (1.0 + db_to_linear(self.r_norm_sinr_cap_db)).log2(),
        };
        let cfg = PhyConfig {
            p_c: positive("phy.p_c_mw", self.p_c_mw)? * 1e-3,
            p_max: positive("phy.p_max_mw", self.p_max_mw)? * 1e-3,
            gamma_tgt: positive("phy.gamma_tgt_db", db_to_linear(self.gamma_tgt_db))?,
            bandwidth,
            noise_bs: noise_power(bandwidth, self.noise_figure_bs_db, self.noise_density_dbm_hz)?,
            noise_d2d: noise_power(bandwidth, self.noise_figure_ue_db, self.noise_density_dbm_hz)?,
            r_norm,
            r_prime: positive("phy.r_prime", self.r_prime)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Physical-layer constants in linear SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub p_c: f64,
    pub p_max: f64,
    pub gamma_tgt: f64,
    pub bandwidth: f64,
    pub noise_bs: f64,
    pub noise_d2d: f64,
    pub r_norm: f64,
    pub r_prime: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyParams::default()
            .resolve()
            .expect("default phy parameters are valid")
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("phy.p_c", self.p_c),
            ("phy.p_max", self.p_max),
            ("phy.gamma_tgt", self.gamma_tgt),
            ("phy.bandwidth", self.bandwidth),
            ("phy.noise_bs", self.noise_bs),
            ("phy.noise_d2d", self.noise_d2d),
            ("phy.r_norm", self.r_norm),
            ("phy.r_prime", self.r_prime),
        ];
        for (field, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive and finite, got {v}")));
            }
        }
        if self.r_norm < self.r_prime {
            return Err(Error::config("phy.r_norm", "must be >= r_prime"));
        }
        Ok(())
    }

    /// CU rate at exactly the SINR threshold.
    pub fn r_tgt(&self) -> f64 {
        self.bandwidth * (1.0 + self.gamma_tgt).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModel {
    /// Throughput divided by `r_norm`, clipped to 1.
    Normalized,
    /// 1 when the throughput reaches `r_prime`.
    Bernoulli,
}

impl RewardModel {
    #[inline]
    pub fn reward(self, throughput: f64, cfg: &PhyConfig) -> f64 {
        match self {
            RewardModel::Normalized => reward_normalized(throughput, cfg),
            RewardModel::Bernoulli => reward_bernoulli(throughput, cfg),
        }
    }
}

/// Perfect collision model: every player sharing a CU with another player collides.
pub fn resolve_collisions(selections: &[usize], n_cu: usize) -> Result<Vec<bool>> {
    let mut load = vec![0u32; n_cu];
    for &c in selections {
        if c >= n_cu {
            return Err(Error::contract(format!("selected CU {c} out of range 0..{n_cu}")));
        }
        load[c] += 1;
    }
    Ok(selections.iter().map(|&c| load[c] > 1).collect())
}

/// Largest D2D power keeping the CU at or above the SINR target, capped at `p_max`.
///
/// Zero on collision or when the CU's own SNR does not exceed the target.
pub fn allocate_power(
    cu: usize,
    d2d: usize,
    channel: &ChannelDraw,
    collided: bool,
    cfg: &PhyConfig,
) -> f64 {
    if collided || !(cu_snr(cu, channel, cfg) > cfg.gamma_tgt) {
        return 0.0;
    }
    let g_cb = channel.g_cb(cu);
    let g_db = channel.g_db(d2d);
    let raw = cfg.p_c * g_cb / (cfg.gamma_tgt * g_db) - cfg.noise_bs / g_db;
    if !(raw > 0.0) {
        return 0.0;
    }
    if raw > cfg.p_max {
        return cfg.p_max;
    }
    // Rounding can leave the CU a few ulps under target; step down until it holds.
    let mut p = raw;
    let mut steps = 0;
    while p > 0.0 && cu_sinr(cu, d2d, p, channel, cfg) < cfg.gamma_tgt {
        p = if steps < 16 { p.next_down() } else { p * (1.0 - 1e-12) };
        steps += 1;
    }
    p.max(0.0)
}

pub fn cu_sinr(cu: usize, d2d: usize, power: f64, channel: &ChannelDraw, cfg: &PhyConfig) -> f64 {
    cfg.p_c * channel.g_cb(cu) / (cfg.noise_bs + power * channel.g_db(d2d))
}

/// SINR at the CU's BS receiver with no D2D reuse.
pub fn cu_snr(cu: usize, channel: &ChannelDraw, cfg: &PhyConfig) -> f64 {
    cfg.p_c * channel.g_cb(cu) / cfg.noise_bs
}

pub fn d2d_sinr(cu: usize, d2d: usize, power: f64, channel: &ChannelDraw, cfg: &PhyConfig) -> f64 {
    power * channel.g_d(d2d) / (cfg.noise_d2d + cfg.p_c * channel.g_cd(cu, d2d))
}

/// Shannon rate of the D2D link in bit/s.
pub fn d2d_throughput(
    cu: usize,
    d2d: usize,
    power: f64,
    channel: &ChannelDraw,
    cfg: &PhyConfig,
) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    cfg.bandwidth * (1.0 + d2d_sinr(cu, d2d, power, channel, cfg)).log2()
}

#[inline]
pub fn reward_normalized(throughput: f64, cfg: &PhyConfig) -> f64 {
    (throughput / cfg.r_norm).clamp(0.0, 1.0)
}

#[inline]
pub fn reward_bernoulli(throughput: f64, cfg: &PhyConfig) -> f64 {
    if throughput >= cfg.r_prime {
        1.0
    } else {
        0.0
    }
}

/// Reward `d2d` would get on `cu` as its sole selector.
pub fn sole_selector_reward(
    cu: usize,
    d2d: usize,
    channel: &ChannelDraw,
    cfg: &PhyConfig,
    model: RewardModel,
) -> f64 {
    let p = allocate_power(cu, d2d, channel, false, cfg);
    model.reward(d2d_throughput(cu, d2d, p, channel, cfg), cfg)
}

/// Everything the BS decides and the players observe in one subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct SubframeOutcome {
    pub subframe: u64,
    pub selections: Vec<usize>,
    pub collided: Vec<bool>,
    pub power: Vec<f64>,
    /// SINR of each player's selected CU after any reuse.
    pub cu_sinr: Vec<f64>,
    pub throughput: Vec<f64>,
    pub reward: Vec<f64>,
    /// Per-player rank, for ranked policies.
    pub ranks: Option<Vec<u32>>,
    /// Row-major `n_d2d x n_cu` rewards each player would have earned as
    /// sole selector of each CU. Never shown to the players.
    pub counterfactual: Option<Vec<f64>>,
}

impl SubframeOutcome {
    pub fn n_players(&self) -> usize {
        self.selections.len()
    }

    /// Whether player `d` was the only one on its CU.
    pub fn sole(&self, d: usize) -> bool {
        !self.collided[d]
    }

    pub fn sum_d2d_throughput(&self) -> f64 {
        self.throughput.iter().sum()
    }

    /// Sum rate of the distinct CUs selected this subframe.
    pub fn sum_cu_throughput(&self, cfg: &PhyConfig) -> f64 {
        let mut total = 0.0;
        for (d, &c) in self.selections.iter().enumerate() {
            if self.selections[..d].contains(&c) {
                continue;
            }
            total += cfg.bandwidth * (1.0 + self.cu_sinr[d]).log2();
        }
        total
    }

    /// Number of players that transmitted on a reused CU.
    pub fn power_allocated_reuses(&self) -> usize {
        self.power.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Collision resolution, power allocation, throughput and reward for a set of selections.
pub fn arbitrate(
    subframe: u64,
    selections: Vec<usize>,
    channel: &ChannelDraw,
    cfg: &PhyConfig,
    model: RewardModel,
) -> Result<SubframeOutcome> {
    if selections.len() != channel.n_d2d {
        return Err(Error::contract(format!(
            "{} selections for {} D2D players",
            selections.len(),
            channel.n_d2d
        )));
    }
    let collided = resolve_collisions(&selections, channel.n_cu())?;
    let n = selections.len();
    let mut power = Vec::with_capacity(n);
    let mut sinr = Vec::with_capacity(n);
    let mut throughput = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    for (d, &c) in selections.iter().enumerate() {
        let p = allocate_power(c, d, channel, collided[d], cfg);
        let r = d2d_throughput(c, d, p, channel, cfg);
        power.push(p);
        sinr.push(cu_sinr(c, d, p, channel, cfg));
        throughput.push(r);
        reward.push(model.reward(r, cfg));
    }
    Ok(SubframeOutcome {
        subframe,
        selections,
        collided,
        power,
        cu_sinr: sinr,
        throughput,
        reward,
        ranks: None,
        counterfactual: None,
    })
}

/// Sole-selector rewards for every `(player, CU)` pair.
pub fn counterfactual_rewards(channel: &ChannelDraw, cfg: &PhyConfig, model: RewardModel) -> Vec<f64> {
    let n_cu = channel.n_cu();
    let mut out = Vec::with_capacity(channel.n_d2d * n_cu);
    for d in 0..channel.n_d2d {
        for c in 0..n_cu {
            out.push(sole_selector_reward(c, d, channel, cfg, model));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// One CU and one pair with hand-set gains.
    fn draw(g_cb: f64, g_db: f64, g_d: f64, g_cd: f64) -> ChannelDraw {
        ChannelDraw {
            subframe: 1,
            n_d2d: 1,
            cu_bs: vec![g_cb],
            d2d_bs: vec![g_db],
            d2d_link: vec![g_d],
            cu_d2d: vec![g_cd],
        }
    }

    fn cfg() -> PhyConfig {
        PhyConfig::default()
    }

    #[test]
    fn collisions() {
        assert_eq!(resolve_collisions(&[2, 2, 6], 20).unwrap(), [true, true, false]);
        assert_eq!(resolve_collisions(&[0, 1, 2], 20).unwrap(), [false, false, false]);
        assert_eq!(resolve_collisions(&[4; 5], 20).unwrap(), [true; 5]);
        assert!(resolve_collisions(&[0, 20], 20).is_err());
    }

    #[test]
    fn power_capped_at_p_max() {
        let c = PhyConfig {
            p_c: 1.0,
            p_max: 0.2,
            gamma_tgt: 10.0,
            noise_bs: 1e-13,
            ..cfg()
        };
        // P_c g_cB = 1e-10: raw power 1e-10/(10 * 1e-12) - 1e-13/1e-12 = 9.9 W
        let ch = draw(1e-10, 1e-12, 1e-9, 1e-12);
        let raw = c.p_c * ch.g_cb(0) / (c.gamma_tgt * ch.g_db(0)) - c.noise_bs / ch.g_db(0);
        assert_relative_eq!(raw, 9.9, max_relative = 1e-12);
        assert_eq!(allocate_power(0, 0, &ch, false, &c), 0.2);
    }

    #[test]
    fn no_power_at_or_below_threshold_snr() {
        let c = cfg();
        let mut g_cb = c.gamma_tgt * c.noise_bs / c.p_c;
        let probe = |g: f64| cu_snr(0, &draw(g, 1e-10, 1e-7, 1e-12), &c);
        for _ in 0..64 {
            match probe(g_cb).partial_cmp(&c.gamma_tgt).unwrap() {
                std::cmp::Ordering::Less => g_cb = g_cb.next_up(),
                std::cmp::Ordering::Greater => g_cb = g_cb.next_down(),
                std::cmp::Ordering::Equal => break,
            }
        }
        assert_eq!(probe(g_cb), c.gamma_tgt);
        assert_eq!(allocate_power(0, 0, &draw(g_cb, 1e-10, 1e-7, 1e-12), false, &c), 0.0);
        assert_eq!(allocate_power(0, 0, &draw(g_cb * 0.5, 1e-10, 1e-7, 1e-12), false, &c), 0.0);
    }

    #[test]
    fn collided_players_get_nothing() {
        let ch = draw(1e-9, 1e-12, 1e-7, 1e-12);
        assert_eq!(allocate_power(0, 0, &ch, true, &cfg()), 0.0);
        let c = cfg();
        let out = arbitrate(3, vec![0, 0], &ChannelDraw {
            n_d2d: 2,
            d2d_bs: vec![1e-12; 2],
            d2d_link: vec![1e-7; 2],
            cu_d2d: vec![1e-12; 2],
            ..ch
        }, &c, RewardModel::Normalized)
        .unwrap();
        assert_eq!(out.power, [0.0, 0.0]);
        assert_eq!(out.reward, [0.0, 0.0]);
        assert_eq!(out.cu_sinr[0], cu_snr(0, &draw(1e-9, 1e-12, 1e-7, 1e-12), &c));
    }

    #[test]
    fn uncapped_power_lands_on_target() {
        let c = cfg();
        // SNR 15 dB at the BS, D2D transmitter weakly coupled so the cap is not hit
        let g_cb = db_to_linear(15.0) * c.noise_bs / c.p_c;
        let ch = draw(g_cb, 1e-11, 1e-7, 1e-12);
        let p = allocate_power(0, 0, &ch, false, &c);
        assert!(p > 0.0 && p < c.p_max);
        let sinr = cu_sinr(0, 0, p, &ch, &c);
        assert!(sinr >= c.gamma_tgt);
        assert_relative_eq!(sinr, c.gamma_tgt, max_relative = 1e-14);
    }

    #[test]
    fn capped_power_leaves_margin() {
        let c = cfg();
        let g_cb = db_to_linear(30.0) * c.noise_bs / c.p_c;
        let ch = draw(g_cb, 1e-13, 1e-7, 1e-12);
        let p = allocate_power(0, 0, &ch, false, &c);
        assert_eq!(p, c.p_max);
        assert!(cu_sinr(0, 0, p, &ch, &c) > c.gamma_tgt);
    }

    #[test]
    fn sinr_without_interference_is_snr() {
        let c = cfg();
        let ch = draw(1e-12, 1e-11, 1e-7, 1e-12);
        assert_eq!(cu_sinr(0, 0, 0.0, &ch, &c), c.p_c * 1e-12 / c.noise_bs);
    }

    #[test]
    fn throughput_examples() {
        let c = PhyConfig {
            bandwidth: 180e3,
            ..cfg()
        };
        let g_cd = 1e-13;
        let denom = c.noise_d2d + c.p_c * g_cd;
        // D2D SINR = 1 at 0.1 W
        let ch = draw(1e-9, 1e-12, denom / 0.1, g_cd);
        assert_relative_eq!(d2d_throughput(0, 0, 0.1, &ch, &c), 180e3, max_relative = 1e-12);
        let ch = draw(1e-9, 1e-12, 3.0 * denom / 0.1, g_cd);
        assert_relative_eq!(d2d_throughput(0, 0, 0.1, &ch, &c), 360e3, max_relative = 1e-12);
        assert_eq!(d2d_throughput(0, 0, 0.0, &ch, &c), 0.0);
    }

    #[test]
    fn reward_models() {
        let c = PhyConfig {
            r_norm: 1e6,
            r_prime: 64e3,
            ..cfg()
        };
        assert_eq!(reward_normalized(0.0, &c), 0.0);
        assert_eq!(reward_normalized(1e6, &c), 1.0);
        assert_eq!(reward_normalized(5e5, &c), 0.5);
        assert_eq!(reward_normalized(5e7, &c), 1.0);
        assert_eq!(reward_bernoulli(64e3, &c), 1.0);
        assert_eq!(reward_bernoulli(0.0, &c), 0.0);
        assert_eq!(reward_bernoulli(63.9e3, &c), 0.0);
    }

    #[test]
    fn default_params_resolve() {
        let c = PhyConfig::default();
        assert_relative_eq!(c.p_c, 0.25);
        assert_relative_eq!(c.p_max, 0.2);
        assert_relative_eq!(c.gamma_tgt, 10.0, max_relative = 1e-15);
        assert_relative_eq!(c.noise_bs, 2.26606574122950098e-15, max_relative = 1e-12);
        assert_relative_eq!(c.noise_d2d, 5.69209978830308280e-15, max_relative = 1e-12);
        // B log2(1 + 10^4)
        assert_relative_eq!(c.r_norm, 2391814.19553129791, max_relative = 1e-12);
        // 180e3 log2(11)
        assert_relative_eq!(c.r_tgt(), 622697.691354713506, max_relative = 1e-12);
    }

    #[test]
    fn rejects_r_norm_below_r_prime() {
        let p = PhyParams {
            r_norm: Some(1e3),
            ..PhyParams::default()
        };
        assert!(matches!(p.resolve(), Err(Error::Config { field: "phy.r_norm", .. })));
        let p = PhyParams {
            p_c_mw: 0.0,
            ..PhyParams::default()
        };
        assert!(matches!(p.resolve(), Err(Error::Config { field: "phy.p_c_mw", .. })));
    }

    #[test]
    fn cu_sum_counts_each_cu_once() {
        let c = cfg();
        let out = SubframeOutcome {
            subframe: 1,
            selections: vec![3, 3, 5],
            collided: vec![true, true, false],
            power: vec![0.0, 0.0, 0.1],
            cu_sinr: vec![1.0, 1.0, 3.0],
            throughput: vec![0.0, 0.0, 1.0],
            reward: vec![0.0; 3],
            ranks: None,
            counterfactual: None,
        };
        assert_relative_eq!(out.sum_cu_throughput(&c), c.bandwidth * 3.0, max_relative = 1e-12);
        assert_eq!(out.power_allocated_reuses(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn gain() -> impl Strategy<Value = f64> {
            (-16.0f64..-6.0).prop_map(|e| 10f64.powf(e))
        }

        fn channel() -> impl Strategy<Value = ChannelDraw> {
            (1usize..5, 1usize..4).prop_flat_map(|(n_cu, n_d2d)| {
                (
                    proptest::collection::vec(gain(), n_cu),
                    proptest::collection::vec(gain(), n_d2d),
                    proptest::collection::vec(gain(), n_d2d),
                    proptest::collection::vec(gain(), n_cu * n_d2d),
                )
                    .prop_map(move |(cu_bs, d2d_bs, d2d_link, cu_d2d)| ChannelDraw {
                        subframe: 1,
                        n_d2d,
                        cu_bs,
                        d2d_bs,
                        d2d_link,
                        cu_d2d,
                    })
            })
        }

        proptest! {
            #[test]
            fn arbitration_protects_the_cu_and_respects_the_cap(
                ch in channel(),
                picks in proptest::collection::vec(0usize..4, 3),
            ) {
                let c = cfg();
                let n_cu = ch.n_cu();
                let sel: Vec<usize> = picks[..ch.n_d2d].iter().map(|&p| p % n_cu).collect();
                for model in [RewardModel::Normalized, RewardModel::Bernoulli] {
                    let out = arbitrate(1, sel.clone(), &ch, &c, model).unwrap();
                    for d in 0..ch.n_d2d {
                        prop_assert!(out.power[d] >= 0.0 && out.power[d] <= c.p_max);
                        if out.power[d] > 0.0 {
                            prop_assert!(out.cu_sinr[d] >= c.gamma_tgt.next_down());
                        }
                        if out.collided[d] {
                            prop_assert_eq!(out.power[d], 0.0);
                            prop_assert_eq!(out.throughput[d], 0.0);
                            prop_assert_eq!(out.reward[d], 0.0);
                        }
                        prop_assert!((0.0..=1.0).contains(&out.reward[d]));
                    }
                }
            }

            #[test]
            fn throughput_is_monotone(
                g_d in gain(), g_cd in gain(), p in 1e-6f64..0.2, k in 1.01f64..10.0,
            ) {
                let c = cfg();
                let ch = |g_d: f64, g_cd: f64| draw(1e-9, 1e-12, g_d, g_cd);
                let base = d2d_throughput(0, 0, p, &ch(g_d, g_cd), &c);
                prop_assert!(d2d_throughput(0, 0, p * k, &ch(g_d, g_cd), &c) > base);
                prop_assert!(d2d_throughput(0, 0, p, &ch(g_d * k, g_cd), &c) > base);
                prop_assert!(d2d_throughput(0, 0, p, &ch(g_d, g_cd * k), &c) < base);
            }
        }
    }
}

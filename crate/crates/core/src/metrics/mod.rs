//! Regret, collision, fairness and throughput metrics.
//!
//! Metrics only ever read the outcome log, never a policy's internal
//! state. The free functions recompute a metric from a full log; the
//! [`MetricsAccumulator`] produces the same numbers one subframe at a time,
//! which is what the simulator uses on long horizons.

mod oracle;

pub use oracle::{estimate_arm_means, ArmMeansOracle, DEFAULT_ORACLE_SAMPLES, MIN_ORACLE_SAMPLES};

use crate::error::{Error, Result};
use crate::phy::{PhyConfig, SubframeOutcome};

/// Cumulative regret against each player's best arm, per logged subframe:
/// `T * sum_d mu*_d - sum_{n<=T} sum_d x_d(n)`.
pub fn regret_def2(outcomes: &[SubframeOutcome], oracle: &ArmMeansOracle) -> Vec<f64> {
    let best = oracle.sum_mu_star();
    let mut cum = 0.0;
    outcomes
        .iter()
        .enumerate()
        .map(|(t, o)| {
            cum += o.reward.iter().sum::<f64>();
            (t + 1) as f64 * best - cum
        })
        .collect()
}

/// Ranked regret: `sum_d sum_{n<=T} |mu_{d,K(n)} - x_d(n) 1{d alone}|`.
pub fn regret_def3(outcomes: &[SubframeOutcome], oracle: &ArmMeansOracle) -> Result<Vec<f64>> {
    let mut cum = 0.0;
    let mut out = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let ranks = o
            .ranks
            .as_ref()
            .ok_or_else(|| Error::contract("ranked regret needs per-subframe ranks"))?;
        cum += ranked_term(o, ranks, oracle);
        out.push(cum);
    }
    Ok(out)
}

fn ranked_term(o: &SubframeOutcome, ranks: &[u32], oracle: &ArmMeansOracle) -> f64 {
    (0..o.n_players())
        .map(|d| {
            let x = if o.sole(d) { o.reward[d] } else { 0.0 };
            (oracle.kth_mean(d, ranks[d]) - x).abs()
        })
        .sum()
}

/// Adversarial regret against the best fixed arm in hindsight:
/// `sum_d (max_c sum_{n<=T} X_{d,c}(n) - sum_{n<=T} x_d(n))`.
pub fn regret_adversarial(outcomes: &[SubframeOutcome]) -> Result<Vec<f64>> {
    let Some(first) = outcomes.first() else {
        return Ok(Vec::new());
    };
    let n_players = first.n_players();
    let mut cf_sums: Vec<f64> = Vec::new();
    let mut returns = vec![0.0; n_players];
    let mut out = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let cf = o
            .counterfactual
            .as_ref()
            .ok_or_else(|| Error::contract("adversarial regret needs the counterfactual log"))?;
        if cf_sums.is_empty() {
            cf_sums = vec![0.0; cf.len()];
        }
        for (s, x) in cf_sums.iter_mut().zip(cf) {
            *s += x;
        }
        for (r, x) in returns.iter_mut().zip(&o.reward) {
            *r += x;
        }
        let n_arms = cf.len() / n_players;
        let total: f64 = (0..n_players)
            .map(|d| max_of(&cf_sums[d * n_arms..(d + 1) * n_arms]) - returns[d])
            .sum();
        out.push(total);
    }
    Ok(out)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
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

/// Share of subframes (in percent) in which each player collided.
pub fn collision_percentage(outcomes: &[SubframeOutcome]) -> Vec<f64> {
    let Some(first) = outcomes.first() else {
        return Vec::new();
    };
    let mut hits = vec![0u64; first.n_players()];
    for o in outcomes {
        for (h, &c) in hits.iter_mut().zip(&o.collided) {
            *h += u64::from(c);
        }
    }
    hits.iter()
        .map(|&h| 100.0 * h as f64 / outcomes.len() as f64)
        .collect()
}

/// The arm each player should be on for fairness accounting.
#[derive(Debug, Clone, Copy)]
pub enum FairnessTarget<'a> {
    /// Highest expected reward (index policies).
    Oracle(&'a ArmMeansOracle),
    /// Highest realized counterfactual return (Exp3).
    Hindsight,
}

/// Share of subframes (in percent) in which each player was the sole
/// selector of its target arm.
pub fn fairness_percentage(outcomes: &[SubframeOutcome], target: FairnessTarget<'_>) -> Result<Vec<f64>> {
    let Some(first) = outcomes.first() else {
        return Ok(Vec::new());
    };
    let n_players = first.n_players();
    let best: Vec<usize> = match target {
        FairnessTarget::Oracle(o) => o.best_arm.clone(),
        FairnessTarget::Hindsight => {
            let mut sums: Vec<f64> = Vec::new();
            for o in outcomes {
                let cf = o
                    .counterfactual
                    .as_ref()
                    .ok_or_else(|| Error::contract("hindsight fairness needs the counterfactual log"))?;
                if sums.is_empty() {
                    sums = vec![0.0; cf.len()];
                }
                for (s, x) in sums.iter_mut().zip(cf) {
                    *s += x;
                }
            }
            let n_arms = sums.len() / n_players;
            sums.chunks(n_arms).map(argmax).collect()
        }
    };
    let mut hits = vec![0u64; n_players];
    for o in outcomes {
        for d in 0..n_players {
            if o.sole(d) && o.selections[d] == best[d] {
                hits[d] += 1;
            }
        }
    }
    Ok(hits
        .iter()
        .map(|&h| 100.0 * h as f64 / outcomes.len() as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputSeries {
    pub d2d: Vec<f64>,
    pub cu: Vec<f64>,
    /// CU rate at exactly the SINR target.
    pub r_tgt: f64,
}

/// Per-subframe sum D2D rate and sum rate of the selected CUs.
pub fn sum_throughputs(outcomes: &[SubframeOutcome], phy: &PhyConfig) -> ThroughputSeries {
    ThroughputSeries {
        d2d: outcomes.iter().map(|o| o.sum_d2d_throughput()).collect(),
        cu: outcomes.iter().map(|o| o.sum_cu_throughput(phy)).collect(),
        r_tgt: phy.r_tgt(),
    }
}

/// Which subframes are kept in the logged time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogSchedule {
    pub every: u64,
    /// Every subframe `1..=head` is logged.
    pub head: u64,
    pub horizon: u64,
}

impl LogSchedule {
    pub fn is_logged(&self, subframe: u64) -> bool {
        subframe <= self.head || subframe % self.every == 0 || subframe == self.horizon
    }

    pub fn points(&self) -> impl Iterator<Item = u64> + '_ {
        (1..=self.horizon).filter(|&n| self.is_logged(n))
    }
}

/// Counts backing the run-level invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantCounts {
    /// Player-subframes with `P_d > 0`.
    pub reuses: u64,
    /// Reuses where the CU ended more than 1 ulp below the SINR target.
    pub unprotected_reuses: u64,
    /// Collisions during the round-robin initialization window.
    pub init_collisions: u64,
    /// Subframes whose ranks were not a permutation of `1..=N_D`.
    pub rank_violations: u64,
    /// Sole selections whose counterfactual reward differs from the realized one.
    pub counterfactual_mismatches: u64,
    /// Logged subframes whose CU sum rate fell below `reuses * r_tgt`.
    pub cu_accounting_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub horizon: u64,
    /// Subframe index of every entry in the time series below.
    pub subframes: Vec<u64>,
    pub regret_def2: Vec<f64>,
    pub regret_def3: Option<Vec<f64>>,
    pub regret_adversarial: Option<Vec<f64>>,
    pub sum_tput_d2d: Vec<f64>,
    pub sum_tput_cu: Vec<f64>,
    pub collision_pct: Vec<f64>,
    pub fairness_pct: Vec<f64>,
    /// Best hindsight return `G*(T)` per player, when counterfactuals were logged.
    pub counterfactual_best_return: Option<Vec<f64>>,
    pub r_tgt: f64,
    /// Mean per-subframe sums over the second half of the horizon.
    pub long_run_tput_d2d: f64,
    pub long_run_tput_cu: f64,
    /// Least-squares slope (bit/s per subframe) of the CU sum rate after initialization.
    pub cu_tput_slope: f64,
    pub checks: InvariantCounts,
}

/// Least-squares slope accumulated from running sums.
#[derive(Debug, Clone, Copy, Default)]
struct SlopeSums {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl SlopeSums {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    fn slope(&self) -> f64 {
        let den = self.n * self.sxx - self.sx * self.sx;
        if self.n < 2.0 || den == 0.0 {
            return 0.0;
        }
        (self.n * self.sxy - self.sx * self.sy) / den
    }
}

/// Streaming version of the metric functions above.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    oracle: ArmMeansOracle,
    phy: PhyConfig,
    schedule: LogSchedule,
    ranked: bool,
    counterfactual: bool,
    /// Subframes covered by round-robin initialization.
    init_window: u64,
    t: u64,
    cum_reward: f64,
    cum_def3: f64,
    cf_sums: Vec<f64>,
    returns: Vec<f64>,
    collisions: Vec<u64>,
    sole_on_best: Vec<u64>,
    sole_counts: Vec<u64>,
    tail_d2d: f64,
    tail_cu: f64,
    tail_n: u64,
    slope: SlopeSums,
    checks: InvariantCounts,
    metrics: RunMetrics,
}

impl MetricsAccumulator {
    pub fn new(
        oracle: ArmMeansOracle,
        phy: PhyConfig,
        schedule: LogSchedule,
        ranked: bool,
        counterfactual: bool,
        init_window: u64,
    ) -> Self {
        let (np, na) = (oracle.n_players, oracle.n_arms);
        let metrics = RunMetrics {
            horizon: schedule.horizon,
            subframes: Vec::new(),
            regret_def2: Vec::new(),
            regret_def3: ranked.then(Vec::new),
            regret_adversarial: counterfactual.then(Vec::new),
            sum_tput_d2d: Vec::new(),
            sum_tput_cu: Vec::new(),
            collision_pct: Vec::new(),
            fairness_pct: Vec::new(),
            counterfactual_best_return: None,
            r_tgt: phy.r_tgt(),
            long_run_tput_d2d: 0.0,
            long_run_tput_cu: 0.0,
            cu_tput_slope: 0.0,
            checks: InvariantCounts::default(),
        };
        MetricsAccumulator {
            oracle,
            phy,
            schedule,
            ranked,
            counterfactual,
            init_window,
            t: 0,
            cum_reward: 0.0,
            cum_def3: 0.0,
            cf_sums: vec![0.0; np * na],
            returns: vec![0.0; np],
            collisions: vec![0; np],
            sole_on_best: vec![0; np],
            sole_counts: vec![0; np * na],
            tail_d2d: 0.0,
            tail_cu: 0.0,
            tail_n: 0,
            slope: SlopeSums::default(),
            checks: InvariantCounts::default(),
            metrics,
        }
    }

    pub fn subframes_seen(&self) -> u64 {
        self.t
    }

    pub fn push(&mut self, o: &SubframeOutcome) -> Result<()> {
        let (np, na) = (self.oracle.n_players, self.oracle.n_arms);
        if o.n_players() != np {
            return Err(Error::contract("outcome player count differs from the oracle"));
        }
        self.t += 1;
        let n = self.t;

        self.cum_reward += o.reward.iter().sum::<f64>();
        if self.ranked {
            let ranks = o
                .ranks
                .as_ref()
                .ok_or_else(|| Error::contract("ranked policy outcome without ranks"))?;
            self.cum_def3 += ranked_term(o, ranks, &self.oracle);
            let mut seen = vec![false; np];
            let mut ok = ranks.len() == np;
            for &k in ranks {
                let k = k as usize;
                if k == 0 || k > np || std::mem::replace(&mut seen[k - 1], true) {
                    ok = false;
                }
            }
            self.checks.rank_violations += u64::from(!ok);
        }
        for d in 0..np {
            let c = o.selections[d];
            self.returns[d] += o.reward[d];
            if o.collided[d] {
                self.collisions[d] += 1;
                if n <= self.init_window {
                    self.checks.init_collisions += 1;
                }
            } else {
                self.sole_counts[d * na + c] += 1;
                if c == self.oracle.best_arm[d] {
                    self.sole_on_best[d] += 1;
                }
            }
            if o.power[d] > 0.0 {
                self.checks.reuses += 1;
                if o.cu_sinr[d] < self.phy.gamma_tgt.next_down() {
                    self.checks.unprotected_reuses += 1;
                }
            }
        }
        if self.counterfactual {
            let cf = o
                .counterfactual
                .as_ref()
                .ok_or_else(|| Error::contract("counterfactual log missing"))?;
            for (s, x) in self.cf_sums.iter_mut().zip(cf) {
                *s += x;
            }
            for d in 0..np {
                if o.sole(d) && cf[d * na + o.selections[d]] != o.reward[d] {
                    self.checks.counterfactual_mismatches += 1;
                }
            }
        }

        let d2d = o.sum_d2d_throughput();
        let cu = o.sum_cu_throughput(&self.phy);
        if 2 * n > self.schedule.horizon {
            self.tail_d2d += d2d;
            self.tail_cu += cu;
            self.tail_n += 1;
        }
        if n > self.init_window {
            self.slope.push(n as f64, cu);
        }

        if self.schedule.is_logged(n) {
            let floor = o.power_allocated_reuses() as f64 * self.phy.r_tgt();
            if cu < floor - 1e-6 {
                self.checks.cu_accounting_violations += 1;
            }
            let m = &mut self.metrics;
            m.subframes.push(n);
            m.regret_def2
                .push(n as f64 * self.oracle.sum_mu_star() - self.cum_reward);
            if let Some(s) = m.regret_def3.as_mut() {
                s.push(self.cum_def3);
            }
            if let Some(s) = m.regret_adversarial.as_mut() {
                let total: f64 = (0..np)
                    .map(|d| max_of(&self.cf_sums[d * na..(d + 1) * na]) - self.returns[d])
                    .sum();
                s.push(total);
            }
            m.sum_tput_d2d.push(d2d);
            m.sum_tput_cu.push(cu);
        }
        Ok(())
    }

    pub fn finish(mut self) -> RunMetrics {
        let (np, na) = (self.oracle.n_players, self.oracle.n_arms);
        let t = self.t.max(1) as f64;
        let m = &mut self.metrics;
        m.collision_pct = self.collisions.iter().map(|&h| 100.0 * h as f64 / t).collect();
        m.fairness_pct = if self.counterfactual {
            (0..np)
                .map(|d| {
                    let best = argmax(&self.cf_sums[d * na..(d + 1) * na]);
                    100.0 * self.sole_counts[d * na + best] as f64 / t
                })
                .collect()
        } else {
            self.sole_on_best.iter().map(|&h| 100.0 * h as f64 / t).collect()
        };
        if self.counterfactual {
            m.counterfactual_best_return = Some(
                self.cf_sums
                    .chunks(na)
                    .map(max_of)
                    .collect(),
            );
        }
        let tail = self.tail_n.max(1) as f64;
        m.long_run_tput_d2d = self.tail_d2d / tail;
        m.long_run_tput_cu = self.tail_cu / tail;
        m.cu_tput_slope = self.slope.slope();
        m.checks = self.checks;
        self.metrics
    }
}

use std::time::{Duration, Instant};

use crate::channel::{draw_channel_into, draw_large_scale, ChannelDraw, LargeScaleGains};
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::metrics::{estimate_arm_means, ArmMeansOracle, MetricsAccumulator, RunMetrics};
use crate::phy::{arbitrate, counterfactual_rewards, PhyConfig, RewardModel, SubframeOutcome};
use crate::policies::{build_policy, Policy, PolicyKind};
use crate::seeds;
use crate::topology::{generate_topology, Topology};

/// Executes one subframe: every player selects, the BS resolves collisions
/// and allocates power, rewards are computed and every player observes its own.
pub fn run_subframe(
    players: &mut [Box<dyn Policy>],
    subframe: u64,
    channel: &ChannelDraw,
    phy: &PhyConfig,
    model: RewardModel,
    with_counterfactual: bool,
) -> Result<SubframeOutcome> {
    let mut selections = Vec::with_capacity(players.len());
    for p in players.iter_mut() {
        selections.push(p.select(subframe)?);
    }
    let mut out = arbitrate(subframe, selections, channel, phy, model)?;
    if players.first().is_some_and(|p| p.rank().is_some()) {
        out.ranks = Some(players.iter().map(|p| p.rank().unwrap_or(0)).collect());
    }
    if with_counterfactual {
        out.counterfactual = Some(counterfactual_rewards(channel, phy, model));
    }
    for (d, p) in players.iter_mut().enumerate() {
        p.observe(out.selections[d], out.reward[d])?;
    }
    Ok(out)
}

/// Everything a run needs that depends only on the topology seed.
#[derive(Debug, Clone)]
pub struct TopologyContext {
    pub topology: Topology,
    pub large: LargeScaleGains,
    pub phy: PhyConfig,
    oracle_normalized: Option<ArmMeansOracle>,
    oracle_bernoulli: Option<ArmMeansOracle>,
}

impl TopologyContext {
    /// Builds the topology, its large-scale gains and the oracles the given policies need.
    pub fn prepare(config: &ExperimentConfig, topology_seed: u64, policies: &[PolicyKind]) -> Result<Self> {
        config.validate()?;
        let topology = generate_topology(
            config.n_cu,
            config.n_d2d,
            config.cell_radius,
            config.d2d_range,
            topology_seed,
        )?;
        let large = draw_large_scale(&topology, &config.channel)?;
        let phy = config.phy_config()?;
        let oracle_seed = seeds::derive(topology_seed, seeds::ORACLE, 0);
        let estimate = |model: RewardModel| -> Result<Option<ArmMeansOracle>> {
            if !policies.iter().any(|k| k.reward_model() == model) {
                return Ok(None);
            }
            estimate_arm_means(&large, &phy, &config.channel, config.oracle_samples, oracle_seed, model).map(Some)
        };
        Ok(TopologyContext {
            oracle_normalized: estimate(RewardModel::Normalized)?,
            oracle_bernoulli: estimate(RewardModel::Bernoulli)?,
            topology,
            large,
            phy,
        })
    }

    pub fn topology_seed(&self) -> u64 {
        self.topology.seed
    }

    pub fn oracle(&self, model: RewardModel) -> Option<&ArmMeansOracle> {
        match model {
            RewardModel::Normalized => self.oracle_normalized.as_ref(),
            RewardModel::Bernoulli => self.oracle_bernoulli.as_ref(),
        }
    }
}

/// Result of one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub policy: PolicyKind,
    pub topology_seed: u64,
    pub run_seed: u64,
    pub metrics: RunMetrics,
    /// Hash of every channel gain the run drew. Depends on the seeds only,
    /// never on the policy.
    pub gain_checksum: u64,
    /// Outcomes of the logged subframes, when requested.
    pub log: Option<Vec<SubframeOutcome>>,
    pub duration: Duration,
}

impl RunRecord {
    /// Equality of everything except the wall-clock duration.
    pub fn same_result(&self, other: &RunRecord) -> bool {
        self.policy == other.policy
            && self.topology_seed == other.topology_seed
            && self.run_seed == other.run_seed
            && self.metrics == other.metrics
            && self.gain_checksum == other.gain_checksum
            && self.log == other.log
    }
}

fn mix_checksum(h: u64, x: f64) -> u64 {
    (h.rotate_left(5) ^ x.to_bits()).wrapping_mul(0x0100_0000_01b3)
}

/// Runs `config.horizon` subframes of `kind` on a prepared topology.
pub fn run_on_topology(
    config: &ExperimentConfig,
    ctx: &TopologyContext,
    kind: PolicyKind,
    run_seed: u64,
    keep_log: bool,
) -> Result<RunRecord> {
    let start = Instant::now();
    let model = kind.reward_model();
    let oracle = ctx
        .oracle(model)
        .ok_or_else(|| Error::contract(format!("topology context has no oracle for {kind}")))?
        .clone();
    let n_players = config.n_d2d;
    if kind == PolicyKind::Ucb1 && n_players != 1 {
        return Err(Error::config("policy", "ucb1 needs exactly one D2D pair"));
    }
    let mut players = (0..n_players)
        .map(|d| {
            let mut pc = config.policy_config(kind);
            pc.seed = seeds::derive(run_seed, seeds::POLICY, d as u64);
            build_policy(&pc, d, n_players, config.n_cu)
        })
        .collect::<Result<Vec<_>>>()?;

    let schedule = config.log_schedule();
    let with_cf = kind == PolicyKind::Exp3;
    let init_window = if kind.has_init_phase() { config.n_cu as u64 } else { 0 };
    let mut acc = MetricsAccumulator::new(oracle, ctx.phy, schedule, kind.is_ranked(), with_cf, init_window);
    let fading_seed = seeds::derive(run_seed, seeds::FADING, 0);
    let mut channel = ChannelDraw::from_large_scale(&ctx.large, 0);
    let mut checksum = 0xcbf2_9ce4_8422_2325u64;
    let mut log = keep_log.then(Vec::new);

    for n in 1..=config.horizon {
        draw_channel_into(&ctx.large, &config.channel, fading_seed, n, &mut channel);
        checksum = channel.gains().fold(checksum, mix_checksum);
        let out = run_subframe(&mut players, n, &channel, &ctx.phy, model, with_cf)?;
        acc.push(&out)?;
        if let Some(log) = log.as_mut() {
            if schedule.is_logged(n) {
                log.push(out);
            }
        }
    }
    Ok(RunRecord {
        policy: kind,
        topology_seed: ctx.topology_seed(),
        run_seed,
        metrics: acc.finish(),
        gain_checksum: checksum,
        log,
        duration: start.elapsed(),
    })
}

/// Generates the topology from `topology_seed` and runs one simulation with
/// fading and policy streams from `run_seed`. The logged subframes are kept.
pub fn run_simulation(
    config: &ExperimentConfig,
    kind: PolicyKind,
    topology_seed: u64,
    run_seed: u64,
) -> Result<RunRecord> {
    let ctx = TopologyContext::prepare(config, topology_seed, &[kind])?;
    run_on_topology(config, &ctx, kind, run_seed, true)
}

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::sim::{run_on_topology, RunRecord, TopologyContext};
use crate::harness::ExperimentConfig;
use crate::metrics::InvariantCounts;
use crate::policies::PolicyKind;
use crate::seeds;

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanSe {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        if xs.is_empty() {
            return MeanSe::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return MeanSe { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanSe {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Mean and standard error across runs of every time series and scalar of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAggregate {
    pub policy: PolicyKind,
    pub runs: usize,
    pub subframes: Vec<u64>,
    pub regret_def2: Vec<MeanSe>,
    pub regret_def3: Option<Vec<MeanSe>>,
    pub regret_adversarial: Option<Vec<MeanSe>>,
    pub sum_tput_d2d: Vec<MeanSe>,
    pub sum_tput_cu: Vec<MeanSe>,
    pub r_tgt: f64,
    /// Per player.
    pub collision_pct: Vec<MeanSe>,
    pub fairness_pct: Vec<MeanSe>,
    pub long_run_tput_d2d: MeanSe,
    pub long_run_tput_cu: MeanSe,
    pub cu_tput_slope: MeanSe,
    /// Invariant counters summed over all runs.
    pub checks: InvariantCounts,
}

impl PolicyAggregate {
    pub fn from_records(records: &[&RunRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::contract("cannot aggregate zero runs"))?;
        let policy = first.policy;
        let m0 = &first.metrics;
        if records
            .iter()
            .any(|r| r.policy != policy || r.metrics.subframes != m0.subframes)
        {
            return Err(Error::contract("aggregated runs must share policy and log schedule"));
        }
        let series = |get: &dyn Fn(&RunRecord) -> &[f64]| -> Vec<MeanSe> {
            (0..m0.subframes.len())
                .map(|i| MeanSe::of(records.iter().map(|r| get(r)[i])))
                .collect()
        };
        let scalar = |get: &dyn Fn(&RunRecord) -> f64| MeanSe::of(records.iter().map(|r| get(r)));
        let per_player = |get: &dyn Fn(&RunRecord) -> &[f64]| -> Vec<MeanSe> {
            (0..get(first).len())
                .map(|d| MeanSe::of(records.iter().map(|r| get(r)[d])))
                .collect()
        };
        let mut checks = InvariantCounts::default();
        for r in records {
            let c = r.metrics.checks;
            checks.reuses += c.reuses;
            checks.unprotected_reuses += c.unprotected_reuses;
            checks.init_collisions += c.init_collisions;
            checks.rank_violations += c.rank_violations;
            checks.counterfactual_mismatches += c.counterfactual_mismatches;
            checks.cu_accounting_violations += c.cu_accounting_violations;
        }
        Ok(PolicyAggregate {
            policy,
            runs: records.len(),
            subframes: m0.subframes.clone(),
            regret_def2: series(&|r| &r.metrics.regret_def2),
            regret_def3: m0
                .regret_def3
                .is_some()
                .then(|| series(&|r| r.metrics.regret_def3.as_deref().unwrap_or(&[]))),
            regret_adversarial: m0
                .regret_adversarial
                .is_some()
                .then(|| series(&|r| r.metrics.regret_adversarial.as_deref().unwrap_or(&[]))),
            sum_tput_d2d: series(&|r| &r.metrics.sum_tput_d2d),
            sum_tput_cu: series(&|r| &r.metrics.sum_tput_cu),
            r_tgt: m0.r_tgt,
            collision_pct: per_player(&|r| &r.metrics.collision_pct),
            fairness_pct: per_player(&|r| &r.metrics.fairness_pct),
            long_run_tput_d2d: scalar(&|r| r.metrics.long_run_tput_d2d),
            long_run_tput_cu: scalar(&|r| r.metrics.long_run_tput_cu),
            cu_tput_slope: scalar(&|r| r.metrics.cu_tput_slope),
            checks,
        })
    }

    pub fn final_regret_def2(&self) -> MeanSe {
        *self.regret_def2.last().expect("at least one logged subframe")
    }

    pub fn final_regret_def3(&self) -> Option<MeanSe> {
        self.regret_def3.as_ref().and_then(|s| s.last().copied())
    }

    /// Mean over players of the per-player mean collision percentage, with
    /// the standard error of the per-run player average.
    pub fn mean_collision_pct(&self, records: &[&RunRecord]) -> MeanSe {
        MeanSe::of(records.iter().map(|r| {
            let c = &r.metrics.collision_pct;
            c.iter().sum::<f64>() / c.len() as f64
        }))
    }
}

/// Aggregates of one policy restricted to one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyAggregate {
    pub topology_index: u64,
    pub topology_seed: u64,
    pub aggregate: PolicyAggregate,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub topology_seeds: Vec<u64>,
    /// Ordered by policy (config order), then topology, then run.
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<PolicyAggregate>,
    pub per_topology: Vec<(PolicyKind, Vec<TopologyAggregate>)>,
}

impl Experiment {
    pub fn records_of(&self, kind: PolicyKind) -> Vec<&RunRecord> {
        self.records.iter().filter(|r| r.policy == kind).collect()
    }

    pub fn aggregate(&self, kind: PolicyKind) -> Option<&PolicyAggregate> {
        self.aggregates.iter().find(|a| a.policy == kind)
    }
}

/// Seeds of every (topology, run) pair in enumeration order.
pub fn enumerate_seeds(config: &ExperimentConfig) -> Vec<(u64, u64, u64, u64)> {
    let mut out = Vec::with_capacity(config.total_runs() as usize);
    for k in 0..config.mc_topologies {
        let ts = seeds::topology_seed(config.master_seed, k);
        for r in 0..config.mc_runs_per_topology {
            out.push((k, r, ts, seeds::run_seed(ts, r)));
        }
    }
    out
}

/// Runs every policy on `mc_topologies x mc_runs_per_topology` seed pairs
/// using `workers` threads. Results do not depend on `workers`.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<Experiment> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::contract(format!("thread pool: {e}")))?;
    let topology_seeds: Vec<u64> = (0..config.mc_topologies)
        .map(|k| seeds::topology_seed(config.master_seed, k))
        .collect();
    let contexts = pool.install(|| {
        topology_seeds
            .par_iter()
            .map(|&ts| {
                TopologyContext::prepare(config, ts, &config.policy).map_err(|e| Error::Run {
                    topology_seed: ts,
                    run_seed: 0,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let seeds = enumerate_seeds(config);
    let jobs: Vec<(PolicyKind, usize, u64)> = config
        .policy
        .iter()
        .flat_map(|&kind| seeds.iter().map(move |&(k, _, _, rs)| (kind, k as usize, rs)))
        .collect();
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(kind, k, rs)| {
                run_on_topology(config, &contexts[k], kind, rs, false).map_err(|e| Error::Run {
                    topology_seed: contexts[k].topology_seed(),
                    run_seed: rs,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut aggregates = Vec::new();
    let mut per_topology = Vec::new();
    for &kind in &config.policy {
        let mine: Vec<&RunRecord> = records.iter().filter(|r| r.policy == kind).collect();
        aggregates.push(PolicyAggregate::from_records(&mine)?);
        let mut topo = Vec::new();
        for (k, &ts) in topology_seeds.iter().enumerate() {
            let sub: Vec<&RunRecord> = mine.iter().copied().filter(|r| r.topology_seed == ts).collect();
            topo.push(TopologyAggregate {
                topology_index: k as u64,
                topology_seed: ts,
                aggregate: PolicyAggregate::from_records(&sub)?,
            });
        }
        per_topology.push((kind, topo));
    }
    Ok(Experiment {
        config: config.clone(),
        topology_seeds,
        records,
        aggregates,
        per_topology,
    })
}

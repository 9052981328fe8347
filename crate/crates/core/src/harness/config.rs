use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::metrics::{LogSchedule, MIN_ORACLE_SAMPLES, DEFAULT_ORACLE_SAMPLES};
use crate::phy::{PhyConfig, PhyParams};
use crate::policies::{PolicyConfig, PolicyKind, DEFAULT_ALPHA, DEFAULT_BETA};

/// One experiment: geometry, horizon, policies, Monte Carlo nesting and output.
///
/// Every key is optional in the config file; missing keys take the values
/// of the reference scenario (20 CUs, 5 D2D pairs, 250 m cell, 10^5
/// subframes, 50 runs on each of 10 topologies).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_cu: usize,
    pub n_d2d: usize,
    /// Meters.
    pub cell_radius: f64,
    /// Meters.
    pub d2d_range: f64,
    /// Subframes per run.
    pub horizon: u64,
    /// A single kind or a list; every listed policy runs on the same seeds.
    #[serde(deserialize_with = "one_or_many")]
    pub policy: Vec<PolicyKind>,
    pub alpha: f64,
    pub beta: f64,
    pub mc_runs_per_topology: u64,
    pub mc_topologies: u64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Keep every `log_every`-th subframe in the emitted time series.
    pub log_every: u64,
    /// Also keep each of the first `n_cu` subframes.
    pub log_init_phase: bool,
    /// Channel samples per (player, CU) pair for the arm-mean oracle.
    pub oracle_samples: u64,
    pub phy: PhyParams,
    pub channel: ChannelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_cu: 20,
            n_d2d: 5,
            cell_radius: 250.0,
            d2d_range: 50.0,
            horizon: 100_000,
            policy: vec![
                PolicyKind::MpUcb1,
                PolicyKind::Dlf,
                PolicyKind::KthUcb1,
                PolicyKind::Exp3,
            ],
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            mc_runs_per_topology: 50,
            mc_topologies: 10,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            log_every: 100,
            log_init_phase: true,
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
            phy: PhyParams::default(),
            channel: ChannelConfig::default(),
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<PolicyKind>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PolicyKind),
        Many(Vec<PolicyKind>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(k) => vec![k],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cu == 0 {
            return Err(Error::config("n_cu", "must be at least 1"));
        }
        if self.n_d2d == 0 {
            return Err(Error::config("n_d2d", "must be at least 1"));
        }
        if self.n_cu < self.n_d2d {
            return Err(Error::config(
                "n_cu",
                format!("{} CUs cannot host {} D2D pairs without collisions", self.n_cu, self.n_d2d),
            ));
        }
        for (field, v) in [("cell_radius", self.cell_radius), ("d2d_range", self.d2d_range)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive and finite, got {v}")));
            }
        }
        if self.horizon < self.n_cu as u64 {
            return Err(Error::config(
                "horizon",
                format!("must cover the {}-subframe initialization", self.n_cu),
            ));
        }
        if self.policy.is_empty() {
            return Err(Error::config("policy", "at least one policy is required"));
        }
        let mut seen = self.policy.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policy.len() {
            return Err(Error::config("policy", "policies must not repeat"));
        }
        if self.policy.contains(&PolicyKind::Ucb1) && self.n_d2d != 1 {
            return Err(Error::config(
                "policy",
                "ucb1 is the single-player policy; use mp_ucb1 with several D2D pairs",
            ));
        }
        if self.mc_runs_per_topology == 0 {
            return Err(Error::config("mc_runs_per_topology", "must be at least 1"));
        }
        if self.mc_topologies == 0 {
            return Err(Error::config("mc_topologies", "must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every", "must be at least 1"));
        }
        if self.oracle_samples < MIN_ORACLE_SAMPLES {
            return Err(Error::config(
                "oracle_samples",
                format!("must be at least {MIN_ORACLE_SAMPLES}"),
            ));
        }
        self.policy_config(PolicyKind::MpUcb1).validate()?;
        self.channel.validate()?;
        self.phy.resolve()?;
        Ok(())
    }

    pub fn phy_config(&self) -> Result<PhyConfig> {
        self.phy.resolve()
    }

    /// Policy parameters shared by all players; per-player seeds are set by the simulator.
    pub fn policy_config(&self, kind: PolicyKind) -> PolicyConfig {
        PolicyConfig {
            kind,
            alpha: self.alpha,
            beta: self.beta,
            seed: 0,
        }
    }

    pub fn log_schedule(&self) -> LogSchedule {
        LogSchedule {
            every: self.log_every,
            head: if self.log_init_phase { self.n_cu as u64 } else { 0 },
            horizon: self.horizon,
        }
    }

    pub fn total_runs(&self) -> u64 {
        self.mc_topologies * self.mc_runs_per_topology
    }
}

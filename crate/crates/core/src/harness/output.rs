use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::{enumerate_seeds, Experiment, MeanSe, PolicyAggregate};
use crate::harness::{plots, ExperimentConfig};
use crate::policies::PolicyKind;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const BARS_FILE: &str = "bars.csv";
pub const PER_TOPOLOGY_DIR: &str = "per_topology";

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn hex(x: u64) -> String {
    format!("{x:#018x}")
}

fn parse_hex(s: &str) -> Result<u64> {
    u64::from_str_radix(s.trim_start_matches("0x"), 16)
        .map_err(|e| Error::contract(format!("bad seed `{s}` in manifest: {e}")))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn push_series(row: &mut Vec<String>, s: &Option<Vec<MeanSe>>, i: usize) {
    if let Some(s) = s {
        row.push(fmt(s[i].mean));
        row.push(fmt(s[i].stderr));
    }
}

/// `subframe, mean_regret_def2, stderr_regret_def2[, mean_regret_def3, stderr_regret_def3][, mean_regret_adv, stderr_regret_adv]`.
pub fn write_regret_csv(path: &Path, agg: &PolicyAggregate) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["subframe", "mean_regret_def2", "stderr_regret_def2"];
    if agg.regret_def3.is_some() {
        header.extend(["mean_regret_def3", "stderr_regret_def3"]);
    }
    if agg.regret_adversarial.is_some() {
        header.extend(["mean_regret_adv", "stderr_regret_adv"]);
    }
    w.write_record(&header)?;
    for (i, n) in agg.subframes.iter().enumerate() {
        let mut row = vec![n.to_string(), fmt(agg.regret_def2[i].mean), fmt(agg.regret_def2[i].stderr)];
        push_series(&mut row, &agg.regret_def3, i);
        push_series(&mut row, &agg.regret_adversarial, i);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `subframe, sum_tput_d2d_mean, sum_tput_cu_mean, r_tgt`.
pub fn write_throughput_csv(path: &Path, agg: &PolicyAggregate) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["subframe", "sum_tput_d2d_mean", "sum_tput_cu_mean", "r_tgt"])?;
    for (i, n) in agg.subframes.iter().enumerate() {
        w.write_record([
            n.to_string(),
            fmt(agg.sum_tput_d2d[i].mean),
            fmt(agg.sum_tput_cu[i].mean),
            fmt(agg.r_tgt),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `policy, player, collision_pct, fairness_pct`, players numbered from 1.
pub fn write_bars_csv(path: &Path, aggs: &[PolicyAggregate]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "player", "collision_pct", "fairness_pct"])?;
    for a in aggs {
        for (d, (c, f)) in a.collision_pct.iter().zip(&a.fairness_pct).enumerate() {
            w.write_record([a.policy.name().to_string(), (d + 1).to_string(), fmt(c.mean), fmt(f.mean)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRun {
    pub policy: PolicyKind,
    pub topology_index: u64,
    pub run_index: u64,
    pub topology_seed: String,
    pub run_seed: String,
    pub gain_checksum: String,
}

/// Everything needed to reproduce an experiment. Seeds are stored as hex
/// strings because they do not fit TOML's signed integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub generator: String,
    pub code_version: String,
    pub master_seed: u64,
    pub topology_seeds: Vec<String>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn from_experiment(e: &Experiment, files: Vec<String>) -> Self {
        let seeds = enumerate_seeds(&e.config);
        let runs = e
            .records
            .iter()
            .zip(e.config.policy.iter().flat_map(|_| seeds.iter()))
            .map(|(r, &(k, i, ts, rs))| {
                debug_assert_eq!((ts, rs), (r.topology_seed, r.run_seed));
                ManifestRun {
                    policy: r.policy,
                    topology_index: k,
                    run_index: i,
                    topology_seed: hex(ts),
                    run_seed: hex(rs),
                    gain_checksum: hex(r.gain_checksum),
                }
            })
            .collect();
        Manifest {
            generator: env!("CARGO_PKG_NAME").to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: e.config.master_seed,
            topology_seeds: e.topology_seeds.iter().copied().map(hex).collect(),
            files,
            config: e.config.clone(),
            runs,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::contract(format!("manifest: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks that `e` drew exactly the channel streams recorded here.
    pub fn verify(&self, e: &Experiment) -> Result<()> {
        if self.runs.len() != e.records.len() {
            return Err(Error::contract(format!(
                "manifest lists {} runs, replay produced {}",
                self.runs.len(),
                e.records.len()
            )));
        }
        for (m, r) in self.runs.iter().zip(&e.records) {
            let (ts, rs, sum) = (parse_hex(&m.topology_seed)?, parse_hex(&m.run_seed)?, parse_hex(&m.gain_checksum)?);
            if m.policy != r.policy || ts != r.topology_seed || rs != r.run_seed || sum != r.gain_checksum {
                return Err(Error::Run {
                    topology_seed: ts,
                    run_seed: rs,
                    source: Box::new(Error::contract(format!(
                        "replayed {} run does not match the manifest",
                        m.policy
                    ))),
                });
            }
        }
        Ok(())
    }
}

/// Writes every CSV, the optional SVG plots and the manifest into `dir`.
/// Returns the written paths relative to `dir`.
pub fn emit_outputs(e: &Experiment, dir: &Path, with_plots: bool) -> Result<Vec<PathBuf>> {
    if e.records.is_empty() || e.aggregates.is_empty() {
        return Err(Error::contract("no run records to emit"));
    }
    let topo_dir = dir.join(PER_TOPOLOGY_DIR);
    fs::create_dir_all(&topo_dir).map_err(|e| Error::io(&topo_dir, e))?;
    let mut files = Vec::new();
    for a in &e.aggregates {
        let name = a.policy.name();
        let regret = PathBuf::from(format!("regret_{name}.csv"));
        write_regret_csv(&dir.join(&regret), a)?;
        let tput = PathBuf::from(format!("throughput_{name}.csv"));
        write_throughput_csv(&dir.join(&tput), a)?;
        files.extend([regret, tput]);
    }
    for (kind, topos) in &e.per_topology {
        for t in topos {
            let stem = format!("{}_topology{}", kind.name(), t.topology_index);
            let regret = Path::new(PER_TOPOLOGY_DIR).join(format!("regret_{stem}.csv"));
            write_regret_csv(&dir.join(&regret), &t.aggregate)?;
            let tput = Path::new(PER_TOPOLOGY_DIR).join(format!("throughput_{stem}.csv"));
            write_throughput_csv(&dir.join(&tput), &t.aggregate)?;
            files.extend([regret, tput]);
        }
    }
    write_bars_csv(&dir.join(BARS_FILE), &e.aggregates)?;
    files.push(PathBuf::from(BARS_FILE));
    if with_plots {
        files.extend(plots::write_plots(&e.aggregates, dir)?);
    }
    let names = files.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
    Manifest::from_experiment(e, names).save(&dir.join(MANIFEST_FILE))?;
    files.push(PathBuf::from(MANIFEST_FILE));
    Ok(files)
}

/// Re-runs the experiment recorded in a manifest and checks it drew the same channels.
pub fn replay(manifest: &Manifest, workers: usize) -> Result<Experiment> {
    let e = crate::harness::run_experiment(&manifest.config, workers)?;
    manifest.verify(&e)?;
    Ok(e)
}

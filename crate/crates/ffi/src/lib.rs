//! C ABI over the `d2d-bandit` simulator.
//!
//! Every fallible function returns a [`D2dStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`d2d_last_error`]. Handles are opaque and must be released with
//! their matching `_free` function; passing NULL to a `_free` is a no-op.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use d2d_bandit::channel::{path_loss_db, ChannelDraw};
use d2d_bandit::harness::{self, Experiment, ExperimentConfig, RunRecord};
use d2d_bandit::phy::{self, PhyConfig, PhyParams};
use d2d_bandit::policies::{self, PolicyKind};
use d2d_bandit::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D2dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    Io = 5,
    Contract = 6,
    Domain = 7,
    Run = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Time series selectable from a run or an experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D2dSeries {
    Subframe = 0,
    RegretDef2 = 1,
    RegretDef3 = 2,
    RegretAdversarial = 3,
    SumTputD2d = 4,
    SumTputCu = 5,
}

/// Physical-layer constants in linear SI units (W, Hz, bit/s).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2dPhy {
    pub p_c: f64,
    pub p_max: f64,
    pub gamma_tgt: f64,
    pub bandwidth: f64,
    pub noise_bs: f64,
    pub noise_d2d: f64,
    pub r_norm: f64,
    pub r_prime: f64,
}

impl From<PhyConfig> for D2dPhy {
    fn from(c: PhyConfig) -> Self {
        D2dPhy {
            p_c: c.p_c,
            p_max: c.p_max,
            gamma_tgt: c.gamma_tgt,
            bandwidth: c.bandwidth,
            noise_bs: c.noise_bs,
            noise_d2d: c.noise_d2d,
            r_norm: c.r_norm,
            r_prime: c.r_prime,
        }
    }
}

impl From<D2dPhy> for PhyConfig {
    fn from(c: D2dPhy) -> Self {
        PhyConfig {
            p_c: c.p_c,
            p_max: c.p_max,
            gamma_tgt: c.gamma_tgt,
            bandwidth: c.bandwidth,
            noise_bs: c.noise_bs,
            noise_d2d: c.noise_d2d,
            r_norm: c.r_norm,
            r_prime: c.r_prime,
        }
    }
}

/// Opaque experiment configuration.
pub struct D2dConfig(ExperimentConfig);

/// Opaque result of a single run.
pub struct D2dRun(RunRecord);

/// Opaque result of a Monte Carlo experiment.
pub struct D2dExperiment(Experiment);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(D2dStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config { .. } => D2dStatus::Config,
            Error::Parse { .. } => D2dStatus::Parse,
            Error::Io { .. } | Error::Csv(_) | Error::Plot(_) => D2dStatus::Io,
            Error::Contract(_) => D2dStatus::Contract,
            Error::Domain(_) => D2dStatus::Domain,
            Error::Run { .. } => D2dStatus::Run,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(D2dStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(D2dStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> D2dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => D2dStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside d2d-bandit".to_string());
            D2dStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn policy_arg(s: &str) -> Result<PolicyKind, Failure> {
    s.parse::<PolicyKind>().map_err(Failure::from)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn d2d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn d2d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration holding the reference-scenario defaults.
#[no_mangle]
pub extern "C" fn d2d_config_default() -> *mut D2dConfig {
    Box::into_raw(Box::new(D2dConfig(ExperimentConfig::default())))
}

/// Parses and validates a TOML configuration document.
#[no_mangle]
pub unsafe extern "C" fn d2d_config_from_toml(text: *const c_char, out: *mut *mut D2dConfig) -> D2dStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = ExperimentConfig::from_toml(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(D2dConfig(cfg)));
        Ok(())
    })
}

/// Loads and validates a TOML configuration file.
#[no_mangle]
pub unsafe extern "C" fn d2d_config_load(path: *const c_char, out: *mut *mut D2dConfig) -> D2dStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = ExperimentConfig::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(D2dConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn d2d_config_free(cfg: *mut D2dConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Restricts the experiment to a single policy (`mp_ucb1`, `dlf`, ...).
#[no_mangle]
pub unsafe extern "C" fn d2d_config_set_policy(cfg: *mut D2dConfig, policy: *const c_char) -> D2dStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        cfg.0.policy = vec![policy_arg(str_arg(policy, "policy")?)?];
        Ok(())
    })
}

/// Sets the horizon and Monte Carlo nesting, then validates the configuration.
#[no_mangle]
pub unsafe extern "C" fn d2d_config_set_scale(
    cfg: *mut D2dConfig,
    horizon: u64,
    mc_topologies: u64,
    mc_runs_per_topology: u64,
) -> D2dStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let mut next = cfg.0.clone();
        next.horizon = horizon;
        next.mc_topologies = mc_topologies;
        next.mc_runs_per_topology = mc_runs_per_topology;
        next.validate()?;
        cfg.0 = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn d2d_config_set_master_seed(cfg: *mut D2dConfig, seed: u64) -> D2dStatus {
    guard(|| {
        out_arg(cfg, "cfg")?.0.master_seed = seed;
        Ok(())
    })
}

/// Sets the arm-mean oracle sample count (at least 10000).
#[no_mangle]
pub unsafe extern "C" fn d2d_config_set_oracle_samples(cfg: *mut D2dConfig, samples: u64) -> D2dStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let mut next = cfg.0.clone();
        next.oracle_samples = samples;
        next.validate()?;
        cfg.0 = next;
        Ok(())
    })
}

/// Resolved physical-layer constants of a configuration.
#[no_mangle]
pub unsafe extern "C" fn d2d_config_phy(cfg: *const D2dConfig, out: *mut D2dPhy) -> D2dStatus {
    guard(|| {
        let cfg = in_arg(cfg, "cfg")?;
        *out_arg(out, "out")? = cfg.0.phy_config()?.into();
        Ok(())
    })
}

/// Physical-layer constants of the reference scenario.
#[no_mangle]
pub unsafe extern "C" fn d2d_phy_default(out: *mut D2dPhy) -> D2dStatus {
    guard(|| {
        *out_arg(out, "out")? = PhyParams::default().resolve()?.into();
        Ok(())
    })
}

/// Path loss in dB at `distance_m` meters.
#[no_mangle]
pub unsafe extern "C" fn d2d_path_loss_db(distance_m: f64, out: *mut f64) -> D2dStatus {
    guard(|| {
        *out_arg(out, "out")? = path_loss_db(distance_m)?;
        Ok(())
    })
}

/// BS power grant for a D2D pair reusing a CU, in watts.
#[no_mangle]
pub unsafe extern "C" fn d2d_allocate_power(
    phy: *const D2dPhy,
    g_cb: f64,
    g_db: f64,
    collided: bool,
    out: *mut f64,
) -> D2dStatus {
    guard(|| {
        let cfg: PhyConfig = (*in_arg(phy, "phy")?).into();
        cfg.validate()?;
        if !(g_cb > 0.0 && g_db > 0.0 && g_cb.is_finite() && g_db.is_finite()) {
            return Err(invalid("gains must be positive and finite"));
        }
        let ch = ChannelDraw {
            subframe: 0,
            n_d2d: 1,
            cu_bs: vec![g_cb],
            d2d_bs: vec![g_db],
            d2d_link: vec![1.0],
            cu_d2d: vec![1.0],
        };
        *out_arg(out, "out")? = phy::allocate_power(0, 0, &ch, collided, &cfg);
        Ok(())
    })
}

/// `mean + sqrt(2 ln(n) / count)`.
#[no_mangle]
pub unsafe extern "C" fn d2d_ucb1_index(mean: f64, count: u64, subframe: u64, out: *mut f64) -> D2dStatus {
    guard(|| {
        *out_arg(out, "out")? = policies::ucb1_index(mean, count, subframe)?;
        Ok(())
    })
}

/// `mean - sqrt(2 ln(n) / count)`.
#[no_mangle]
pub unsafe extern "C" fn d2d_lcb_index(mean: f64, count: u64, subframe: u64, out: *mut f64) -> D2dStatus {
    guard(|| {
        *out_arg(out, "out")? = policies::lcb_index(mean, count, subframe)?;
        Ok(())
    })
}

/// Runs one simulation of `policy` on the topology and run seeds given.
#[no_mangle]
pub unsafe extern "C" fn d2d_run_simulation(
    cfg: *const D2dConfig,
    policy: *const c_char,
    topology_seed: u64,
    run_seed: u64,
    out: *mut *mut D2dRun,
) -> D2dStatus {
    guard(|| {
        let cfg = in_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let kind = policy_arg(str_arg(policy, "policy")?)?;
        let rec = harness::run_simulation(&cfg.0, kind, topology_seed, run_seed)?;
        *out = Box::into_raw(Box::new(D2dRun(rec)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn d2d_run_free(run: *mut D2dRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of logged subframes, i.e. the length of every run series.
#[no_mangle]
pub unsafe extern "C" fn d2d_run_len(run: *const D2dRun, out: *mut usize) -> D2dStatus {
    guard(|| {
        *out_arg(out, "out")? = in_arg(run, "run")?.0.metrics.subframes.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn d2d_run_gain_checksum(run: *const D2dRun, out: *mut u64) -> D2dStatus {
    guard(|| {
        *out_arg(out, "out")? = in_arg(run, "run")?.0.gain_checksum;
        Ok(())
    })
}

/// Copies a logged series into `buf`, which must hold `d2d_run_len` values.
/// Series the policy does not produce fail with `INVALID_ARGUMENT`.
#[no_mangle]
pub unsafe extern "C" fn d2d_run_series(
    run: *const D2dRun,
    series: D2dSeries,
    buf: *mut f64,
    len: usize,
) -> D2dStatus {
    guard(|| {
        let m = &in_arg(run, "run")?.0.metrics;
        let values: Vec<f64> = match series {
            D2dSeries::Subframe => m.subframes.iter().map(|&n| n as f64).collect(),
            D2dSeries::RegretDef2 => m.regret_def2.clone(),
            D2dSeries::RegretDef3 => m.regret_def3.clone().ok_or_else(|| invalid("policy is not ranked"))?,
            D2dSeries::RegretAdversarial => m
                .regret_adversarial
                .clone()
                .ok_or_else(|| invalid("policy has no counterfactual log"))?,
            D2dSeries::SumTputD2d => m.sum_tput_d2d.clone(),
            D2dSeries::SumTputCu => m.sum_tput_cu.clone(),
        };
        copy_out(&values, buf, len)
    })
}

/// Per-player collision percentages; `buf` must hold `n_d2d` values.
#[no_mangle]
pub unsafe extern "C" fn d2d_run_collision_pct(run: *const D2dRun, buf: *mut f64, len: usize) -> D2dStatus {
    guard(|| copy_out(&in_arg(run, "run")?.0.metrics.collision_pct, buf, len))
}

/// Per-player fairness percentages; `buf` must hold `n_d2d` values.
#[no_mangle]
pub unsafe extern "C" fn d2d_run_fairness_pct(run: *const D2dRun, buf: *mut f64, len: usize) -> D2dStatus {
    guard(|| copy_out(&in_arg(run, "run")?.0.metrics.fairness_pct, buf, len))
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < values.len() {
        return Err(Failure(
            D2dStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Runs the full Monte Carlo experiment on `workers` threads.
#[no_mangle]
pub unsafe extern "C" fn d2d_experiment_run(
    cfg: *const D2dConfig,
    workers: usize,
    out: *mut *mut D2dExperiment,
) -> D2dStatus {
    guard(|| {
        let cfg = in_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let e = harness::run_experiment(&cfg.0, workers)?;
        *out = Box::into_raw(Box::new(D2dExperiment(e)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn d2d_experiment_free(e: *mut D2dExperiment) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Writes the CSV files, the manifest and optionally SVG plots into `dir`.
#[no_mangle]
pub unsafe extern "C" fn d2d_experiment_write(e: *const D2dExperiment, dir: *const c_char, plots: bool) -> D2dStatus {
    guard(|| {
        let e = in_arg(e, "experiment")?;
        let dir = Path::new(str_arg(dir, "dir")?);
        std::fs::create_dir_all(dir).map_err(|err| Failure(D2dStatus::Io, format!("{}: {err}", dir.display())))?;
        harness::emit_outputs(&e.0, dir, plots)?;
        Ok(())
    })
}

/// Mean and standard error across runs of a policy's regret at the horizon.
#[no_mangle]
pub unsafe extern "C" fn d2d_experiment_final_regret(
    e: *const D2dExperiment,
    policy: *const c_char,
    series: D2dSeries,
    mean: *mut f64,
    stderr: *mut f64,
) -> D2dStatus {
    guard(|| {
        let e = in_arg(e, "experiment")?;
        let kind = policy_arg(str_arg(policy, "policy")?)?;
        let a = e
            .0
            .aggregate(kind)
            .ok_or_else(|| invalid(format!("policy {kind} was not part of the experiment")))?;
        let s = match series {
            D2dSeries::RegretDef2 => Some(&a.regret_def2),
            D2dSeries::RegretDef3 => a.regret_def3.as_ref(),
            D2dSeries::RegretAdversarial => a.regret_adversarial.as_ref(),
            _ => return Err(invalid("not a regret series")),
        }
        .ok_or_else(|| invalid(format!("{kind} does not produce this regret")))?;
        let last = s.last().ok_or_else(|| invalid("empty series"))?;
        let (m, se) = (out_arg(mean, "mean")?, out_arg(stderr, "stderr")?);
        *m = last.mean;
        *se = last.stderr;
        Ok(())
    })
}

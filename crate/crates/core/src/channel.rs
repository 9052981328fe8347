//! Path loss, shadowing and fast fading.
//!
//! Large-scale attenuation (3GPP macro path loss plus log-normal shadowing)
//! is drawn once per topology. Fast fading is a unit-mean exponential power
//! multiplier redrawn every subframe; the draw for subframe `n` depends only
//! on `(fading_seed, n)`, so any subframe can be regenerated in isolation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;
use crate::topology::{Point, Topology};

pub const DEFAULT_SHADOWING_STD_DB: f64 = 8.0;
pub const DEFAULT_MIN_DISTANCE: f64 = 3.0;
pub const THERMAL_NOISE_DENSITY_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub shadowing_std_db: f64,
    /// Links shorter than this (meters) are evaluated at this distance.
    pub min_distance: f64,
    pub fading: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            shadowing_std_db: DEFAULT_SHADOWING_STD_DB,
            min_distance: DEFAULT_MIN_DISTANCE,
            fading: true,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shadowing_std_db >= 0.0 && self.shadowing_std_db.is_finite()) {
            return Err(Error::config("channel.shadowing_std_db", "must be >= 0 and finite"));
        }
        if !(self.min_distance > 0.0 && self.min_distance.is_finite()) {
            return Err(Error::config("channel.min_distance", "must be positive and finite"));
        }
        Ok(())
    }
}

/// 3GPP macrocell path loss `128.1 + 37.6 log10(d_km)` with the default 3 m clamp.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    path_loss_db_clamped(distance_m, DEFAULT_MIN_DISTANCE)
}

pub fn path_loss_db_clamped(distance_m: f64, min_distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "path loss needs a positive finite distance, got {distance_m}"
        )));
    }
    let d_km = distance_m.max(min_distance_m) / 1000.0;
    Ok(128.1 + 37.6 * d_km.log10())
}

/// Noise power in watts over `bandwidth_hz` for a receiver with `noise_figure_db`.
pub fn noise_power(bandwidth_hz: f64, noise_figure_db: f64, density_dbm_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    let dbm = density_dbm_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    Ok(db_to_linear(dbm - 30.0))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Linear power gains for the four link families, fixed for a topology.
///
/// `cu_d2d` is row-major by CU: entry `c * n_d2d + d` is CU `c` to receiver `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleGains {
    pub n_cu: usize,
    pub n_d2d: usize,
    pub cu_bs: Vec<f64>,
    pub d2d_bs: Vec<f64>,
    pub d2d_link: Vec<f64>,
    pub cu_d2d: Vec<f64>,
}

/// Draws path loss plus shadowing for every link of `topology`.
pub fn draw_large_scale(topology: &Topology, cfg: &ChannelConfig) -> Result<LargeScaleGains> {
    cfg.validate()?;
    let mut rng = seeds::rng(seeds::derive(topology.seed, seeds::SHADOWING, 0));
    let mut gain = |a: &Point, b: &Point| -> Result<f64> {
        let pl = path_loss_db_clamped(a.distance(b), cfg.min_distance)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(db_to_linear(-(pl + cfg.shadowing_std_db * z)))
    };
    let bs = topology.bs_position;
    let cu_bs = topology
        .cu_positions
        .iter()
        .map(|cu| gain(cu, &bs))
        .collect::<Result<Vec<_>>>()?;
    let d2d_bs = topology
        .d2d_tx_positions
        .iter()
        .map(|tx| gain(tx, &bs))
        .collect::<Result<Vec<_>>>()?;
    let d2d_link = topology
        .d2d_tx_positions
        .iter()
        .zip(&topology.d2d_rx_positions)
        .map(|(tx, rx)| gain(tx, rx))
        .collect::<Result<Vec<_>>>()?;
    let mut cu_d2d = Vec::with_capacity(topology.n_cu() * topology.n_d2d());
    for cu in &topology.cu_positions {
        for rx in &topology.d2d_rx_positions {
            cu_d2d.push(gain(cu, rx)?);
        }
    }
    Ok(LargeScaleGains {
        n_cu: topology.n_cu(),
        n_d2d: topology.n_d2d(),
        cu_bs,
        d2d_bs,
        d2d_link,
        cu_d2d,
    })
}

/// Gains seen in one subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub subframe: u64,
    pub n_d2d: usize,
    pub cu_bs: Vec<f64>,
    pub d2d_bs: Vec<f64>,
    pub d2d_link: Vec<f64>,
    pub cu_d2d: Vec<f64>,
}

impl ChannelDraw {
    /// A draw with no fading applied.
    pub fn from_large_scale(large: &LargeScaleGains, subframe: u64) -> Self {
        ChannelDraw {
            subframe,
            n_d2d: large.n_d2d,
            cu_bs: large.cu_bs.clone(),
            d2d_bs: large.d2d_bs.clone(),
            d2d_link: large.d2d_link.clone(),
            cu_d2d: large.cu_d2d.clone(),
        }
    }

    #[inline]
    pub fn g_cb(&self, cu: usize) -> f64 {
        self.cu_bs[cu]
    }

    #[inline]
    pub fn g_db(&self, d2d: usize) -> f64 {
        self.d2d_bs[d2d]
    }

    #[inline]
    pub fn g_d(&self, d2d: usize) -> f64 {
        self.d2d_link[d2d]
    }

    #[inline]
    pub fn g_cd(&self, cu: usize, d2d: usize) -> f64 {
        self.cu_d2d[cu * self.n_d2d + d2d]
    }

    pub fn n_cu(&self) -> usize {
        self.cu_bs.len()
    }

    pub fn gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.cu_bs
            .iter()
            .chain(&self.d2d_bs)
            .chain(&self.d2d_link)
            .chain(&self.cu_d2d)
            .copied()
    }
}

pub fn draw_channel(
    large: &LargeScaleGains,
    cfg: &ChannelConfig,
    fading_seed: u64,
    subframe: u64,
) -> ChannelDraw {
    let mut out = ChannelDraw::from_large_scale(large, subframe);
    draw_channel_into(large, cfg, fading_seed, subframe, &mut out);
    out
}

/// Same as [`draw_channel`], reusing `out`'s buffers.
///
/// Fading multipliers are drawn in the fixed link order
/// `cu_bs, d2d_bs, d2d_link, cu_d2d` from ChaCha stream `subframe`.
pub fn draw_channel_into(
    large: &LargeScaleGains,
    cfg: &ChannelConfig,
    fading_seed: u64,
    subframe: u64,
    out: &mut ChannelDraw,
) {
    out.subframe = subframe;
    out.n_d2d = large.n_d2d;
    if !cfg.fading {
        out.cu_bs.clone_from(&large.cu_bs);
        out.d2d_bs.clone_from(&large.d2d_bs);
        out.d2d_link.clone_from(&large.d2d_link);
        out.cu_d2d.clone_from(&large.cu_d2d);
        return;
    }
    let mut rng = subframe_rng(fading_seed, subframe);
    let mut fade = |dst: &mut Vec<f64>, src: &[f64]| {
        dst.clear();
        dst.extend(src.iter().map(|g| g * fading_multiplier(&mut rng)));
    };
    fade(&mut out.cu_bs, &large.cu_bs);
    fade(&mut out.d2d_bs, &large.d2d_bs);
    fade(&mut out.d2d_link, &large.d2d_link);
    fade(&mut out.cu_d2d, &large.cu_d2d);
}

fn subframe_rng(fading_seed: u64, subframe: u64) -> ChaCha8Rng {
    let mut rng = seeds::rng(fading_seed);
    rng.set_stream(subframe);
    rng
}

/// Unit-mean exponential power multiplier, kept strictly positive.
#[inline]
fn fading_multiplier<R: Rng>(rng: &mut R) -> f64 {
    let x: f64 = rng.sample(Exp1);
    x.max(f64::MIN_POSITIVE)
}

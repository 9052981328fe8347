//! Cell geometry: one BS at the origin, CUs and D2D transmitters uniform over
//! the cell disc, each D2D receiver uniform over a disc around its transmitter.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

pub const DEFAULT_CELL_RADIUS: f64 = 250.0;
pub const DEFAULT_D2D_RANGE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Positions of every node in the cell. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub cell_radius: f64,
    pub d2d_range: f64,
    pub bs_position: Point,
    pub cu_positions: Vec<Point>,
    pub d2d_tx_positions: Vec<Point>,
    pub d2d_rx_positions: Vec<Point>,
    pub seed: u64,
}

/// Area-uniform point in a disc (inverse-CDF radius).
fn uniform_in_disc<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Draws a random topology. Identical arguments give identical topologies.
pub fn generate_topology(
    n_cu: usize,
    n_d2d: usize,
    cell_radius: f64,
    d2d_range: f64,
    seed: u64,
) -> Result<Topology> {
    check_shape(n_cu, n_d2d, cell_radius, d2d_range)?;
    let mut rng = seeds::rng(seeds::derive(seed, seeds::GEOMETRY, 0));
    let bs = Point::ORIGIN;
    let cu_positions = (0..n_cu)
        .map(|_| uniform_in_disc(&mut rng, bs, cell_radius))
        .collect();
    let mut d2d_tx_positions = Vec::with_capacity(n_d2d);
    let mut d2d_rx_positions = Vec::with_capacity(n_d2d);
    for _ in 0..n_d2d {
        let tx = uniform_in_disc(&mut rng, bs, cell_radius);
        d2d_rx_positions.push(uniform_in_disc(&mut rng, tx, d2d_range));
        d2d_tx_positions.push(tx);
    }
    Ok(Topology {
        cell_radius,
        d2d_range,
        bs_position: bs,
        cu_positions,
        d2d_tx_positions,
        d2d_rx_positions,
        seed,
    })
}

fn check_shape(n_cu: usize, n_d2d: usize, cell_radius: f64, d2d_range: f64) -> Result<()> {
    if n_d2d == 0 {
        return Err(Error::config("n_d2d", "need at least one D2D pair"));
    }
    if n_cu < n_d2d {
        return Err(Error::config(
            "n_cu",
            format!("n_cu ({n_cu}) must be >= n_d2d ({n_d2d}) for a collision-free initialization"),
        ));
    }
    if !(cell_radius > 0.0 && cell_radius.is_finite()) {
        return Err(Error::config("cell_radius", "must be positive and finite"));
    }
    if !(d2d_range > 0.0 && d2d_range.is_finite()) {
        return Err(Error::config("d2d_range", "must be positive and finite"));
    }
    Ok(())
}

impl Topology {
    pub fn n_cu(&self) -> usize {
        self.cu_positions.len()
    }

    pub fn n_d2d(&self) -> usize {
        self.d2d_tx_positions.len()
    }

    /// Checks the geometric invariants; used when loading a topology file.
    pub fn validate(&self) -> Result<()> {
        check_shape(self.n_cu(), self.n_d2d(), self.cell_radius, self.d2d_range)?;
        if self.d2d_rx_positions.len() != self.n_d2d() {
            return Err(Error::config(
                "d2d_rx_positions",
                "must have one receiver per transmitter",
            ));
        }
        // Small slack for positions that went through a text round trip.
        let slack = 1e-9;
        let outside = |p: &Point| p.distance(&self.bs_position) > self.cell_radius * (1.0 + slack);
        if self.cu_positions.iter().any(outside) {
            return Err(Error::config("cu_positions", "CU outside the cell"));
        }
        if self.d2d_tx_positions.iter().any(outside) {
            return Err(Error::config("d2d_tx_positions", "D2D transmitter outside the cell"));
        }
        let far = self
            .d2d_tx_positions
            .iter()
            .zip(&self.d2d_rx_positions)
            .any(|(tx, rx)| tx.distance(rx) > self.d2d_range * (1.0 + slack));
        if far {
            return Err(Error::config("d2d_rx_positions", "receiver beyond d2d_range"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topology is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let topo: Topology = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<topology>".into(),
            message: e.to_string(),
        })?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

//! Seed tree.
//!
//! Every random stream in a run is derived from a single master seed:
//!
//! ```text
//! master_seed
//!   └─ topology_seed(k)   = derive(master_seed, "topology", k)
//!        ├─ geometry      = derive(topology_seed, "geometry", 0)
//!        ├─ shadowing     = derive(topology_seed, "shadowing", 0)
//!        ├─ oracle        = derive(topology_seed, "oracle", 0)
//!        └─ run_seed(r)   = derive(topology_seed, "run", r)
//!             ├─ fading   = derive(run_seed, "fading", 0)
//!             └─ policy   = derive(run_seed, "policy", player)
//! ```
//!
//! `derive` hashes the label with FNV-1a and mixes parent, label and index
//! through two SplitMix64 finalizer rounds. Streams with different labels or
//! indices are therefore unrelated, and adding a player or changing the
//! policy kind never perturbs the channel stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GEOMETRY: &str = "geometry";
pub const SHADOWING: &str = "shadowing";
pub const ORACLE: &str = "oracle";
pub const TOPOLOGY: &str = "topology";
pub const RUN: &str = "run";
pub const FADING: &str = "fading";
pub const POLICY: &str = "policy";

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(label, index)` under `parent`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    splitmix(splitmix(parent ^ fnv1a(label)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn topology_seed(master: u64, k: u64) -> u64 {
    derive(master, TOPOLOGY, k)
}

pub fn run_seed(topology_seed: u64, r: u64) -> u64 {
    derive(topology_seed, RUN, r)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

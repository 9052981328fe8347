pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod phy;
pub mod policies;
pub mod seeds;
pub mod topology;

pub use error::{Error, Result};

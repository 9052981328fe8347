//! Configuration, the subframe loop, Monte Carlo experiments and file output.

mod config;
mod experiment;
mod output;
mod plots;
mod sim;

pub use config::ExperimentConfig;
pub use experiment::{enumerate_seeds, run_experiment, Experiment, MeanSe, PolicyAggregate, TopologyAggregate};
pub use output::{
    emit_outputs, replay, write_bars_csv, write_regret_csv, write_throughput_csv, Manifest, ManifestRun,
    BARS_FILE, MANIFEST_FILE, PER_TOPOLOGY_DIR,
};
pub use plots::write_plots;
pub use sim::{run_on_topology, run_simulation, run_subframe, RunRecord, TopologyContext};

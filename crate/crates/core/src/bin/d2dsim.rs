use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use d2d_bandit::harness::{emit_outputs, replay, run_experiment, Experiment, ExperimentConfig, Manifest, TopologyContext};
use d2d_bandit::policies::PolicyKind;
use d2d_bandit::Result;

#[derive(Parser)]
#[command(name = "d2dsim", version, about = "Bandit-driven D2D resource allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSVs, plots and a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Run only this policy (overrides the config file).
        #[arg(long)]
        policy: Option<PolicyKind>,
        /// Master seed (overrides the config file).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config file).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also write SVG plots.
        #[arg(long)]
        plots: bool,
    },
    /// Print the true arm means of one topology.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Decimal or 0x-prefixed hexadecimal.
        #[arg(long, value_parser = parse_seed)]
        topology_seed: u64,
        #[arg(long, value_enum, default_value_t = Model::Normalized)]
        model: Model,
    },
    /// Re-run the experiment recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Defaults to `<output_dir>/replay`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        plots: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Normalized,
    Bernoulli,
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

fn summary(e: &Experiment) {
    println!(
        "{:<9} {:>14} {:>14} {:>10} {:>10} {:>13} {:>13}",
        "policy", "regret_def2", "regret_def3", "collide%", "fair%", "d2d_bps", "cu_bps"
    );
    for a in &e.aggregates {
        let mean = |v: &[d2d_bandit::harness::MeanSe]| v.iter().map(|m| m.mean).sum::<f64>() / v.len() as f64;
        let def3 = a
            .final_regret_def3()
            .map_or_else(|| "-".to_string(), |m| format!("{:.1}", m.mean));
        println!(
            "{:<9} {:>14.1} {:>14} {:>10.2} {:>10.2} {:>13.0} {:>13.0}",
            a.policy.name(),
            a.final_regret_def2().mean,
            def3,
            mean(&a.collision_pct),
            mean(&a.fairness_pct),
            a.long_run_tput_d2d.mean,
            a.long_run_tput_cu.mean,
        );
    }
}

fn write(e: &Experiment, out: &PathBuf, plots: bool) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|err| d2d_bandit::Error::Io {
        path: out.clone(),
        source: err,
    })?;
    let files = emit_outputs(e, out, plots)?;
    summary(e);
    eprintln!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            policy,
            seed,
            out,
            workers,
            plots,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = policy {
                cfg.policy = vec![p];
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            let start = Instant::now();
            let e = run_experiment(&cfg, workers)?;
            eprintln!(
                "{} runs in {:.1} s",
                e.records.len(),
                start.elapsed().as_secs_f64()
            );
            write(&e, &cfg.output_dir, plots)
        }
        Command::Oracle {
            config,
            topology_seed,
            model,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let kind = match model {
                Model::Normalized => PolicyKind::MpUcb1,
                Model::Bernoulli => PolicyKind::Exp3,
            };
            let model = kind.reward_model();
            let ctx = TopologyContext::prepare(&cfg, topology_seed, &[kind])?;
            let o = ctx.oracle(model).expect("oracle prepared for this model");
            println!("# topology seed {topology_seed:#018x}, {model:?} rewards, {} samples", o.samples);
            print!("player");
            for c in 0..o.n_arms {
                print!(",cu{}", c + 1);
            }
            println!(",best_cu");
            for d in 0..o.n_players {
                print!("{}", d + 1);
                for c in 0..o.n_arms {
                    print!(",{:.6}+-{:.6}", o.mu(d, c), o.stderr(d, c));
                }
                println!(",{}", o.best_arm[d] + 1);
            }
            Ok(())
        }
        Command::Replay {
            manifest,
            out,
            workers,
            plots,
        } => {
            let m = Manifest::load(&manifest)?;
            let e = replay(&m, workers)?;
            eprintln!("replay matches the manifest ({} runs)", e.records.len());
            let out = out.unwrap_or_else(|| m.config.output_dir.join("replay"));
            write(&e, &out, plots)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

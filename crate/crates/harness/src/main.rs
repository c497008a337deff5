use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nondecomp::config::{Algorithm, ConfigLayer, ExperimentConfig};
use nondecomp::{compare, drift_study, run, CompareOptions, HarnessError, XAxis};

/// Train small networks on non-decomposable performance measures and
/// record convergence traces.
#[derive(Parser)]
#[command(name = "nondecomp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration; writes trace.csv, timing.csv, summary.json
    /// and plot.svg to the output directory
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Train several configurations on the same data; writes a combined
    /// plot.svg and table.csv plus one run directory per member
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Train on the kld measure and evaluate under resampled test priors;
    /// writes drift.csv and drift.svg
    Drift {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration (repeat for compare/drift); flags override its keys
    #[arg(long = "config", short = 'c')]
    configs: Vec<PathBuf>,
    /// One member per listed algorithm on top of each configuration
    #[arg(long, value_enum, value_delimiter = ',')]
    algos: Vec<Algorithm>,
    /// Plot against iterations or samples consumed
    #[arg(long = "x", value_enum, default_value = "iters")]
    x: XAxis,
    #[command(flatten)]
    flags: ConfigLayer,
}

impl Common {
    fn resolve(&self) -> Result<Vec<ExperimentConfig>, HarnessError> {
        let files = if self.configs.is_empty() {
            vec![ConfigLayer::default()]
        } else {
            self.configs
                .iter()
                .map(|p| ConfigLayer::from_file(p))
                .collect::<Result<_, _>>()?
        };
        let mut out = Vec::new();
        for f in files {
            let layer = f.overlay(self.flags.clone());
            if self.algos.is_empty() {
                out.push(layer.resolve()?);
            } else {
                for a in &self.algos {
                    let member = ConfigLayer {
                        algo: Some(*a),
                        ..layer.clone()
                    };
                    out.push(member.resolve()?);
                }
            }
        }
        Ok(out)
    }

    fn out_dir(&self, cfgs: &[ExperimentConfig]) -> PathBuf {
        self.flags
            .out
            .clone()
            .or_else(|| cfgs.first().map(|c| c.out.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { common } => {
            let cfgs = common.resolve()?;
            let [cfg] = cfgs.as_slice() else {
                return Err(HarnessError::Usage(format!(
                    "run takes exactly one configuration, got {}",
                    cfgs.len()
                )));
            };
            let o = run(cfg, common.x)?;
            println!("{}", o.dir.display());
        }
        Command::Compare { common } => {
            let cfgs = common.resolve()?;
            let opts = CompareOptions {
                out: common.out_dir(&cfgs),
                x: common.x,
            };
            compare(&cfgs, &opts)?;
            println!("{}", opts.out.display());
        }
        Command::Drift { common } => {
            let cfgs = common.resolve()?;
            let out = common.out_dir(&cfgs);
            drift_study(&cfgs, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nondecomp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

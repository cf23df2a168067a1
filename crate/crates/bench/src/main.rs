use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrc_bench::experiment::{
    attack_stage, default_cache, embed_stage, prepare, report_stage, train_stage, RunDir,
};
use qrc_bench::report::{RobustnessReport, CLASSICAL_MODEL, HYBRID_MODEL};
use qrc_bench::{run_experiment, BenchError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "qrc",
    version,
    about = "Adversarial robustness benchmark for a Rydberg reservoir classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the encoding and write reservoir and classical features.
    Embed(Common),
    /// Train the hybrid and classical readouts from stored features.
    Train(Common),
    /// Attack both trained models over the ε grid and record accuracy curves.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Also store every adversarial example.
        #[arg(long)]
        dump_adversarial: bool,
    },
    /// Collect per-N curves into report.json and report.csv.
    Report(Common),
    /// Run embed, train, attack and report for every atom count.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dump_adversarial: bool,
    },
    /// Print the effective configuration.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines); defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run directory holding all artifacts.
    #[arg(short, long, default_value = "qrc-run")]
    run: PathBuf,
    /// Override a configuration key, e.g. `--set N=2,4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, RunDir), BenchError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        for item in &self.overrides {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("--set expects KEY=VALUE, got `{item}`"))
            })?;
            cfg.set(k.trim(), v.trim(), Path::new("."))?;
        }
        cfg.validate()?;
        Ok((cfg, RunDir::new(&self.run)))
    }
}

fn print_summary(report: &RobustnessReport) {
    println!("config {}", report.config_hash);
    for e in &report.entries {
        let clean = |m| e.clean_accuracy(m).unwrap_or(f64::NAN);
        print!(
            "N={} clean {}={:.4} {}={:.4}",
            e.n_atoms,
            HYBRID_MODEL,
            clean(HYBRID_MODEL),
            CLASSICAL_MODEL,
            clean(CLASSICAL_MODEL)
        );
        for d in &e.delta_acc {
            print!(" ΔAcc[{}]={:+.4}", d.attack, d.value);
        }
        println!();
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Config(common) => {
            let (cfg, _) = common.load()?;
            print!("{}", cfg.to_text());
            println!("# hash {}", cfg.hash());
        }
        Command::Embed(common) => {
            let (cfg, run) = common.load()?;
            let (data, split) = prepare(&cfg, &run)?;
            let cache = default_cache(&cfg, &run);
            for &n in &cfg.atom_sweep {
                embed_stage(&cfg, &data, &split, n, &run, &cache)?;
            }
        }
        Command::Train(common) => {
            let (cfg, run) = common.load()?;
            let (_, split) = prepare(&cfg, &run)?;
            for &n in &cfg.atom_sweep {
                train_stage(&cfg, &split, n, &run)?;
            }
        }
        Command::Attack {
            common,
            dump_adversarial,
        } => {
            let (cfg, run) = common.load()?;
            let (_, split) = prepare(&cfg, &run)?;
            for &n in &cfg.atom_sweep {
                attack_stage(&cfg, &split, n, &run, dump_adversarial)?;
            }
        }
        Command::Report(common) => {
            let (cfg, run) = common.load()?;
            let (data, split) = prepare(&cfg, &run)?;
            print_summary(&report_stage(&cfg, &data, &split, &run)?);
        }
        Command::Sweep {
            common,
            dump_adversarial,
        } => {
            let (cfg, run) = common.load()?;
            print_summary(&run_experiment(&cfg, &run, dump_adversarial)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

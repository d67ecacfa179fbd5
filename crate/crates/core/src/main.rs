use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use territorial_ising::config::RunConfig;
use territorial_ising::pipeline::{run_pipeline, run_stages, Stage};
use territorial_ising::synthetic::{generate, SyntheticSpec};
use territorial_ising::Error;

#[derive(Parser)]
#[command(version, about = "Hub/periphery classification of territorial units with an Ising model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, default_value = "config.toml")]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the worker thread count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.chain.workers = w;
        }
        if let Some(d) = &self.out_dir {
            // relative to the working directory, not the config file
            cfg.output.dir = std::path::absolute(d).map_err(|e| Error::io(d, e))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic unit table, geometry and config.
    GenSynthetic {
        #[arg(long, default_value_t = 966)]
        units: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        signal: f64,
        #[arg(long, default_value_t = 0.4)]
        hub_share: f64,
        #[arg(long, default_value_t = 0.03)]
        label_noise: f64,
        #[arg(long, default_value = "synthetic")]
        out_dir: PathBuf,
    },
    /// Composite indices per indicator group.
    Indices(Common),
    /// PCA of the composite indices and the external field.
    Field(Common),
    /// Similarity graph and its spectrum.
    Graph(Common),
    /// Annealed Metropolis chains and replicate marginals.
    Simulate(Common),
    /// Energy, log-likelihood, divergence and mismatch diagnostics.
    Diagnose(Common),
    /// Conformal prediction intervals.
    Conformal(Common),
    /// Map-ready interval widths and classes.
    Map(Common),
    /// Every stage in order.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Stop after this stage.
        #[arg(long)]
        stage: Option<Stage>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, stage) = match cli.command {
        Command::GenSynthetic { units, seed, signal, hub_share, label_noise, out_dir } => {
            let data = generate(&SyntheticSpec { n_units: units, hub_share, signal, label_noise, seed });
            let path = data.write_all(&out_dir)?;
            println!("wrote {} units, config at {}", data.n_units(), path.display());
            return Ok(());
        }
        Command::Pipeline { common, stage } => {
            let cfg = common.load()?;
            let m = run_pipeline(&cfg, stage)?;
            for s in &m.stages {
                println!("{:<10} {:>8.2}s", s.stage, s.seconds);
            }
            println!("outputs in {}", cfg.out_dir().display());
            return Ok(());
        }
        Command::Indices(c) => (c, Stage::Indices),
        Command::Field(c) => (c, Stage::Field),
        Command::Graph(c) => (c, Stage::Graph),
        Command::Simulate(c) => (c, Stage::Simulate),
        Command::Diagnose(c) => (c, Stage::Diagnose),
        Command::Conformal(c) => (c, Stage::Conformal),
        Command::Map(c) => (c, Stage::Map),
    };
    let cfg = common.load()?;
    let m = run_stages(&cfg, &[stage])?;
    println!("{stage} done in {:.2}s", m.total_seconds);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

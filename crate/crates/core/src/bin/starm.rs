use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use starm::harness::config::{
    overlay_config, AngleConfig, ExperimentConfig, OptimizeConfig, RomConfig, SyntheticConfig, TsvdmConfig,
};
use starm::harness::experiments::Method;
use starm::harness::{self};
use starm::optim::{OptimConfig, StepRule};
use starm::{Error, Result};

#[derive(Parser)]
#[command(name = "starm", version, about = "⋆_M tensor factorizations and learned orthogonal transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OptimFlags {
    /// Maximum optimizer iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Gradient-norm stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// `fixed:ALPHA` or `backtrack`.
    #[arg(long)]
    step: Option<String>,
    /// Log every N iterations (0 disables).
    #[arg(long)]
    log_every: Option<usize>,
}

impl OptimFlags {
    fn apply(&self, base: OptimConfig) -> Result<OptimConfig> {
        let mut cfg = base;
        if let Some(n) = self.iters {
            cfg.max_iters = n;
        }
        if let Some(t) = self.tol {
            cfg.grad_tol = t;
        }
        if let Some(s) = &self.step {
            cfg.step = s.parse::<StepRule>()?;
        }
        if let Some(n) = self.log_every {
            cfg.log_every = n;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Truncated t-SVDM of a tensor file.
    Tsvdm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        output: PathBuf,
        /// identity | dct | random:SEED | data | file:PATH
        #[arg(long, default_value = "dct")]
        transform: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON config; its values override the flags.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Learn a transform for a regression (with --observations) or
    /// low-t-rank objective.
    Optimize {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        observations: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        output: PathBuf,
        #[arg(long, default_value = "identity")]
        transform: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        optim: OptimFlags,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rotation-angle example: fixed-step descent from each starting angle.
    Angle {
        #[arg(long, value_delimiter = ',')]
        theta0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value = "out")]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Synthetic t-linear regression with a DCT ground truth.
    Synthetic {
        /// n3 = 2^d.
        #[arg(long, default_value_t = 2)]
        d: u32,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// varpro | altdesc
        #[arg(long, default_value = "varpro")]
        method: String,
        #[arg(long, default_value = "random")]
        transform: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        output: PathBuf,
        #[command(flatten)]
        optim: OptimFlags,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Wave-equation snapshot compression with learned transforms.
    Rom {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        n_speeds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        output: PathBuf,
        #[command(flatten)]
        optim: OptimFlags,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a seeded tensor with low transform-domain rank.
    Generate {
        /// n1,n2,n3
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn resolve(base: ExperimentConfig, config: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => overlay_config(&base, p),
        None => {
            base.validate()?;
            Ok(base)
        }
    }
}

fn run(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Tsvdm { input, output, transform, k, seed, config } => {
            let base = ExperimentConfig::Tsvdm(TsvdmConfig { input, output, transform, k, seed });
            match resolve(base, &config)? {
                ExperimentConfig::Tsvdm(c) => harness::run_tsvdm_command(&c),
                _ => unreachable!("overlay keeps the experiment kind"),
            }
        }
        Command::Optimize { input, observations, output, transform, k, lambda, seed, optim, config } => {
            let base = ExperimentConfig::Optimize(OptimizeConfig {
                input: input.unwrap_or_default(),
                observations,
                output,
                transform,
                k,
                lambda,
                seed,
                optim: optim.apply(OptimConfig { seed, ..OptimConfig::default() })?,
            });
            match resolve(base, &config)? {
                ExperimentConfig::Optimize(c) => harness::run_optimize_command(&c),
                _ => unreachable!("overlay keeps the experiment kind"),
            }
        }
        Command::Angle { theta0, alpha, iters, tol, output, config } => {
            let defaults = AngleConfig::default();
            let base =
                ExperimentConfig::Angle(AngleConfig { theta0: theta0.unwrap_or(defaults.theta0), alpha, iters, tol, output });
            match resolve(base, &config)? {
                ExperimentConfig::Angle(c) => harness::run_angle_command(&c),
                _ => unreachable!("overlay keeps the experiment kind"),
            }
        }
        Command::Synthetic { d, noise, method, transform, seed, output, optim, config } => {
            let defaults = SyntheticConfig::default();
            let base = ExperimentConfig::Synthetic(SyntheticConfig {
                d,
                noise,
                method: method.parse::<Method>()?,
                seed,
                transform,
                optim: optim.apply(OptimConfig { seed, ..defaults.optim })?,
                output,
                ..defaults
            });
            match resolve(base, &config)? {
                ExperimentConfig::Synthetic(c) => harness::run_synthetic_command(&c),
                _ => unreachable!("overlay keeps the experiment kind"),
            }
        }
        Command::Rom { k, n_speeds, seed, output, optim, config } => {
            let mut defaults = RomConfig::default();
            if let Some(n) = n_speeds {
                defaults.wave.n_speeds = n;
            }
            let base = ExperimentConfig::Rom(RomConfig {
                k,
                seed,
                optim: optim.apply(OptimConfig { seed, ..defaults.optim.clone() })?,
                output,
                ..defaults
            });
            match resolve(base, &config)? {
                ExperimentConfig::Rom(c) => harness::run_rom_command(&c),
                _ => unreachable!("overlay keeps the experiment kind"),
            }
        }
        Command::Generate { dims, rank, noise, seed, output } => {
            if dims.len() != 3 {
                return Err(Error::InvalidArgument("--dims takes n1,n2,n3".into()));
            }
            harness::run_generate_command((dims[0], dims[1], dims[2]), rank, noise, seed, &output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}

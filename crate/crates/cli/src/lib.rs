//! Command-line front end for `walrus-ssm`.
//!
//! Settings resolve as built-in defaults, then the `--config` file, then flags.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::Fault;
use config::RunConfig;

/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for failed numerical checks.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "walrus", version, about = "Build, analyse and benchmark frame-derived state space models")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the continuous A and B matrices.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        /// Also write the sampled frame.
        #[arg(long)]
        export_frame: bool,
    },
    /// Eigendecompose A and audit the unit eigenvalues.
    Eigs {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Discretize and write the convolution kernel.
    Kernel {
        #[command(flatten)]
        model: ModelArgs,
        /// Per-sample rate; the continuous system is scaled by 1/theta.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        length: Option<usize>,
        /// Signal to convolve (CSV column or SSMK binary).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Delay reconstruction benchmark.
    Delay(DelayArgs),
    /// Run the invariant checks.
    Verify {
        #[arg(short = 'n', long = "n")]
        n: Option<usize>,
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long)]
        oracle_tol: Option<f64>,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// hippo-legs, hippo-legt, hippo-via-frame or walrus.
    #[arg(long)]
    pub species: Option<String>,
    /// scaled or translated.
    #[arg(long)]
    pub measure: Option<String>,
    /// Order of the Legendre systems.
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub grid_scheme: Option<String>,
    /// haar, db2 or db4.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub coarsest_scale: Option<u32>,
    #[arg(short = 'J', long)]
    pub finest_scale: Option<u32>,
    #[arg(long)]
    pub oversampling: Option<u32>,
    /// periodic or zero-pad.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub no_scaling_functions: bool,
    #[arg(long)]
    pub tol_one: Option<f64>,
    /// zoh or bilinear.
    #[arg(long)]
    pub discretization: Option<String>,
}

#[derive(Debug, Args)]
pub struct DelayArgs {
    /// theta, delay or both.
    #[arg(long)]
    pub sweeps: Option<String>,
    /// Delay used by the theta sweep.
    #[arg(long)]
    pub l0: Option<usize>,
    /// Comma-separated delays for the delay sweep.
    #[arg(long, value_delimiter = ',')]
    pub l0_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub theta_points: Option<usize>,
    #[arg(long)]
    pub delay_theta_min: Option<f64>,
    #[arg(long)]
    pub delay_theta_max: Option<f64>,
    #[arg(long)]
    pub delay_theta_points: Option<usize>,
    /// State dimension shared by both models.
    #[arg(long)]
    pub n_eff: Option<usize>,
    /// Wavelet family of the WaLRUS model.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// "auto" or a number.
    #[arg(long)]
    pub ridge: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// theta or step.
    #[arg(long)]
    pub sweep_mode: Option<String>,
    #[arg(long)]
    pub no_svg: bool,
    /// Signal kind, with a path for csv-file (e.g. `--signal csv-file data.csv`).
    #[arg(long, num_args = 1..=2, value_names = ["KIND", "PATH"])]
    pub signal: Option<Vec<String>>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub sequences: Option<usize>,
    #[arg(long)]
    pub tol_one: Option<f64>,
    #[arg(long)]
    pub discretization: Option<String>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ModelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        set(&mut m.species, self.species);
        set(&mut m.measure, self.measure);
        set(&mut m.n, self.n);
        set(&mut m.grid_points, self.grid_points);
        set(&mut m.grid_scheme, self.grid_scheme);
        let f = &mut cfg.frame;
        set(&mut f.family, self.family);
        set(&mut f.coarsest_scale, self.coarsest_scale);
        set(&mut f.finest_scale, self.finest_scale);
        set(&mut f.oversampling, self.oversampling);
        set(&mut f.boundary, self.boundary);
        if self.no_scaling_functions {
            f.scaling_functions = false;
        }
        set(&mut cfg.spectral.tol_one, self.tol_one);
        set(&mut cfg.spectral.discretization, self.discretization);
    }
}

impl DelayArgs {
    fn apply(self, cfg: &mut RunConfig) -> Result<()> {
        let d = &mut cfg.delay;
        set(&mut d.sweeps, self.sweeps);
        set(&mut d.l0, self.l0);
        set(&mut d.l0_grid, self.l0_grid);
        set(&mut d.theta_min, self.theta_min);
        set(&mut d.theta_max, self.theta_max);
        set(&mut d.theta_points, self.theta_points);
        set(&mut d.delay_theta_min, self.delay_theta_min);
        set(&mut d.delay_theta_max, self.delay_theta_max);
        set(&mut d.delay_theta_points, self.delay_theta_points);
        set(&mut d.n_eff, self.n_eff);
        set(&mut d.family, self.family);
        set(&mut d.grid_points, self.grid_points);
        set(&mut d.ridge, self.ridge);
        set(&mut d.train_fraction, self.train_fraction);
        set(&mut d.sweep_mode, self.sweep_mode);
        if self.no_svg {
            d.svg = false;
        }
        let s = &mut cfg.signal;
        if let Some(mut sig) = self.signal {
            if sig.len() == 2 {
                s.path = Some(PathBuf::from(sig.pop().unwrap()));
            } else if sig[0] == "csv-file" && s.path.is_none() {
                bail!("--signal csv-file needs a path");
            }
            s.kind = sig.pop().unwrap();
        }
        set(&mut s.length, self.length);
        set(&mut s.cutoff, self.cutoff);
        set(&mut s.sequences, self.sequences);
        set(&mut cfg.spectral.tol_one, self.tol_one);
        set(&mut cfg.spectral.discretization, self.discretization);
        Ok(())
    }
}

/// Resolve the configuration: defaults, then file, then flags.
pub fn resolve(cli: &mut Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.run.output_dir, cli.output_dir.take());
    set(&mut cfg.run.seed, cli.seed);
    Ok(cfg)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WALRUS_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("WALRUS_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("WALRUS_THREADS must be a positive integer, got 0");
        }
        // A pool may already exist when called repeatedly in-process; keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn dispatch(mut cli: Cli) -> Result<Outcome> {
    init_threads()?;
    let mut cfg = resolve(&mut cli)?;
    match cli.command {
        Command::Build { model, export_frame } => {
            model.apply(&mut cfg);
            commands::cmd_build(&cfg, export_frame)?;
        }
        Command::Eigs { model } => {
            model.apply(&mut cfg);
            commands::cmd_eigs(&cfg)?;
        }
        Command::Kernel {
            model,
            theta,
            length,
            input,
        } => {
            model.apply(&mut cfg);
            set(&mut cfg.kernel.theta, theta);
            set(&mut cfg.kernel.length, length);
            if input.is_some() {
                cfg.kernel.input = input;
            }
            commands::cmd_kernel(&cfg)?;
        }
        Command::Delay(args) => {
            args.apply(&mut cfg)?;
            commands::cmd_delay(&cfg)?;
        }
        Command::Verify {
            n,
            grid_points,
            oracle_tol,
            inject_fault,
        } => {
            set(&mut cfg.verify.n, n);
            set(&mut cfg.verify.grid_points, grid_points);
            set(&mut cfg.verify.oracle_tol, oracle_tol);
            if !commands::cmd_verify(&cfg, inject_fault)? {
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn exit_code(err: &anyhow::Error) -> i32 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<walrus_ssm::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parse `args` (program name first), run the command and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::ChecksFailed) => {
            eprintln!("error: one or more checks failed");
            EXIT_NUMERICAL
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

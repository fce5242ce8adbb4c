use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinquench::config::RunConfig;
use spinquench::drivers::{self, SpectrumArgs};
use spinquench::{CliError, Result};
use spinquench_core::params::{kinetic_hz_um2, RB87_MASS};

#[derive(Parser)]
#[command(name = "spinquench", version, about = "Spin-1 condensate quench simulator")]
struct Cli {
    /// INI configuration, or a manifest.json to replay
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "SPINQUENCH_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for independent trajectories
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides [seed] rng_seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bogoliubov spectrum table as CSV
    Spectrum {
        #[arg(long)]
        q0_hz: f64,
        #[arg(long, default_value_t = 2.0)]
        q_hz: f64,
        /// Largest wavevector, um^-1
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        n_k: usize,
        /// Write here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// One trajectory with map dumps and populations
    Simulate,
    /// Ensemble over the [sweep] q_f values
    Sweep,
    /// Correlation function of one map dump
    Analyze { dump: PathBuf },
    /// Growth fit of a G(0) time series CSV
    Fit { series: PathBuf },
}

fn load(cli: &Cli) -> Result<(RunConfig, String)> {
    let text = match &cli.config {
        Some(path) => RunConfig::load(path)?.1,
        None => String::new(),
    };
    let text = match cli.seed {
        Some(seed) => RunConfig::with_seed(&text, seed)?,
        None => text,
    };
    Ok((RunConfig::parse(&text)?, text))
}

fn run(cli: &Cli) -> Result<()> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Spectrum {
            q0_hz,
            q_hz,
            k_max,
            n_k,
            output,
        } => {
            let csv = drivers::run_spectrum(&SpectrumArgs {
                q0_hz: *q0_hz,
                q_hz: *q_hz,
                k_max_um: *k_max,
                n_k: *n_k,
                kinetic_hz_um2: kinetic_hz_um2(RB87_MASS),
            })?;
            match output {
                Some(p) => std::fs::write(p, csv).map_err(|e| CliError::io(p.display().to_string(), e))?,
                None => print!("{csv}"),
            }
        }
        Command::Simulate => {
            let (cfg, text) = load(cli)?;
            let m = drivers::run_simulate(&cfg, &text, out, jobs)?;
            eprintln!("wrote {} files to {}", m.outputs.len() + 1, out.display());
        }
        Command::Sweep => {
            let (cfg, text) = load(cli)?;
            let (_, rows) = drivers::run_sweep(&cfg, &text, out, jobs)?;
            print!("{}", drivers::sweep_csv(&rows));
        }
        Command::Analyze { dump } => {
            let (cfg, _) = load(cli)?;
            let s = drivers::run_analyze(&cfg, dump, out)?;
            eprintln!("G(0) = {:.6e}, l_d = {:?} um", s.g0, s.l_d_um);
        }
        Command::Fit { series } => {
            let (cfg, _) = load(cli)?;
            let f = drivers::run_fit(&cfg, Path::new(series), out)?;
            eprintln!("g0_tm = {:.6e}, tau = {:.4} ms", f.g0_tm, f.tau_ms);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hmmsense::config::load_config;
use hmmsense::job::{run_job, write_outputs, Command, JobError};
use hmmsense::PhysicalConstants;

#[derive(Parser)]
#[command(name = "hmmsense", version, about = "Dye / hyperbolic metamaterial strong-coupling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Permittivity of every configured material on the wavelength grid
    Permittivity(Common),
    /// Effective uniaxial permittivity and band type of the EMT layer
    Emt(Common),
    /// ENZ and ENP wavelengths of the EMT layer
    BandEdges(Common),
    /// Reflectance spectrum at the fixed angle
    Reflectivity(Common),
    /// Reflectance over the wavelength x angle grid
    Map(Common),
    /// Reflectivity dips and splitting at the fixed angle
    Dips(Common),
    /// Concentration sweep and sensing curve
    Sweep(Common),
    /// Coupled-mode frequencies and coupling regime
    Modes(Common),
    /// Pole fit of the bare-stack surface resonance
    FitResonance(Common),
    /// Concentration estimate from a measured observable
    Estimate(Common),
}

#[derive(Args)]
struct Common {
    /// Job configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, env = "HMMSENSE_THREADS")]
    threads: Option<usize>,
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Permittivity(c) => (Command::Permittivity, c),
            Sub::Emt(c) => (Command::Emt, c),
            Sub::BandEdges(c) => (Command::BandEdges, c),
            Sub::Reflectivity(c) => (Command::Reflectivity, c),
            Sub::Map(c) => (Command::Map, c),
            Sub::Dips(c) => (Command::Dips, c),
            Sub::Sweep(c) => (Command::Sweep, c),
            Sub::Modes(c) => (Command::Modes, c),
            Sub::FitResonance(c) => (Command::FitResonance, c),
            Sub::Estimate(c) => (Command::Estimate, c),
        }
    }
}

fn run(command: Command, args: Common) -> Result<(), JobError> {
    let start = Instant::now();
    let cfg = load_config(&args.config)?;
    let base_dir = args.config.parent().unwrap_or(Path::new("."));
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| JobError::Setup(e.to_string()))?;
    let k = PhysicalConstants::CODATA2018;
    let out = pool.install(|| run_job(&cfg, base_dir, command, &k))?;
    let dir = args.out.unwrap_or_else(|| cfg.output.dir.clone());
    write_outputs(&dir, command, &cfg, &out, pool.current_num_threads(), start.elapsed())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&out.result).expect("json serializes")
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hmmsense {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

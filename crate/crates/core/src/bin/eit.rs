use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use eit_lineshape::config::{load_config, Mode};
use eit_lineshape::pipeline::run_command;
use eit_lineshape::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Spectrum,
    Sweep,
    Holeburn,
    Analyze,
}

/// EIT lineshape runs driven by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "eit", version)]
struct Cli {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Root for run directories; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(cli: &Cli) -> Result<PathBuf, Error> {
    let cfg = load_config(&cli.config)?;
    let ok = matches!(
        (cli.command, cfg.mode()),
        (Command::Spectrum, Mode::Spectrum)
            | (Command::Sweep, Mode::SweepWidth | Mode::SweepVisibility)
            | (Command::Holeburn, Mode::Holeburn)
            | (Command::Analyze, Mode::Analyze)
    );
    if !ok {
        return Err(Error::Validation {
            field: "mode".into(),
            message: format!(
                "`{}` does not match command {:?}",
                cfg.mode().name(),
                cli.command
            ),
        });
    }
    eprint!("{}", cfg.echo());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    let out = pool.install(|| run_command(&cfg, cli.out.as_deref()))?;
    Ok(out.dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be >= 1");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

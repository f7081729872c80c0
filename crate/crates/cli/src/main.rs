use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jhbl_cli::commands::{compare, recover, simulate};
use jhbl_cli::config::{parse_overrides, Modality, RunConfig};
use jhbl_cli::io::{read_text, write_text};
use jhbl_cli::CliError;

#[derive(Parser)]
#[command(name = "jhbl", version, about = "Joint hierarchical Bayesian recovery of image sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default configuration file.
    Init {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "fourier")]
        modality: ModalityArg,
    },
    /// Render the phantom and write ground truth and noisy data.
    Simulate(RunArgs),
    /// Recover the sequence from simulated data (`--mode separate|joint`).
    Recover(RunArgs),
    /// Tabulate relative log-errors of the available recoveries.
    Compare(RunArgs),
    /// simulate, recover in both modes, compare.
    Run(RunArgs),
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModalityArg {
    Fourier,
    Blur,
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// `--key.path value` overrides of config entries.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::from_json(&read_text(&args.config)?)?;
    let cfg = cfg.with_overrides(&parse_overrides(&args.overrides)?)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Init { path, modality } => {
            let m = match modality {
                ModalityArg::Fourier => Modality::Fourier,
                ModalityArg::Blur => Modality::Blur,
            };
            write_text(&path, &(RunConfig::default_for(m).to_json() + "\n"))?;
            println!("wrote {}", path.display());
        }
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let rec = simulate(&cfg)?;
            if !rec.clipped_bands.is_empty() {
                eprintln!("warning: removed bands clipped to the grid for frames {:?}", rec.clipped_bands);
            }
            println!("simulated {} frames into {}", cfg.frames(), cfg.output_dir.display());
        }
        Command::Recover(args) => {
            let cfg = load(&args)?;
            let s = recover(&cfg)?;
            println!(
                "{:?}: {} iterations, converged={}, {:.2}s",
                s.mode, s.iterations, s.converged, s.wall_time_s
            );
        }
        Command::Compare(args) => {
            let cfg = load(&args)?;
            print!("{}", compare(&cfg)?.to_csv());
        }
        Command::Run(args) => {
            let cfg = load(&args)?;
            simulate(&cfg)?;
            for mode in [jhbl::Mode::Separate, jhbl::Mode::Joint] {
                let mut c = cfg.clone();
                c.solver.mode = mode;
                recover(&c)?;
            }
            print!("{}", compare(&cfg)?.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `covkit`: validate, dilate and test extremality of covariant kernels, CP maps,
//! observables and instruments described in JSON spec files.

mod commands;
mod format;
mod report;

use clap::{Parser, Subcommand};
use commands::CliError;
use covkit::Tolerances;
use format::SpecFile;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Exit status: 0 ok, 1 validation failure, 2 parse or usage error, 3 numeric tolerance failure.
#[derive(Parser, Debug)]
#[command(name = "covkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// PSD tolerance on eigenvalues.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_psd_eig: f64,

    /// Rank cutoff relative to the largest singular value.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rank_rel: f64,

    /// Frobenius tolerance for unitarity residuals.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_unitary_fro: f64,

    /// Frobenius tolerance for reconstruction residuals.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_recon_fro: f64,

    /// Seed for randomized decompositions and sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Also write the output document to this path.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,

    /// Print wall time to stderr (never part of the report).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the defining identities of a spec file.
    Validate { file: PathBuf },
    /// Kolmogorov, KSGNS or Naimark dilation, by kind.
    Dilate { file: PathBuf },
    /// Extremality verdict with witness and split.
    Extremal { file: PathBuf },
    /// Kraus operators of a CP map or instrument.
    Kraus { file: PathBuf },
    /// Build the phase-space instrument from a phase_space file; prints an instrument file.
    PhaseSpace { file: PathBuf },
    /// Draw outcomes; prints one JSON record per line.
    Sample {
        file: PathBuf,
        /// JSON matrix (row-major, entries [re, im]) holding the input state.
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<SpecFile, CliError> {
    SpecFile::parse(&read(path)?).map_err(|e| CliError::Parse(path.display().to_string(), e))
}

fn load_state(path: &Path) -> Result<covkit::CMatrix, CliError> {
    let text = read(path)?;
    let m: format::Mat = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(
            path.display().to_string(),
            format::ParseError {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
        )
    })?;
    Ok(format::mat(&m)?)
}

/// Returns the output text and whether every check passed.
fn run(cli: &Cli, tol: &Tolerances) -> Result<(String, bool), CliError> {
    let report = match &cli.command {
        Command::Validate { file } => commands::validate(&load(file)?, tol)?,
        Command::Dilate { file } => commands::dilate(&load(file)?, tol)?,
        Command::Extremal { file } => commands::extremal(&load(file)?, cli.seed, tol)?,
        Command::Kraus { file } => commands::kraus(&load(file)?, tol)?,
        Command::PhaseSpace { file } => {
            return Ok((commands::phase_space_file(&load(file)?, tol)?.to_text(), true));
        }
        Command::Sample { file, state, n } => {
            let records = commands::sample(&load(file)?, &load_state(state)?, *n, cli.seed, tol)?;
            let mut out = String::new();
            for r in records {
                out.push_str(&serde_json::to_string(&r).expect("records serialize"));
                out.push('\n');
            }
            return Ok((out, true));
        }
    };
    Ok((report.to_text(), report.ok))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tol = Tolerances {
        psd_eig: cli.tol_psd_eig,
        rank_rel: cli.tol_rank_rel,
        unitary_fro: cli.tol_unitary_fro,
        recon_fro: cli.tol_recon_fro,
    };
    if let Err(e) = tol.validate() {
        eprintln!("covkit: bad tolerances: {e}");
        return ExitCode::from(2);
    }
    let start = Instant::now();
    let result = run(&cli, &tol);
    if cli.timing {
        eprintln!("covkit: wall time {:.3} s", start.elapsed().as_secs_f64());
    }
    match result {
        Ok((text, ok)) => {
            print!("{text}");
            if let Some(path) = &cli.json_out {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("covkit: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("covkit: validation failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("covkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

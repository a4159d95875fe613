use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracdn::monotonicity_check;
use fracdn_cli::error::{EXIT_CONFIG, EXIT_FLAGGED, EXIT_OK};
use fracdn_cli::store::output_root;
use fracdn_cli::records::summary_text;
use fracdn_cli::{run_file, CliError, ExportFormat, ResultsStore, RunOutcome};

#[derive(Parser)]
#[command(name = "fracdn", version, about = "Fractional p-Laplace exterior data and diagonal reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run config; identical configs are skipped unless forced.
    Run {
        config: PathBuf,
        #[arg(long)]
        force: bool,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write a stored run's tables or summary into `<run>/export/`.
    Export {
        run_id: String,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long, default_value = "runs")]
        output_dir: PathBuf,
    },
    /// Sample the two-sided monotonicity inequality.
    VerifyInequalities {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            config,
            force,
            threads,
        } => {
            if let Some(k) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| CliError::Config {
                        key: "--threads".into(),
                        reason: e.to_string(),
                    })?;
            }
            let outcome = run_file(&config, force)?;
            match &outcome {
                RunOutcome::Completed { summary, .. } => println!("{}", summary_text(summary)),
                RunOutcome::Skipped { .. } => println!("identical run already stored (use --force to recompute)"),
            }
            println!("run {} -> {}", outcome.run_id(), outcome.dir().display());
            Ok(outcome.exit_code())
        }
        Command::Export {
            run_id,
            format,
            output_dir,
        } => {
            let store = ResultsStore::new(output_root(&output_dir));
            for path in store.export(&run_id, format)? {
                println!("{}", path.display());
            }
            Ok(EXIT_OK)
        }
        Command::VerifyInequalities { p, samples, seed } => {
            let report = monotonicity_check(p, samples, seed)?;
            println!(
                "p = {p}: lower infimum {:.6e}, upper supremum {:.6e}, scale deviation {:.2e}, non-finite {}",
                report.lower_infimum, report.upper_supremum, report.max_scale_deviation, report.non_finite
            );
            let holds = report.holds();
            println!("{}", if holds { "holds" } else { "VIOLATED" });
            Ok(if holds { EXIT_OK } else { EXIT_FLAGGED })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}

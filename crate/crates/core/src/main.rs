use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use polydiff::runner;

/// Coefficient expansions of affine-parametric diffusion problems:
/// experiment runner and analysis tools.
#[derive(Parser)]
#[command(name = "polydiff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment described by a JSON config file.
    Run {
        /// Path to the run configuration (JSON).
        config: PathBuf,
    },
    /// Run the full reproduction suite and emit a consolidated report.
    ReproduceTables {
        /// Output directory for the per-run artifacts and the report.
        #[arg(long, default_value = "tables")]
        out: PathBuf,
        /// Retained set size per run (the reference comparison uses 8192).
        #[arg(long, default_value_t = 1 << 13)]
        n_target: usize,
    },
    /// Cross-check both expansion paths against closed-form and quadrature
    /// references.
    OracleCheck,
    /// Recompute rearrangement and decay rates from a coefficient dump.
    Analyze {
        /// Path to a `(index_json, v_norm)` CSV.
        coeff_csv: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), polydiff::Error> {
    match cli.command {
        Command::Run { config } => {
            let config = runner::RunConfig::from_json_file(&config)?;
            let manifest = runner::run(&config)?;
            println!(
                "run complete: {} coefficients ({} retained), {} dofs, {} ms",
                manifest.coefficient_count,
                manifest.member_count,
                manifest.dof_count,
                manifest.wall_ms
            );
            println!("artifacts in {}", config.output_dir.display());
            Ok(())
        }
        Command::ReproduceTables { out, n_target } => {
            let report = runner::reproduce_tables(&out, n_target)?;
            println!(
                "{:<28} {:>3} {:>8} {:>8} {:>8}",
                "run", "i", "ours", "ref", "dev"
            );
            for row in &report.rows {
                println!(
                    "{:<28} {:>3} {:>8.3} {:>8} {:>8}",
                    row.run,
                    row.i,
                    row.s_ours,
                    row.s_reference
                        .map_or(String::from("-"), |v| format!("{v:.3}")),
                    row.deviation
                        .map_or(String::from("-"), |v| format!("{v:+.3}")),
                );
            }
            for failure in &report.failures {
                eprintln!("failed: {failure}");
            }
            println!("report written to {}", out.join("report.csv").display());
            if report.failures.is_empty() {
                Ok(())
            } else {
                Err(polydiff::Error::Solver(format!(
                    "{} of the reproduction runs failed",
                    report.failures.len()
                )))
            }
        }
        Command::OracleCheck => {
            let report = runner::oracle_check()?;
            println!(
                "constant-field closed form : max rel deviation {:.3e}",
                report.constant_field_max_rel
            );
            println!(
                "legendre vs quadrature     : max rel deviation {:.3e}",
                report.legendre_max_rel
            );
            println!(
                "parseval cross-check       : rel defect        {:.3e}",
                report.parseval_rel
            );
            println!(
                "degenerate field           : max spurious norm {:.3e}",
                report.degenerate_max
            );
            println!("verdict: {}", if report.pass { "PASS" } else { "FAIL" });
            if report.pass {
                Ok(())
            } else {
                Err(polydiff::Error::Solver(
                    "oracle check tolerances exceeded".into(),
                ))
            }
        }
        Command::Analyze { coeff_csv, out } => {
            let summary = runner::analyze(&coeff_csv, &out)?;
            println!("{} coefficients analyzed", summary.count);
            for (i, s) in summary.rates.iter().enumerate() {
                println!("s_{} = {s:.4}", i + 1);
            }
            Ok(())
        }
    }
}

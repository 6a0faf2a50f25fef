use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wyner_cli::commands::{self, EvalArgs, GenDataArgs, PlaneArgs, SolveArgs, SweepArgs};
use wyner_cli::CliError;

#[derive(Parser)]
#[command(name = "wyner-mv", version, about = "Wyner common information solvers for multi-view data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the circulant two-view dataset.
    GenData(GenDataArgs),
    /// Run one solver on a joint distribution.
    Solve(SolveArgs),
    /// Run a solver over a multiplier grid, trials and |Z| values.
    Sweep(SweepArgs),
    /// Clustering accuracy of an encoder on labeled samples.
    EvalClustering(EvalArgs),
    /// Merge run records into an information-plane CSV.
    Plane(PlaneArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => print!("{}", commands::gen_data(&a)?),
        Command::Solve(a) => {
            let r = commands::solve(&a)?;
            let m = &r.metrics;
            println!(
                "{} converged={} iterations={} objective={:.6} I(X1;X2|Z)={:.6} bits I(Z;X1,X2)={:.6} bits",
                r.solver(),
                r.converged,
                r.iterations,
                m.objective,
                m.residual_cmi,
                m.joint_mi
            );
        }
        Command::Sweep(a) => {
            let s = commands::sweep(&a)?;
            let converged = s.records.iter().filter(|(_, r)| r.converged).count();
            println!(
                "ran {} runs, reused {}, {} of {} converged; plane at {}",
                s.ran,
                s.skipped,
                converged,
                s.records.len(),
                s.plane_csv.display()
            );
        }
        Command::EvalClustering(a) => {
            let r = commands::eval_clustering(&a)?;
            println!("accuracy={:.4}", r.accuracy);
            if let Some(c) = r.residual_cmi {
                println!("I(X1;X2|Z)={c:.6} bits");
            }
        }
        Command::Plane(a) => {
            let n = commands::plane(&a)?;
            println!("wrote {n} rows to {}", a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

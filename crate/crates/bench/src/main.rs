use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hadamard_pg::analysis::{AuditReport, CheckStatus};
use hadamard_pg_bench::{
    audit_trace_file, run_mab_experiment, run_mdp_experiment, BenchError, Format as OutFormat,
    MabCompareConfig, MdpRunConfig,
};

/// Policy-gradient experiments under the Hadamard parameterization.
#[derive(Parser)]
#[command(name = "hpg", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the gradient ascent on one MDP, record a trace and audit it
    Run(RunArgs),
    /// Compare Hadamard PG with softmax PG/NPG on random bandit instances
    Mab(MabArgs),
    /// Re-audit a previously recorded JSON trace file
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutFormat {
    fn from(f: Format) -> OutFormat {
        match f {
            Format::Csv => OutFormat::Csv,
            Format::Json => OutFormat::Json,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Seed for the random instance
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of states of the generated MDP
    #[arg(long, default_value_t = 4)]
    states: usize,
    /// Number of actions of the generated MDP
    #[arg(long, default_value_t = 3)]
    actions: usize,
    /// Discount factor of the generated MDP
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Step-size governor; the step size is (1-gamma)^2 * kappa / 4
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Iteration budget
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Output prefix; writes <out>.trace.{json,csv} and <out>.audit.json
    #[arg(long)]
    out: PathBuf,
    /// Trace file format (the audit report is always JSON)
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Load this MDP JSON file instead of generating one
    #[arg(long)]
    mdp_file: Option<PathBuf>,
}

#[derive(Args)]
struct MabArgs {
    /// Base seed; instance i uses seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of arms K
    #[arg(long, default_value_t = 2)]
    arms: usize,
    /// Raw step size for all three methods
    #[arg(long, default_value_t = 0.4)]
    eta: f64,
    /// Iteration budget
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Number of random instances
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Output file for the aggregate curves
    #[arg(long)]
    out: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct AuditArgs {
    /// JSON trace file produced by `hpg run`
    trace: PathBuf,
    /// Where to write the audit report
    #[arg(long)]
    out: PathBuf,
}

fn print_report(report: &AuditReport) {
    for check in &report.checks {
        let status = match check.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skip",
        };
        match (check.worst_violation, check.at_iteration) {
            (Some(v), Some(k)) => {
                println!("{status}  {} (worst margin {v:.3e} at k={k})", check.name)
            }
            _ => println!("{status}  {}", check.name),
        }
    }
}

fn real_main(cli: Cli) -> Result<bool, BenchError> {
    match cli.cmd {
        Cmd::Run(args) => {
            let cfg = MdpRunConfig {
                seed: args.seed,
                states: args.states,
                actions: args.actions,
                gamma: args.gamma,
                kappa: args.kappa,
                iters: args.iters,
                out: args.out,
                format: args.format.into(),
                mdp_file: args.mdp_file,
            };
            let output = run_mdp_experiment(&cfg)?;
            println!("trace: {}", output.trace_path.display());
            println!("audit: {}", output.audit_path.display());
            print_report(&output.report);
            Ok(output.report.all_passed())
        }
        Cmd::Mab(args) => {
            let cfg = MabCompareConfig {
                seed: args.seed,
                arms: args.arms,
                eta: args.eta,
                iters: args.iters,
                instances: args.instances,
            };
            run_mab_experiment(&cfg, &args.out, args.format.into())?;
            println!("curves: {}", args.out.display());
            Ok(true)
        }
        Cmd::Audit(args) => {
            let report = audit_trace_file(&args.trace, &args.out)?;
            println!("audit: {}", args.out.display());
            print_report(&report);
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more audit checks failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

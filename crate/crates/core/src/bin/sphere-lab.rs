use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sphere_lab::experiment::{
    audit_run, compare_runs, load_spec, resolve, run_experiment, ExperimentKind, Format, RunError, RunOptions,
    EXIT_CHECK_FAILED, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "sphere-lab", version, about = "Reproducible sphere-diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Exit with status 4 if any acceptance check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble moments of tagged components.
    Simulate(RunArgs),
    /// Tagged component coupled to its Ornstein-Uhlenbeck limit.
    Couple(RunArgs),
    /// Independence of several tagged components.
    Chaos(RunArgs),
    /// Kac jump process against the diffusion.
    Kac(RunArgs),
    /// Momentum-conserving particle model.
    Momentum(RunArgs),
    /// One-coordinate marginal of the uniform sphere law.
    Marginal(RunArgs),
    /// Quadratic covariation of the martingale part.
    Covariation(RunArgs),
    /// Differences between two runs of the same kind.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Also write the report here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a run's checks from its stored tables.
    Audit { run: PathBuf },
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<i32, RunError> {
    let path = args.config.ok_or_else(|| {
        RunError::Spec(sphere_lab::experiment::Diagnostic {
            path: "<none>".into(),
            line: None,
            message: "no configuration file given (--config)".into(),
        })
    })?;
    let (spec, text) = load_spec(&path)?;
    let opts = RunOptions {
        seed: args.seed,
        workers: args.workers,
        out: args.out,
        format: args.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
    };
    let resolved = resolve(kind, spec, &opts, &text, &path.display().to_string())?;
    let outcome = run_experiment(&resolved)?;
    for c in &outcome.summary.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if outcome.manifest.partial {
        eprintln!("budget exceeded: outputs are partial");
    }
    println!("wrote {}", outcome.dir.display());
    Ok(outcome.exit_code(args.check))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run(ExperimentKind::Simulate, a),
        Command::Couple(a) => run(ExperimentKind::Couple, a),
        Command::Chaos(a) => run(ExperimentKind::Chaos, a),
        Command::Kac(a) => run(ExperimentKind::Kac, a),
        Command::Momentum(a) => run(ExperimentKind::Momentum, a),
        Command::Marginal(a) => run(ExperimentKind::Marginal, a),
        Command::Covariation(a) => run(ExperimentKind::Covariation, a),
        Command::Compare { a, b, out } => compare_runs(&a, &b).and_then(|r| {
            let text = serde_json::to_string_pretty(&r)?;
            println!("{text}");
            if let Some(out) = out {
                std::fs::write(out, text + "\n")?;
            }
            Ok(EXIT_OK)
        }),
        Command::Audit { run } => audit_run(&run).map(|r| {
            for (s, c) in r.stored.iter().zip(&r.recomputed) {
                let same = if s == c { "same" } else { "DIFFERS" };
                println!("{} {}: {same}", c.name, if c.pass { "PASS" } else { "FAIL" });
            }
            if r.consistent() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

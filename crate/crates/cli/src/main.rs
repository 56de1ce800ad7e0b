use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reprolift::experiments::{self, ExperimentConfig, ExperimentReport, Mode, Model};
use reprolift::Error;

#[derive(Parser)]
#[command(name = "reprolift", version, about = "Reprogramming and lifting experiments on small domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive reprogramming identities, uniformity and bad probability.
    VerifyAlgebra(Common),
    /// Residual norms of the signed state decomposition.
    VerifyDecomposition(Common),
    /// Lifting inequalities for the adversary battery.
    VerifyLifting(Common),
    /// Closed-form bound table as CSV.
    BoundTable {
        /// Game ids to include; all registered games by default.
        #[arg(long, value_delimiter = ',')]
        game: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One seeded simulator run as JSON lines.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Index into the adversary battery.
        #[arg(long, default_value_t = 0)]
        adversary: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    MonteCarlo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Classical,
    Quantum,
    Interactive,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long)]
    game: Option<String>,
    #[arg(long, value_enum, default_value = "quantum")]
    model: ModelArg,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a seeded simulator trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000_000)]
    ceiling: u64,
    #[arg(long, hide = true)]
    mutate: bool,
}

impl Common {
    fn config(&self, experiment: &str) -> ExperimentConfig {
        ExperimentConfig {
            experiment: experiment.into(),
            n: self.n,
            q: self.q,
            k: self.k,
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Exhaustive => Mode::Exhaustive,
                ModeArg::MonteCarlo => Mode::MonteCarlo,
            },
            trials: self.trials,
            game: self.game.clone(),
            model: match self.model {
                ModelArg::Classical => Model::Classical,
                ModelArg::Quantum => Model::Quantum,
                ModelArg::Interactive => Model::Interactive,
            },
            ceiling: self.ceiling,
            mutate: self.mutate,
        }
    }
}

fn write(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn report(
    common: &Common,
    name: &str,
    run: fn(&ExperimentConfig) -> reprolift::Result<ExperimentReport>,
) -> Result<bool, Error> {
    let cfg = common.config(name);
    let r = run(&cfg)?;
    write(common.out.as_ref(), &r.to_json()?)?;
    if let Some(path) = &common.trace {
        std::fs::write(path, experiments::trace(&cfg, 0)?.jsonl)?;
    }
    eprintln!("{name}: {} of {} instances pass", r.aggregate.passed, r.aggregate.instances);
    Ok(r.pass)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::VerifyAlgebra(c) => report(&c, "verify-algebra", experiments::verify_algebra),
        Command::VerifyDecomposition(c) => report(&c, "verify-decomposition", experiments::verify_decomposition),
        Command::VerifyLifting(c) => report(&c, "verify-lifting", experiments::verify_lifting),
        Command::BoundTable { game, out } => {
            let games = (!game.is_empty()).then_some(game.as_slice());
            write(out.as_ref(), experiments::bound_table(games)?.trim_end())?;
            Ok(true)
        }
        Command::Trace { common, adversary } => {
            let t = experiments::trace(&common.config("trace"), adversary)?;
            write(common.out.as_ref(), t.jsonl.trim_end())?;
            eprintln!("trace: {} choice {}", t.adversary, serde_json::to_string(&t.choice)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

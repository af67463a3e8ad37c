use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand, ValueEnum};
use simrenew::scenario::{self, exit, Outcome, RunError, RunOptions, Scenario, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "simrenew",
    version,
    about = "Simultaneous renewal times of two Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; 0 picks the number of cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Where reports are written; defaults to the scenario's output dir, then `.`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// `csv` also writes plot-ready tables next to the JSON report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(ClapSubcommand, Debug, Clone, Copy)]
enum Command {
    /// Check the scenario: stochastic rows, initial laws, parameter domains.
    Validate,
    /// Monte Carlo estimate of E[T] and its tail.
    Simulate,
    /// Exact laws of the hitting times and of T by propagation.
    Exact,
    /// Empirical renewal-tail surface and regularity constant.
    ConditionCheck,
    /// Upper bound on E[T] with Monte Carlo and exact cross-checks.
    Bound,
    /// Compare the first- and second-moment birth-death bounds.
    Compare,
    /// Birth-death example with both down-probabilities 0.75; uses the
    /// built-in scenario unless --config is given.
    #[command(name = "reproduce-sec3")]
    ReproduceSec3,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Validate => Subcommand::Validate,
            Command::Simulate => Subcommand::Simulate,
            Command::Exact => Subcommand::Exact,
            Command::ConditionCheck => Subcommand::ConditionCheck,
            Command::Bound => Subcommand::Bound,
            Command::Compare => Subcommand::Compare,
            Command::ReproduceSec3 => Subcommand::ReproduceBirthDeath,
        }
    }
}

fn load(cli: &Cli) -> Result<Scenario, RunError> {
    match (&cli.config, cli.command) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
            Scenario::from_json(&text)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
        }
        (None, Command::ReproduceSec3) => Ok(Scenario::birth_death_example()),
        (None, _) => Err(RunError::Config("--config is required".into())),
    }
}

fn write_outputs(
    dir: &Path,
    stem: &str,
    outcome: &Outcome,
    format: Format,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    text.push('\n');
    fs::write(&json, text)?;
    written.push(json);
    if format == Format::Csv {
        for t in &outcome.tables {
            let path = dir.join(format!("{stem}-{}.csv", t.name));
            fs::write(&path, t.to_csv())?;
            written.push(path);
        }
    }
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sub = Subcommand::from(cli.command);
    let sc = match load(&cli) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let opts = RunOptions {
        workers: cli.workers,
        seed: cli.seed,
    };
    let outcome = match scenario::run(sub, &sc, &opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    for d in &outcome.diagnostics {
        eprintln!("{}: {d}", sub.name());
    }
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| sc.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = format!("{}-{}", sc.name, sub.name());
    match write_outputs(&dir, &stem, &outcome, cli.format) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write reports to {}: {e}", dir.display());
            return ExitCode::from(exit::CONFIG as u8);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

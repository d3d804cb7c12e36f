mod config;
mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use edgecheck::contract::{detection_probability, is_honesty_dominant, payoff_matrix, required_intervals, CostModel};
use edgecheck::simnet::{rep_seed, run_scenario, run_threat, ScenarioReport, ThreatId, ThreatRow};

use config::SuiteConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Invariant(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Aligned text.
    Text,
    /// One JSON record per line.
    Jsonl,
}

#[derive(Debug, Parser)]
#[command(name = "edgecheck", version, about = "Scenario simulator for verified outsourced computation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario from a TOML file.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Repetitions; each one after the first uses a derived seed.
        #[arg(long, default_value_t = 1)]
        reps: u32,
    },
    /// Run every threat preset repeatedly and tabulate detection.
    ThreatMatrix {
        /// Suite file with `seed`, `reps`, `threats` and `honest_control`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u32>,
    },
    /// Payoff matrix of one worker and whether honesty dominates.
    #[command(allow_negative_numbers = true)]
    Incentives {
        /// Reward per input.
        r: f64,
        /// Cost of computing honestly.
        c_h: f64,
        /// Cost of the cheap answer.
        c_d: f64,
        /// Chance that the cheap answer is right.
        q: f64,
        /// Fee paid by a convicted worker.
        f: f64,
        /// Bounty paid to the party that exposed it.
        b: f64,
    },
    /// Detection probability over a grid of cheat rates and interval counts.
    SamplingTable {
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.2, 0.5])]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 5, 10, 22, 44, 100])]
        intervals: Vec<u32>,
    },
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String, CliError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).map_err(|e| CliError::Config(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn check_report(r: &ScenarioReport) -> Result<(), CliError> {
    let mut broken = Vec::new();
    if !r.ledger.conserved {
        broken.push("currency not conserved");
    }
    if r.honest_party_fined {
        broken.push("honest party fined");
    }
    if r.honest_party_convicted {
        broken.push("honest party convicted");
    }
    if r.truncated {
        broken.push("run hit max_ticks");
    }
    if broken.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("{} (seed {}): {}", r.scenario, r.seed, broken.join(", "))))
    }
}

fn cmd_run(cli: &Cli, config: &Path, seed: Option<u64>, reps: u32) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Config("reps must be positive".into()));
    }
    let mut sc = config::load_scenario(config)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let base = sc.seed;
    let mut reports = Vec::new();
    for rep in 0..reps {
        let mut this = sc.clone();
        if rep > 0 {
            this.seed = rep_seed(base, sc.threat, rep);
        }
        reports.push(run_scenario(&this).map_err(|e| CliError::Config(e.to_string()))?);
    }
    let text = match cli.format {
        Format::Jsonl => jsonl(&reports)?,
        Format::Text => reports.iter().map(render::report).collect::<Vec<_>>().join("\n"),
    };
    emit(&cli.out, &text)?;
    reports.iter().try_for_each(check_report)
}

fn cmd_threat_matrix(cli: &Cli, config: &Option<PathBuf>, seed: Option<u64>, reps: Option<u32>) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(path) => config::load_suite(path)?,
        None => SuiteConfig::default(),
    };
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.reps = reps.unwrap_or(cfg.reps);
    cfg.validate()?;
    let threats = cfg.honest_control.then_some(ThreatId::Honest).into_iter().chain(cfg.threats.iter().copied());
    let rows: Vec<ThreatRow> = threats
        .map(|t| run_threat(cfg.seed, t, cfg.reps).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let text = match cli.format {
        Format::Jsonl => jsonl(&rows)?,
        Format::Text => render::threat_table(&rows),
    };
    emit(&cli.out, &text)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.threat.label()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("rows failed: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct IncentivesRecord {
    dd: f64,
    d_dishonest: f64,
    dishonest_d: f64,
    dishonest_dishonest: f64,
    honesty_dominant: bool,
}

fn cmd_incentives(cli: &Cli, r: f64, c_h: f64, c_d: f64, q: f64, f: f64, b: f64) -> Result<(), CliError> {
    for (name, v) in [("r", r), ("f", f), ("b", b)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("{name} must be a non-negative number, got {v}")));
        }
    }
    let cost = CostModel { honest_cost: c_h, dishonest_cost: c_d, q };
    cost.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let m = payoff_matrix(r, &cost, f, b);
    let dominant = is_honesty_dominant(&m);
    let text = match cli.format {
        Format::Jsonl => jsonl([IncentivesRecord {
            dd: m.dd,
            d_dishonest: m.d_dishonest,
            dishonest_d: m.dishonest_d,
            dishonest_dishonest: m.dishonest_dishonest,
            honesty_dominant: dominant,
        }])?,
        Format::Text => render::payoff(&m, dominant),
    };
    emit(&cli.out, &text)
}

#[derive(Serialize)]
struct SamplingRecord {
    cheat_rate: f64,
    intervals: u32,
    detection_probability: f64,
}

fn cmd_sampling_table(cli: &Cli, rates: &[f64], intervals: &[u32]) -> Result<(), CliError> {
    let p = |c: f64, i: u32| detection_probability(c, i).map_err(|e| CliError::Config(e.to_string()));
    let mut records = Vec::new();
    for &c in rates {
        for &i in intervals {
            records.push(SamplingRecord { cheat_rate: c, intervals: i, detection_probability: p(c, i)? });
        }
    }
    let text = match cli.format {
        Format::Jsonl => jsonl(&records)?,
        Format::Text => render::sampling_table(
            rates,
            intervals,
            |c, i| {
                records
                    .iter()
                    .find(|r| r.cheat_rate == c && r.intervals == i)
                    .map_or_else(String::new, |r| format!("{:.4}", r.detection_probability))
            },
            |c| required_intervals(c, 0.99).map_or_else(|_| "-".into(), |i| i.to_string()),
        ),
    };
    emit(&cli.out, &text)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config, seed, reps } => cmd_run(cli, config, *seed, *reps),
        Command::ThreatMatrix { config, seed, reps } => cmd_threat_matrix(cli, config, *seed, *reps),
        Command::Incentives { r, c_h, c_d, q, f, b } => cmd_incentives(cli, *r, *c_h, *c_d, *q, *f, *b),
        Command::SamplingTable { rates, intervals } => cmd_sampling_table(cli, rates, intervals),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

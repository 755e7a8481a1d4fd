//! `seqlab`: batch runs of the orbit generators, closure statistics and
//! residue solvers with JSON or CSV output.
//!
//! Exit status: 0 success, 1 usage, 2 consistency failure, 3 precision.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqlab_core::Error;

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(name = "seqlab", version, about = "Orbit, box-dimension and residue-covering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Opts,
}

/// Every flag is a raw string here; parsing happens after the config-file
/// overlay so both sources share one parser.
#[derive(Debug, clap::Args)]
struct Opts {
    /// Orbit spec, e.g. `rotation:sqrt2`, `doubling:1/7`,
    /// `combined:poly=0,sqrt2;d=champernowne`. Give twice for `independence`.
    #[arg(long, global = true)]
    spec: Vec<String>,
    /// Number of orbit points.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Fractional bit budget (default: derived; SEQLAB_BITS overrides the derivation).
    #[arg(long, global = true)]
    bits: Option<String>,
    /// Depth range `A..B`.
    #[arg(long, global = true)]
    depths: Option<String>,
    /// Regression window `A..B`.
    #[arg(long, global = true)]
    window: Option<String>,
    /// Cell depth shown by `orbit`.
    #[arg(long, global = true)]
    depth: Option<String>,
    /// Decimal digits shown by `orbit`.
    #[arg(long, global = true)]
    digits: Option<String>,
    /// Also print the raw mantissa in hex.
    #[arg(long, global = true)]
    hex: bool,
    /// Modulus, or an inclusive range `A..B` for `sweep`.
    #[arg(long, global = true)]
    m: Option<String>,
    /// Coefficient; a comma list of integers or `m-K` for `sweep`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<String>,
    /// Target residue.
    #[arg(long, global = true)]
    t: Option<String>,
    /// Independence tolerance on the margin.
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// First index n of the orbit (default depends on the family).
    #[arg(long, global = true)]
    start: Option<String>,
    /// Seed for random strategies that do not carry their own.
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// `key=value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Write here instead of standard output.
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate orbit points.
    Orbit,
    /// Box counts and a dimension estimate.
    Boxdim,
    /// Star discrepancy of an orbit prefix.
    Discrepancy,
    /// Cell entropy per depth.
    Entropy,
    /// Coverage, solver or reduction chain for 2^n + cn mod m.
    Residue {
        #[arg(value_enum)]
        action: ResidueAction,
    },
    /// Compare dim of x_n + y_n with min(1, dim X + dim Y).
    Independence,
    /// Coverage over a range of odd moduli.
    Sweep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ResidueAction {
    Cover,
    Solve,
    Chain,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Orbit => "orbit",
            Command::Boxdim => "boxdim",
            Command::Discrepancy => "discrepancy",
            Command::Entropy => "entropy",
            Command::Residue {
                action: ResidueAction::Cover,
            } => "residue cover",
            Command::Residue {
                action: ResidueAction::Solve,
            } => "residue solve",
            Command::Residue {
                action: ResidueAction::Chain,
            } => "residue chain",
            Command::Independence => "independence",
            Command::Sweep => "sweep",
        }
    }
}

fn flag_map(opts: &Opts) -> BTreeMap<String, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut put = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), vec![v.clone()]);
        }
    };
    put("n", &opts.n);
    put("bits", &opts.bits);
    put("depths", &opts.depths);
    put("window", &opts.window);
    put("depth", &opts.depth);
    put("digits", &opts.digits);
    put("m", &opts.m);
    put("c", &opts.c);
    put("t", &opts.t);
    put("epsilon", &opts.epsilon);
    put("start", &opts.start);
    put("seed", &opts.seed);
    put("format", &opts.format.map(|f| f.to_string()));
    put("out", &opts.out);
    if opts.hex {
        map.insert("hex".into(), vec!["true".into()]);
    }
    if !opts.spec.is_empty() {
        map.insert("spec".into(), opts.spec.clone());
    }
    map
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut settings = Settings::new(flag_map(&cli.opts));
    if let Some(path) = &cli.opts.config {
        settings.load_file(path)?;
    }
    let format: Format = settings.parsed_or("format", "json")?;
    let out = settings.string("out", None);
    let name = cli.command.name();
    let outcome = match cli.command {
        Command::Orbit => commands::orbit(&mut settings),
        Command::Boxdim => commands::boxdim(&mut settings),
        Command::Discrepancy => commands::discrepancy(&mut settings),
        Command::Entropy => commands::entropy(&mut settings),
        Command::Residue { action } => match action {
            ResidueAction::Cover => commands::residue_cover(&mut settings),
            ResidueAction::Solve => commands::residue_solve(&mut settings),
            ResidueAction::Chain => commands::residue_chain(&mut settings),
        },
        Command::Independence => commands::independence(&mut settings),
        Command::Sweep => commands::sweep(&mut settings),
    }?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let text = outcome.render(name, settings.resolved(), format)?;
    match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| Error::Io {
            path,
            reason: e.to_string(),
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    reason: e.to_string(),
                })?;
        }
    }
    outcome.failure.map_or(Ok(()), Err)
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
            eprintln!("seqlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `torobs`: cluster, orbit, Gram, solver and scan experiments with
//! reproducible JSON/CSV reports.

mod commands;
mod config;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::{locate_key, parse_config, Command, ConfigError, RunConfig, ScanKind, Suite};

#[derive(Parser, Debug)]
#[command(
    name = "torobs",
    version,
    about = "Observability experiments for Schrödinger waves on tori"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Cluster decomposition of the paraboloid over Γ.
    Clusters,
    /// Orbits of Λ⊥ acting on translates of Λ.
    Orbits,
    /// Observability Gram matrix on the truncated subspace.
    Gram,
    /// Periodized Duhamel fixed point.
    Solve,
    /// Parameter scans.
    Scan {
        #[arg(value_enum)]
        kind: Option<ScanKind>,
    },
    /// Built-in verification suites.
    Verify {
        #[arg(long, value_enum)]
        suite: Option<Suite>,
    },
}

/// Flags override keys of the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Torus dimension.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Cluster scale R.
    #[arg(long, global = true, allow_negative_numbers = true)]
    r: Option<i64>,
    /// Frequency bound F.
    #[arg(long, global = true, allow_negative_numbers = true)]
    f: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    time_bound: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Cutoff half-width.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    /// Scan sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Scan Lebesgue exponent.
    #[arg(long, global = true, allow_negative_numbers = true)]
    p: Option<f64>,
    /// Comma-separated scan frequency bounds.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    freq_bounds: Option<Vec<i64>>,
}

impl Overrides {
    /// Applies the given flags and returns the names of the fields they set.
    fn apply(&self, cfg: &mut RunConfig) -> Vec<&'static str> {
        let mut set = Vec::new();
        macro_rules! take {
            ($flag:ident => $($field:ident).+, $name:literal) => {
                if let Some(v) = &self.$flag {
                    cfg.$($field).+ = v.clone();
                    set.push($name);
                }
            };
        }
        take!(seed => seed, "seed");
        take!(out => out, "out");
        take!(d => d, "d");
        take!(r => r, "r");
        take!(f => f, "f");
        take!(b => b, "b");
        take!(epsilon => epsilon, "epsilon");
        take!(tau => tau, "tau");
        take!(tol => tol, "tol");
        take!(max_iterations => max_iterations, "max_iterations");
        take!(samples => scan.samples, "scan.samples");
        take!(p => scan.p, "scan.p");
        take!(freq_bounds => scan.freq_bounds, "scan.freq_bounds");
        if let Some(t) = self.time_bound {
            cfg.time_bound = Some(t);
            set.push("time_bound");
        }
        set
    }
}

/// Resolves file + flags into a validated configuration.
fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let (mut cfg, text) = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                source: Some(path.clone()),
                line: None,
                field: None,
                message: e.to_string(),
            })?;
            (parse_config(&text, Some(path))?, Some(text))
        }
        None => (RunConfig::default(), None),
    };
    let from_flags = cli.common.apply(&mut cfg);
    let command = match &cli.command {
        Cmd::Clusters => Command::Clusters,
        Cmd::Orbits => Command::Orbits,
        Cmd::Gram => Command::Gram,
        Cmd::Solve => Command::Solve,
        Cmd::Scan { kind } => {
            if let Some(k) = kind {
                cfg.scan.kind = *k;
            }
            Command::Scan
        }
        Cmd::Verify { suite } => {
            if let Some(s) = suite {
                cfg.suite = *s;
            }
            Command::Verify
        }
    };
    cfg.command = Some(command);
    cfg.validate().map_err(|mut e| {
        if let Some(field) = e.field.clone() {
            if from_flags.contains(&field.as_str()) {
                e.message = format!(
                    "{} (from --{})",
                    e.message,
                    field.rsplit('.').next().unwrap_or(&field).replace('_', "-")
                );
            } else if let Some(text) = &text {
                e.source = cli.common.config.clone();
                e.line = locate_key(text, &field);
            }
        }
        e
    })?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("TOROBS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        ConfigError::field(
            "TOROBS_THREADS",
            format!("must be a positive integer, got {raw:?}"),
        )
    })?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    configure_threads()?;
    let cfg = resolve(cli)?;
    let command = cfg.command.expect("resolved");
    let (stem, outcome) = match command {
        Command::Clusters => ("clusters", commands::clusters(&cfg)?),
        Command::Orbits => ("orbits", commands::orbits(&cfg)?),
        Command::Gram => ("gram", commands::gram_cmd(&cfg)?),
        Command::Solve => ("solve", commands::solve(&cfg)?),
        Command::Scan => ("scan", commands::scan(&cfg)?),
        Command::Verify => ("verify", commands::verify_cmd(&cfg)?),
    };
    if command == Command::Verify {
        if let Some(rows) = outcome.tables.first() {
            for r in &rows.rows {
                let tag = if r[2] == "true" { "PASS" } else { "FAIL" };
                println!("{tag} {}/{}: {}", r[0], r[1], r[3]);
            }
        }
    }
    for path in report::emit(&cfg, stem, &outcome)? {
        println!("wrote {}", path.display());
    }
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: failed checks: {}", outcome.failures.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

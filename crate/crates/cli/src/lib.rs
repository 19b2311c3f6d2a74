//! Command-line front end: each subcommand evaluates one family of results
//! and writes a plot-ready table (CSV or JSON) with a reproducibility header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mbscatter::Error;
use serde_json::Value;

pub mod commands;
pub mod config;

use commands::Outcome;
use config::{Overrides, RunConfig};

/// Default output directory when `--out` is not given. Without it, tables go to stdout.
pub const OUT_DIR_ENV: &str = "MBSCATTER_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mbscatter", version, about = "Many-body scattering tables through chaotic cavities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-particle ratio versus delay for several dwell times.
    HomProfile(CommonArgs),
    /// Pairwise coefficient versus its large-n limit under N = α nᵉᵗᵃ.
    Bbp(CommonArgs),
    /// Monte Carlo verification of the exact first moments (exit 3 on failure).
    RmtVerify(CommonArgs),
    /// Exact, leading-order and sampled second moments.
    Variance(CommonArgs),
    /// Three-body kernel on a (τ₁₂, τ₃₂) grid.
    ThreeBody(CommonArgs),
    /// Generating-function coefficients as exact rationals.
    Series(CommonArgs),
    /// Monte Carlo moment of one channel assignment over a list of N.
    Mc(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON object of parameters.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one parameter; the value is parsed as JSON. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; defaults to $MBSCATTER_OUT_DIR/<command>.<ext>, else stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads for sampling (0 = all cores). Does not change results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

type Runner = fn(&RunConfig) -> mbscatter::Result<Outcome>;

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::HomProfile(_) => "hom-profile",
            Command::Bbp(_) => "bbp",
            Command::RmtVerify(_) => "rmt-verify",
            Command::Variance(_) => "variance",
            Command::ThreeBody(_) => "three-body",
            Command::Series(_) => "series",
            Command::Mc(_) => "mc",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::HomProfile(a)
            | Command::Bbp(a)
            | Command::RmtVerify(a)
            | Command::Variance(a)
            | Command::ThreeBody(a)
            | Command::Series(a)
            | Command::Mc(a) => a,
        }
    }

    fn spec(&self) -> (Vec<(&'static str, Value)>, Runner) {
        match self {
            Command::HomProfile(_) => (commands::hom_profile::defaults(), commands::hom_profile::run),
            Command::Bbp(_) => (commands::bbp::defaults(), commands::bbp::run),
            Command::RmtVerify(_) => (commands::rmt_verify::defaults(), commands::rmt_verify::run),
            Command::Variance(_) => (commands::variance::defaults(), commands::variance::run),
            Command::ThreeBody(_) => (commands::three_body::defaults(), commands::three_body::run),
            Command::Series(_) => (commands::series::defaults(), commands::series::run),
            Command::Mc(_) => (commands::mc::defaults(), commands::mc::run),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Parse(_)
        | Error::InvalidDimension(_)
        | Error::Shape(_)
        | Error::ChannelOutOfRange { .. }
        | Error::UnsupportedRegime(_)
        | Error::Domain(_)
        | Error::Order { .. } => EXIT_CONFIG,
        Error::Resource(_) => EXIT_RESOURCE,
        Error::Validation(_) => EXIT_ACCEPTANCE,
        Error::Io { .. } | Error::Accuracy { .. } => EXIT_RUNTIME,
    }
}

pub fn resolve(cmd: &Command) -> mbscatter::Result<RunConfig> {
    let a = cmd.args();
    let ov = Overrides {
        config_file: a.config.clone(),
        set: a.set.clone(),
        seed: a.seed,
        out: a.out.clone(),
        format: a.format.clone(),
        workers: a.workers,
    };
    RunConfig::resolve(cmd.name(), &cmd.spec().0, &ov)
}

/// Runs a resolved configuration and attaches the reproducibility header.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> mbscatter::Result<Outcome> {
    let mut out = (cmd.spec().1)(cfg)?;
    let mut meta = vec![
        ("command".to_string(), cfg.command.clone()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("seed".to_string(), cfg.master_seed.to_string()),
        ("config_hash".to_string(), format!("sha256:{}", cfg.hash())),
        ("config".to_string(), cfg.canonical()),
    ];
    meta.append(&mut out.table.metadata);
    out.table.metadata = meta;
    Ok(out)
}

fn output_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.out.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{}.{}", cfg.command, cfg.format.extension())))
    })
}

fn write_outcome(cfg: &RunConfig, out: &Outcome) -> mbscatter::Result<()> {
    match output_path(cfg) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| Error::Io { rows_written: 0, source })?;
            }
            let file = File::create(&path).map_err(|source| Error::Io { rows_written: 0, source })?;
            let mut w = BufWriter::new(file);
            out.table.write(cfg.format, &mut w)?;
            log::info!("wrote {} rows to {}", out.table.rows.len(), path.display());
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            out.table.write(cfg.format, &mut lock)
        }
    }
}

/// Full pipeline for one invocation; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cmd = cli.command;
    let cfg = match resolve(&cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if cmd.args().print_config {
        let text = serde_json::to_string_pretty(&cfg).expect("config serialises");
        // a closed pipe is not worth a panic here
        let _ = writeln!(std::io::stdout(), "{text}");
        return EXIT_OK;
    }
    let result = execute(&cmd, &cfg).and_then(|out| {
        write_outcome(&cfg, &out)?;
        Ok(out.passed)
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("{}: tolerance check failed", cfg.command);
            EXIT_ACCEPTANCE
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Io { rows_written, .. } = &e {
                eprintln!("partial output: {rows_written} rows written");
            }
            let _ = std::io::stderr().flush();
            exit_code(&e)
        }
    }
}

//! Command-line front end: configuration, dispatch and artifact output.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{Command, RawConfig};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or input: exit status 2.
    Config(Vec<String>),
    /// Numerical failure: exit status 3.
    Numerical(String),
    /// Self-check ran but a gate failed: exit status 3, report still written.
    Gates { report: String, failed: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Gates { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(errors) => {
                writeln!(f, "invalid configuration:")?;
                for e in errors {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Gates { failed, .. } => write!(f, "self-check gates failed: {failed}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "polarqdt", version, about = "Ultracold polar-molecule loss rates")]
struct Cli {
    #[command(subcommand)]
    command: CommandArg,

    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Re-run with the configuration embedded in an earlier output file
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "config")]
    replay: Option<PathBuf>,

    /// Override one key; repeatable, applied after the file
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output file (standard output when absent)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum CommandArg {
    /// Adiabatic curves of one M block, CSV
    Adiabats,
    /// Loss probability versus collision energy, numeric and analytic, CSV
    Ploss,
    /// Total and per-channel loss rates versus dipole moment, CSV
    Rates,
    /// Fit s and/or y to a rate-versus-dipole dataset
    Fit,
    /// Resonance positions along a dipole scan, CSV
    Resonances,
    /// Characteristic scales and internal consistency gates
    Selfcheck,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Adiabats => Command::Adiabats,
            CommandArg::Ploss => Command::Ploss,
            CommandArg::Rates => Command::Rates,
            CommandArg::Fit => Command::Fit,
            CommandArg::Resonances => Command::Resonances,
            CommandArg::Selfcheck => Command::Selfcheck,
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())])),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs one subcommand.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(vec![e.to_string().trim_end().to_string()])),
    };
    let command = Command::from(cli.command);

    let mut raw = match (&cli.config, &cli.replay) {
        (Some(path), _) => RawConfig::parse(&read(path)?, &path.display().to_string()).map_err(CliError::Config)?,
        (None, Some(path)) => {
            RawConfig::from_header(&read(path)?, &path.display().to_string()).map_err(CliError::Config)?
        }
        (None, None) => RawConfig::default(),
    };
    let mut errors = Vec::new();
    for assignment in &cli.set {
        if let Err(e) = raw.set(assignment) {
            errors.push(e);
        }
    }
    let resolved = config::resolve(&raw, command);
    let run = match (resolved, errors.is_empty()) {
        (Ok(run), true) => run,
        (Ok(_), false) => return Err(CliError::Config(errors)),
        (Err(mut more), _) => {
            errors.append(&mut more);
            return Err(CliError::Config(errors));
        }
    };
    log::info!("{} with config {}", command.name(), run.hash());

    let header = run.header();
    match commands::execute(&run) {
        Ok(body) => write_output(cli.out.as_ref(), &format!("{header}{body}")),
        Err(CliError::Gates { report, failed }) => {
            write_output(cli.out.as_ref(), &format!("{header}{report}"))?;
            Err(CliError::Gates { report: String::new(), failed })
        }
        Err(e) => Err(e),
    }
}

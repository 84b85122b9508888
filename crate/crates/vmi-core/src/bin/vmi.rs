//! Command line for the signal simulator: tabulate response functions,
//! evaluate baseline and pair-corrected signals over scan grids, enumerate
//! the pair diagrams, and print or validate run configurations.
//!
//! Exit codes: 0 on success, 2 for configuration errors (with every
//! violation listed), 3 for numerical failures, 1 for i/o problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vmi_core::cli_io::{self, parse_config, preset, RunConfig, ScanConfig};
use vmi_core::signals::Domain;
use vmi_core::{Result, VmiError};

#[derive(Parser)]
#[command(
    name = "vmi",
    version,
    about = "Heterodyne-detected nonlinear optical signals for small molecular \
             ensembles: semi-classical baseline plus vacuum-mediated pair corrections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a bare response function of one molecule as CSV.
    Respond(RespondArgs),
    /// Evaluate the heterodyne signal, optionally over a scan grid.
    Signal(SignalArgs),
    /// Enumerate the vacuum-mediated pair diagrams as JSON descriptors.
    Diagrams(DiagramsArgs),
    /// Print a built-in example configuration as TOML.
    Preset(PresetArgs),
    /// Validate a configuration file, reporting every violation found.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Source {
    /// Path to a TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in example configuration.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        match (&self.config, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                parse_config(&text)
            }
            (None, Some(name)) => preset(name),
            _ => Err(VmiError::config(vec![
                "exactly one of --config or --preset is required".to_string(),
            ])),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    /// Nested time integrals with retarded coupling.
    Time,
    /// Frequency integrals with the full retarded tensor.
    Freq,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Domain {
        match d {
            DomainArg::Time => Domain::Time,
            DomainArg::Freq => Domain::Freq,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KindArg {
    /// Linear response (two indices, one argument).
    Alpha,
    /// Quadratic response (three indices, two arguments).
    Beta,
    /// Cubic response (four indices, three arguments).
    Gamma,
}

impl From<KindArg> for cli_io::ResponseKind {
    fn from(k: KindArg) -> cli_io::ResponseKind {
        match k {
            KindArg::Alpha => cli_io::ResponseKind::Alpha,
            KindArg::Beta => cli_io::ResponseKind::Beta,
            KindArg::Gamma => cli_io::ResponseKind::Gamma,
        }
    }
}

#[derive(Args)]
struct RespondArgs {
    #[command(flatten)]
    source: Source,
    /// Molecule tag (default: the first molecule in the configuration).
    #[arg(long, value_name = "TAG")]
    molecule: Option<String>,
    /// Which response function to tabulate.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Evaluation domain.
    #[arg(long, value_enum, default_value = "freq")]
    domain: DomainArg,
    /// Cartesian indices as letters, e.g. zz, zxy, zzzz.
    #[arg(long, value_name = "LETTERS")]
    indices: String,
    /// Grid over the first argument.
    #[arg(long, value_name = "START:STOP:STEPS")]
    scan: String,
    /// Fixed values for the remaining arguments, comma separated
    /// (one for beta, two for gamma).
    #[arg(long, value_delimiter = ',', value_name = "V1[,V2]")]
    args: Vec<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
}

#[derive(Args)]
struct SignalArgs {
    #[command(flatten)]
    source: Source,
    /// Interaction order; must equal the number of drive pulses.
    #[arg(long, value_name = "N")]
    order: Option<usize>,
    /// Evaluation domain (default from the configuration).
    #[arg(long, value_enum)]
    domain: Option<DomainArg>,
    /// Include the vacuum-mediated pair corrections.
    #[arg(long, conflicts_with = "no_vmi")]
    vmi: bool,
    /// Baseline only: skip the pair corrections.
    #[arg(long = "no-vmi")]
    no_vmi: bool,
    /// Keep only drive branches whose deposited frequency can reach the
    /// detection carrier (rotating-wave diagnostic).
    #[arg(long)]
    rwa: bool,
    /// Scan one axis (axes: omega_s, omega_1, delay, separation).
    #[arg(long, value_name = "AXIS=START:STOP:STEPS")]
    scan: Option<String>,
    /// Emit one column per pair-correction term.
    #[arg(long)]
    breakdown: bool,
    /// Write CSV and a .meta.json sidecar here instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
}

impl SignalArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(order) = self.order {
            cfg.run.order = order;
        }
        if let Some(domain) = self.domain {
            cfg.run.domain = match domain {
                DomainArg::Time => "time".to_string(),
                DomainArg::Freq => "freq".to_string(),
            };
        }
        if self.vmi {
            cfg.run.vmi = true;
        }
        if self.no_vmi {
            cfg.run.vmi = false;
        }
        if self.rwa {
            cfg.run.rwa = true;
        }
        if self.breakdown {
            cfg.run.breakdown = true;
        }
        if let Some(spec) = &self.scan {
            cfg.run.scan = Some(parse_scan_spec(spec)?);
        }
        if let Some(path) = &self.output {
            cfg.run.output = Some(path.clone());
        }
        Ok(())
    }
}

#[derive(Args)]
struct DiagramsArgs {
    /// Number of classical field interactions, n >= 1.
    #[arg(long, value_name = "N")]
    order: usize,
    /// Expand distinct pulse assignments over the chronological slots.
    #[arg(long)]
    permutations: bool,
    /// Include the local-field/cascading classification per diagram.
    #[arg(long)]
    classify: bool,
    /// Write the JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
}

#[derive(Args)]
struct PresetArgs {
    /// One of: dimer_linear, ladder_s2, cascade_s3, scramble_demo,
    /// lattice_pm, scaling.
    name: String,
    /// Write the TOML here instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Configuration file to check.
    path: PathBuf,
}

fn parse_scan_triple(text: &str) -> Result<(f64, f64, usize)> {
    let bad = || {
        VmiError::config(vec![format!(
            "scan grid: expected START:STOP:STEPS, got `{text}`"
        )])
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps < 1 {
        return Err(VmiError::config(vec![
            "scan grid: steps must be at least 1".to_string(),
        ]));
    }
    Ok((start, stop, steps))
}

fn parse_scan_spec(text: &str) -> Result<ScanConfig> {
    let (axis, grid) = text.split_once('=').ok_or_else(|| {
        VmiError::config(vec![format!(
            "--scan: expected AXIS=START:STOP:STEPS, got `{text}`"
        )])
    })?;
    let (start, stop, steps) = parse_scan_triple(grid)?;
    Ok(ScanConfig {
        axis: axis.trim().to_string(),
        start,
        stop,
        steps,
    })
}

fn emit(text: &str, output: Option<&str>) -> Result<()> {
    match output {
        Some(raw) => {
            let path = cli_io::resolve_output_path(raw);
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_respond(args: &RespondArgs) -> Result<()> {
    let cfg = args.source.load()?;
    let (start, stop, steps) = parse_scan_triple(&args.scan)?;
    let grid = ScanConfig {
        axis: "arg1".to_string(),
        start,
        stop,
        steps,
    };
    let csv = cli_io::respond_csv(
        &cfg,
        args.molecule.as_deref(),
        args.kind.into(),
        args.domain.into(),
        &args.indices,
        &grid,
        &args.args,
    )?;
    emit(&csv, args.output.as_deref())
}

fn cmd_signal(args: &SignalArgs) -> Result<()> {
    let mut cfg = args.source.load()?;
    args.apply(&mut cfg)?;
    let grid = cli_io::run_signal(&cfg)?;
    match cfg.run.output.clone() {
        Some(path) => {
            let written = cli_io::write_grid_outputs(&grid, &cfg, &path)?;
            eprintln!("wrote {} rows to {}", grid.rows.len(), written.display());
            Ok(())
        }
        None => emit(&cli_io::grid_to_csv(&grid), None),
    }
}

fn cmd_diagrams(args: &DiagramsArgs) -> Result<()> {
    let json = cli_io::diagrams_json(args.order, args.permutations, args.classify)?;
    emit(&json, args.output.as_deref())
}

fn cmd_preset(args: &PresetArgs) -> Result<()> {
    let cfg = preset(&args.name)?;
    emit(&cli_io::serialize_config(&cfg), args.output.as_deref())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.path)?;
    let cfg = parse_config(&text)?;
    println!(
        "OK: {} molecule(s), {} drive pulse(s), order {}, domain {}",
        cfg.molecule.len(),
        cfg.pulse.len(),
        cfg.run.order,
        cfg.run.domain
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Respond(args) => cmd_respond(args),
        Command::Signal(args) => cmd_signal(args),
        Command::Diagrams(args) => cmd_diagrams(args),
        Command::Preset(args) => cmd_preset(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

mod commands;
mod config;
mod ranges;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::ConfigError;

/// Frequency-bin photonic processing under RF-clock timing error.
#[derive(Debug, Parser)]
#[command(name = "binsync", version)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Any flag given here overrides the
/// config file, which overrides the defaults.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (a per-command default name when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rf_frequency_hz: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub depth_rad: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub bin_width_hz: Option<f64>,
    /// Scan grid, e.g. 9x9
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true)]
    pub passband_bins: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub integration_s: Option<f64>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Sideband coefficients of one modulator
    EopmCoeffs(commands::EopmCoeffsArgs),
    /// Two-modulator cancellation contrast over half an RF period
    ClassicalSweep(commands::ClassicalSweepArgs),
    /// Invert suppression contrasts to relative delays
    SuppressionToTau(commands::SuppressionToTauArgs),
    /// Suppression and inferred delay for a series of spectra
    SpectraDrift(commands::SpectraDriftArgs),
    /// Joint spectral intensity after nonlocal modulation
    Jsi(commands::JsiArgs),
    /// Fit measured coincidences to a theory JSI
    JsiFit(commands::JsiFitArgs),
    /// DFT gate fidelity versus clock delay
    DftFidelity(commands::DftFidelityArgs),
    /// Largest delay keeping DFT fidelity above a threshold
    MaxDelay(commands::MaxDelayArgs),
    /// Output state of a DFT gate under fluctuating delay
    DriftChannel(commands::DriftChannelArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::EopmCoeffs(_) => "eopm-coeffs",
            Command::ClassicalSweep(_) => "classical-sweep",
            Command::SuppressionToTau(_) => "suppression-to-tau",
            Command::SpectraDrift(_) => "spectra-drift",
            Command::Jsi(_) => "jsi",
            Command::JsiFit(_) => "jsi-fit",
            Command::DftFidelity(_) => "dft-fidelity",
            Command::MaxDelay(_) => "max-delay",
            Command::DriftChannel(_) => "drift-channel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    None,
    Uniform,
    Gaussian,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = config::RunConfig::resolve(&cli.common)?;
    let ctx = commands::Context {
        command: cli.command.name(),
        args: serde_json::to_value(&cli.command)?,
        config: cfg,
        out: cli.common.out.clone(),
    };
    match &cli.command {
        Command::EopmCoeffs(a) => commands::eopm_coeffs(&ctx, a),
        Command::ClassicalSweep(a) => commands::classical_sweep(&ctx, a),
        Command::SuppressionToTau(a) => commands::suppression_to_tau(&ctx, a),
        Command::SpectraDrift(a) => commands::spectra_drift(&ctx, a),
        Command::Jsi(a) => commands::jsi(&ctx, a),
        Command::JsiFit(a) => commands::jsi_fit(&ctx, a),
        Command::DftFidelity(a) => commands::dft_fidelity(&ctx, a),
        Command::MaxDelay(a) => commands::max_delay(&ctx, a),
        Command::DriftChannel(a) => commands::drift_channel(&ctx, a),
    }
}

/// Exit status and error category for a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<binsync::Error>() {
            return if e.is_io() || matches!(e, binsync::Error::MalformedTrace { .. }) {
                (2, "io")
            } else if e.is_numerical_domain() {
                (3, "numerical")
            } else {
                (1, "config")
            };
        }
        if cause.is::<ConfigError>() {
            return (1, "config");
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return (2, "io");
        }
    }
    (1, "config")
}

fn report(code: u8, kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({
        "error": { "kind": kind, "exit_code": code, "message": message }
    });
    let _ = writeln!(std::io::stderr(), "{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(1, "config", e.render().to_string().trim().to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            report(code, kind, format!("{err:#}"))
        }
    }
}

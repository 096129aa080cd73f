use std::path::{Path, PathBuf};

use anyhow::Context as _;
use binsync::biphoton::{drift_averaged_jsi, fit_theory, sample_counts};
use binsync::classical::{
    analyze_spectra_series, half_period_grid, invert_suppression, synthetic_trace, tau_sweep,
    SidebandLookup,
};
use binsync::delay::{DelayDistribution, DEFAULT_GAUSSIAN_POINTS, DEFAULT_UNIFORM_POINTS};
use binsync::formats::{
    fmt_f64, read_column, read_jsi_csv, read_json, read_trace_series, write_drift_csv,
    write_fidelity_csv, write_jsi_csv, write_json, write_sweep_csv, write_table,
    write_tolerable_delay_csv, write_trace_series, DensityMatrixJson, FidelityRow, JsiGeometry,
    TolerableDelayRow,
};
use binsync::modeops::{eopm_coefficients, SinusoidDrive, TruncationPolicy};
use binsync::qfp::{
    self, dft_fidelity_closed_form, dft_matrix, max_tolerable_delay, DensityMatrix,
};
use binsync::Error;
use clap::{Args, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::ranges::{linspace, parse_angle_range, parse_dims};
use crate::DriftKind;

pub struct Context {
    pub command: &'static str,
    pub args: serde_json::Value,
    pub config: RunConfig,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a serde_json::Value,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    jsi_geometry: Option<&'a JsiGeometry>,
}

/// `sweep.csv` → `sweep.meta.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("meta.json")
}

impl Context {
    fn out_path(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn provenance<'a>(&'a self, geometry: Option<&'a JsiGeometry>) -> Provenance<'a> {
        Provenance {
            tool: "binsync",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            args: &self.args,
            config: &self.config,
            jsi_geometry: geometry,
        }
    }

    fn finish(&self, output: &Path, geometry: Option<&JsiGeometry>) -> anyhow::Result<()> {
        write_json(&sidecar_path(output), &self.provenance(geometry))
            .with_context(|| format!("writing provenance for {}", output.display()))?;
        println!("{}", output.display());
        Ok(())
    }
}

fn distribution(
    kind: DriftKind,
    mean_s: f64,
    sigma_s: f64,
    points: Option<usize>,
) -> anyhow::Result<(DelayDistribution, usize)> {
    let (dist, default_points) = match kind {
        DriftKind::None => (DelayDistribution::from_kind("fixed", &[mean_s])?, 1),
        DriftKind::Uniform => (
            DelayDistribution::from_kind("uniform", &[mean_s])?,
            DEFAULT_UNIFORM_POINTS,
        ),
        DriftKind::Gaussian => (
            DelayDistribution::from_kind("gaussian", &[mean_s, sigma_s])?,
            DEFAULT_GAUSSIAN_POINTS,
        ),
    };
    Ok((dist, points.unwrap_or(default_points)))
}

// ---- eopm-coeffs ----

#[derive(Debug, Args, Serialize)]
pub struct EopmCoeffsArgs {
    /// Largest sideband order |k| to report
    #[arg(long, default_value_t = 10)]
    pub max_order: usize,
    /// Modulator clock delay
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delay_s: f64,
}

pub fn eopm_coeffs(ctx: &Context, a: &EopmCoeffsArgs) -> anyhow::Result<()> {
    let drive = ctx.config.drive()?.with_delay(a.delay_s);
    // solve to a safe order, report only the requested ones
    let solve_order = a
        .max_order
        .max(TruncationPolicy::for_depth(drive.depth_rad).guard_bins);
    let c = eopm_coefficients(&drive, solve_order)?;
    let out = ctx.out_path("eopm_coeffs.csv");
    let rows = c
        .iter()
        .filter(|(k, _)| k.unsigned_abs() as usize <= a.max_order)
        .map(|(k, z)| {
            [
                k.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(z.norm_sqr()),
            ]
        });
    write_table(&out, &["order", "re", "im", "power"], rows)?;
    ctx.finish(&out, None)
}

// ---- classical-sweep ----

#[derive(Debug, Args, Serialize)]
pub struct ClassicalSweepArgs {
    /// Delays evenly spaced on (0, T/2]
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    /// Also write a synthetic spectrum per delay plus a manifest here
    #[arg(long)]
    pub traces_dir: Option<PathBuf>,
    /// Timestamp step between synthetic spectra
    #[arg(long, default_value_t = 60.0)]
    pub trace_interval_s: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub carrier_dbm: f64,
    /// Comb lines per side in synthetic spectra
    #[arg(long, default_value_t = 8)]
    pub trace_orders: usize,
}

pub fn classical_sweep(ctx: &Context, a: &ClassicalSweepArgs) -> anyhow::Result<()> {
    if a.points == 0 {
        return Err(ConfigError("--points must be positive".into()).into());
    }
    let drive = ctx.config.drive()?;
    let taus = half_period_grid(&drive, a.points);
    let rows = tau_sweep(&drive, &taus)?;
    let out = ctx.out_path("classical_sweep.csv");
    write_sweep_csv(&out, &rows)?;
    if let Some(dir) = &a.traces_dir {
        let traces = taus
            .iter()
            .enumerate()
            .map(|(k, &tau)| {
                synthetic_trace(
                    &drive,
                    tau,
                    a.trace_interval_s * k as f64,
                    a.carrier_dbm,
                    a.trace_orders,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let manifest = write_trace_series(dir, &traces)?;
        ctx.finish(&manifest, None)?;
    }
    ctx.finish(&out, None)
}

// ---- suppression-to-tau ----

#[derive(Debug, Args, Serialize)]
pub struct SuppressionToTauArgs {
    /// CSV with a `contrast_dbc` column (sweep or drift output)
    #[arg(long, conflicts_with = "contrast_dbc")]
    pub input: Option<PathBuf>,
    /// Contrast value(s); out-of-range values are an error
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub contrast_dbc: Vec<f64>,
}

pub fn suppression_to_tau(ctx: &Context, a: &SuppressionToTauArgs) -> anyhow::Result<()> {
    let drive = ctx.config.drive()?;
    let (contrasts, lenient) = match &a.input {
        Some(path) => (
            read_column(path, "contrast_dbc")
                .with_context(|| format!("reading {}", path.display()))?,
            true,
        ),
        None if !a.contrast_dbc.is_empty() => (a.contrast_dbc.clone(), false),
        None => return Err(ConfigError("give --input or --contrast-dbc".into()).into()),
    };
    let mut rows = Vec::with_capacity(contrasts.len());
    for c in contrasts {
        let (tau, status) = match invert_suppression(c, &drive) {
            Ok(est) if est.at_floor => (est.tau_s, "floor"),
            Ok(est) => (est.tau_s, "ok"),
            // file rows beyond the invertible branch are reported, not fatal
            Err(Error::OutOfRange(_)) if lenient => (f64::NAN, "out_of_range"),
            Err(e) => return Err(e.into()),
        };
        rows.push([fmt_f64(c), fmt_f64(tau), status.to_string()]);
    }
    let out = ctx.out_path("suppression_to_tau.csv");
    write_table(&out, &["contrast_dbc", "tau_s", "status"], rows)?;
    ctx.finish(&out, None)
}

// ---- spectra-drift ----

#[derive(Debug, Args, Serialize)]
pub struct SpectraDriftArgs {
    /// Manifest JSON listing trace CSVs and timestamps
    #[arg(long)]
    pub manifest: PathBuf,
    /// Sideband integration half-width (overrides the config)
    #[arg(long)]
    pub window_hz: Option<f64>,
}

pub fn spectra_drift(ctx: &Context, a: &SpectraDriftArgs) -> anyhow::Result<()> {
    let drive = ctx.config.drive()?;
    let lookup = match a.window_hz {
        Some(window_hz) => SidebandLookup { window_hz },
        None => ctx.config.lookup(),
    };
    let traces = read_trace_series(&a.manifest)
        .with_context(|| format!("reading spectra from {}", a.manifest.display()))?;
    let rows = analyze_spectra_series(&traces, &drive, &lookup)?;
    let out = ctx.out_path("spectra_drift.csv");
    write_drift_csv(&out, &rows)?;
    ctx.finish(&out, None)
}

// ---- jsi ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JsiMode {
    InPhase,
    OutOfPhase,
    Unmodulated,
}

#[derive(Debug, Args, Serialize)]
pub struct JsiArgs {
    #[arg(long, value_enum, default_value_t = JsiMode::InPhase)]
    pub mode: JsiMode,
    #[arg(long, value_enum, default_value_t = DriftKind::None)]
    pub drift: DriftKind,
    /// Fixed idler delay for `none`, start of the period for `uniform`,
    /// mean for `gaussian`
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub drift_mean_s: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub drift_sigma_s: f64,
    #[arg(long)]
    pub quad_points: Option<usize>,
    /// Replace expected counts with a Poisson draw seeded by --seed
    #[arg(long)]
    pub poisson: bool,
}

pub fn jsi(ctx: &Context, a: &JsiArgs) -> anyhow::Result<()> {
    let cfg = &ctx.config;
    let model = cfg.model();
    let state = model.source_state()?;
    let depth = if a.mode == JsiMode::Unmodulated {
        0.0
    } else {
        cfg.depth_rad
    };
    let signal = SinusoidDrive::new(cfg.rf_frequency_hz, depth)?;
    let idler = match a.mode {
        JsiMode::OutOfPhase => signal.out_of_phase(),
        _ => signal,
    };
    let (dist, points) = distribution(a.drift, a.drift_mean_s, a.drift_sigma_s, a.quad_points)?;
    let policy = TruncationPolicy::for_depth(depth);
    let mut grid = drift_averaged_jsi(
        &state,
        &signal,
        &idler,
        &dist,
        &model,
        cfg.integration_s,
        points,
        &policy,
    )?;
    if a.poisson {
        grid = sample_counts(&grid, cfg.seed)?;
    }
    let out = ctx.out_path("jsi.csv");
    write_jsi_csv(&out, &grid)?;
    ctx.finish(&out, Some(&JsiGeometry::of(&grid)))
}

// ---- jsi-fit ----

#[derive(Debug, Args, Serialize)]
pub struct JsiFitArgs {
    #[arg(long)]
    pub measured: PathBuf,
    #[arg(long)]
    pub theory: PathBuf,
}

/// Geometry from the CSV's provenance sidecar, else from the run config.
fn jsi_geometry(path: &Path, cfg: &RunConfig) -> anyhow::Result<JsiGeometry> {
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let meta: serde_json::Value =
            read_json(&sidecar).with_context(|| format!("reading {}", sidecar.display()))?;
        if let Some(g) = meta.get("jsi_geometry") {
            return serde_json::from_value(g.clone())
                .with_context(|| format!("{}: bad jsi_geometry", sidecar.display()));
        }
    }
    let scan = cfg.model().scan;
    Ok(JsiGeometry {
        bin_width_hz: scan.bin_width_hz,
        bin_spacing_hz: scan.bin_spacing_hz,
        integration_s: cfg.integration_s,
        signal_indices: scan.signal_indices(),
        idler_indices: scan.idler_indices(),
    })
}

pub fn jsi_fit(ctx: &Context, a: &JsiFitArgs) -> anyhow::Result<()> {
    let load = |path: &Path| -> anyhow::Result<_> {
        let geometry = jsi_geometry(path, &ctx.config)?;
        read_jsi_csv(path, &geometry).with_context(|| format!("reading {}", path.display()))
    };
    let measured = load(&a.measured)?;
    let theory = load(&a.theory)?;
    let fit = fit_theory(&measured, &theory)?;
    let out = ctx.out_path("jsi_fit.csv");
    write_table(
        &out,
        &[
            "scale",
            "offset",
            "rms_residual",
            "scale_stderr",
            "offset_stderr",
        ],
        [[
            fit.scale,
            fit.offset,
            fit.rms_residual,
            fit.scale_stderr,
            fit.offset_stderr,
        ]
        .map(fmt_f64)],
    )?;
    ctx.finish(&out, None)
}

// ---- dft-fidelity ----

#[derive(Debug, Args, Serialize)]
pub struct DftFidelityArgs {
    /// Dimensions, e.g. 2..10
    #[arg(long, default_value = "2..10")]
    pub d: String,
    /// Ωτ range, e.g. 0..0.25pi
    #[arg(long, default_value = "0..0.25pi")]
    pub omega_tau: String,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

pub fn dft_fidelity(ctx: &Context, a: &DftFidelityArgs) -> anyhow::Result<()> {
    let dims = parse_dims(&a.d)?;
    let (lo, hi) = parse_angle_range(&a.omega_tau)?;
    let xs = linspace(lo, hi, a.points);
    if xs.is_empty() {
        return Err(ConfigError("--points must be positive".into()).into());
    }
    let mut rows = Vec::with_capacity(dims.len() * xs.len());
    for &d in &dims {
        for &x in &xs {
            rows.push(FidelityRow {
                d,
                omega_tau: x,
                fidelity: dft_fidelity_closed_form(d, x)?,
            });
        }
    }
    let out = ctx.out_path("dft_fidelity.csv");
    write_fidelity_csv(&out, &rows)?;
    ctx.finish(&out, None)
}

// ---- max-delay ----

#[derive(Debug, Args, Serialize)]
pub struct MaxDelayArgs {
    #[arg(long, default_value = "2..10")]
    pub d: String,
    /// Fidelity threshold(s)
    #[arg(long, value_delimiter = ',', default_value = "0.998")]
    pub threshold: Vec<f64>,
}

pub fn max_delay(ctx: &Context, a: &MaxDelayArgs) -> anyhow::Result<()> {
    let dims = parse_dims(&a.d)?;
    let omega = std::f64::consts::TAU * ctx.config.rf_frequency_hz;
    let mut rows = Vec::new();
    for &d in &dims {
        for &threshold in &a.threshold {
            let t = max_tolerable_delay(d, threshold, omega)?;
            rows.push(TolerableDelayRow {
                d,
                threshold,
                tau_s: t.tau_s,
            });
        }
    }
    let out = ctx.out_path("max_delay.csv");
    write_tolerable_delay_csv(&out, &rows)?;
    ctx.finish(&out, None)
}

// ---- drift-channel ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputState {
    /// Equal superposition of all bins
    Plus,
    /// First bin only
    Basis,
    MaximallyMixed,
}

#[derive(Debug, Args, Serialize)]
pub struct DriftChannelArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = DriftKind::Uniform)]
    pub drift: DriftKind,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub drift_mean_s: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub drift_sigma_s: f64,
    #[arg(long)]
    pub quad_points: Option<usize>,
    #[arg(long, value_enum, default_value_t = InputState::Plus)]
    pub state: InputState,
    /// Input density matrix JSON (overrides --state)
    #[arg(long)]
    pub rho: Option<PathBuf>,
}

pub fn drift_channel(ctx: &Context, a: &DriftChannelArgs) -> anyhow::Result<()> {
    let gate = dft_matrix(a.d)?;
    let rho = match &a.rho {
        Some(path) => {
            let json: DensityMatrixJson =
                read_json(path).with_context(|| format!("reading {}", path.display()))?;
            DensityMatrix::try_from(json)?
        }
        None => match a.state {
            InputState::Plus => DensityMatrix::pure(&vec![Complex64::new(1.0, 0.0); a.d])?,
            InputState::Basis => {
                let mut v = vec![Complex64::new(0.0, 0.0); a.d];
                v[0] = Complex64::new(1.0, 0.0);
                DensityMatrix::pure(&v)?
            }
            InputState::MaximallyMixed => DensityMatrix::maximally_mixed(a.d)?,
        },
    };
    let (dist, points) = distribution(a.drift, a.drift_mean_s, a.drift_sigma_s, a.quad_points)?;
    let omega = std::f64::consts::TAU * ctx.config.rf_frequency_hz;
    let sigma = qfp::drift_channel(&rho, &gate, &dist, omega, points)?;
    let out = ctx.out_path("drift_channel.json");
    write_json(&out, &DensityMatrixJson::from(&sigma))?;
    ctx.finish(&out, None)
}

//! Classical two-modulator cancellation.
//!
//! A CW line passes through two phase modulators driven by the same sinewave,
//! the second one 180° out of phase and delayed by `τ`. The combined phase is
//! a sinusoid of peak deviation `δ_eff = 2δ|sin(Ωτ/2)|`, so the output line
//! powers are `J_k²(δ_eff)`. Sideband suppression is reported in dBc as the
//! highest first-order sideband relative to the carrier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modeops::{exp_phase_coefficients, SinusoidDrive};
use crate::special::bessel_j_all;

/// Contrast reported when the sideband power underflows.
pub const CONTRAST_FLOOR_DBC: f64 = -200.0;

/// Default half-width of the power integration window around each line.
pub const DEFAULT_LOOKUP_WINDOW_HZ: f64 = 2e9;

const TAU_TOLERANCE_S: f64 = 1e-18;
// slack when comparing a numerically simulated contrast with the branch edge
const BRANCH_EDGE_SLACK_DB: f64 = 1e-9;
// powers written into synthetic traces are clamped here (relative to carrier)
const SYNTHETIC_POWER_FLOOR: f64 = 1e-40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub order: i64,
    pub power: f64,
}

/// Peak deviation of the combined phase for a relative delay `τ`.
pub fn effective_depth(drive: &SinusoidDrive, tau_s: f64) -> f64 {
    2.0 * drive.depth_rad * (0.5 * drive.angular_frequency() * tau_s).sin().abs()
}

/// Line powers `|a_k|²`, `|k| ≤ max_order`, after the modulator pair.
///
/// Computed from the sampled product `e^{iφ(t)} e^{iφ'(t−τ)}`, with `φ'` the
/// 180°-out-of-phase copy of `φ`.
pub fn cancellation_spectrum(
    drive: &SinusoidDrive,
    tau_s: f64,
    max_order: usize,
) -> Result<Vec<SpectralLine>> {
    if max_order < 2 {
        return Err(Error::InvalidArgument(format!(
            "max order must be at least 2, got {max_order}"
        )));
    }
    let second = drive.out_of_phase().with_delay(drive.delay_s + tau_s);
    let coeffs = exp_phase_coefficients(
        |theta| drive.phase_at_angle(theta) + second.phase_at_angle(theta),
        max_order,
    )?;
    Ok(coeffs
        .iter()
        .map(|(order, c)| SpectralLine {
            order,
            power: c.norm_sqr(),
        })
        .collect())
}

/// Closed-form line powers `J_k²(δ_eff)`.
pub fn analytic_spectrum(drive: &SinusoidDrive, tau_s: f64, max_order: usize) -> Vec<SpectralLine> {
    let j = bessel_j_all(max_order, effective_depth(drive, tau_s));
    let k = max_order as i64;
    (-k..=k)
        .map(|order| SpectralLine {
            order,
            power: j[order.unsigned_abs() as usize].powi(2),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    pub contrast_dbc: f64,
    pub carrier_power: f64,
    pub worst_first_order_sideband_power: f64,
    /// Set when the contrast was clamped to [`CONTRAST_FLOOR_DBC`].
    pub at_floor: bool,
}

impl SuppressionReport {
    pub fn from_powers(carrier_power: f64, sideband_power: f64) -> Result<Self> {
        if !(carrier_power.is_finite() && carrier_power > 0.0) {
            return Err(Error::Degenerate(format!(
                "carrier power must be positive, got {carrier_power}"
            )));
        }
        if !(sideband_power.is_finite() && sideband_power >= 0.0) {
            return Err(Error::Degenerate(format!(
                "sideband power must be nonnegative, got {sideband_power}"
            )));
        }
        let raw = 10.0 * (sideband_power / carrier_power).log10();
        let at_floor = !(raw > CONTRAST_FLOOR_DBC);
        Ok(Self {
            contrast_dbc: if at_floor { CONTRAST_FLOOR_DBC } else { raw },
            carrier_power,
            worst_first_order_sideband_power: sideband_power,
            at_floor,
        })
    }
}

/// Suppression from a line spectrum indexed by order.
pub fn suppression_from_lines(lines: &[SpectralLine]) -> Result<SuppressionReport> {
    let power = |order: i64| {
        lines
            .iter()
            .find(|l| l.order == order)
            .map(|l| l.power)
            .ok_or_else(|| Error::InvalidArgument(format!("spectrum lacks order {order}")))
    };
    let carrier = power(0)?;
    let worst = power(-1)?.max(power(1)?);
    SuppressionReport::from_powers(carrier, worst)
}

/// A measured optical spectrum, offsets relative to the carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub frequency_offsets_hz: Vec<f64>,
    pub powers_dbm: Vec<f64>,
    pub timestamp_s: f64,
}

impl SpectrumTrace {
    pub fn new(
        frequency_offsets_hz: Vec<f64>,
        powers_dbm: Vec<f64>,
        timestamp_s: f64,
    ) -> Result<Self> {
        let bad = |reason: String| Error::MalformedTrace {
            index: None,
            reason,
        };
        if frequency_offsets_hz.len() != powers_dbm.len() {
            return Err(bad(format!(
                "{} offsets but {} powers",
                frequency_offsets_hz.len(),
                powers_dbm.len()
            )));
        }
        if frequency_offsets_hz.is_empty() {
            return Err(bad("empty trace".into()));
        }
        if !(timestamp_s.is_finite() && timestamp_s >= 0.0) {
            return Err(bad(format!("invalid timestamp {timestamp_s}")));
        }
        if let Some(i) = frequency_offsets_hz
            .iter()
            .chain(&powers_dbm)
            .position(|v| !v.is_finite())
        {
            return Err(bad(format!(
                "non-finite value at sample {}",
                i % powers_dbm.len()
            )));
        }
        if let Some(w) = frequency_offsets_hz.windows(2).position(|w| w[1] <= w[0]) {
            return Err(bad(format!(
                "offsets not strictly increasing at sample {}",
                w + 1
            )));
        }
        Ok(Self {
            frequency_offsets_hz,
            powers_dbm,
            timestamp_s,
        })
    }

    pub fn len(&self) -> usize {
        self.powers_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_dbm.is_empty()
    }

    fn nearest(&self, target_hz: f64) -> usize {
        let offs = &self.frequency_offsets_hz;
        let i = offs.partition_point(|&f| f < target_hz);
        match i {
            0 => 0,
            i if i == offs.len() => i - 1,
            i if (offs[i] - target_hz).abs() < (target_hz - offs[i - 1]).abs() => i,
            i => i - 1,
        }
    }
}

/// How line powers are read off a measured trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandLookup {
    /// Half-width of the integration window. Zero selects the nearest sample,
    /// which must then lie within half the RF frequency of the target.
    pub window_hz: f64,
}

impl Default for SidebandLookup {
    fn default() -> Self {
        Self {
            window_hz: DEFAULT_LOOKUP_WINDOW_HZ,
        }
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn line_power(
    trace: &SpectrumTrace,
    target_hz: f64,
    rf_frequency_hz: f64,
    lookup: &SidebandLookup,
) -> Result<f64> {
    if lookup.window_hz > 0.0 {
        let lo = trace
            .frequency_offsets_hz
            .partition_point(|&f| f < target_hz - lookup.window_hz);
        let hi = trace
            .frequency_offsets_hz
            .partition_point(|&f| f <= target_hz + lookup.window_hz);
        if lo == hi {
            return Err(Error::MalformedTrace {
                index: None,
                reason: format!(
                    "no samples within ±{} Hz of {target_hz} Hz",
                    lookup.window_hz
                ),
            });
        }
        Ok(trace.powers_dbm[lo..hi].iter().map(|&p| dbm_to_mw(p)).sum())
    } else {
        let i = trace.nearest(target_hz);
        if (trace.frequency_offsets_hz[i] - target_hz).abs() > 0.5 * rf_frequency_hz {
            return Err(Error::MalformedTrace {
                index: None,
                reason: format!("no sample within half the RF frequency of {target_hz} Hz"),
            });
        }
        Ok(dbm_to_mw(trace.powers_dbm[i]))
    }
}

/// Suppression from a measured trace; sidebands are read at `±rf_frequency_hz`.
pub fn suppression_from_trace(
    trace: &SpectrumTrace,
    rf_frequency_hz: f64,
    lookup: &SidebandLookup,
) -> Result<SuppressionReport> {
    let carrier = line_power(trace, 0.0, rf_frequency_hz, lookup)?;
    let lower = line_power(trace, -rf_frequency_hz, rf_frequency_hz, lookup)?;
    let upper = line_power(trace, rf_frequency_hz, rf_frequency_hz, lookup)?;
    SuppressionReport::from_powers(carrier, lower.max(upper)).map_err(|e| match e {
        Error::Degenerate(reason) => Error::MalformedTrace {
            index: None,
            reason,
        },
        other => other,
    })
}

/// `10 log10(J_1²(δ_eff) / J_0²(δ_eff))`, unclamped.
pub fn analytic_contrast_dbc(drive: &SinusoidDrive, tau_s: f64) -> f64 {
    let x = effective_depth(drive, tau_s);
    let j = bessel_j_all(1, x);
    20.0 * (j[1].abs() / j[0].abs()).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_s: f64,
    pub contrast_dbc: f64,
}

/// Simulated contrast for each delay in `tau_grid`.
pub fn tau_sweep(drive: &SinusoidDrive, tau_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidArgument("empty delay grid".into()));
    }
    tau_grid
        .par_iter()
        .map(|&tau_s| {
            let lines = cancellation_spectrum(drive, tau_s, 2)?;
            let report = suppression_from_lines(&lines)?;
            Ok(SweepRow {
                tau_s,
                contrast_dbc: report.contrast_dbc,
            })
        })
        .collect()
}

/// `points` delays evenly spaced on `(0, T/2]`.
pub fn half_period_grid(drive: &SinusoidDrive, points: usize) -> Vec<f64> {
    let half = 0.5 * drive.period_s();
    (1..=points)
        .map(|j| half * j as f64 / points as f64)
        .collect()
}

/// End of the strictly increasing part of the contrast curve: `T/2`, or
/// earlier where `δ_eff` reaches the first zero of `J_0`.
pub fn monotone_branch_end(drive: &SinusoidDrive) -> f64 {
    let half = 0.5 * drive.period_s();
    let ratio = crate::special::J0_FIRST_ZERO / (2.0 * drive.depth_rad);
    if ratio >= 1.0 {
        half
    } else {
        2.0 * ratio.asin() / drive.angular_frequency()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingEstimate {
    pub tau_s: f64,
    /// The contrast was at or below the numerical floor.
    pub at_floor: bool,
}

/// Delay `τ ∈ [0, T/2]` whose analytic contrast equals `contrast_dbc`.
///
/// Contrasts above the value at `T/2` have more than one preimage on the
/// half period and are rejected.
pub fn invert_suppression(contrast_dbc: f64, drive: &SinusoidDrive) -> Result<TimingEstimate> {
    if contrast_dbc.is_nan() {
        return Err(Error::InvalidArgument("contrast is NaN".into()));
    }
    if contrast_dbc <= CONTRAST_FLOOR_DBC {
        return Ok(TimingEstimate {
            tau_s: 0.0,
            at_floor: true,
        });
    }
    let half = 0.5 * drive.period_s();
    let edge = analytic_contrast_dbc(drive, half);
    if !(contrast_dbc <= edge + BRANCH_EDGE_SLACK_DB) {
        return Err(Error::OutOfRange(format!(
            "contrast {contrast_dbc} dBc exceeds the invertible maximum {edge} dBc"
        )));
    }
    if contrast_dbc >= edge {
        return Ok(TimingEstimate {
            tau_s: half,
            at_floor: false,
        });
    }
    let (mut lo, mut hi) = (0.0, half);
    for _ in 0..200 {
        if hi - lo <= TAU_TOLERANCE_S {
            break;
        }
        let mid = 0.5 * (lo + hi);
        // +inf at the J_0 zero counts as "above"
        if analytic_contrast_dbc(drive, mid) < contrast_dbc {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TimingEstimate {
        tau_s: 0.5 * (lo + hi),
        at_floor: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub timestamp_s: f64,
    pub contrast_dbc: f64,
    /// NaN when the contrast is beyond the invertible branch.
    pub tau_s: f64,
    pub at_floor: bool,
    pub out_of_range: bool,
}

/// Per-trace suppression and inferred relative delay for a time series.
///
/// Traces whose contrast cannot be inverted are kept, flagged
/// `out_of_range`; only malformed traces abort the analysis.
pub fn analyze_spectra_series(
    traces: &[SpectrumTrace],
    drive: &SinusoidDrive,
    lookup: &SidebandLookup,
) -> Result<Vec<DriftRow>> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("no traces".into()));
    }
    if let Some(i) = traces
        .windows(2)
        .position(|w| w[1].timestamp_s < w[0].timestamp_s)
    {
        return Err(Error::InvalidArgument(format!(
            "traces not time-ordered at index {}",
            i + 1
        )));
    }
    traces
        .par_iter()
        .enumerate()
        .map(|(i, trace)| {
            let report = suppression_from_trace(trace, drive.rf_frequency_hz, lookup)
                .map_err(|e| e.with_trace_index(i))?;
            let (tau_s, at_floor, out_of_range) =
                match invert_suppression(report.contrast_dbc, drive) {
                    Ok(est) => (est.tau_s, est.at_floor || report.at_floor, false),
                    Err(Error::OutOfRange(_)) => (f64::NAN, false, true),
                    Err(e) => return Err(e),
                };
            Ok(DriftRow {
                timestamp_s: trace.timestamp_s,
                contrast_dbc: report.contrast_dbc,
                tau_s,
                at_floor,
                out_of_range,
            })
        })
        .collect()
}

/// Noise-free trace sampled at the comb lines `k·f`, `|k| ≤ max_order`.
pub fn synthetic_trace(
    drive: &SinusoidDrive,
    tau_s: f64,
    timestamp_s: f64,
    carrier_dbm: f64,
    max_order: usize,
) -> Result<SpectrumTrace> {
    let lines = cancellation_spectrum(drive, tau_s, max_order)?;
    let offsets = lines
        .iter()
        .map(|l| l.order as f64 * drive.rf_frequency_hz)
        .collect();
    let powers = lines
        .iter()
        .map(|l| carrier_dbm + 10.0 * l.power.max(SYNTHETIC_POWER_FLOOR).log10())
        .collect();
    SpectrumTrace::new(offsets, powers, timestamp_s)
}

/// A trace with carrier at `carrier_dbm` and both first-order sidebands at
/// `contrast_dbc` below it.
pub fn trace_with_contrast(
    rf_frequency_hz: f64,
    carrier_dbm: f64,
    contrast_dbc: f64,
    timestamp_s: f64,
) -> Result<SpectrumTrace> {
    let side = carrier_dbm + contrast_dbc;
    SpectrumTrace::new(
        vec![-rf_frequency_hz, 0.0, rf_frequency_hz],
        vec![side, carrier_dbm, side],
        timestamp_s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 19e9;

    fn drive() -> SinusoidDrive {
        SinusoidDrive::new(F, 1.42).unwrap()
    }

    fn series_j(n: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..80 {
            let k = k as f64;
            term *= -half * half / (k * (k + n as f64));
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_delay_cancels() {
        let lines = cancellation_spectrum(&drive(), 0.0, 4).unwrap();
        for l in &lines {
            let expect = if l.order == 0 { 1.0 } else { 0.0 };
            assert!((l.power - expect).abs() < 1e-15);
        }
        let report = suppression_from_lines(&lines).unwrap();
        assert_eq!(report.contrast_dbc, CONTRAST_FLOOR_DBC);
        assert!(report.at_floor);
    }

    #[test]
    fn max_order_precondition() {
        assert!(cancellation_spectrum(&drive(), 1e-12, 1).is_err());
    }

    #[test]
    fn half_period_doubles_depth() {
        let tau = 0.5 / F;
        assert!((tau - 26.3158e-12).abs() < 1e-16);
        assert!((effective_depth(&drive(), tau) - 2.84).abs() < 1e-12);
        let lines = cancellation_spectrum(&drive(), tau, 3).unwrap();
        let c = suppression_from_lines(&lines).unwrap().contrast_dbc;
        // J_1²(2.84) / J_0²(2.84) from the power series
        let oracle = 10.0 * (series_j(1, 2.84).powi(2) / series_j(0, 2.84).powi(2)).log10();
        assert!((c - oracle).abs() < 1e-9);
        assert!((c - 5.9).abs() < 0.05, "{c}");
    }

    #[test]
    fn energy_is_conserved() {
        for &tau in &[0.0, 1e-13, 7e-12, 0.5 / F] {
            let lines = cancellation_spectrum(&drive(), tau, 40).unwrap();
            let total: f64 = lines.iter().map(|l| l.power).sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dbc_definition_arithmetic() {
        let lines = [
            SpectralLine {
                order: -1,
                power: 1e-4,
            },
            SpectralLine {
                order: 0,
                power: 1.0,
            },
            SpectralLine {
                order: 1,
                power: 5e-5,
            },
        ];
        let r = suppression_from_lines(&lines).unwrap();
        assert!((r.contrast_dbc + 40.0).abs() < 1e-12);
        assert_eq!(r.worst_first_order_sideband_power, 1e-4);
        assert!(!r.at_floor);
    }

    #[test]
    fn contrast_symmetric_about_half_period() {
        let d = drive();
        let t = d.period_s();
        for frac in [0.05, 0.2, 0.37, 0.49] {
            let a = suppression_from_lines(&cancellation_spectrum(&d, frac * t, 2).unwrap())
                .unwrap()
                .contrast_dbc;
            let b =
                suppression_from_lines(&cancellation_spectrum(&d, (1.0 - frac) * t, 2).unwrap())
                    .unwrap()
                    .contrast_dbc;
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_single_zero_row() {
        let rows = tau_sweep(&drive(), &[0.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].contrast_dbc, CONTRAST_FLOOR_DBC);
        assert!(tau_sweep(&drive(), &[]).is_err());
    }

    #[test]
    fn sweep_monotone_below_bessel_zero() {
        // 2δ < j_{0,1}: the whole half period is one increasing branch
        let d = SinusoidDrive::new(F, 1.2).unwrap();
        assert_eq!(monotone_branch_end(&d), 0.5 * d.period_s());
        let rows = tau_sweep(&d, &half_period_grid(&d, 500)).unwrap();
        assert!(rows
            .windows(2)
            .all(|w| w[1].contrast_dbc > w[0].contrast_dbc));
    }

    #[test]
    fn sweep_at_design_depth_peaks_at_carrier_null() {
        // 2·1.42 exceeds the first J_0 zero: contrast rises to +∞ where the
        // carrier vanishes, then falls back to ≈ +5.9 dBc at T/2
        let d = drive();
        let end = monotone_branch_end(&d);
        assert!(end < 0.5 * d.period_s());
        assert!((effective_depth(&d, end) - crate::special::J0_FIRST_ZERO).abs() < 1e-12);
        let grid = half_period_grid(&d, 500);
        let rows = tau_sweep(&d, &grid).unwrap();
        let branch: Vec<_> = rows.iter().filter(|r| r.tau_s < end).collect();
        assert!(branch
            .windows(2)
            .all(|w| w[1].contrast_dbc > w[0].contrast_dbc));
        let tail: Vec<_> = rows.iter().filter(|r| r.tau_s > end).collect();
        assert!(tail
            .windows(2)
            .all(|w| w[1].contrast_dbc < w[0].contrast_dbc));
    }

    #[test]
    fn contrast_near_half_picosecond() {
        let c = analytic_contrast_dbc(&drive(), 0.42e-12);
        assert!((c + 29.0).abs() < 0.5, "{c}");
    }

    #[test]
    fn inversion_anchors() {
        let d = drive();
        let floor = invert_suppression(CONTRAST_FLOOR_DBC, &d).unwrap();
        assert_eq!(
            floor,
            TimingEstimate {
                tau_s: 0.0,
                at_floor: true
            }
        );
        let est = invert_suppression(-35.0, &d).unwrap();
        assert!((est.tau_s - 0.21e-12).abs() < 0.03e-12, "{}", est.tau_s);
        // small-angle oracle: J_1/J_0 ≈ δ_eff/2 ≈ δΩτ/2 gives ≈ 46.5 fs
        let local = invert_suppression(-48.08, &d).unwrap();
        let ratio = 10f64.powf(-48.08 / 20.0);
        let small_angle = ratio / (1.42 * std::f64::consts::PI * F);
        assert!(
            (local.tau_s - small_angle).abs() < 0.01e-15,
            "{}",
            local.tau_s
        );
        assert!((local.tau_s - 46.54e-15).abs() < 0.05e-15);
    }

    #[test]
    fn inversion_out_of_range() {
        assert!(matches!(
            invert_suppression(10.0, &drive()),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn inversion_round_trip() {
        let d = drive();
        for tau in [0.1e-12, 0.5e-12, 1e-12, 3e-12] {
            let rows = tau_sweep(&d, &[tau]).unwrap();
            let est = invert_suppression(rows[0].contrast_dbc, &d).unwrap();
            assert!((est.tau_s - tau).abs() < 1e-15, "{tau}: {}", est.tau_s);
        }
    }

    #[test]
    fn reported_three_picosecond_datapoint() {
        // −17.36 dBc maps to ≈1.6 ps at δ = 1.42, and 3 ps to ≈ −11.6 dBc
        let d = drive();
        let est = invert_suppression(-17.36, &d).unwrap();
        assert!((est.tau_s - 1.6e-12).abs() < 0.1e-12, "{}", est.tau_s);
        let c = analytic_contrast_dbc(&d, 3e-12);
        assert!((c + 11.6).abs() < 0.2, "{c}");
    }

    #[test]
    fn trace_validation() {
        assert!(SpectrumTrace::new(vec![0.0, 1.0], vec![0.0], 0.0).is_err());
        assert!(SpectrumTrace::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.0).is_err());
        assert!(SpectrumTrace::new(vec![0.0, 1.0], vec![0.0, f64::NAN], 0.0).is_err());
        assert!(SpectrumTrace::new(vec![], vec![], 0.0).is_err());
        assert!(SpectrumTrace::new(vec![0.0], vec![0.0], -1.0).is_err());
    }

    #[test]
    fn trace_lookup_window_and_nearest() {
        let t = SpectrumTrace::new(
            vec![-19.5e9, -19e9, -0.1e9, 0.0, 0.1e9, 19e9],
            vec![-40.0, -40.0, -10.0, 0.0, -10.0, -30.0],
            0.0,
        )
        .unwrap();
        let r = suppression_from_trace(&t, F, &SidebandLookup::default()).unwrap();
        let carrier = 1.0 + 2.0 * 0.1;
        assert!((r.carrier_power - carrier).abs() < 1e-12);
        assert!((r.worst_first_order_sideband_power - 1e-3).abs() < 1e-15);

        let nearest = suppression_from_trace(&t, F, &SidebandLookup { window_hz: 0.0 }).unwrap();
        assert!((nearest.contrast_dbc + 30.0).abs() < 1e-12);

        let sparse = SpectrumTrace::new(vec![0.0, 19e9], vec![0.0, -30.0], 0.0).unwrap();
        let err = suppression_from_trace(&sparse, F, &SidebandLookup::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedTrace { .. }));
        let err =
            suppression_from_trace(&sparse, F, &SidebandLookup { window_hz: 0.0 }).unwrap_err();
        assert!(matches!(err, Error::MalformedTrace { .. }));
    }

    #[test]
    fn series_zero_delay_trace() {
        let d = drive();
        let t = synthetic_trace(&d, 0.0, 0.0, 0.0, 4).unwrap();
        let rows = analyze_spectra_series(&[t], &d, &SidebandLookup::default()).unwrap();
        assert_eq!(rows[0].tau_s, 0.0);
        assert!(rows[0].at_floor);
    }

    #[test]
    fn series_keeps_uninvertible_traces() {
        let d = drive();
        let traces = [
            trace_with_contrast(F, 0.0, -35.0, 0.0).unwrap(),
            trace_with_contrast(F, 0.0, 20.0, 60.0).unwrap(),
        ];
        let rows = analyze_spectra_series(&traces, &d, &SidebandLookup::default()).unwrap();
        assert!(!rows[0].out_of_range && rows[0].tau_s > 0.0);
        assert!(rows[1].out_of_range && rows[1].tau_s.is_nan());
    }

    #[test]
    fn series_linear_ramp_recovered() {
        let d = drive();
        let traces: Vec<_> = (0..=10)
            .map(|i| {
                let tau = 0.05e-12 * i as f64;
                synthetic_trace(&d, tau, 60.0 * i as f64, 3.0, 4).unwrap()
            })
            .collect();
        let rows = analyze_spectra_series(&traces, &d, &SidebandLookup::default()).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let tau = 0.05e-12 * i as f64;
            assert!(
                (row.tau_s - tau).abs() < 1e-15,
                "{i}: {} vs {tau}",
                row.tau_s
            );
            assert_eq!(row.timestamp_s, 60.0 * i as f64);
        }
    }

    #[test]
    fn series_degradation_grows_monotonically() {
        let d = drive();
        let contrasts = [-42.90, -38.0, -30.0, -25.0, -20.0, -17.36];
        let traces: Vec<_> = contrasts
            .iter()
            .enumerate()
            .map(|(i, &c)| trace_with_contrast(F, -5.0, c, 60.0 * i as f64).unwrap())
            .collect();
        let rows = analyze_spectra_series(&traces, &d, &SidebandLookup::default()).unwrap();
        assert!(rows.windows(2).all(|w| w[1].tau_s > w[0].tau_s));
        for (row, c) in rows.iter().zip(contrasts) {
            assert!((row.contrast_dbc - c).abs() < 1e-9);
        }
    }

    #[test]
    fn series_errors_carry_index() {
        let d = drive();
        let good = synthetic_trace(&d, 0.0, 0.0, 0.0, 2).unwrap();
        let bad = SpectrumTrace::new(vec![0.0], vec![0.0], 1.0).unwrap();
        let err = analyze_spectra_series(&[good.clone(), bad], &d, &SidebandLookup::default())
            .unwrap_err();
        assert!(
            matches!(err, Error::MalformedTrace { index: Some(1), .. }),
            "{err}"
        );
        let mut late = good.clone();
        late.timestamp_s = 5.0;
        assert!(analyze_spectra_series(&[late, good], &d, &SidebandLookup::default()).is_err());
    }
}

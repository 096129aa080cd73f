//! Frequency-bin entangled photon pairs under nonlocal phase modulation, and
//! the simulated joint-spectral-intensity (JSI) measurement.
//!
//! Both arms are indexed by absolute optical frequency on the same comb, so a
//! pair created at signal bin `n` has its idler at bin `−n`. A modulator on
//! each arm acts as `A' = V^s · A · (V^i)^T`.
//!
//! Scan bins are labelled `1..=N` on each axis. Idler labels run downward in
//! frequency so that correlated pairs land on the diagonal of the JSI.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::DelayDistribution;
use crate::error::{Error, Result};
use crate::modeops::{
    eopm_transform, pulse_shaper_transform, FrequencyGrid, ModeTransform, SinusoidDrive,
    TruncationPolicy,
};

const NORM_TOLERANCE: f64 = 1e-10;

/// Joint spectral amplitude over (signal bin, idler bin).
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState {
    pub joint_amplitude: DMatrix<Complex64>,
    pub signal_grid: FrequencyGrid,
    pub idler_grid: FrequencyGrid,
}

impl BiphotonState {
    pub fn new(
        joint_amplitude: DMatrix<Complex64>,
        signal_grid: FrequencyGrid,
        idler_grid: FrequencyGrid,
    ) -> Result<Self> {
        if joint_amplitude.nrows() != signal_grid.num_bins
            || joint_amplitude.ncols() != idler_grid.num_bins
        {
            return Err(Error::GridMismatch(format!(
                "amplitude is {}x{} but grids are {}x{}",
                joint_amplitude.nrows(),
                joint_amplitude.ncols(),
                signal_grid.num_bins,
                idler_grid.num_bins
            )));
        }
        let state = Self {
            joint_amplitude,
            signal_grid,
            idler_grid,
        };
        if state.norm() > 1.0 + NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "joint amplitude norm {} exceeds 1",
                state.norm()
            )));
        }
        Ok(state)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.joint_amplitude
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Amplitude at absolute (signal, idler) indices; zero off-grid.
    pub fn amplitude(&self, signal_index: i64, idler_index: i64) -> Complex64 {
        match (
            self.signal_grid.position(signal_index),
            self.idler_grid.position(idler_index),
        ) {
            (Some(r), Some(c)) => self.joint_amplitude[(r, c)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn intensity(&self, signal_index: i64, idler_index: i64) -> f64 {
        self.amplitude(signal_index, idler_index).norm_sqr()
    }

    /// Applies one mode transform per arm.
    pub fn transformed(&self, signal: &ModeTransform, idler: &ModeTransform) -> Result<Self> {
        if !signal.in_grid.is_compatible(&self.signal_grid)
            || !idler.in_grid.is_compatible(&self.idler_grid)
        {
            return Err(Error::GridMismatch(
                "transform input grids do not match the state grids".into(),
            ));
        }
        Ok(Self {
            joint_amplitude: &signal.matrix * &self.joint_amplitude * idler.matrix.transpose(),
            signal_grid: signal.out_grid,
            idler_grid: idler.out_grid,
        })
    }

    /// Normalized coincidences with the idler filter fixed at `idler_index`,
    /// as `(signal_index + idler_index, fraction)` pairs over the signal grid.
    pub fn conditional_profile(&self, idler_index: i64) -> Result<Vec<(i64, f64)>> {
        let col = self.idler_grid.position(idler_index).ok_or_else(|| {
            Error::InvalidArgument(format!("idler index {idler_index} is off-grid"))
        })?;
        let column: Vec<f64> = self
            .joint_amplitude
            .column(col)
            .iter()
            .map(|z| z.norm_sqr())
            .collect();
        let total: f64 = column.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate(format!(
                "no coincidences at idler index {idler_index}"
            )));
        }
        Ok(self
            .signal_grid
            .indices()
            .zip(column)
            .map(|(s, p)| (s + idler_index, p / total))
            .collect())
    }
}

/// `num_pairs` anticorrelated pairs centred on bin 0 with amplitudes `∝ √w`.
pub fn make_entangled_state(
    num_pairs: usize,
    weights: &[f64],
    bin_spacing_hz: f64,
) -> Result<BiphotonState> {
    if weights.len() != num_pairs {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {num_pairs} pairs",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("weights are all zero".into()));
    }
    let signal_grid = FrequencyGrid::centered(bin_spacing_hz, num_pairs)?;
    let idler_grid = FrequencyGrid::new(bin_spacing_hz, num_pairs, -signal_grid.last_index())?;
    let mut amp = DMatrix::zeros(num_pairs, num_pairs);
    for (r, w) in weights.iter().enumerate() {
        let n = signal_grid.index(r);
        let c = idler_grid.position(-n).expect("mirrored grid");
        amp[(r, c)] = Complex64::new((w / total).sqrt(), 0.0);
    }
    BiphotonState::new(amp, signal_grid, idler_grid)
}

/// Flat state of `num_pairs` pairs.
pub fn make_flat_state(num_pairs: usize, bin_spacing_hz: f64) -> Result<BiphotonState> {
    make_entangled_state(num_pairs, &vec![1.0; num_pairs], bin_spacing_hz)
}

/// Line-by-line filtering of each arm. The result may be sub-normalized.
pub fn apply_shapers(
    state: &BiphotonState,
    signal_mask: &[Complex64],
    idler_mask: &[Complex64],
) -> Result<BiphotonState> {
    let vs = pulse_shaper_transform(signal_mask, &state.signal_grid)?;
    let vi = pulse_shaper_transform(idler_mask, &state.idler_grid)?;
    state.transformed(&vs, &vi)
}

/// Phase modulation of signal and idler by their own drives.
pub fn apply_nonlocal_modulation(
    state: &BiphotonState,
    signal_drive: &SinusoidDrive,
    idler_drive: &SinusoidDrive,
    policy: &TruncationPolicy,
) -> Result<BiphotonState> {
    let vs = eopm_transform(signal_drive, &state.signal_grid, policy)?;
    let vi = eopm_transform(idler_drive, &state.idler_grid, policy)?;
    state.transformed(&vs, &vi)
}

/// Filter-scan geometry of the JSI measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGeometry {
    pub signal_bins: usize,
    pub idler_bins: usize,
    pub bin_width_hz: f64,
    pub bin_spacing_hz: f64,
}

impl Default for ScanGeometry {
    fn default() -> Self {
        Self {
            signal_bins: 9,
            idler_bins: 9,
            bin_width_hz: 12e9,
            bin_spacing_hz: 19e9,
        }
    }
}

impl ScanGeometry {
    /// Absolute signal index scanned at each label position (ascending).
    pub fn signal_indices(&self) -> Vec<i64> {
        let off = -(self.signal_bins as i64 / 2);
        (0..self.signal_bins as i64).map(|k| off + k).collect()
    }

    /// Absolute idler index scanned at each label position (descending, so
    /// label `j` pairs with signal label `j`).
    pub fn idler_indices(&self) -> Vec<i64> {
        let off = -(self.idler_bins as i64 / 2);
        (0..self.idler_bins as i64).map(|k| -(off + k)).collect()
    }
}

/// Detection-side imperfections and source parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    /// Pairs passed by the source-side shaper.
    pub passband_bins: usize,
    /// Fraction of a scanned bin's response leaking into each neighbour.
    pub filter_crosstalk: f64,
    /// Accidental coincidences per bin pair per second.
    pub accidental_rate: f64,
    /// Detected pairs per second.
    pub flux_scale: f64,
    pub scan: ScanGeometry,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self {
            passband_bins: 7,
            filter_crosstalk: 0.02,
            accidental_rate: 1.0,
            flux_scale: 1e3,
            scan: ScanGeometry::default(),
        }
    }
}

impl MeasurementModel {
    /// No crosstalk, no accidentals, unit flux: counts equal `|A|²`.
    pub fn ideal() -> Self {
        Self {
            filter_crosstalk: 0.0,
            accidental_rate: 0.0,
            flux_scale: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.filter_crosstalk) {
            return Err(Error::InvalidArgument(format!(
                "filter crosstalk must lie in [0, 0.5), got {}",
                self.filter_crosstalk
            )));
        }
        if !(self.accidental_rate.is_finite() && self.accidental_rate >= 0.0) {
            return Err(Error::InvalidArgument(
                "accidental rate must be finite and nonnegative".into(),
            ));
        }
        if !(self.flux_scale.is_finite() && self.flux_scale > 0.0) {
            return Err(Error::InvalidArgument("flux scale must be positive".into()));
        }
        if self.passband_bins == 0 || self.scan.signal_bins == 0 || self.scan.idler_bins == 0 {
            return Err(Error::InvalidArgument("bin counts must be positive".into()));
        }
        if !(self.scan.bin_spacing_hz > 0.0 && self.scan.bin_width_hz > 0.0) {
            return Err(Error::InvalidArgument(
                "scan bins need positive width and spacing".into(),
            ));
        }
        Ok(())
    }

    /// Flat entangled state over the source passband.
    pub fn source_state(&self) -> Result<BiphotonState> {
        make_flat_state(self.passband_bins, self.scan.bin_spacing_hz)
    }
}

/// Coincidence counts over the scan grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JsiGrid {
    /// Rows follow signal labels, columns idler labels.
    pub counts: DMatrix<f64>,
    pub bin_width_hz: f64,
    pub bin_spacing_hz: f64,
    pub integration_s: f64,
    pub signal_indices: Vec<i64>,
    pub idler_indices: Vec<i64>,
}

impl JsiGrid {
    pub fn new(
        counts: DMatrix<f64>,
        bin_width_hz: f64,
        bin_spacing_hz: f64,
        integration_s: f64,
        signal_indices: Vec<i64>,
        idler_indices: Vec<i64>,
    ) -> Result<Self> {
        if counts.nrows() != signal_indices.len() || counts.ncols() != idler_indices.len() {
            return Err(Error::GridMismatch(format!(
                "counts are {}x{} but scan is {}x{}",
                counts.nrows(),
                counts.ncols(),
                signal_indices.len(),
                idler_indices.len()
            )));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument(
                "counts must be finite and nonnegative".into(),
            ));
        }
        if !(integration_s.is_finite() && integration_s > 0.0) {
            return Err(Error::InvalidArgument(
                "integration time must be positive".into(),
            ));
        }
        Ok(Self {
            counts,
            bin_width_hz,
            bin_spacing_hz,
            integration_s,
            signal_indices,
            idler_indices,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.counts.shape()
    }

    fn with_counts(&self, counts: DMatrix<f64>) -> Self {
        Self {
            counts,
            bin_width_hz: self.bin_width_hz,
            bin_spacing_hz: self.bin_spacing_hz,
            integration_s: self.integration_s,
            signal_indices: self.signal_indices.clone(),
            idler_indices: self.idler_indices.clone(),
        }
    }
}

/// Expected coincidences for one state.
///
/// Each axis is smeared with the kernel `[χ, 1−2χ, χ]` before scaling by
/// flux and integration time; accidentals add uniformly.
pub fn simulate_jsi(
    state: &BiphotonState,
    model: &MeasurementModel,
    integration_s: f64,
) -> Result<JsiGrid> {
    model.validate()?;
    if !(integration_s.is_finite() && integration_s > 0.0) {
        return Err(Error::InvalidArgument(
            "integration time must be positive".into(),
        ));
    }
    let spacing = model.scan.bin_spacing_hz;
    if !state.signal_grid.same_spacing(spacing) || !state.idler_grid.same_spacing(spacing) {
        return Err(Error::GridMismatch(format!(
            "state spacing {} Hz differs from scan spacing {spacing} Hz",
            state.signal_grid.bin_spacing_hz
        )));
    }
    let chi = model.filter_crosstalk;
    let kernel = [(-1_i64, chi), (0, 1.0 - 2.0 * chi), (1, chi)];
    let sig = model.scan.signal_indices();
    let idl = model.scan.idler_indices();
    let counts = DMatrix::from_fn(sig.len(), idl.len(), |r, c| {
        let mut smeared = 0.0;
        for &(ds, ws) in &kernel {
            for &(di, wi) in &kernel {
                if ws * wi != 0.0 {
                    smeared += ws * wi * state.intensity(sig[r] + ds, idl[c] + di);
                }
            }
        }
        (model.flux_scale * smeared + model.accidental_rate) * integration_s
    });
    JsiGrid::new(
        counts,
        model.scan.bin_width_hz,
        spacing,
        integration_s,
        sig,
        idl,
    )
}

#[allow(clippy::too_many_arguments)]
/// JSI averaged incoherently over a fluctuating relative delay applied to
/// the idler drive.
pub fn drift_averaged_jsi(
    state: &BiphotonState,
    signal_drive: &SinusoidDrive,
    idler_drive: &SinusoidDrive,
    dist: &DelayDistribution,
    model: &MeasurementModel,
    integration_s: f64,
    quad_points: usize,
    policy: &TruncationPolicy,
) -> Result<JsiGrid> {
    let rule = dist.quadrature(idler_drive.period_s(), quad_points)?;
    let vs = eopm_transform(signal_drive, &state.signal_grid, policy)?;
    let vi = eopm_transform(idler_drive, &state.idler_grid, policy)?;
    let omega = idler_drive.angular_frequency();
    let parts: Vec<(f64, JsiGrid)> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&tau, &w)| {
            let shifted = vi.delay_shift(tau, omega)?;
            let out = state.transformed(&vs, &shifted)?;
            Ok((w, simulate_jsi(&out, model, integration_s)?))
        })
        .collect::<Result<_>>()?;
    let mut acc = DMatrix::zeros(parts[0].1.counts.nrows(), parts[0].1.counts.ncols());
    for (w, grid) in &parts {
        acc += &grid.counts * *w;
    }
    Ok(parts[0].1.with_counts(acc))
}

/// Least-squares fit `measured ≈ scale · theory + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub scale: f64,
    pub offset: f64,
    /// Root-mean-square residual over all bin pairs.
    pub rms_residual: f64,
    pub scale_stderr: f64,
    pub offset_stderr: f64,
}

pub fn fit_theory(measured: &JsiGrid, theory: &JsiGrid) -> Result<FitResult> {
    if measured.shape() != theory.shape() {
        return Err(Error::GridMismatch(format!(
            "measured {:?} vs theory {:?}",
            measured.shape(),
            theory.shape()
        )));
    }
    let n = theory.counts.len() as f64;
    let t = theory.counts.as_slice();
    let m = measured.counts.as_slice();
    let mean_t = t.iter().sum::<f64>() / n;
    let mean_m = m.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - mean_t).powi(2)).sum();
    let scale_ref = t.iter().map(|x| x * x).sum::<f64>();
    if !(sxx > 1e-24 * scale_ref) || scale_ref == 0.0 {
        return Err(Error::SingularFit("theory grid is constant".into()));
    }
    let sxy: f64 = t
        .iter()
        .zip(m)
        .map(|(x, y)| (x - mean_t) * (y - mean_m))
        .sum();
    let scale = sxy / sxx;
    let offset = mean_m - scale * mean_t;
    let ssr: f64 = t
        .iter()
        .zip(m)
        .map(|(x, y)| (y - scale * x - offset).powi(2))
        .sum();
    let dof = (n - 2.0).max(1.0);
    let var = ssr / dof;
    Ok(FitResult {
        scale,
        offset,
        rms_residual: (ssr / n).sqrt(),
        scale_stderr: (var / sxx).sqrt(),
        offset_stderr: (var * (1.0 / n + mean_t * mean_t / sxx)).sqrt(),
    })
}

/// Independent Poisson draws per bin pair.
///
/// Bin `(r, c)` draws from its own ChaCha stream `r · ncols + c` under the
/// given seed, so results do not depend on evaluation order.
pub fn sample_counts(expected: &JsiGrid, seed: u64) -> Result<JsiGrid> {
    if expected
        .counts
        .iter()
        .any(|c| !(c.is_finite() && *c >= 0.0))
    {
        return Err(Error::InvalidArgument(
            "expected counts must be finite and nonnegative".into(),
        ));
    }
    let (rows, cols) = expected.shape();
    let draws: Vec<f64> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let lambda = expected.counts[(r, c)];
            if lambda == 0.0 {
                return 0.0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            Poisson::new(lambda)
                .map(|p| p.sample(&mut rng))
                .unwrap_or(lambda)
        })
        .collect();
    Ok(expected.with_counts(DMatrix::from_row_slice(rows, cols, &draws)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_j;

    const F: f64 = 19e9;

    fn drive(depth: f64) -> SinusoidDrive {
        SinusoidDrive::new(F, depth).unwrap()
    }

    fn jsi_matrix(state: &BiphotonState) -> DMatrix<f64> {
        simulate_jsi(state, &MeasurementModel::ideal(), 1.0)
            .unwrap()
            .counts
    }

    #[test]
    fn entangled_state_shapes() {
        let one = make_entangled_state(1, &[2.0], F).unwrap();
        assert_eq!(one.joint_amplitude.shape(), (1, 1));
        assert!((one.amplitude(0, 0).re - 1.0).abs() < 1e-15);

        let seven = make_flat_state(7, F).unwrap();
        for n in -3..=3 {
            assert!((seven.amplitude(n, -n).norm() - 1.0 / 7f64.sqrt()).abs() < 1e-15);
            assert_eq!(seven.amplitude(n, n + 1).norm(), 0.0);
        }
        assert!((seven.norm() - 1.0).abs() < 1e-15);

        let gap = make_entangled_state(3, &[1.0, 0.0, 1.0], F).unwrap();
        let nonzero = gap
            .joint_amplitude
            .iter()
            .filter(|z| z.norm() > 0.0)
            .count();
        assert_eq!(nonzero, 2);
        assert!((gap.norm() - 1.0).abs() < 1e-15);

        assert!(make_entangled_state(3, &[0.0; 3], F).is_err());
        assert!(make_entangled_state(3, &[1.0; 2], F).is_err());
    }

    #[test]
    fn energy_conserving_indices() {
        let s = make_flat_state(6, F).unwrap();
        for (r, n) in s.signal_grid.indices().enumerate() {
            for (c, k) in s.idler_grid.indices().enumerate() {
                if s.joint_amplitude[(r, c)].norm() > 0.0 {
                    assert_eq!(n + k, 0);
                }
            }
        }
    }

    #[test]
    fn unmodulated_drives_leave_state() {
        let s = make_flat_state(7, F).unwrap();
        let p = TruncationPolicy::for_depth(0.0);
        let out = apply_nonlocal_modulation(&s, &drive(0.0), &drive(0.0), &p).unwrap();
        for n in -12..=12 {
            for k in -12..=12 {
                assert!((out.amplitude(n, k) - s.amplitude(n, k)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn modulation_preserves_norm() {
        let s = make_flat_state(7, F).unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let out =
            apply_nonlocal_modulation(&s, &drive(1.42), &drive(0.9).with_phase(0.3), &p).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn drive_mismatch_rejected() {
        let s = make_flat_state(3, F).unwrap();
        let p = TruncationPolicy::for_depth(1.0);
        let off = SinusoidDrive::new(20e9, 1.0).unwrap();
        assert!(apply_nonlocal_modulation(&s, &off, &drive(1.0), &p).is_err());
    }

    #[test]
    fn out_of_phase_cancels_on_wide_source() {
        let s = make_flat_state(41, F).unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let out = apply_nonlocal_modulation(&s, &d, &d.out_of_phase(), &p).unwrap();
        let before = jsi_matrix(&s);
        let after = jsi_matrix(&out);
        assert!((before - after).abs().max() < 1e-8);
    }

    #[test]
    fn in_phase_profile_follows_double_depth_bessel() {
        let s = make_flat_state(41, F).unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let out = apply_nonlocal_modulation(&s, &d, &d, &p).unwrap();
        let profile = out.conditional_profile(0).unwrap();
        for (q, frac) in profile.into_iter().filter(|(q, _)| q.abs() <= 8) {
            let expect = bessel_j(q as i32, 2.84).powi(2);
            assert!((frac - expect).abs() < 1e-8, "q={q}: {frac} vs {expect}");
        }
    }

    #[test]
    fn common_delay_leaves_jsi() {
        let s = make_flat_state(7, F).unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let a = apply_nonlocal_modulation(&s, &d, &d, &p).unwrap();
        let tau = 7.3e-12;
        let b = apply_nonlocal_modulation(&s, &d.with_delay(tau), &d.with_delay(tau), &p).unwrap();
        assert!((jsi_matrix(&a) - jsi_matrix(&b)).abs().max() < 1e-10);
    }

    #[test]
    fn crosstalk_and_accidentals() {
        let s = make_flat_state(7, F).unwrap();
        let clean = simulate_jsi(&s, &MeasurementModel::ideal(), 2.0).unwrap();
        for (r, &n) in clean.signal_indices.iter().enumerate() {
            for (c, &k) in clean.idler_indices.iter().enumerate() {
                assert!((clean.counts[(r, c)] - 2.0 * s.intensity(n, k)).abs() < 1e-15);
            }
        }
        let noisy_model = MeasurementModel {
            filter_crosstalk: 0.0,
            accidental_rate: 1e3,
            flux_scale: 1e4,
            ..MeasurementModel::default()
        };
        let noisy = simulate_jsi(&s, &noisy_model, 2.0).unwrap();
        // off-diagonal bins hold accidentals only
        assert!((noisy.counts[(0, 1)] - 2e3).abs() < 1e-9);
        // crosstalk moves weight off the diagonal but keeps interior totals
        let xt = MeasurementModel {
            filter_crosstalk: 0.1,
            ..MeasurementModel::ideal()
        };
        let smeared = simulate_jsi(&s, &xt, 1.0).unwrap();
        assert!(smeared.counts[(4, 5)] > 0.0);
        // (1−2χ)² on the pair itself plus χ² from each diagonal neighbour
        assert!((smeared.counts[(4, 4)] - 0.66 / 7.0).abs() < 1e-12);
        let bad = MeasurementModel {
            filter_crosstalk: 0.5,
            ..MeasurementModel::ideal()
        };
        assert!(simulate_jsi(&s, &bad, 1.0).is_err());
    }

    #[test]
    fn scan_labels_pair_on_diagonal() {
        let g = ScanGeometry::default();
        let (s, i) = (g.signal_indices(), g.idler_indices());
        assert_eq!(s, (-4..=4).collect::<Vec<_>>());
        assert!(s.iter().zip(&i).all(|(a, b)| a + b == 0));
    }

    #[test]
    fn edge_bins_depleted_out_of_phase() {
        let model = MeasurementModel::ideal();
        let s = model.source_state().unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let out = apply_nonlocal_modulation(&s, &d, &d.out_of_phase(), &p).unwrap();
        let jsi = simulate_jsi(&out, &model, 2.0).unwrap();
        let diag: Vec<f64> = (0..9).map(|k| jsi.counts[(k, k)]).collect();
        for interior in &diag[1..8] {
            assert!(diag[0] < *interior && diag[8] < *interior, "{diag:?}");
        }
    }

    #[test]
    fn fixed_drift_matches_direct() {
        let model = MeasurementModel::default();
        let s = model.source_state().unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let direct = simulate_jsi(
            &apply_nonlocal_modulation(&s, &d, &d, &p).unwrap(),
            &model,
            2.0,
        )
        .unwrap();
        let fixed = drift_averaged_jsi(
            &s,
            &d,
            &d,
            &DelayDistribution::Fixed { value_s: 0.0 },
            &model,
            2.0,
            1,
            &p,
        )
        .unwrap();
        assert!((direct.counts - fixed.counts).abs().max() < 1e-9);
    }

    #[test]
    fn uniform_drift_washes_out_phase() {
        let model = MeasurementModel::default();
        let s = model.source_state().unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let dist = DelayDistribution::UniformOverPeriod { start_s: 0.0 };
        let a = drift_averaged_jsi(&s, &d, &d, &dist, &model, 2.0, 128, &p).unwrap();
        let b = drift_averaged_jsi(&s, &d, &d.out_of_phase(), &dist, &model, 2.0, 128, &p).unwrap();
        assert!((a.counts - b.counts).abs().max() < 1e-6);
    }

    #[test]
    fn narrow_gaussian_is_fixed() {
        let model = MeasurementModel::ideal();
        let s = model.source_state().unwrap();
        let p = TruncationPolicy::for_depth(1.42);
        let d = drive(1.42);
        let tau = 2e-12;
        let fixed = drift_averaged_jsi(
            &s,
            &d,
            &d,
            &DelayDistribution::Fixed { value_s: tau },
            &model,
            1.0,
            1,
            &p,
        )
        .unwrap();
        let gauss = drift_averaged_jsi(
            &s,
            &d,
            &d,
            &DelayDistribution::Gaussian {
                mean_s: tau,
                sigma_s: 1e-18,
            },
            &model,
            1.0,
            64,
            &p,
        )
        .unwrap();
        assert!((fixed.counts - gauss.counts).abs().max() < 1e-9);
    }

    fn grid_from(values: &[f64]) -> JsiGrid {
        let n = (values.len() as f64).sqrt() as usize;
        JsiGrid::new(
            DMatrix::from_row_slice(n, n, values),
            12e9,
            F,
            2.0,
            (0..n as i64).collect(),
            (0..n as i64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn fit_identity_and_affine() {
        let theory = grid_from(&[0.0, 1.0, 4.0, 2.0, 0.5, 3.0, 1.5, 2.5, 0.25]);
        let fit = fit_theory(&theory, &theory).unwrap();
        assert!((fit.scale - 1.0).abs() < 1e-14 && fit.offset.abs() < 1e-14);
        assert!(fit.rms_residual < 1e-14);

        let measured = theory.with_counts(theory.counts.map(|t| 3.0 * t + 7.0));
        let fit = fit_theory(&measured, &theory).unwrap();
        assert!((fit.scale - 3.0).abs() < 1e-13 && (fit.offset - 7.0).abs() < 1e-13);
    }

    #[test]
    fn fit_rejects_constant_theory() {
        let flat = grid_from(&[2.0; 9]);
        assert!(matches!(
            fit_theory(&flat, &flat),
            Err(Error::SingularFit(_))
        ));
        let zero = grid_from(&[0.0; 9]);
        assert!(matches!(
            fit_theory(&flat, &zero),
            Err(Error::SingularFit(_))
        ));
        let small = grid_from(&[1.0; 4]);
        assert!(fit_theory(&small, &flat).is_err());
    }

    #[test]
    fn poisson_zero_and_determinism() {
        let zero = grid_from(&[0.0; 9]);
        assert_eq!(sample_counts(&zero, 1).unwrap().counts, zero.counts);
        let g = grid_from(&[5.0, 10.0, 100.0, 3.0]);
        let a = sample_counts(&g, 42).unwrap();
        let b = sample_counts(&g, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(sample_counts(&g, 43).unwrap().counts, a.counts);
        assert!(a.counts.iter().all(|c| c.fract() == 0.0));
    }

    #[test]
    fn poisson_concentration() {
        let g = grid_from(&[1e6; 81]);
        let mut within = 0;
        let mut total = 0;
        for seed in 0..100 {
            let s = sample_counts(&g, seed).unwrap();
            within += s
                .counts
                .iter()
                .filter(|c| ((*c - 1e6) / 1e6).abs() < 0.01)
                .count();
            total += 81;
        }
        assert!(within as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn poisson_mean_converges() {
        let lambda = 20.0;
        let g = grid_from(&[lambda]);
        let n = 10_000;
        let mean = (0..n)
            .map(|s| sample_counts(&g, s).unwrap().counts[(0, 0)])
            .sum::<f64>()
            / n as f64;
        assert!((mean - lambda).abs() < 3.0 * lambda.sqrt() / (n as f64).sqrt());
    }
}

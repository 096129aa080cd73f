//! Frequency-bin mode transforms for phase modulators and line-by-line pulse
//! shapers.
//!
//! Output bin operators relate to input bin operators through a matrix `V`,
//! `b_m = Σ_n V_mn a_n`, with `m` and `n` absolute bin indices on a comb of
//! spacing `Ω/2π`.
//!
//! Fourier convention: the exponentiated drive phase is expanded as
//! `e^{iφ(t)} = Σ_k c_k e^{−ikΩt}`, so `c_k = (1/T) ∫_T e^{iφ(t)} e^{ikΩt} dt`
//! and a phase modulator acts as `V_mn = c_{m−n}`. For `φ(t) = δ sin Ωt` this
//! gives `c_k = J_{−k}(δ) = (−1)^k J_k(δ)`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special;

/// Samples per RF period used for Fourier coefficients.
pub const PERIOD_SAMPLES: usize = 4096;

/// Default retained-power deficit / coefficient magnitude floor.
pub const DEFAULT_COEFFICIENT_FLOOR: f64 = 1e-10;

const SPACING_RTOL: f64 = 1e-9;

/// An indexed comb of frequency bins.
///
/// Bin `k` (0-based position) carries the absolute index `index_offset + k`
/// and sits `(index_offset + k) · bin_spacing_hz` away from reference bin 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub bin_spacing_hz: f64,
    pub num_bins: usize,
    pub index_offset: i64,
}

impl FrequencyGrid {
    pub fn new(bin_spacing_hz: f64, num_bins: usize, index_offset: i64) -> Result<Self> {
        if !(bin_spacing_hz.is_finite() && bin_spacing_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bin spacing must be positive, got {bin_spacing_hz}"
            )));
        }
        if num_bins == 0 {
            return Err(Error::InvalidArgument("grid needs at least one bin".into()));
        }
        Ok(Self {
            bin_spacing_hz,
            num_bins,
            index_offset,
        })
    }

    /// Grid of `num_bins` bins around reference bin 0. Odd counts are
    /// symmetric; even counts put the extra bin on the negative side.
    pub fn centered(bin_spacing_hz: f64, num_bins: usize) -> Result<Self> {
        Self::new(bin_spacing_hz, num_bins, -(num_bins as i64 / 2))
    }

    pub fn index(&self, position: usize) -> i64 {
        self.index_offset + position as i64
    }

    pub fn first_index(&self) -> i64 {
        self.index_offset
    }

    pub fn last_index(&self) -> i64 {
        self.index_offset + self.num_bins as i64 - 1
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.index_offset..=self.last_index()
    }

    pub fn position(&self, index: i64) -> Option<usize> {
        let p = index - self.index_offset;
        (0..self.num_bins as i64).contains(&p).then_some(p as usize)
    }

    pub fn frequency_offset_hz(&self, position: usize) -> f64 {
        self.index(position) as f64 * self.bin_spacing_hz
    }

    /// The same comb widened by `guard` bins on each side.
    pub fn extended(&self, guard: usize) -> Self {
        Self {
            bin_spacing_hz: self.bin_spacing_hz,
            num_bins: self.num_bins + 2 * guard,
            index_offset: self.index_offset - guard as i64,
        }
    }

    pub fn same_spacing(&self, spacing_hz: f64) -> bool {
        (self.bin_spacing_hz - spacing_hz).abs() <= SPACING_RTOL * spacing_hz.abs()
    }

    pub fn is_compatible(&self, other: &FrequencyGrid) -> bool {
        self.num_bins == other.num_bins
            && self.index_offset == other.index_offset
            && self.same_spacing(other.bin_spacing_hz)
    }
}

/// One sinusoidal RF drive, `φ(t) = δ sin(Ω(t − τ) + ϕ)` with `Ω = 2π f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidDrive {
    pub rf_frequency_hz: f64,
    pub depth_rad: f64,
    pub delay_s: f64,
    pub phase_rad: f64,
}

impl SinusoidDrive {
    pub fn new(rf_frequency_hz: f64, depth_rad: f64) -> Result<Self> {
        if !(rf_frequency_hz.is_finite() && rf_frequency_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "RF frequency must be positive, got {rf_frequency_hz}"
            )));
        }
        if !(depth_rad.is_finite() && depth_rad >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "modulation depth must be nonnegative, got {depth_rad}"
            )));
        }
        Ok(Self {
            rf_frequency_hz,
            depth_rad,
            delay_s: 0.0,
            phase_rad: 0.0,
        })
    }

    pub fn with_delay(mut self, delay_s: f64) -> Self {
        self.delay_s = delay_s;
        self
    }

    pub fn with_phase(mut self, phase_rad: f64) -> Self {
        self.phase_rad = phase_rad;
        self
    }

    /// The 180°-out-of-phase copy: the sinewave shifted by π.
    pub fn out_of_phase(self) -> Self {
        self.with_phase(self.phase_rad + PI)
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU * self.rf_frequency_hz
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.rf_frequency_hz
    }

    /// Drive phase at RF angle `θ = Ωt`.
    pub fn phase_at_angle(&self, theta: f64) -> f64 {
        self.depth_rad * (theta - self.angular_frequency() * self.delay_s + self.phase_rad).sin()
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase_at_angle(self.angular_frequency() * t)
    }
}

/// How many guard bins to keep around a grid when truncating an infinite
/// modulator matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub guard_bins: usize,
    pub coefficient_floor: f64,
}

impl TruncationPolicy {
    pub fn new(guard_bins: usize, coefficient_floor: f64) -> Result<Self> {
        if !(coefficient_floor.is_finite() && coefficient_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coefficient floor must be nonnegative, got {coefficient_floor}"
            )));
        }
        Ok(Self {
            guard_bins,
            coefficient_floor,
        })
    }

    /// Default guard for a sinusoid of peak deviation `depth_rad`: at least
    /// `ceil(δ) + 8`, widened until every dropped Bessel coefficient is below
    /// the default floor.
    pub fn for_depth(depth_rad: f64) -> Self {
        let depth = depth_rad.abs();
        let mut guard = depth.ceil() as usize + 8;
        let probe = bessel_tail_start(depth, DEFAULT_COEFFICIENT_FLOOR);
        guard = guard.max(probe);
        Self {
            guard_bins: guard,
            coefficient_floor: DEFAULT_COEFFICIENT_FLOOR,
        }
    }
}

// smallest g with |J_k(x)| < floor for every k > g
fn bessel_tail_start(x: f64, floor: f64) -> usize {
    let top = (x.ceil() as usize + 40).max(40);
    let j = special::bessel_j_all(top, x);
    let mut g = top;
    while g > 0 && j[g].abs() < floor {
        g -= 1;
    }
    g
}

/// Fourier coefficients `c_{−K} ..= c_{+K}` of `e^{iφ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    max_order: usize,
    values: Vec<Complex64>,
}

impl Coefficients {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `c_k`, zero outside the computed range.
    pub fn get(&self, order: i64) -> Complex64 {
        let k = self.max_order as i64;
        if order.abs() > k {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(order + k) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let k = self.max_order as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, c)| (i as i64 - k, *c))
    }

    /// `Σ_{|k| ≤ order} |c_k|²`.
    pub fn retained_power(&self, order: usize) -> f64 {
        let k = order.min(self.max_order) as i64;
        (-k..=k).map(|o| self.get(o).norm_sqr()).sum()
    }
}

fn inverse_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// Coefficients of `e^{i g(θ)}` over one period of `θ`, via a uniform
/// `PERIOD_SAMPLES`-point transform.
pub(crate) fn exp_phase_coefficients(
    phase: impl Fn(f64) -> f64,
    max_order: usize,
) -> Result<Coefficients> {
    let n = PERIOD_SAMPLES;
    if max_order >= n / 2 {
        return Err(Error::InvalidArgument(format!(
            "max order {max_order} exceeds sampling limit {}",
            n / 2 - 1
        )));
    }
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, phase(TAU * j as f64 / n as f64)))
        .collect();
    // inverse transform: X[k] = Σ_j x_j e^{+2πijk/N}, matching e^{ikΩt}
    inverse_fft(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let k = max_order as i64;
    let values = (-k..=k)
        .map(|o| buf[o.rem_euclid(n as i64) as usize] * scale)
        .collect();
    Ok(Coefficients { max_order, values })
}

/// Fourier coefficients of `e^{iφ(t)}` for one drive, orders `−K ..= K`.
///
/// Fails when the retained power falls short of `1 − DEFAULT_COEFFICIENT_FLOOR`.
pub fn eopm_coefficients(drive: &SinusoidDrive, max_order: usize) -> Result<Coefficients> {
    let coeffs = exp_phase_coefficients(|theta| drive.phase_at_angle(theta), max_order)?;
    check_retained(&coeffs, max_order, DEFAULT_COEFFICIENT_FLOOR)?;
    Ok(coeffs)
}

fn check_retained(coeffs: &Coefficients, order: usize, floor: f64) -> Result<()> {
    let retained = coeffs.retained_power(order);
    let required = 1.0 - floor;
    if retained < required {
        return Err(Error::TruncationInsufficient { retained, required });
    }
    Ok(())
}

/// A truncated mode transformation matrix between two frequency grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    pub matrix: DMatrix<Complex64>,
    pub in_grid: FrequencyGrid,
    pub out_grid: FrequencyGrid,
}

impl ModeTransform {
    pub fn new(
        matrix: DMatrix<Complex64>,
        in_grid: FrequencyGrid,
        out_grid: FrequencyGrid,
    ) -> Result<Self> {
        if matrix.nrows() != out_grid.num_bins || matrix.ncols() != in_grid.num_bins {
            return Err(Error::GridMismatch(format!(
                "matrix is {}x{} but grids are {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                out_grid.num_bins,
                in_grid.num_bins
            )));
        }
        Ok(Self {
            matrix,
            in_grid,
            out_grid,
        })
    }

    pub fn identity(grid: FrequencyGrid) -> Self {
        Self {
            matrix: DMatrix::identity(grid.num_bins, grid.num_bins),
            in_grid: grid,
            out_grid: grid,
        }
    }

    /// Entry by absolute (output, input) bin index; zero off-grid.
    pub fn entry(&self, out_index: i64, in_index: i64) -> Complex64 {
        match (
            self.out_grid.position(out_index),
            self.in_grid.position(in_index),
        ) {
            (Some(r), Some(c)) => self.matrix[(r, c)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.matrix
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    /// Multiplies entry `(m, n)` by `e^{i(m−n)·omega_tau}`.
    pub(crate) fn with_index_phase(&self, omega_tau: f64) -> Self {
        let mut matrix = self.matrix.clone();
        for (c, n) in self.in_grid.indices().enumerate() {
            for (r, m) in self.out_grid.indices().enumerate() {
                matrix[(r, c)] *= Complex64::cis((m - n) as f64 * omega_tau);
            }
        }
        Self {
            matrix,
            in_grid: self.in_grid,
            out_grid: self.out_grid,
        }
    }

    /// Applies an RF delay `τ` to every modulator feeding this transform:
    /// `W̃_mn = e^{i(m−n)Ωτ} W_mn`, with `Ω` in rad/s.
    pub fn delay_shift(&self, tau_s: f64, omega: f64) -> Result<Self> {
        let spacing = omega / TAU;
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "angular frequency must be positive, got {omega}"
            )));
        }
        if !self.in_grid.same_spacing(spacing) || !self.out_grid.same_spacing(spacing) {
            return Err(Error::GridMismatch(format!(
                "grid spacing {} Hz does not match Ω/2π = {spacing} Hz",
                self.in_grid.bin_spacing_hz
            )));
        }
        Ok(self.with_index_phase(omega * tau_s))
    }
}

/// Phase-modulator transform `V_mn = c_{m−n}` on `in_grid`, output widened by
/// the policy's guard bins.
pub fn eopm_transform(
    drive: &SinusoidDrive,
    in_grid: &FrequencyGrid,
    policy: &TruncationPolicy,
) -> Result<ModeTransform> {
    if !in_grid.same_spacing(drive.rf_frequency_hz) {
        return Err(Error::Config(format!(
            "grid spacing {} Hz differs from RF frequency {} Hz",
            in_grid.bin_spacing_hz, drive.rf_frequency_hz
        )));
    }
    let guard = policy.guard_bins;
    let out_grid = in_grid.extended(guard);
    let max_order = in_grid.num_bins - 1 + guard;
    let coeffs = exp_phase_coefficients(|theta| drive.phase_at_angle(theta), max_order)?;
    check_retained(&coeffs, guard, policy.coefficient_floor)?;
    let matrix = DMatrix::from_fn(out_grid.num_bins, in_grid.num_bins, |r, c| {
        coeffs.get(out_grid.index(r) - in_grid.index(c))
    });
    ModeTransform::new(matrix, *in_grid, out_grid)
}

/// Line-by-line pulse shaper: diagonal transform with per-bin transmissions.
pub fn pulse_shaper_transform(mask: &[Complex64], grid: &FrequencyGrid) -> Result<ModeTransform> {
    if mask.len() != grid.num_bins {
        return Err(Error::GridMismatch(format!(
            "mask has {} entries for {} bins",
            mask.len(),
            grid.num_bins
        )));
    }
    if let Some((bin, z)) = mask
        .iter()
        .enumerate()
        .find(|(_, z)| !(z.norm() <= 1.0 + 1e-12))
    {
        return Err(Error::NonphysicalGain {
            bin,
            modulus: z.norm(),
        });
    }
    let matrix = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(mask));
    ModeTransform::new(matrix, *grid, *grid)
}

/// Rectangular passband of width `width_hz` centred `center_offset_hz` from
/// reference bin 0. Bins whose centres fall inside (edges inclusive) pass.
pub fn bandpass_mask(grid: &FrequencyGrid, center_offset_hz: f64, width_hz: f64) -> Vec<Complex64> {
    let half = 0.5 * width_hz * (1.0 + 1e-12);
    (0..grid.num_bins)
        .map(|k| {
            let f = grid.frequency_offset_hz(k) - center_offset_hz;
            if f.abs() <= half {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Quadratic spectral phase `φ_m = β m²` on absolute bin index `m`.
pub fn quadratic_phase_mask(grid: &FrequencyGrid, beta: f64) -> Vec<Complex64> {
    grid.indices()
        .map(|m| Complex64::cis(beta * (m * m) as f64))
        .collect()
}

/// Composes transforms applied in order: `W = V^(Q) ··· V^(1)`.
pub fn cascade(transforms: &[ModeTransform]) -> Result<ModeTransform> {
    let (first, rest) = transforms
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("cascade of zero transforms".into()))?;
    let mut acc = first.clone();
    for (q, stage) in rest.iter().enumerate() {
        if !stage.in_grid.is_compatible(&acc.out_grid) {
            return Err(Error::GridMismatch(format!(
                "stage {} input grid {:?} does not match preceding output grid {:?}",
                q + 1,
                stage.in_grid,
                acc.out_grid
            )));
        }
        acc = ModeTransform {
            matrix: &stage.matrix * &acc.matrix,
            in_grid: acc.in_grid,
            out_grid: stage.out_grid,
        };
    }
    Ok(acc)
}

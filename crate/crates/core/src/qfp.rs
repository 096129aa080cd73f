//! Quantum-frequency-processor gates under RF delay.
//!
//! Delaying the clock of every modulator in a processor by `τ` multiplies
//! gate entry `(m, n)` by `e^{i(m−n)Ωτ}`. Gate quality is scored with the
//! normalized trace overlap `F = |Tr W̃†W|² / (Tr W̃†W̃ · Tr W†W)`; a delay
//! that fluctuates with law `f(τ)` acts as the channel
//! `σ = ∫ dτ f(τ) W̃(τ) ρ W̃†(τ)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::DelayDistribution;
use crate::error::{Error, Result};

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

const SERIES_SWITCH: f64 = 1e-8;
const DELAY_RTOL: f64 = 1e-12;

/// A square gate on `d` frequency bins, indexed `0..d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    pub entries: DMatrix<Complex64>,
}

impl GateMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "gate must be square and nonempty, got {:?}",
                entries.shape()
            )));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `max |W†W − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let g = self.entries.adjoint() * &self.entries;
        (g - DMatrix::<Complex64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Unitary `d`-point DFT, `W_mn = e^{2πi·mn/d} / √d`.
pub fn dft_matrix(d: usize) -> Result<GateMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "DFT dimension must be at least 1".into(),
        ));
    }
    let norm = 1.0 / (d as f64).sqrt();
    GateMatrix::new(DMatrix::from_fn(d, d, |m, n| {
        // reduce mn mod d before scaling to keep the phase exact
        Complex64::from_polar(norm, TAU * ((m * n) % d) as f64 / d as f64)
    }))
}

/// Gate seen through a clock delayed by `omega_tau = Ωτ`.
pub fn shifted_gate(gate: &GateMatrix, omega_tau: f64) -> GateMatrix {
    let d = gate.dim();
    GateMatrix {
        entries: DMatrix::from_fn(d, d, |m, n| {
            gate.entries[(m, n)] * Complex64::cis((m as f64 - n as f64) * omega_tau)
        }),
    }
}

fn trace_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    // Tr(A†B) = Σ conj(a_ij) b_ij
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Normalized trace-overlap fidelity between two gates.
pub fn matrix_fidelity(ideal: &GateMatrix, actual: &GateMatrix) -> Result<f64> {
    if ideal.dim() != actual.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            ideal.dim(),
            actual.dim()
        )));
    }
    let overlap = trace_inner(&actual.entries, &ideal.entries).norm_sqr();
    let na = trace_inner(&actual.entries, &actual.entries).re;
    let ni = trace_inner(&ideal.entries, &ideal.entries).re;
    if !(na > 0.0 && ni > 0.0) {
        return Err(Error::Degenerate("zero-norm gate".into()));
    }
    Ok((overlap / (na * ni)).min(1.0))
}

/// Closed-form DFT fidelity `(sin(dΩτ/2) / (d·sin(Ωτ/2)))⁴`.
///
/// Near `Ωτ ≡ 0 (mod 2π)` the ratio is replaced by its series
/// `1 − (d²−1)ε²/6`, `ε` the distance of `Ωτ/2` from the nearest multiple of π.
pub fn dft_fidelity_closed_form(d: usize, omega_tau: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "DFT dimension must be at least 1".into(),
        ));
    }
    // F has period 2π; reducing to [−π, π) keeps d·x from amplifying
    // rounding near the periodic peaks
    let reduced = (omega_tau + PI).rem_euclid(TAU) - PI;
    let x = 0.5 * reduced;
    let df = d as f64;
    let s = x.sin();
    let ratio = if s.abs() < SERIES_SWITCH {
        let eps = x - PI * (x / PI).round();
        1.0 - (df * df - 1.0) * eps * eps / 6.0
    } else {
        (df * x).sin() / (df * s)
    };
    Ok(ratio.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerableDelay {
    pub tau_s: f64,
    /// The threshold is unreachable on the first lobe; `tau_s` is the lobe edge.
    pub saturated: bool,
}

/// Largest delay keeping the DFT fidelity at or above `threshold` on `[0, τ]`.
pub fn max_tolerable_delay(d: usize, threshold: f64, omega: f64) -> Result<TolerableDelay> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "DFT dimension must be at least 1".into(),
        ));
    }
    if !(threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be below 1, got {threshold}"
        )));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    // F ≡ 1 for d = 1; otherwise the first lobe ends at Ωτ = 2π/d
    let edge = TAU / d as f64;
    if d == 1 || threshold <= 0.0 {
        return Ok(TolerableDelay {
            tau_s: edge / omega,
            saturated: true,
        });
    }
    let (mut lo, mut hi) = (0.0, edge);
    for _ in 0..200 {
        if hi - lo <= DELAY_RTOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if dft_fidelity_closed_form(d, mid)? >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TolerableDelay {
        tau_s: lo / omega,
        saturated: false,
    })
}

/// A qudit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "must be square and nonempty, got {:?}",
                entries.shape()
            )));
        }
        let herm = (&entries - entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(herm <= HERMITIAN_TOLERANCE) {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = entries.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOLERANCE && tr.im.abs() <= TRACE_TOLERANCE) {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} is not 1")));
        }
        let rho = Self { entries };
        let min = rho.min_eigenvalue();
        if !(min >= EIGENVALUE_FLOOR) {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    pub fn pure(state: &[Complex64]) -> Result<Self> {
        let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(state.len(), state.iter().map(|z| z / norm));
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDensityMatrix("dimension 0".into()));
        }
        Self::new(DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        trace_inner(&self.entries, &self.entries).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // symmetrize so the solver sees an exactly Hermitian input
        let h = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Channel of a gate whose clock delay fluctuates with law `dist`.
pub fn drift_channel(
    rho: &DensityMatrix,
    gate: &GateMatrix,
    dist: &DelayDistribution,
    omega: f64,
    quad_points: usize,
) -> Result<DensityMatrix> {
    if rho.dim() != gate.dim() {
        return Err(Error::InvalidArgument(format!(
            "state dimension {} does not match gate dimension {}",
            rho.dim(),
            gate.dim()
        )));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    let rule = dist.quadrature(TAU / omega, quad_points)?;
    let terms: Vec<DMatrix<Complex64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&tau, &w)| {
            let g = shifted_gate(gate, omega * tau).entries;
            (&g * &rho.entries * g.adjoint()) * Complex64::new(w, 0.0)
        })
        .collect();
    let d = rho.dim();
    let sigma = terms
        .into_iter()
        .fold(DMatrix::zeros(d, d), |acc, t| acc + t);
    DensityMatrix::new(sigma)
}

//! Method-of-moments estimates of the beam intensity scale `I₀` and the
//! background density `λ_n` from dedicated calibration slots.

use std::f64::consts::PI;

use crate::error::{ensure_positive, Error, Result};
use crate::model::ArrayGeometry;
use crate::sim::CountFrame;

/// Normalised beam mass captured during calibration when the whole footprint
/// lands on the array.
pub const FULL_CAPTURE_LAMBDA0: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationEstimate {
    pub i0_hat: f64,
    pub lambda_n_hat: f64,
    pub slots_used: usize,
    /// The raw intensity estimate was negative and has been clamped to 0.
    pub clamped: bool,
}

fn frames_total(frames: &[CountFrame], cells: usize) -> Result<f64> {
    let mut total = 0u64;
    for f in frames {
        if f.len() != cells {
            return Err(Error::LengthMismatch {
                expected: cells,
                found: f.len(),
            });
        }
        total += f.total();
    }
    Ok(total as f64)
}

/// `λ̂_n = Σ_i Σ_m z_{m,i} / (|𝒜| N)` over noise-only frames.
pub fn estimate_lambda_n(noise: &[CountFrame], geom: &ArrayGeometry) -> Result<f64> {
    if noise.is_empty() {
        return Err(Error::EmptyInput("no noise-only calibration frames"));
    }
    let total = frames_total(noise, geom.cells())?;
    Ok(total / (geom.array_area() * noise.len() as f64))
}

/// `Î₀ = Σ_i Σ_m z_{m,i} / (Λ₀ N) − λ̂_n |𝒜| / Λ₀`, where the first sum runs
/// over the observed counts of the signal slots.
///
/// Returns the raw (possibly negative) value.
pub fn estimate_i0(
    signal: &[CountFrame],
    noise: &[CountFrame],
    geom: &ArrayGeometry,
    lambda0: f64,
) -> Result<f64> {
    ensure_positive("lambda0", lambda0)?;
    if signal.is_empty() {
        return Err(Error::EmptyInput("no signal calibration frames"));
    }
    if signal.len() != noise.len() {
        return Err(Error::LengthMismatch {
            expected: signal.len(),
            found: noise.len(),
        });
    }
    let lambda_n = estimate_lambda_n(noise, geom)?;
    let total = frames_total(signal, geom.cells())?;
    Ok(total / (lambda0 * signal.len() as f64) - lambda_n * geom.array_area() / lambda0)
}

/// Both estimates; a negative `Î₀` is clamped to zero and flagged.
pub fn calibrate(
    signal: &[CountFrame],
    noise: &[CountFrame],
    geom: &ArrayGeometry,
    lambda0: f64,
) -> Result<CalibrationEstimate> {
    let raw = estimate_i0(signal, noise, geom, lambda0)?;
    let lambda_n_hat = estimate_lambda_n(noise, geom)?;
    Ok(CalibrationEstimate {
        i0_hat: raw.max(0.0),
        lambda_n_hat,
        slots_used: signal.len(),
        clamped: raw < 0.0,
    })
}

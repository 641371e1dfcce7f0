//! Fisher information and Cramér–Rao lower bounds for the beam center.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{axis_first_moments, axis_masses, cell_mean_counts, ArrayGeometry, BeamParams};
use crate::special::normal_interval_mass;

/// `∂Λ_m/∂x₀` and `∂Λ_m/∂y₀` for one cell, in closed form.
///
/// The x-derivative is `(I₀/ρ)·√(2π)·(e^{−u₁²/2} − e^{−u₂²/2})·(Φ(v₂) − Φ(v₁))`
/// with `u`, `v` the cell edges standardised about the beam center.
pub fn cell_gradient_integrals(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    m: usize,
) -> Result<(f64, f64)> {
    let b = geom.cell_bounds(m)?;
    let rho = beam.rho;
    let k = beam.i0 / rho * (2.0 * PI).sqrt();
    let first = |lo: f64, hi: f64, c: f64| {
        let (u1, u2) = ((lo - c) / rho, (hi - c) / rho);
        (-0.5 * u1 * u1).exp() - (-0.5 * u2 * u2).exp()
    };
    let mass = |lo: f64, hi: f64, c: f64| normal_interval_mass((lo - c) / rho, (hi - c) / rho);
    let gx = k * first(b.x1, b.x2, beam.x0) * mass(b.y1, b.y2, beam.y0);
    let gy = k * first(b.y1, b.y2, beam.y0) * mass(b.x1, b.x2, beam.x0);
    Ok((gx, gy))
}

/// Gradient integrals of every cell, in cell-index order.
pub fn cell_gradients(beam: &BeamParams, geom: &ArrayGeometry) -> Vec<(f64, f64)> {
    let edges = geom.edges();
    let mx = axis_masses(&edges, beam.x0, beam.rho);
    let my = axis_masses(&edges, beam.y0, beam.rho);
    let fx = axis_first_moments(&edges, beam.x0, beam.rho);
    let fy = axis_first_moments(&edges, beam.y0, beam.rho);
    let k = beam.i0 / beam.rho * (2.0 * PI).sqrt();
    let mut out = Vec::with_capacity(geom.cells());
    for r in 0..my.len() {
        for c in 0..mx.len() {
            out.push((k * fx[c] * my[r], k * fy[r] * mx[c]));
        }
    }
    out
}

/// Symmetric 2×2 Fisher information matrix of `(x₀, y₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMatrix {
    pub i_xx: f64,
    pub i_yy: f64,
    pub i_xy: f64,
}

impl FisherMatrix {
    pub fn determinant(&self) -> f64 {
        self.i_xx * self.i_yy - self.i_xy * self.i_xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.i_xx + self.i_yy);
        let half_diff = 0.5 * (self.i_xx - self.i_yy);
        let r = half_diff.hypot(self.i_xy);
        (mean - r, mean + r)
    }

    /// Diagonal of the inverse, or an error when the matrix is numerically singular.
    pub fn inverse_diagonal(&self) -> Result<(f64, f64)> {
        let det = self.determinant();
        let scale = self.i_xx * self.i_yy;
        if !(det.is_finite() && det > 0.0 && det > 1e-13 * scale) {
            return Err(Error::SingularModel(format!(
                "Fisher matrix is singular (I_xx={:e}, I_yy={:e}, I_xy={:e})",
                self.i_xx, self.i_yy, self.i_xy
            )));
        }
        Ok((self.i_yy / det, self.i_xx / det))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbResult {
    pub var_x_lb: f64,
    pub var_y_lb: f64,
    pub fisher: FisherMatrix,
}

impl CrlbResult {
    /// Lower bound on the mean-square distance error, `var_x_lb + var_y_lb`.
    pub fn mse_lb(&self) -> f64 {
        self.var_x_lb + self.var_y_lb
    }
}

/// `I_xx = Σ G_x²/Λ_m`, `I_yy = Σ G_y²/Λ_m`, `I_xy = Σ G_x G_y/Λ_m`.
pub fn fisher_matrix(beam: &BeamParams, geom: &ArrayGeometry) -> Result<FisherMatrix> {
    beam.validate()?;
    let lambda = cell_mean_counts(beam, geom);
    let grads = cell_gradients(beam, geom);
    let mut f = FisherMatrix {
        i_xx: 0.0,
        i_yy: 0.0,
        i_xy: 0.0,
    };
    for (m, (&l, &(gx, gy))) in lambda.iter().zip(&grads).enumerate() {
        if l <= 0.0 {
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            return Err(Error::SingularModel(format!(
                "cell {m} has zero mean count; lambda_n > 0 is required"
            )));
        }
        f.i_xx += gx * gx / l;
        f.i_yy += gy * gy / l;
        f.i_xy += gx * gy / l;
    }
    Ok(f)
}

/// Diagonal of the inverse Fisher matrix.
pub fn crlb(beam: &BeamParams, geom: &ArrayGeometry) -> Result<CrlbResult> {
    let fisher = fisher_matrix(beam, geom)?;
    let (var_x_lb, var_y_lb) = fisher.inverse_diagonal()?;
    Ok(CrlbResult {
        var_x_lb,
        var_y_lb,
        fisher,
    })
}

/// High-SNR limit of the per-axis bound, `ρ²/(2πI₀)`.
pub fn crlb_high_snr_limit(i0: f64, rho: f64) -> f64 {
    rho * rho / (2.0 * PI * i0)
}

/// Low-SNR limit of the per-axis bound, `2ρ⁴/(π I₀²/λ_n)`.
pub fn crlb_low_snr_limit(i0: f64, rho: f64, lambda_n: f64) -> f64 {
    2.0 * rho.powi(4) * lambda_n / (PI * i0 * i0)
}

/// Bounds for a list of configurations, evaluated in parallel and returned in
/// input order. Failed rows keep their error.
pub fn crlb_sweep(points: &[(BeamParams, ArrayGeometry)]) -> Vec<Result<CrlbResult>> {
    points.par_iter().map(|(b, g)| crlb(b, g)).collect()
}

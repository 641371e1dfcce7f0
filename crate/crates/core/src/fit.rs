//! Nonlinear least-squares and maximum-likelihood position fits.
//!
//! Both objectives are evaluated through the separable per-axis masses, so one
//! evaluation costs `2(N + 1)` error-function calls plus `M` products.

use std::f64::consts::PI;

use rand::Rng;

use crate::crlb::cell_gradients;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorTag, PositionEstimate};
use crate::ga::{ga_optimize, GaConfig, GaResult, SearchBox};
use crate::model::{axis_masses_into, ArrayGeometry, BeamConstants};
use crate::sim::CountFrame;

/// Observed counts together with the beam constants and geometry the fit
/// treats as known.
#[derive(Debug, Clone)]
pub struct FitProblem {
    counts: Vec<f64>,
    total: f64,
    geom: ArrayGeometry,
    constants: BeamConstants,
    edges: Vec<f64>,
}

impl FitProblem {
    pub fn new(frame: &CountFrame, geom: &ArrayGeometry, constants: &BeamConstants) -> Result<Self> {
        Self::from_counts(
            frame.counts.iter().map(|&z| z as f64).collect(),
            geom,
            constants,
        )
    }

    /// Same as [`FitProblem::new`] but accepts real-valued counts.
    pub fn from_counts(
        counts: Vec<f64>,
        geom: &ArrayGeometry,
        constants: &BeamConstants,
    ) -> Result<Self> {
        if counts.len() != geom.cells() {
            return Err(Error::LengthMismatch {
                expected: geom.cells(),
                found: counts.len(),
            });
        }
        constants.at(0.0, 0.0).validate()?;
        Ok(Self {
            total: counts.iter().sum(),
            counts,
            geom: *geom,
            constants: *constants,
            edges: geom.edges(),
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    // Calls `f(m, Λ_m)` for every cell and returns the captured fractions
    // along x and y.
    fn for_each_mean(&self, x: f64, y: f64, mut f: impl FnMut(usize, f64)) -> (f64, f64) {
        let rho = self.constants.rho;
        let mut mx = Vec::with_capacity(self.edges.len());
        let mut my = Vec::with_capacity(self.edges.len());
        axis_masses_into(&self.edges, x, rho, &mut mx);
        axis_masses_into(&self.edges, y, rho, &mut my);
        let scale = 2.0 * PI * self.constants.i0;
        let background = self.constants.lambda_n * self.geom.cell_area();
        let n = mx.len();
        for (r, &py) in my.iter().enumerate() {
            for (c, &px) in mx.iter().enumerate() {
                f(r * n + c, scale * py * px + background);
            }
        }
        (mx.iter().sum(), my.iter().sum())
    }

    /// `Σ_m (z_m − Λ_m(x, y))²`.
    pub fn nls(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_mean(x, y, |m, l| acc += (self.counts[m] - l).powi(2));
        acc
    }

    /// `Σ_m z_m ln Λ_m(x, y) − (2πI₀ [Φ…][Φ…] + λ_n|𝒜|)` with the capture term
    /// taken over the whole array face. `−∞` when a cell with counts has
    /// zero mean.
    pub fn mle(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let (px, py) = self.for_each_mean(x, y, |m, l| {
            let z = self.counts[m];
            if z > 0.0 {
                acc += z * l.ln();
            }
        });
        acc - (2.0 * PI * self.constants.i0 * px * py
            + self.constants.lambda_n * self.geom.array_area())
    }

    /// Gradient of [`FitProblem::mle`], `Σ_m (z_m/Λ_m − 1) ∂Λ_m/∂(x₀, y₀)`.
    pub fn mle_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let beam = self.constants.at(x, y);
        let grads = cell_gradients(&beam, &self.geom);
        let mut g = (0.0, 0.0);
        self.for_each_mean(x, y, |m, l| {
            let w = if self.counts[m] > 0.0 {
                self.counts[m] / l - 1.0
            } else {
                -1.0
            };
            g.0 += w * grads[m].0;
            g.1 += w * grads[m].1;
        });
        g
    }
}

pub fn nls_objective(
    point: (f64, f64),
    frame: &CountFrame,
    geom: &ArrayGeometry,
    constants: &BeamConstants,
) -> Result<f64> {
    Ok(FitProblem::new(frame, geom, constants)?.nls(point.0, point.1))
}

pub fn mle_objective(
    point: (f64, f64),
    frame: &CountFrame,
    geom: &ArrayGeometry,
    constants: &BeamConstants,
) -> Result<f64> {
    Ok(FitProblem::new(frame, geom, constants)?.mle(point.0, point.1))
}

pub fn mle_gradient(
    point: (f64, f64),
    frame: &CountFrame,
    geom: &ArrayGeometry,
    constants: &BeamConstants,
) -> Result<(f64, f64)> {
    Ok(FitProblem::new(frame, geom, constants)?.mle_gradient(point.0, point.1))
}

fn finish(problem: &FitProblem, r: GaResult, tag: EstimatorTag) -> PositionEstimate {
    PositionEstimate {
        x: r.point.0,
        y: r.point.1,
        tag,
        degenerate: problem.total == 0.0 || problem.constants.i0 == 0.0,
    }
}

/// Least-squares fit over the array face. Frames without counts, or a dark
/// beam, leave the objective uninformative; the result is then flagged.
pub fn estimate_nls<R: Rng + ?Sized>(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    constants: &BeamConstants,
    ga: &GaConfig,
    rng: &mut R,
) -> Result<PositionEstimate> {
    let p = FitProblem::new(frame, geom, constants)?;
    let r = ga_optimize(|x, y| -p.nls(x, y), &SearchBox::array(geom), ga, rng)?;
    Ok(finish(&p, r, EstimatorTag::Nls))
}

/// Maximum-likelihood fit over the array face.
pub fn estimate_mle<R: Rng + ?Sized>(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    constants: &BeamConstants,
    ga: &GaConfig,
    rng: &mut R,
) -> Result<PositionEstimate> {
    let p = FitProblem::new(frame, geom, constants)?;
    let r = ga_optimize(|x, y| p.mle(x, y), &SearchBox::array(geom), ga, rng)?;
    Ok(finish(&p, r, EstimatorTag::Mle))
}

//! Detector-array geometry and the Gaussian-beam photon intensity model.
//!
//! Intensities are stored already scaled to expected photon counts per slot,
//! so a cell's mean count is the integral of the intensity over the cell.
//! [`scaled_intensity_from_power`] is the only place where physical units
//! (watts, seconds, metres of wavelength) enter.

use std::f64::consts::PI;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::special::{normal_interval_mass, std_normal_cdf, std_normal_pdf, std_normal_sf};

/// Planck's constant in J·s.
pub const PLANCK: f64 = 6.626_070_04e-34;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

/// Square array spanning `[-a, a]²`, split into `N × N` equal square cells.
///
/// Cells are indexed row-major from the bottom-left corner: index 0 is the
/// cell touching `(-a, -a)`, index `N - 1` the bottom-right cell, and index
/// `N² - 1` the cell touching `(a, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    half_width: f64,
    cells_per_side: usize,
}

/// Corner coordinates of a cell, `x1 < x2` and `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
}

impl ArrayGeometry {
    pub fn new(half_width: f64, cells_per_side: usize) -> Result<Self> {
        ensure_positive("half_width", half_width)?;
        if cells_per_side == 0 {
            return Err(Error::InvalidParameter {
                name: "cells_per_side",
                value: 0.0,
                reason: "must be a positive integer",
            });
        }
        Ok(Self {
            half_width,
            cells_per_side,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    /// Total number of cells `M = N²`.
    pub fn cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn cell_side(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_side as f64
    }

    /// Area `A` of one cell.
    pub fn cell_area(&self) -> f64 {
        let s = self.cell_side();
        s * s
    }

    /// Area `|𝒜|` of the whole array.
    pub fn array_area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    /// Coordinate of the `i`-th cell edge along one axis, `i = 0..=N`.
    pub fn edge(&self, i: usize) -> f64 {
        let n = self.cells_per_side as f64;
        self.half_width * (2.0 * i as f64 - n) / n
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells_per_side).map(|i| self.edge(i)).collect()
    }

    /// Cell-center coordinates along one axis.
    pub fn axis_centers(&self) -> Vec<f64> {
        let n = self.cells_per_side as f64;
        (0..self.cells_per_side)
            .map(|i| self.half_width * (2.0 * i as f64 + 1.0 - n) / n)
            .collect()
    }

    /// `(column, row)` of cell `m`.
    pub fn cell_position(&self, m: usize) -> (usize, usize) {
        (m % self.cells_per_side, m / self.cells_per_side)
    }

    pub fn cell_index(&self, column: usize, row: usize) -> usize {
        row * self.cells_per_side + column
    }

    fn check_index(&self, m: usize) -> Result<()> {
        if m < self.cells() {
            Ok(())
        } else {
            Err(Error::CellOutOfRange {
                index: m,
                cells: self.cells(),
            })
        }
    }

    pub fn cell_bounds(&self, m: usize) -> Result<CellBounds> {
        self.check_index(m)?;
        let (c, r) = self.cell_position(m);
        Ok(CellBounds {
            x1: self.edge(c),
            x2: self.edge(c + 1),
            y1: self.edge(r),
            y2: self.edge(r + 1),
        })
    }

    pub fn cell_center(&self, m: usize) -> Result<(f64, f64)> {
        self.check_index(m)?;
        let (c, r) = self.cell_position(m);
        let n = self.cells_per_side as f64;
        let a = self.half_width;
        Ok((
            a * (2.0 * c as f64 + 1.0 - n) / n,
            a * (2.0 * r as f64 + 1.0 - n) / n,
        ))
    }

    /// All cell centers in index order.
    pub fn cell_centers(&self) -> Vec<(f64, f64)> {
        let axis = self.axis_centers();
        let mut out = Vec::with_capacity(self.cells());
        for &y in &axis {
            for &x in &axis {
                out.push((x, y));
            }
        }
        out
    }

    /// Whether `(x, y)` lies in the closed array region.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_width && y.abs() <= self.half_width
    }
}

/// Gaussian beam on the array plus a uniform background.
///
/// `i0` is the scaled intensity scale: the beam deposits `2π·i0` expected
/// photons when it is entirely on the array. `lambda_n` is the background in
/// expected photons per square metre per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub i0: f64,
    pub rho: f64,
    pub x0: f64,
    pub y0: f64,
    pub lambda_n: f64,
}

impl BeamParams {
    pub fn new(i0: f64, rho: f64, x0: f64, y0: f64, lambda_n: f64) -> Result<Self> {
        let beam = Self {
            i0,
            rho,
            x0,
            y0,
            lambda_n,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("i0", self.i0)?;
        ensure_positive("rho", self.rho)?;
        ensure_non_negative("lambda_n", self.lambda_n)?;
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "center",
                value: if self.x0.is_finite() { self.y0 } else { self.x0 },
                reason: "beam center must be finite",
            });
        }
        Ok(())
    }

    pub fn with_center(&self, x0: f64, y0: f64) -> Self {
        Self { x0, y0, ..*self }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }
}

/// Beam constants an estimator or receiver treats as known: everything in
/// [`BeamParams`] except the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConstants {
    pub i0: f64,
    pub rho: f64,
    pub lambda_n: f64,
}

impl BeamConstants {
    pub fn new(i0: f64, rho: f64, lambda_n: f64) -> Result<Self> {
        ensure_non_negative("i0", i0)?;
        ensure_positive("rho", rho)?;
        ensure_non_negative("lambda_n", lambda_n)?;
        Ok(Self { i0, rho, lambda_n })
    }

    /// The beam these constants describe, centered at `(x0, y0)`.
    pub fn at(&self, x0: f64, y0: f64) -> BeamParams {
        BeamParams {
            i0: self.i0,
            rho: self.rho,
            x0,
            y0,
            lambda_n: self.lambda_n,
        }
    }
}

impl From<&BeamParams> for BeamConstants {
    fn from(b: &BeamParams) -> Self {
        Self {
            i0: b.i0,
            rho: b.rho,
            lambda_n: b.lambda_n,
        }
    }
}

/// Optical link parameters used to turn watts into photon counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Beam waist ρ₀ in metres.
    pub waist: f64,
    pub wavelength: f64,
    pub distance: f64,
    /// Slot (observation interval) duration in seconds.
    pub slot_duration: f64,
    /// Photoconversion efficiency in (0, 1].
    pub efficiency: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("waist", self.waist)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_non_negative("distance", self.distance)?;
        ensure_positive("slot_duration", self.slot_duration)?;
        ensure_positive("efficiency", self.efficiency)?;
        if self.efficiency > 1.0 {
            return Err(Error::InvalidParameter {
                name: "efficiency",
                value: self.efficiency,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }

    pub fn spot_size(&self) -> Result<f64> {
        spot_size(self.waist, self.wavelength, self.distance)
    }

    /// Expected photons per slot for a given optical power in watts.
    pub fn photons_per_slot(&self, power_watts: f64) -> Result<f64> {
        scaled_intensity_from_power(self, power_watts)
    }
}

/// Gaussian beam radius `ρ(d) = ρ₀ √(1 + (λd / πρ₀²)²)`.
pub fn spot_size(waist: f64, wavelength: f64, distance: f64) -> Result<f64> {
    ensure_positive("waist", waist)?;
    ensure_positive("wavelength", wavelength)?;
    ensure_non_negative("distance", distance)?;
    let r = wavelength * distance / (PI * waist * waist);
    Ok(waist * (1.0 + r * r).sqrt())
}

/// Converts an optical power into an expected photon count per slot:
/// `P · η T_s / (h c / λ)`.
pub fn scaled_intensity_from_power(link: &LinkBudget, power_watts: f64) -> Result<f64> {
    link.validate()?;
    ensure_non_negative("power_watts", power_watts)?;
    let photon_energy = PLANCK * SPEED_OF_LIGHT / link.wavelength;
    Ok(power_watts * link.efficiency * link.slot_duration / photon_energy)
}

/// Builds a beam from optical powers: the signal power maps to the fully
/// captured beam count `2π·I₀`, the noise power to the whole-array background
/// count `λ_n·|𝒜|`.
pub fn beam_from_powers(
    link: &LinkBudget,
    signal_watts: f64,
    noise_watts: f64,
    rho: f64,
    center: (f64, f64),
    geom: &ArrayGeometry,
) -> Result<BeamParams> {
    let signal = scaled_intensity_from_power(link, signal_watts)?;
    let noise = scaled_intensity_from_power(link, noise_watts)?;
    BeamParams::new(
        signal / (2.0 * PI),
        rho,
        center.0,
        center.1,
        noise / geom.array_area(),
    )
}

/// Scaled intensity `I₀/ρ² · exp(−((x−x₀)² + (y−y₀)²) / 2ρ²)` at a point.
pub fn intensity_at(beam: &BeamParams, x: f64, y: f64) -> f64 {
    let r2 = (x - beam.x0).powi(2) + (y - beam.y0).powi(2);
    beam.i0 / (beam.rho * beam.rho) * (-r2 / (2.0 * beam.rho * beam.rho)).exp()
}

/// Φ((e_{i+1} − c)/ρ) − Φ((e_i − c)/ρ) for each interval of an edge list.
pub(crate) fn axis_masses(edges: &[f64], center: f64, rho: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(edges.len().saturating_sub(1));
    axis_masses_into(edges, center, rho, &mut out);
    out
}

/// [`axis_masses`] into a reused buffer, with one error-function call per
/// edge. Each edge keeps the tail on its own side of the center, so the
/// differences below never cancel.
pub(crate) fn axis_masses_into(edges: &[f64], center: f64, rho: f64, out: &mut Vec<f64>) {
    out.clear();
    // (tail mass, edge lies below the center)
    let tail = |e: f64| {
        let u = (e - center) / rho;
        if u < 0.0 {
            (std_normal_cdf(u), true)
        } else {
            (std_normal_sf(u), false)
        }
    };
    let Some(&first) = edges.first() else {
        return;
    };
    let mut prev = tail(first);
    for &e in &edges[1..] {
        let cur = tail(e);
        let mass = match (prev.1, cur.1) {
            (true, true) => cur.0 - prev.0,
            (false, false) => prev.0 - cur.0,
            (true, false) => 1.0 - prev.0 - cur.0,
            (false, true) => 0.0,
        };
        out.push(mass.max(0.0));
        prev = cur;
    }
}

/// exp(−u₁²/2) − exp(−u₂²/2) per interval, `u = (e − c)/ρ`; the first-moment
/// counterpart of [`axis_masses`] (scaled by √(2π)).
pub(crate) fn axis_first_moments(edges: &[f64], center: f64, rho: f64) -> Vec<f64> {
    let root_two_pi = (2.0 * PI).sqrt();
    edges
        .windows(2)
        .map(|w| {
            let u1 = (w[0] - center) / rho;
            let u2 = (w[1] - center) / rho;
            root_two_pi * (std_normal_pdf(u1) - std_normal_pdf(u2))
        })
        .collect()
}

/// Signal part of every cell's mean count, in cell-index order.
pub fn cell_signal_means(beam: &BeamParams, geom: &ArrayGeometry) -> Vec<f64> {
    let edges = geom.edges();
    let mx = axis_masses(&edges, beam.x0, beam.rho);
    let my = axis_masses(&edges, beam.y0, beam.rho);
    let scale = 2.0 * PI * beam.i0;
    let mut out = Vec::with_capacity(geom.cells());
    for &py in &my {
        for &px in &mx {
            out.push(scale * py * px);
        }
    }
    out
}

/// Mean counts `Λ_m` for every cell, in cell-index order.
pub fn cell_mean_counts(beam: &BeamParams, geom: &ArrayGeometry) -> Vec<f64> {
    let background = beam.lambda_n * geom.cell_area();
    cell_signal_means(beam, geom)
        .into_iter()
        .map(|s| s + background)
        .collect()
}

/// Mean count `Λ_m` of a single cell.
pub fn cell_mean_count(beam: &BeamParams, geom: &ArrayGeometry, m: usize) -> Result<f64> {
    let b = geom.cell_bounds(m)?;
    let rho = beam.rho;
    let px = normal_interval_mass((b.x1 - beam.x0) / rho, (b.x2 - beam.x0) / rho);
    let py = normal_interval_mass((b.y1 - beam.y0) / rho, (b.y2 - beam.y0) / rho);
    Ok(2.0 * PI * beam.i0 * py * px + beam.lambda_n * geom.cell_area())
}

/// Signal photons expected on the whole array, `2πI₀` times the captured fraction.
pub fn total_signal_mean(beam: &BeamParams, geom: &ArrayGeometry) -> f64 {
    let a = geom.half_width();
    let rho = beam.rho;
    let px = normal_interval_mass((-a - beam.x0) / rho, (a - beam.x0) / rho);
    let py = normal_interval_mass((-a - beam.y0) / rho, (a - beam.y0) / rho);
    2.0 * PI * beam.i0 * px * py
}

/// Total mean count `Λ_s` over the array, from the whole-array closed form.
pub fn total_mean_count(beam: &BeamParams, geom: &ArrayGeometry) -> f64 {
    total_signal_mean(beam, geom) + beam.lambda_n * geom.array_area()
}

/// Per-cell signal-to-noise ratio `(Λ_m − λ_n A) / (λ_n A)`.
pub fn cell_snr(beam: &BeamParams, geom: &ArrayGeometry, m: usize) -> Result<f64> {
    let noise = beam.lambda_n * geom.cell_area();
    if noise == 0.0 {
        return Err(Error::DivisionByZero("cell SNR requires lambda_n > 0"));
    }
    let lam = cell_mean_count(beam, geom, m)?;
    Ok(((lam - noise) / noise).max(0.0))
}

/// Per-cell SNRs for every cell.
pub fn cell_snrs(beam: &BeamParams, geom: &ArrayGeometry) -> Result<Vec<f64>> {
    let noise = beam.lambda_n * geom.cell_area();
    if noise == 0.0 {
        return Err(Error::DivisionByZero("cell SNR requires lambda_n > 0"));
    }
    Ok(cell_signal_means(beam, geom)
        .into_iter()
        .map(|s| s / noise)
        .collect())
}

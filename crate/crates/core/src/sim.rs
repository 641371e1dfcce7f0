//! Photon-count frames for single slots, PPM symbols and calibration runs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{cell_mean_counts, ArrayGeometry, BeamParams};
use crate::poisson::sample_poisson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    SignalPlusNoise,
    NoiseOnly,
}

/// Photon counts of every cell during one slot, in cell-index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountFrame {
    pub counts: Vec<u64>,
    pub kind: SlotKind,
}

impl CountFrame {
    pub fn new(counts: Vec<u64>, kind: SlotKind) -> Self {
        Self { counts, kind }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// One `order`-PPM symbol: `true_slot` carries the pulse, every other slot
/// only background. Slots are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpmFrame {
    pub order: usize,
    pub true_slot: usize,
    pub slots: Vec<CountFrame>,
}

/// Signal and noise frames from a calibration run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationRun {
    pub signal: Vec<CountFrame>,
    pub noise: Vec<CountFrame>,
}

/// Precomputed per-cell means for repeated sampling under one beam.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    signal_means: Vec<f64>,
    noise_mean: f64,
}

impl FrameSampler {
    pub fn new(beam: &BeamParams, geom: &ArrayGeometry) -> Self {
        Self {
            signal_means: cell_mean_counts(beam, geom),
            noise_mean: beam.lambda_n * geom.cell_area(),
        }
    }

    pub fn cells(&self) -> usize {
        self.signal_means.len()
    }

    /// Mean counts `Λ_m` of a signal-plus-noise slot.
    pub fn means(&self) -> &[f64] {
        &self.signal_means
    }

    pub fn noise_mean(&self) -> f64 {
        self.noise_mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, kind: SlotKind, rng: &mut R) -> CountFrame {
        let counts = match kind {
            SlotKind::SignalPlusNoise => self
                .signal_means
                .iter()
                .map(|&mean| sample_poisson(rng, mean))
                .collect(),
            SlotKind::NoiseOnly => (0..self.cells())
                .map(|_| sample_poisson(rng, self.noise_mean))
                .collect(),
        };
        CountFrame { counts, kind }
    }

    pub fn sample_ppm<R: Rng + ?Sized>(
        &self,
        order: usize,
        true_slot: usize,
        rng: &mut R,
    ) -> Result<PpmFrame> {
        check_ppm(order, true_slot)?;
        let slots = (0..order)
            .map(|s| {
                let kind = if s == true_slot {
                    SlotKind::SignalPlusNoise
                } else {
                    SlotKind::NoiseOnly
                };
                self.sample(kind, rng)
            })
            .collect();
        Ok(PpmFrame {
            order,
            true_slot,
            slots,
        })
    }
}

fn check_ppm(order: usize, true_slot: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidParameter {
            name: "ppm_order",
            value: order as f64,
            reason: "PPM order must be at least 2",
        });
    }
    if true_slot >= order {
        return Err(Error::InvalidSlot {
            slot: true_slot,
            order,
        });
    }
    Ok(())
}

/// Draws one frame; counts are independent Poisson with mean `Λ_m` for a
/// signal slot or `λ_n A` for a noise-only slot.
pub fn sample_frame<R: Rng + ?Sized>(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    kind: SlotKind,
    rng: &mut R,
) -> CountFrame {
    FrameSampler::new(beam, geom).sample(kind, rng)
}

pub fn sample_ppm_frame<R: Rng + ?Sized>(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    order: usize,
    true_slot: usize,
    rng: &mut R,
) -> Result<PpmFrame> {
    FrameSampler::new(beam, geom).sample_ppm(order, true_slot, rng)
}

/// `slots` signal-plus-noise frames followed by `slots` noise-only frames.
pub fn sample_calibration_run<R: Rng + ?Sized>(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    slots: usize,
    rng: &mut R,
) -> Result<CalibrationRun> {
    if slots == 0 {
        return Err(Error::InvalidParameter {
            name: "calibration_slots",
            value: 0.0,
            reason: "at least one slot of each kind is required",
        });
    }
    let sampler = FrameSampler::new(beam, geom);
    let signal = (0..slots)
        .map(|_| sampler.sample(SlotKind::SignalPlusNoise, rng))
        .collect();
    let noise = (0..slots)
        .map(|_| sampler.sample(SlotKind::NoiseOnly, rng))
        .collect();
    Ok(CalibrationRun { signal, noise })
}

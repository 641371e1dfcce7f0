//! Maximum-likelihood PPM reception with weights built from an assumed beam
//! center, and the symbol error probability it achieves.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{cell_signal_means, cell_snrs, ArrayGeometry, BeamConstants, BeamParams};
use crate::rng::{trial_stream, Purpose};
use crate::sim::{CountFrame, FrameSampler, PpmFrame};
use crate::special::std_normal_cdf;

/// Per-cell receiver weights `α_m = ln(1 + SNR_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverWeights {
    pub alpha: Vec<f64>,
    pub assumed_center: (f64, f64),
}

impl ReceiverWeights {
    /// `Σ_m α_m z_m`.
    pub fn score(&self, frame: &CountFrame) -> Result<f64> {
        if frame.len() != self.alpha.len() {
            return Err(Error::LengthMismatch {
                expected: self.alpha.len(),
                found: frame.len(),
            });
        }
        Ok(self
            .alpha
            .iter()
            .zip(&frame.counts)
            .map(|(a, &z)| a * z as f64)
            .sum())
    }
}

pub fn build_weights(
    assumed_center: (f64, f64),
    constants: &BeamConstants,
    geom: &ArrayGeometry,
) -> Result<ReceiverWeights> {
    if !(constants.lambda_n > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda_n",
            value: constants.lambda_n,
            reason: "receiver weights need a positive background rate",
        });
    }
    let beam = constants.at(assumed_center.0, assumed_center.1);
    beam.validate()?;
    let alpha = cell_snrs(&beam, geom)?.into_iter().map(f64::ln_1p).collect();
    Ok(ReceiverWeights {
        alpha,
        assumed_center,
    })
}

/// Index of the slot with the largest weighted count; ties are broken
/// uniformly at random.
pub fn ml_decide<R: Rng + ?Sized>(
    frame: &PpmFrame,
    weights: &ReceiverWeights,
    rng: &mut R,
) -> Result<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut winners = Vec::with_capacity(1);
    for (s, slot) in frame.slots.iter().enumerate() {
        let v = weights.score(slot)?;
        if v > best {
            best = v;
            winners.clear();
            winners.push(s);
        } else if v == best {
            winners.push(s);
        }
    }
    match winners.len() {
        0 => Err(Error::EmptyInput("PPM frame has no slots")),
        1 => Ok(winners[0]),
        n => Ok(winners[rng.random_range(0..n)]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorProbMethod {
    GaussianApprox,
    MonteCarlo,
}

impl ErrorProbMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GaussianApprox => "gaussian_approx",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProbResult {
    pub p_symbol_error: f64,
    /// Mean and deviation of `V = Y₁ − Y₀`; sample moments for Monte Carlo.
    pub mu_v: f64,
    pub sigma_v: f64,
    pub method: ErrorProbMethod,
    pub trials: u64,
    pub errors: u64,
    /// 95% Wilson interval for Monte Carlo, the point value otherwise.
    pub ci: (f64, f64),
}

impl ErrorProbResult {
    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p_symbol_error;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// `(μ_v, σ_v)` of `V = Σ α_m Z_m^{(j)} − Σ α_m Z_m^{(i)}` when photons
/// arrive under `beam_true`.
pub fn v_moments(
    beam_true: &BeamParams,
    weights: &ReceiverWeights,
    geom: &ArrayGeometry,
) -> Result<(f64, f64)> {
    let signal = cell_signal_means(beam_true, geom);
    if signal.len() != weights.alpha.len() {
        return Err(Error::LengthMismatch {
            expected: signal.len(),
            found: weights.alpha.len(),
        });
    }
    let noise = beam_true.lambda_n * geom.cell_area();
    let mut mu = 0.0;
    let mut var = 0.0;
    for (a, s) in weights.alpha.iter().zip(&signal) {
        mu += a * s;
        var += a * a * (s + 2.0 * noise);
    }
    Ok((mu, var.sqrt()))
}

/// `1 − (1 − Φ(−μ_v/σ_v))^{𝓜−1}`.
pub fn symbol_error_from_ratio(ratio: f64, order: usize) -> f64 {
    let pass = 1.0 - std_normal_cdf(-ratio);
    1.0 - pass.powi(order as i32 - 1)
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidParameter {
            name: "ppm_order",
            value: order as f64,
            reason: "PPM order must be at least 2",
        });
    }
    Ok(())
}

pub fn symbol_error_gaussian(
    beam_true: &BeamParams,
    assumed_center: (f64, f64),
    geom: &ArrayGeometry,
    order: usize,
) -> Result<ErrorProbResult> {
    check_order(order)?;
    let weights = build_weights(assumed_center, &BeamConstants::from(beam_true), geom)?;
    let (mu_v, sigma_v) = v_moments(beam_true, &weights, geom)?;
    // all-zero weights score every slot alike, so V is identically zero
    let ratio = if sigma_v > 0.0 {
        mu_v / sigma_v
    } else if mu_v == 0.0 {
        0.0
    } else {
        return Err(Error::DivisionByZero("sigma_v is zero"));
    };
    let p = symbol_error_from_ratio(ratio, order);
    Ok(ErrorProbResult {
        p_symbol_error: p,
        mu_v,
        sigma_v,
        method: ErrorProbMethod::GaussianApprox,
        trials: 0,
        errors: 0,
        ci: (p, p),
    })
}

/// Outcome of one simulated symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolOutcome {
    pub correct: bool,
    /// `Y₁ − Y₀` against the slot right after the pulse.
    pub v: f64,
}

/// Sends one symbol with the pulse in a uniformly drawn slot and decodes it.
pub fn simulate_symbol<R: Rng + ?Sized>(
    sampler: &FrameSampler,
    weights: &ReceiverWeights,
    order: usize,
    rng: &mut R,
) -> Result<SymbolOutcome> {
    let j = rng.random_range(0..order);
    let frame = sampler.sample_ppm(order, j, rng)?;
    let decided = ml_decide(&frame, weights, rng)?;
    let v = weights.score(&frame.slots[j])? - weights.score(&frame.slots[(j + 1) % order])?;
    Ok(SymbolOutcome {
        correct: decided == j,
        v,
    })
}

/// 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let d = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / d;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / d;
    ((c - h).max(0.0), (c + h).min(1.0))
}

/// Monte Carlo symbol error rate. Trial `t` draws from its own substream of
/// `seed`, so the result does not depend on the thread count.
pub fn symbol_error_mc(
    beam_true: &BeamParams,
    assumed_center: (f64, f64),
    geom: &ArrayGeometry,
    order: usize,
    trials: u64,
    seed: u64,
) -> Result<ErrorProbResult> {
    check_order(order)?;
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: 0.0,
            reason: "at least one trial is required",
        });
    }
    let weights = build_weights(assumed_center, &BeamConstants::from(beam_true), geom)?;
    let sampler = FrameSampler::new(beam_true, geom);
    let outcomes: Vec<SymbolOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_stream(seed, t, 0, Purpose::PpmSymbol);
            simulate_symbol(&sampler, &weights, order, &mut rng)
        })
        .collect::<Result<_>>()?;
    let errors = outcomes.iter().filter(|o| !o.correct).count() as u64;
    let n = trials as f64;
    let mu_v = outcomes.iter().map(|o| o.v).sum::<f64>() / n;
    let var = if trials > 1 {
        outcomes.iter().map(|o| (o.v - mu_v).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(ErrorProbResult {
        p_symbol_error: errors as f64 / n,
        mu_v,
        sigma_v: var.sqrt(),
        method: ErrorProbMethod::MonteCarlo,
        trials,
        errors,
        ci: wilson_interval(errors, trials),
    })
}

/// `μ_v/σ_v` over a square grid of assumed centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    /// Grid coordinates, shared by both axes.
    pub axis: Vec<f64>,
    /// `values[row * axis.len() + col]` is the ratio at `(axis[col], axis[row])`.
    pub values: Vec<f64>,
    pub argmax: (f64, f64),
    pub max_value: f64,
}

impl Landscape {
    pub fn step(&self) -> f64 {
        if self.axis.len() < 2 {
            0.0
        } else {
            self.axis[1] - self.axis[0]
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.axis.len() + col]
    }
}

/// Evaluates `μ_v/σ_v` with weights built at each of `points × points`
/// assumed centers spanning `[−a, a]²`, photons arriving under `beam_true`.
pub fn snr_ratio_landscape(
    beam_true: &BeamParams,
    geom: &ArrayGeometry,
    points: usize,
) -> Result<Landscape> {
    if points < 2 {
        return Err(Error::InvalidParameter {
            name: "landscape.points",
            value: points as f64,
            reason: "grid needs at least 2 points per side",
        });
    }
    let a = geom.half_width();
    let axis: Vec<f64> = (0..points)
        .map(|i| -a + 2.0 * a * i as f64 / (points - 1) as f64)
        .collect();
    let constants = BeamConstants::from(beam_true);
    let values: Vec<f64> = (0..points * points)
        .into_par_iter()
        .map(|k| {
            let center = (axis[k % points], axis[k / points]);
            let w = build_weights(center, &constants, geom)?;
            let (mu, sigma) = v_moments(beam_true, &w, geom)?;
            Ok(if sigma > 0.0 { mu / sigma } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v > values[b] { k } else { b });
    Ok(Landscape {
        argmax: (axis[best % points], axis[best / points]),
        max_value: values[best],
        axis,
        values,
    })
}

//! Closed-form, low-complexity beam-position estimators.
//!
//! All of them are simple transformations of a count frame. Frames with no
//! usable counts do not fail: they yield the array center with
//! `degenerate = true`, so Monte Carlo loops can count them and move on.

use std::fmt;
use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;

use crate::error::{ensure_positive, Error, Result};
use crate::model::{total_mean_count, ArrayGeometry, BeamConstants};
use crate::sim::CountFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorTag {
    Mdc,
    Centroid,
    Auc,
    Ace1,
    Ace2,
    Nls,
    Mle,
}

impl EstimatorTag {
    pub const ALL: [EstimatorTag; 7] = [
        EstimatorTag::Mdc,
        EstimatorTag::Centroid,
        EstimatorTag::Auc,
        EstimatorTag::Ace1,
        EstimatorTag::Ace2,
        EstimatorTag::Nls,
        EstimatorTag::Mle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorTag::Mdc => "mdc",
            EstimatorTag::Centroid => "centroid",
            EstimatorTag::Auc => "auc",
            EstimatorTag::Ace1 => "ace1",
            EstimatorTag::Ace2 => "ace2",
            EstimatorTag::Nls => "nls",
            EstimatorTag::Mle => "mle",
        }
    }

    /// Whether the estimator needs a numerical optimizer.
    pub fn is_high_complexity(&self) -> bool {
        matches!(self, EstimatorTag::Nls | EstimatorTag::Mle)
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        EstimatorTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown estimator `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub x: f64,
    pub y: f64,
    pub tag: EstimatorTag,
    /// No counts were available and the array center was returned.
    pub degenerate: bool,
}

impl PositionEstimate {
    fn degenerate(tag: EstimatorTag) -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            tag,
            degenerate: true,
        }
    }

    pub fn squared_error(&self, x0: f64, y0: f64) -> f64 {
        (self.x - x0).powi(2) + (self.y - y0).powi(2)
    }
}

/// Parameters of the adaptive centroid estimators: the count exponent `n` and,
/// for ACE2, how many of the largest counts take part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AceParams {
    pub power: f64,
    pub top: usize,
}

impl AceParams {
    pub fn new(power: f64, top: usize) -> Result<Self> {
        let p = Self { power, top };
        p.validate_power()?;
        if top == 0 {
            return Err(Error::InvalidParameter {
                name: "ace.top",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(p)
    }

    fn validate_power(&self) -> Result<()> {
        if self.power.is_finite() && self.power >= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "ace.power",
                value: self.power,
                reason: "must be finite and >= 1",
            })
        }
    }
}

fn check_frame(frame: &CountFrame, geom: &ArrayGeometry) -> Result<()> {
    if frame.len() == geom.cells() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: geom.cells(),
            found: frame.len(),
        })
    }
}

// Weighted mean of cell centers, summed in cell-index order. `None` when the
// weights sum to zero.
fn weighted_center(
    geom: &ArrayGeometry,
    mut weight: impl FnMut(usize) -> f64,
) -> Option<(f64, f64)> {
    let axis = geom.axis_centers();
    let n = geom.cells_per_side();
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (r, &y) in axis.iter().enumerate() {
        for (c, &x) in axis.iter().enumerate() {
            let w = weight(r * n + c);
            sw += w;
            sx += w * x;
            sy += w * y;
        }
    }
    (sw > 0.0).then(|| (sx / sw, sy / sw))
}

/// Maximum detector count: the center of the cell holding the largest count,
/// ties broken uniformly at random with `rng`.
pub fn estimate_mdc<R: Rng + ?Sized>(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    rng: &mut R,
) -> Result<PositionEstimate> {
    check_frame(frame, geom)?;
    let max = frame.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Ok(PositionEstimate::degenerate(EstimatorTag::Mdc));
    }
    let winners: Vec<usize> = frame
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &z)| z == max)
        .map(|(m, _)| m)
        .collect();
    let m = if winners.len() == 1 {
        winners[0]
    } else {
        winners[rng.random_range(0..winners.len())]
    };
    let (x, y) = geom.cell_center(m)?;
    Ok(PositionEstimate {
        x,
        y,
        tag: EstimatorTag::Mdc,
        degenerate: false,
    })
}

/// Count-weighted mean of the cell centers.
pub fn estimate_centroid(frame: &CountFrame, geom: &ArrayGeometry) -> Result<PositionEstimate> {
    check_frame(frame, geom)?;
    Ok(
        match weighted_center(geom, |m| frame.counts[m] as f64) {
            Some((x, y)) => PositionEstimate {
                x,
                y,
                tag: EstimatorTag::Centroid,
                degenerate: false,
            },
            None => PositionEstimate::degenerate(EstimatorTag::Centroid),
        },
    )
}

/// Scaling factor `𝒦 = Λ_s / (2πI₀)` of the asymptotically unbiased centroid.
///
/// The beam center is unknown to the estimator, so `Λ_s` is evaluated with the
/// beam at the array center, which is full capture whenever `ρ ≪ a`.
pub fn auc_scale_factor(constants: &BeamConstants, geom: &ArrayGeometry) -> Result<f64> {
    ensure_positive("i0", constants.i0)?;
    let total = total_mean_count(&constants.at(0.0, 0.0), geom);
    Ok(total / (2.0 * PI * constants.i0))
}

/// Centroid scaled by `𝒦`.
pub fn estimate_auc(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    constants: &BeamConstants,
) -> Result<PositionEstimate> {
    let k = auc_scale_factor(constants, geom)?;
    estimate_auc_with_factor(frame, geom, k)
}

/// AUC with a precomputed `𝒦`, for loops over many frames.
pub fn estimate_auc_with_factor(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    factor: f64,
) -> Result<PositionEstimate> {
    let c = estimate_centroid(frame, geom)?;
    Ok(PositionEstimate {
        x: factor * c.x,
        y: factor * c.y,
        tag: EstimatorTag::Auc,
        degenerate: c.degenerate,
    })
}

// z^n, normalised by the largest count so large n cannot overflow. The ratio
// is unchanged by the normalisation; n = 1 keeps raw counts so ACE1 and the
// centroid agree bit for bit.
fn power_weight(z: u64, max: u64, power: f64) -> f64 {
    if power == 1.0 {
        z as f64
    } else {
        (z as f64 / max as f64).powf(power)
    }
}

/// Adaptive centroid 1: centers weighted by `Z_m^n`.
pub fn estimate_ace1(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    params: &AceParams,
) -> Result<PositionEstimate> {
    check_frame(frame, geom)?;
    params.validate_power()?;
    let max = frame.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Ok(PositionEstimate::degenerate(EstimatorTag::Ace1));
    }
    let (x, y) = weighted_center(geom, |m| power_weight(frame.counts[m], max, params.power))
        .expect("positive max count gives positive weight");
    Ok(PositionEstimate {
        x,
        y,
        tag: EstimatorTag::Ace1,
        degenerate: false,
    })
}

/// Indices of the `top` largest counts; equal counts at the cut are taken in
/// ascending cell order.
pub fn top_cells(frame: &CountFrame, top: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frame.len()).collect();
    order.sort_by(|&a, &b| frame.counts[b].cmp(&frame.counts[a]).then(a.cmp(&b)));
    order.truncate(top);
    order
}

/// Adaptive centroid 2: ACE1 restricted to the `top` largest counts, each
/// count keeping its own cell's coordinates.
pub fn estimate_ace2(
    frame: &CountFrame,
    geom: &ArrayGeometry,
    params: &AceParams,
) -> Result<PositionEstimate> {
    check_frame(frame, geom)?;
    params.validate_power()?;
    if params.top == 0 || params.top > geom.cells() {
        return Err(Error::InvalidParameter {
            name: "ace.top",
            value: params.top as f64,
            reason: "must lie in 1..=M",
        });
    }
    let mut selected = vec![false; geom.cells()];
    for m in top_cells(frame, params.top) {
        selected[m] = true;
    }
    let max = frame.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Ok(PositionEstimate::degenerate(EstimatorTag::Ace2));
    }
    let center = weighted_center(geom, |m| {
        if selected[m] {
            power_weight(frame.counts[m], max, params.power)
        } else {
            0.0
        }
    });
    Ok(match center {
        Some((x, y)) => PositionEstimate {
            x,
            y,
            tag: EstimatorTag::Ace2,
            degenerate: false,
        },
        None => PositionEstimate::degenerate(EstimatorTag::Ace2),
    })
}

//! Series expressions for the MSE and bias of the MDC, centroid and AUC
//! estimators, with explicit truncation and the realized tail bounds.

use crate::error::{ensure_positive, Error, Result};
use crate::estimators::auc_scale_factor;
use crate::model::{cell_mean_counts, ArrayGeometry, BeamConstants, BeamParams};
use crate::special::{ln_gamma, ln_poisson_pmf, ln_poisson_upper_tail, regularized_gamma_q};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Tail budget of the truncated Poisson sums.
    pub epsilon0: f64,
    /// Largest tie multiplicity kept in the MDC cell probabilities.
    pub k_max: usize,
    /// Multiplier on the computed summation limits, for truncation audits.
    pub eta_scale: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            epsilon0: 1e-5,
            k_max: 2,
            eta_scale: 1.0,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(Error::InvalidParameter {
                name: "truncation.epsilon0",
                value: self.epsilon0,
                reason: "must lie in (0, 1)",
            });
        }
        if self.k_max == 0 {
            return Err(Error::InvalidParameter {
                name: "truncation.k_max",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if !(self.eta_scale >= 1.0 && self.eta_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "truncation.eta_scale",
                value: self.eta_scale,
                reason: "must be finite and >= 1",
            });
        }
        Ok(())
    }
}

/// Smallest `η ≥ ⌈mean⌉` with `ln P(Z ≥ η) < ln_budget` for `Z ~ Poisson(mean)`.
pub fn poisson_truncation_point(mean: f64, ln_budget: f64) -> u64 {
    let start = mean.ceil().max(1.0) as u64;
    let below = |k: u64| ln_poisson_upper_tail(k, mean) < ln_budget;
    if below(start) {
        return start;
    }
    let mut lo = start;
    let mut hi = start.max(1) * 2;
    while !below(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn scaled_eta(eta: u64, policy: &TruncationPolicy) -> u64 {
    (eta as f64 * policy.eta_scale).ceil() as u64
}

/// Cell probabilities of the MDC estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MdcProbabilities {
    /// `Σ_{k ≤ K_max} P_{k,m}` per cell.
    pub per_cell: Vec<f64>,
    /// `by_multiplicity[k−1][m] = P_{k,m}`.
    pub by_multiplicity: Vec<Vec<f64>>,
    /// Probability of an all-zero frame, for which the estimate is the array center.
    pub zero_frame: f64,
    /// Upper summation limit `η_m` (exclusive).
    pub eta: u64,
    /// `P(Poisson(Λ_u) ≥ η)`; may underflow to zero.
    pub tail_bound: f64,
    /// `1 − Σ_m per_cell[m] − zero_frame`: mass lost to truncation.
    pub completeness_gap: f64,
}

// Coefficients of Π (q_i + t p_i) truncated to degree < k.
fn poly_mul_linear(poly: &mut [f64], q: f64, p: f64) {
    for j in (0..poly.len()).rev() {
        let lower = if j > 0 { poly[j - 1] } else { 0.0 };
        poly[j] = poly[j] * q + lower * p;
    }
}

fn poly_mul_truncated(a: &[f64], b: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..=j).map(|i| a[i] * b[j - i]).sum();
    }
}

/// `P_{k,m}` for every cell and `k ≤ K_max`.
///
/// `P_{k,m}` is the probability that cell `m` holds the largest count together
/// with exactly `k − 1` other cells and wins the uniform tie-break:
/// `Σ_z pmf_m(z) · e_{k−1}(z) / k`, where `e_j(z)` sums, over unordered sets
/// of `j` other cells, their pmfs at `z` times `Q(z, Λ_i)` for the rest. The
/// sets are enumerated through the generating polynomial `Π_{i≠m}(Q_i + t·p_i)`.
pub fn mdc_cell_probabilities(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    policy: &TruncationPolicy,
) -> Result<MdcProbabilities> {
    beam.validate()?;
    mdc_probabilities_from_means(&cell_mean_counts(beam, geom), policy)
}

/// The same series for an arbitrary vector of cell means `Λ_m`.
pub fn mdc_probabilities_from_means(
    lambda: &[f64],
    policy: &TruncationPolicy,
) -> Result<MdcProbabilities> {
    policy.validate()?;
    if lambda.is_empty() {
        return Err(Error::EmptyInput("no cell means"));
    }
    if let Some(&bad) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "cell mean",
            value: bad,
            reason: "must be finite and >= 0",
        });
    }
    let cells = lambda.len();
    let k_max = policy.k_max.min(cells);
    let lambda_u = lambda.iter().cloned().fold(0.0, f64::max);
    let lambda_s: f64 = lambda.iter().sum();

    let ln_budget = policy.epsilon0.ln() - ln_gamma(cells as f64 + 1.0);
    let eta = scaled_eta(poisson_truncation_point(lambda_u, ln_budget), policy);
    let tail_bound = ln_poisson_upper_tail(eta, lambda_u).exp();

    let mut by_k = vec![vec![0.0; cells]; k_max];
    let mut p = vec![0.0; cells];
    let mut q = vec![0.0; cells];
    let mut prefix = vec![vec![0.0; k_max]; cells + 1];
    let mut suffix = vec![vec![0.0; k_max]; cells + 1];
    let mut others = vec![0.0; k_max];
    for z in 1..eta {
        let mut any = false;
        for i in 0..cells {
            p[i] = ln_poisson_pmf(z, lambda[i]).exp();
            q[i] = regularized_gamma_q(z as f64, lambda[i]);
            any |= p[i] > 0.0;
        }
        if !any && z as f64 > lambda_u {
            break;
        }
        prefix[0].fill(0.0);
        prefix[0][0] = 1.0;
        for i in 0..cells {
            let (head, tail) = prefix.split_at_mut(i + 1);
            tail[0].copy_from_slice(&head[i]);
            poly_mul_linear(&mut tail[0], q[i], p[i]);
        }
        suffix[cells].fill(0.0);
        suffix[cells][0] = 1.0;
        for i in (0..cells).rev() {
            let (head, tail) = suffix.split_at_mut(i + 1);
            head[i].copy_from_slice(&tail[0]);
            poly_mul_linear(&mut head[i], q[i], p[i]);
        }
        for m in 0..cells {
            if p[m] == 0.0 {
                continue;
            }
            poly_mul_truncated(&prefix[m], &suffix[m + 1], &mut others);
            for (j, c) in others.iter().enumerate() {
                by_k[j][m] += p[m] * c / (j + 1) as f64;
            }
        }
    }

    let per_cell: Vec<f64> = (0..cells).map(|m| by_k.iter().map(|v| v[m]).sum()).collect();
    let zero_frame = (-lambda_s).exp();
    let completeness_gap = 1.0 - per_cell.iter().sum::<f64>() - zero_frame;
    Ok(MdcProbabilities {
        per_cell,
        by_multiplicity: by_k,
        zero_frame,
        eta,
        tail_bound,
        completeness_gap,
    })
}

/// Probability that the MDC estimate is the center of cell `m`.
pub fn mdc_cell_probability(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    m: usize,
    policy: &TruncationPolicy,
) -> Result<f64> {
    geom.cell_bounds(m)?;
    Ok(mdc_cell_probabilities(beam, geom, policy)?.per_cell[m])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBias {
    /// `E[(x̂ − x₀)² + (ŷ − y₀)²]`.
    pub mse: f64,
    pub bias_x: f64,
    pub bias_y: f64,
    /// Upper summation limit of the series (exclusive).
    pub eta: u64,
    /// Probability mass beyond the truncation point.
    pub tail_bound: f64,
    /// Probability mass not accounted for by the series.
    pub completeness_gap: f64,
}

impl MseBias {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }
}

pub fn mdc_mse_bias(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    policy: &TruncationPolicy,
) -> Result<MseBias> {
    let probs = mdc_cell_probabilities(beam, geom, policy)?;
    let (x0, y0) = beam.center();
    let mut mse = probs.zero_frame * (x0 * x0 + y0 * y0);
    let mut ex = 0.0;
    let mut ey = 0.0;
    for (m, &pm) in probs.per_cell.iter().enumerate() {
        let (xm, ym) = geom.cell_center(m)?;
        mse += pm * ((xm - x0).powi(2) + (ym - y0).powi(2));
        ex += pm * xm;
        ey += pm * ym;
    }
    // the all-zero frame contributes an estimate of (0, 0)
    let covered = 1.0 - probs.completeness_gap;
    Ok(MseBias {
        mse,
        bias_x: ex - covered * x0,
        bias_y: ey - covered * y0,
        eta: probs.eta,
        tail_bound: probs.tail_bound,
        completeness_gap: probs.completeness_gap,
    })
}

/// Moments of the counts given the frame total `Z_s = z_s`, under which the
/// counts are multinomial with cell probabilities `p_m = Λ_m / Λ_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidMoments {
    pub zs: u64,
    pub p: Vec<f64>,
    centers: Vec<(f64, f64)>,
}

impl CentroidMoments {
    /// `E[Z_m | z_s] = z_s p_m`.
    pub fn mean_count(&self, m: usize) -> f64 {
        self.zs as f64 * self.p[m]
    }

    /// `E[Z_m² | z_s] = z_s p_m (1 − p_m) + (z_s p_m)²`.
    pub fn second_moment(&self, m: usize) -> f64 {
        let z = self.zs as f64;
        z * self.p[m] * (1.0 - self.p[m]) + (z * self.p[m]).powi(2)
    }

    /// `E[Z_m Z_n | z_s] = z_s (z_s − 1) p_m p_n` for `m ≠ n`.
    pub fn cross_moment(&self, m: usize, n: usize) -> f64 {
        if m == n {
            return self.second_moment(m);
        }
        let z = self.zs as f64;
        z * (z - 1.0) * self.p[m] * self.p[n]
    }

    /// `E[x̂ | z_s]` and `E[ŷ | z_s]` for `z_s ≥ 1`.
    pub fn mean_estimate(&self) -> (f64, f64) {
        let mut mx = 0.0;
        let mut my = 0.0;
        for (&pm, &(x, y)) in self.p.iter().zip(&self.centers) {
            mx += pm * x;
            my += pm * y;
        }
        (mx, my)
    }

    /// `Var[x̂ | z_s]` and `Var[ŷ | z_s]` for `z_s ≥ 1`: `(Σ x_m² p_m − μ_x²)/z_s`.
    pub fn estimate_variance(&self) -> (f64, f64) {
        if self.zs == 0 {
            return (0.0, 0.0);
        }
        let (mx, my) = self.mean_estimate();
        let mut sx = 0.0;
        let mut sy = 0.0;
        for (&pm, &(x, y)) in self.p.iter().zip(&self.centers) {
            sx += pm * (x - mx).powi(2);
            sy += pm * (y - my).powi(2);
        }
        let z = self.zs as f64;
        (sx / z, sy / z)
    }
}

pub fn centroid_moments(beam: &BeamParams, geom: &ArrayGeometry, zs: u64) -> CentroidMoments {
    let lambda = cell_mean_counts(beam, geom);
    let total: f64 = lambda.iter().sum();
    let p = if total > 0.0 {
        lambda.iter().map(|l| l / total).collect()
    } else {
        vec![0.0; lambda.len()]
    };
    CentroidMoments {
        zs,
        p,
        centers: geom.cell_centers(),
    }
}

/// MSE and bias of the centroid, or of the AUC estimator when `scaled_by_k`.
///
/// Given `z_s ≥ 1` the centroid has mean `μ = Σ (x_m, y_m) p_m` and variance
/// `σ²/z_s`; AUC multiplies both the mean and the deviation by `𝒦`. The outer
/// sum over `z_s` stops where the `Poisson(Λ_s)` tail drops below `ε₀`; an
/// empty frame yields the array center.
pub fn centroid_mse_bias(
    beam: &BeamParams,
    geom: &ArrayGeometry,
    policy: &TruncationPolicy,
    scaled_by_k: bool,
) -> Result<MseBias> {
    beam.validate()?;
    policy.validate()?;
    let k = if scaled_by_k {
        auc_scale_factor(&BeamConstants::from(beam), geom)?
    } else {
        1.0
    };
    let lambda_s: f64 = cell_mean_counts(beam, geom).iter().sum();
    ensure_positive("total mean count", lambda_s)?;
    let moments = centroid_moments(beam, geom, 1);
    let (mx, my) = moments.mean_estimate();
    let (vx, vy) = moments.estimate_variance();
    let (x0, y0) = beam.center();

    let eta = scaled_eta(poisson_truncation_point(lambda_s, policy.epsilon0.ln()), policy);
    let tail_bound = ln_poisson_upper_tail(eta, lambda_s).exp();
    let p0 = (-lambda_s).exp();
    let mut inv_z = 0.0;
    let mut nonzero = 0.0;
    for z in 1..eta {
        let pz = ln_poisson_pmf(z, lambda_s).exp();
        inv_z += pz / z as f64;
        nonzero += pz;
    }
    let spread = k * k * (vx + vy);
    let offset = (k * mx - x0).powi(2) + (k * my - y0).powi(2);
    let mse = spread * inv_z + offset * nonzero + p0 * (x0 * x0 + y0 * y0);
    let covered = nonzero + p0;
    Ok(MseBias {
        mse,
        bias_x: nonzero * k * mx - covered * x0,
        bias_y: nonzero * k * my - covered * y0,
        eta,
        tail_bound,
        completeness_gap: 1.0 - covered,
    })
}

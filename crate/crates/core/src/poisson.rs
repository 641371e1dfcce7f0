//! Poisson variate generation.

use rand::Rng;

use crate::special::ln_gamma;

const INVERSION_LIMIT: f64 = 10.0;

/// Draws one Poisson(`mean`) variate.
///
/// Sequential-search inversion below a mean of 10, Hörmann's transformed
/// rejection with squeeze (PTRS) above it.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean >= 0.0 && mean.is_finite());
    if mean <= 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        inversion(rng, mean)
    } else {
        ptrs(rng, mean)
    }
}

fn inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        // rounding can leave cdf a hair below u; the remaining mass is < 1e-15
        if p < 1e-300 && k as f64 > mean {
            break;
        }
    }
    k
}

fn ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

//! Scalar special functions: the standard normal distribution, the
//! regularized incomplete gamma functions and Poisson tail masses.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Standard normal distribution function Φ(x).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x), computed without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ(hi) − Φ(lo) for lo ≤ hi.
///
/// Picks the tail on the side of the interval so that the difference of two
/// numbers close to one never appears.
pub fn normal_interval_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        std_normal_sf(lo) - std_normal_sf(hi)
    } else if hi <= 0.0 {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    } else {
        1.0 - std_normal_cdf(lo) - std_normal_sf(hi)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// ln P(Z = k) for Z ~ Poisson(mean).
pub fn ln_poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let k = k as f64;
    k * mean.ln() - mean - ln_gamma(k + 1.0)
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    ln_poisson_pmf(k, mean).exp()
}

fn ln_prefactor(a: f64, x: f64) -> f64 {
    -x + a * x.ln() - ln_gamma(a)
}

// Series for P(a, x); converges quickly for x < a + 1. Returns ln P.
fn ln_gamma_p_series(a: f64, x: f64) -> f64 {
    let mut denom = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum.ln() + ln_prefactor(a, x)
}

// Modified Lentz continued fraction for Q(a, x); used for x ≥ a + 1. Returns ln Q.
fn ln_gamma_q_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h.ln() + ln_prefactor(a, x)
}

/// Regularized lower incomplete gamma P(a, x) = γ(a, x)/Γ(a), for a > 0, x ≥ 0.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        0.0
    } else if x < a + 1.0 {
        ln_gamma_p_series(a, x).exp()
    } else {
        1.0 - ln_gamma_q_fraction(a, x).exp()
    }
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a), for a > 0, x ≥ 0.
///
/// For a positive integer `a = z`, `Q(z, Λ)` is the Poisson distribution
/// function `P(Z ≤ z − 1)` with `Z ~ Poisson(Λ)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - ln_gamma_p_series(a, x).exp()
    } else {
        ln_gamma_q_fraction(a, x).exp()
    }
}

/// ln P(Z ≥ k) for Z ~ Poisson(mean). Accurate deep into the tail.
pub fn ln_poisson_upper_tail(k: u64, mean: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if mean == 0.0 {
        return f64::NEG_INFINITY;
    }
    let a = k as f64;
    if mean < a + 1.0 {
        ln_gamma_p_series(a, mean)
    } else {
        (-ln_gamma_q_fraction(a, mean).exp()).ln_1p()
    }
}

/// ln P(Z < k) for Z ~ Poisson(mean).
pub fn ln_poisson_lower_tail(k: u64, mean: f64) -> f64 {
    if k == 0 {
        return f64::NEG_INFINITY;
    }
    if mean == 0.0 {
        return 0.0;
    }
    let a = k as f64;
    if mean < a + 1.0 {
        (-ln_gamma_p_series(a, mean).exp()).ln_1p()
    } else {
        ln_gamma_q_fraction(a, mean)
    }
}

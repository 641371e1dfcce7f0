//! Test oracles shared by the integration tests.
#![allow(dead_code)]

use beamtrack::model::{ArrayGeometry, BeamParams};

// 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights, with the
// embedded 7-point Gauss weights on the odd-indexed nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

// (integral, error estimate, roundoff floor)
fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WK[7];
    let mut g = fc * WG[3];
    let mut l1 = fc.abs() * WK[7];
    for i in 0..7 {
        let (lo, hi) = (f(c - h * XK[i]), f(c + h * XK[i]));
        let s = lo + hi;
        k += WK[i] * s;
        l1 += WK[i] * (lo.abs() + hi.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs(), 50.0 * f64::EPSILON * l1 * h.abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    fn rec(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, whole: (f64, f64, f64), abs: f64, depth: u32) -> f64 {
        // a sign-changing integrand can cancel below what rounding resolves
        if whole.1 <= abs.max(whole.2) || depth == 0 {
            return whole.0;
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        rec(f, a, m, l, 0.5 * abs, depth - 1) + rec(f, m, b, r, 0.5 * abs, depth - 1)
    }
    // resolve narrow peaks before trusting the error estimate
    let pieces = 8;
    let w = (b - a) / pieces as f64;
    let parts: Vec<(f64, f64, (f64, f64, f64))> = (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * w;
            let hi = if i + 1 == pieces { b } else { lo + w };
            (lo, hi, gk15(f, lo, hi))
        })
        .collect();
    let scale: f64 = parts.iter().map(|p| p.2 .0.abs()).sum::<f64>().max(1e-300);
    parts
        .into_iter()
        .map(|(lo, hi, est)| rec(f, lo, hi, est, rel * scale / pieces as f64, 40))
        .sum()
}

// The beam factorises, so each cell integral is a product of 1D integrals.
fn axis_integral(b: &BeamParams, lo: f64, hi: f64, center: f64, moment: bool) -> f64 {
    let r2 = b.rho * b.rho;
    let mut f = |t: f64| {
        let e = (-(t - center).powi(2) / (2.0 * r2)).exp();
        if moment { e * (t - center) / r2 } else { e }
    };
    integrate(&mut f, lo, hi, 1e-13)
}

/// Mean count of cell `m` by quadrature of the intensity plus background.
pub fn quad_mean_count(b: &BeamParams, g: &ArrayGeometry, m: usize) -> f64 {
    let c = g.cell_bounds(m).unwrap();
    let px = axis_integral(b, c.x1, c.x2, b.x0, false);
    let py = axis_integral(b, c.y1, c.y2, b.y0, false);
    b.i0 / (b.rho * b.rho) * px * py + b.lambda_n * (c.x2 - c.x1) * (c.y2 - c.y1)
}

/// `(∂Λ_m/∂x₀, ∂Λ_m/∂y₀)` by quadrature of the differentiated intensity.
pub fn quad_gradient(b: &BeamParams, g: &ArrayGeometry, m: usize) -> (f64, f64) {
    let c = g.cell_bounds(m).unwrap();
    let k = b.i0 / (b.rho * b.rho);
    let px = axis_integral(b, c.x1, c.x2, b.x0, false);
    let py = axis_integral(b, c.y1, c.y2, b.y0, false);
    let mx = axis_integral(b, c.x1, c.x2, b.x0, true);
    let my = axis_integral(b, c.y1, c.y2, b.y0, true);
    (k * mx * py, k * px * my)
}

/// Fisher information `[I_xx, I_yy, I_xy]` from quadrature means and gradients.
pub fn quad_fisher(b: &BeamParams, g: &ArrayGeometry) -> [f64; 3] {
    let mut out = [0.0; 3];
    for m in 0..g.cells() {
        let lam = quad_mean_count(b, g, m);
        let (gx, gy) = quad_gradient(b, g, m);
        if lam > 0.0 {
            out[0] += gx * gx / lam;
            out[1] += gy * gy / lam;
            out[2] += gx * gy / lam;
        }
    }
    out
}

/// `‖a − b‖ / ‖b‖`.
pub fn normwise_rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 { num } else { num / den }
}

/// Sample mean and standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

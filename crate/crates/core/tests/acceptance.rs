// Acceptance checks, one line of output per criterion. Set ACCEPTANCE_ONLY to
// a comma-separated list of numbers to run a subset.

mod common;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use beamtrack::analytic::{
    mdc_probabilities_from_means, TruncationPolicy,
};
use beamtrack::crlb::{cell_gradients, crlb, crlb_high_snr_limit, crlb_low_snr_limit, fisher_matrix};
use beamtrack::detection::{build_weights, simulate_symbol, snr_ratio_landscape, v_moments};
use beamtrack::estimators::{
    auc_scale_factor, estimate_ace1, estimate_ace2, estimate_auc_with_factor, estimate_centroid,
    AceParams,
};
use beamtrack::harness::{parse_config, run_experiment, run_experiment_with_threads, to_csv, ExperimentConfig, SweepResult};
use beamtrack::harness::config::SweepVariable;
use beamtrack::harness::runner::resolve_point;
use beamtrack::model::{cell_mean_counts, ArrayGeometry, BeamConstants, BeamParams};
use beamtrack::rng::{substream, trial_stream, Purpose};
use beamtrack::sim::{sample_frame, FrameSampler, SlotKind};
use common::{normwise_rel, quad_fisher, quad_gradient, quad_mean_count};
use rand::Rng;

type Outcome = Result<String, String>;

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    match parse_config(&text) {
        Ok(p) => p.config,
        Err(errs) => panic!("{name}: {errs:?}"),
    }
}

fn shipped_configs() -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".cfg"))
        .collect();
    names.sort();
    names
}

fn run(cfg: &ExperimentConfig) -> Result<SweepResult, String> {
    let r = run_experiment(cfg);
    if r.failures.is_empty() {
        Ok(r)
    } else {
        Err(format!("failed points: {:?}", r.failures))
    }
}

// (estimator, metric, sweep value, series value) -> (value, stderr)
type Table = HashMap<(String, String, u64, u64), (f64, f64)>;

fn key_bits(v: Option<f64>) -> u64 {
    v.map(f64::to_bits).unwrap_or(0)
}

fn table(r: &SweepResult) -> Table {
    r.rows
        .iter()
        .map(|row| {
            (
                (row.estimator.clone(), row.metric.clone(), key_bits(row.sweep_value), key_bits(row.series_value)),
                (row.value, row.stderr),
            )
        })
        .collect()
}

fn get(t: &Table, est: &str, metric: &str, sweep: Option<f64>, series: Option<f64>) -> Result<(f64, f64), String> {
    t.get(&(est.to_string(), metric.to_string(), key_bits(sweep), key_bits(series)))
        .copied()
        .ok_or_else(|| format!("missing row {est}/{metric} at {sweep:?}/{series:?}"))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn criterion_1() -> Outcome {
    let mut rng = substream(101, &[]);
    let (mut worst_lam, mut worst_grad, mut worst_fisher) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let a = rng.random_range(0.5..2.0);
        let n = rng.random_range(1..=8usize);
        let g = ArrayGeometry::new(a, n).unwrap();
        let b = BeamParams::new(
            rng.random_range(0.1..100.0),
            a * rng.random_range(0.05..1.0),
            a * rng.random_range(-1.2..1.2),
            a * rng.random_range(-1.2..1.2),
            rng.random_range(0.001..10.0),
        )
        .unwrap();
        let lam = cell_mean_counts(&b, &g);
        let grads = cell_gradients(&b, &g);
        let (mut cg, mut qg) = (Vec::new(), Vec::new());
        for m in 0..g.cells() {
            let q = quad_mean_count(&b, &g, m);
            worst_lam = worst_lam.max((lam[m] - q).abs() / q);
            let (qx, qy) = quad_gradient(&b, &g, m);
            qg.extend([qx, qy]);
            cg.extend([grads[m].0, grads[m].1]);
        }
        worst_grad = worst_grad.max(normwise_rel(&cg, &qg));
        let f = fisher_matrix(&b, &g).map_err(|e| e.to_string())?;
        worst_fisher = worst_fisher.max(normwise_rel(&[f.i_xx, f.i_yy, f.i_xy], &quad_fisher(&b, &g)));
    }
    check(
        worst_lam <= 1e-6 && worst_grad <= 1e-6 && worst_fisher <= 1e-6,
        format!("max rel error: counts {worst_lam:.2e}, gradient {worst_grad:.2e}, Fisher {worst_fisher:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let (i0, rho) = (100.0, 0.2);
    let g = ArrayGeometry::new(1.0, 128).unwrap();
    let c = crlb(&BeamParams::new(i0, rho, 0.0, 0.0, 1e-12).unwrap(), &g).map_err(|e| e.to_string())?;
    let limit = crlb_high_snr_limit(i0, rho);
    let rel = (c.var_x_lb - limit).abs() / limit;
    check(rel <= 0.02, format!("var_x_lb {:.6e} vs {limit:.6e}, rel {rel:.2e}", c.var_x_lb))
}

fn criterion_3() -> Outcome {
    let (i0, rho, ln) = (1.0, 0.2, 1e4);
    let g = ArrayGeometry::new(1.0, 128).unwrap();
    let b = BeamParams::new(i0, rho, 0.0, 0.0, ln).unwrap();
    // every cell must be noise dominated for the limit to apply
    let peak_signal = i0 * g.cell_area();
    let noise = ln * g.cell_area();
    let c = crlb(&b, &g).map_err(|e| e.to_string())?;
    let limit = crlb_low_snr_limit(i0, rho, ln);
    let rel = (c.var_x_lb - limit).abs() / limit;
    check(
        rel <= 0.05 && peak_signal < 1e-3 * noise,
        format!("var_x_lb {:.6e} vs {limit:.6e}, rel {rel:.2e}", c.var_x_lb),
    )
}

fn criterion_4() -> Outcome {
    let noise_cfg = config("fig4a.cfg");
    let noise_t = table(&run(&noise_cfg)?);
    let series: Vec<f64> = noise_cfg.series.as_ref().unwrap().values.clone();
    let noise: Vec<f64> = noise_cfg.sweep.as_ref().unwrap().values.clone();
    let mut problems = Vec::new();
    let mut worst_ratio = 0.0f64;
    for &n in &series {
        let c: Vec<f64> = noise
            .iter()
            .map(|&p| get(&noise_t, "", "mse_lb", Some(p), Some(n)).map(|v| v.0))
            .collect::<Result<_, _>>()?;
        if !c.windows(2).all(|w| w[1] > w[0]) {
            problems.push(format!("not increasing in noise for N={n}"));
        }
    }
    for &p in &noise {
        let c: Vec<f64> = series
            .iter()
            .map(|&n| get(&noise_t, "", "mse_lb", Some(p), Some(n)).map(|v| v.0))
            .collect::<Result<_, _>>()?;
        let gains: Vec<f64> = (0..series.len() - 1)
            .map(|k| (c[k] - c[k + 1]) / (series[k + 1].powi(2) - series[k].powi(2)))
            .collect();
        if !gains.iter().all(|&g| g > 0.0) || !gains.windows(2).all(|w| w[1] < w[0]) {
            problems.push(format!("per-cell gain not diminishing at noise {p}: {gains:?}"));
        }
        for w in gains.windows(2) {
            worst_ratio = worst_ratio.max(w[1] / w[0]);
        }
    }

    let mut rho_cfg = config("fig4b.cfg");
    let grid: Vec<f64> = (0..197).map(|i| 0.01 + 0.0025 * i as f64).collect();
    rho_cfg.sweep.as_mut().unwrap().values = grid.clone();
    let rho_t = table(&run(&rho_cfg)?);
    let mut optimum = Vec::new();
    for &n in &rho_cfg.series.as_ref().unwrap().values {
        let c: Vec<f64> = grid
            .iter()
            .map(|&r| get(&rho_t, "", "mse_lb", Some(r), Some(n)).map(|v| v.0))
            .collect::<Result<_, _>>()?;
        let k = (0..c.len()).min_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap();
        if k == 0 || k == c.len() - 1 {
            problems.push(format!("no interior minimum in rho for N={n}"));
        }
        optimum.push((n, grid[k]));
    }
    let at = |n: f64| optimum.iter().find(|o| o.0 == n).map(|o| o.1);
    match (at(4.0), at(8.0)) {
        (Some(r16), Some(r64)) if r64 < r16 => {}
        other => problems.push(format!("rho*(64) not below rho*(16): {other:?}")),
    }
    let summary = format!(
        "largest successive gain ratio {worst_ratio:.3}; rho* {}",
        optimum.iter().map(|(n, r)| format!("M={}:{r:.4}", n * n)).collect::<Vec<_>>().join(" ")
    );
    if problems.is_empty() { Ok(summary) } else { Err(format!("{summary}; {}", problems.join("; "))) }
}

fn criterion_5() -> Outcome {
    let mut cfg = config("fig1.cfg");
    cfg.trials = 100_000;
    cfg.estimators = vec!["mdc".parse().unwrap(), "centroid".parse().unwrap(), "auc".parse().unwrap()];
    let t = table(&run(&cfg)?);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut gap = 0.0f64;
    for &p in &cfg.sweep.as_ref().unwrap().values {
        for est in ["mdc", "centroid", "auc"] {
            for metric in ["mse", "bias_x", "bias_y"] {
                let (mc, se) = get(&t, est, metric, Some(p), None)?;
                let (an, _) = get(&t, est, &format!("{metric}_analytic"), Some(p), None)?;
                let z = (mc - an).abs() / se;
                if z > worst.0 {
                    worst = (z, format!("{est} {metric} at noise {p}: mc {mc:.5e} analytic {an:.5e}"));
                }
            }
            gap = gap.max(get(&t, est, "completeness_gap", Some(p), None)?.0);
        }
    }
    check(
        worst.0 <= 3.0,
        format!("largest deviation {:.2} SE ({}); largest completeness gap {gap:.2e}", worst.0, worst.1),
    )
}

fn poisson_pmf(mean: f64, z: u64) -> f64 {
    if mean == 0.0 {
        return if z == 0 { 1.0 } else { 0.0 };
    }
    (z as f64 * mean.ln() - mean - libm::lgamma(z as f64 + 1.0)).exp()
}

// P(MDC picks cell m) by summing over every count vector with counts <= limit.
fn enumerate_mdc(lambda: &[f64], limit: u64) -> (Vec<f64>, f64) {
    let m = lambda.len();
    let pmf: Vec<Vec<f64>> = lambda.iter().map(|&l| (0..=limit).map(|z| poisson_pmf(l, z)).collect()).collect();
    let mut per_cell = vec![0.0; m];
    let mut zero = 0.0;
    let mut counts = vec![0u64; m];
    loop {
        let p: f64 = counts.iter().enumerate().map(|(i, &z)| pmf[i][z as usize]).product();
        let max = *counts.iter().max().unwrap();
        if max == 0 {
            zero += p;
        } else {
            let ties: Vec<usize> = (0..m).filter(|&i| counts[i] == max).collect();
            for &i in &ties {
                per_cell[i] += p / ties.len() as f64;
            }
        }
        let mut i = 0;
        loop {
            if i == m {
                return (per_cell, zero);
            }
            counts[i] += 1;
            if counts[i] <= limit {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}

fn criterion_6() -> Outcome {
    let mut rng = substream(106, &[]);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for cells in [2usize, 3] {
        for _ in 0..6 {
            let lambda: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..3.0)).collect();
            let policy = TruncationPolicy { epsilon0: 1e-10, k_max: cells, eta_scale: 1.0 };
            let series = mdc_probabilities_from_means(&lambda, &policy).map_err(|e| e.to_string())?;
            let (exact, zero) = enumerate_mdc(&lambda, 60);
            for (a, b) in series.per_cell.iter().zip(&exact) {
                worst = worst.max((a - b).abs());
            }
            worst = worst.max((series.zero_frame - zero).abs());
            cases += 1;
        }
    }
    check(worst <= 1e-6, format!("{cases} cases, max abs difference {worst:.2e}"))
}

fn auc_and_centroid_bias(n: usize, trials: u64) -> ((f64, f64), (f64, f64)) {
    let g = ArrayGeometry::new(1.0, n).unwrap();
    let (x0, y0) = (0.3, -0.2);
    let constants = BeamConstants::new(500.0 / (2.0 * std::f64::consts::PI), 0.05, 50.0 / g.array_area()).unwrap();
    let b = constants.at(x0, y0);
    let k = auc_scale_factor(&constants, &g).unwrap();
    let sampler = FrameSampler::new(&b, &g);
    let (mut ax, mut ay, mut cx, mut cy) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..trials {
        let mut rng = trial_stream(107 + n as u64, t, 0, Purpose::TrackingFrame);
        let f = sampler.sample(SlotKind::SignalPlusNoise, &mut rng);
        let c = estimate_centroid(&f, &g).unwrap();
        let a = estimate_auc_with_factor(&f, &g, k).unwrap();
        ax += a.x - x0;
        ay += a.y - y0;
        cx += c.x - x0;
        cy += c.y - y0;
    }
    let n = trials as f64;
    ((ax / n, ay / n), (cx / n, cy / n))
}

fn criterion_7() -> Outcome {
    let trials = 20_000;
    let mut auc = Vec::new();
    let mut detail = Vec::new();
    let mut centroid_at_4096 = 0.0;
    for n in [4usize, 16, 64] {
        let (a, c) = auc_and_centroid_bias(n, trials);
        let (am, cm) = (a.0.hypot(a.1), c.0.hypot(c.1));
        detail.push(format!("M={}: |auc| {am:.3e} |centroid| {cm:.3e}", n * n));
        auc.push(am);
        centroid_at_4096 = cm;
    }
    let ok = auc[2] < centroid_at_4096 && auc.windows(2).all(|w| w[1] < w[0]);
    check(ok, detail.join(", "))
}

fn criterion_8() -> Outcome {
    let cfg = config("fig1.cfg");
    let ace = AceParams::new(2.0, 1).unwrap();
    let mut rms = Vec::new();
    for n in [4usize, 16, 32] {
        let point = resolve_point(&cfg, &[(SweepVariable::CellsPerSide, n as f64), (SweepVariable::NoisePowerUw, 1.0)])
            .map_err(|e| e.to_string())?;
        let b = point.tracking.at(0.4, 0.4);
        let sampler = FrameSampler::new(&b, &point.geom);
        let trials = 5000;
        let mut acc = 0.0;
        for t in 0..trials {
            let mut rng = trial_stream(108, t, 0, Purpose::TrackingFrame);
            let f = sampler.sample(SlotKind::SignalPlusNoise, &mut rng);
            let c = estimate_centroid(&f, &point.geom).unwrap();
            let a = estimate_ace1(&f, &point.geom, &ace).unwrap();
            acc += (a.x - c.x).powi(2) + (a.y - c.y).powi(2);
        }
        rms.push((acc / trials as f64).sqrt());
    }
    let g = ArrayGeometry::new(1.0, 2).unwrap();
    let b = BeamParams::new(5.0, 0.4, 0.2, -0.3, 0.5).unwrap();
    let full = AceParams::new(2.0, 4).unwrap();
    let mut mismatches = 0;
    for t in 0..10_000 {
        let mut rng = trial_stream(208, t, 0, Purpose::TrackingFrame);
        let f = sample_frame(&b, &g, SlotKind::SignalPlusNoise, &mut rng);
        let a1 = estimate_ace1(&f, &g, &full).unwrap();
        let a2 = estimate_ace2(&f, &g, &full).unwrap();
        if (a1.x, a1.y, a1.degenerate) != (a2.x, a2.y, a2.degenerate) {
            mismatches += 1;
        }
    }
    check(
        rms.windows(2).all(|w| w[1] < w[0]) && mismatches == 0,
        format!(
            "RMS(ace1 - centroid) M=16 {:.4e}, M=256 {:.4e}, M=1024 {:.4e}; ace1/ace2 mismatches at M=4: {mismatches}",
            rms[0], rms[1], rms[2]
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut cfg = config("fig1.cfg");
    cfg.trials = 10_000;
    cfg.analytic = false;
    cfg.sweep.as_mut().unwrap().values = vec![1.4, 1.8];
    let t = table(&run(&cfg)?);
    let mut detail = Vec::new();
    let mut ok = true;
    for p in [1.4, 1.8] {
        let mle = get(&t, "mle", "rmse", Some(p), None)?;
        let nls = get(&t, "nls", "rmse", Some(p), None)?;
        let best = ["centroid", "auc", "ace1", "ace2"]
            .iter()
            .map(|e| get(&t, e, "rmse", Some(p), None).map(|v| (*e, v)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .unwrap();
        let sigma = nls.1.hypot(best.1 .1);
        ok &= mle.0 <= nls.0 && nls.0 <= best.1 .0 + 3.0 * sigma;
        detail.push(format!(
            "noise {p}: mle {:.4} nls {:.4} {} {:.4} (3 sigma {:.4})",
            mle.0, nls.0, best.0, best.1 .0, 3.0 * sigma
        ));
    }
    check(ok, detail.join("; "))
}

fn criterion_10() -> Outcome {
    let cfg = config("fig6.cfg");
    let mut rng = substream(110, &[]);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut failures = Vec::new();
    for n in [4.0, 6.0, 8.0] {
        for noise in [0.8, 1.3, 1.8] {
            let point = resolve_point(&cfg, &[(SweepVariable::CellsPerSide, n), (SweepVariable::NoisePowerUw, noise)])
                .map_err(|e| e.to_string())?;
            for _ in 0..4 {
                let a = point.geom.half_width();
                let (x0, y0) = (rng.random_range(-a..a), rng.random_range(-a..a));
                let land = snr_ratio_landscape(&point.slot.at(x0, y0), &point.geom, 41).map_err(|e| e.to_string())?;
                let d = (land.argmax.0 - x0).abs().max((land.argmax.1 - y0).abs()) / land.step();
                worst = worst.max(d);
                count += 1;
                if d > 1.0 + 1e-9 {
                    failures.push(format!("N={n} noise {noise} center ({x0:.3},{y0:.3}) argmax {:?}", land.argmax));
                }
            }
        }
    }
    let detail = format!("{count} landscapes, largest argmax offset {worst:.2} grid steps");
    if failures.is_empty() { Ok(detail) } else { Err(format!("{detail}; {}", failures.join("; "))) }
}

fn fig6_result() -> &'static Result<(ExperimentConfig, Table), String> {
    static CELL: OnceLock<Result<(ExperimentConfig, Table), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = config("fig6.cfg");
        run(&cfg).map(|r| (cfg, table(&r)))
    })
}

fn criterion_11() -> Outcome {
    let (cfg, t) = fig6_result().as_ref().map_err(Clone::clone)?;
    let estimators: Vec<&str> = cfg.estimators.iter().map(|e| e.as_str()).collect();
    let noise = &cfg.sweep.as_ref().unwrap().values;
    let series = &cfg.series.as_ref().unwrap().values;
    let mut problems = Vec::new();
    let mut trend = Vec::new();
    let mut ordering_checks = 0;
    for &p in noise {
        for &n in series {
            let perfect = get(t, "perfect", "ser", Some(p), Some(n))?;
            for e in &estimators {
                let s = get(t, e, "ser", Some(p), Some(n))?;
                if perfect.0 > s.0 + 3.0 * perfect.1.hypot(s.1) {
                    problems.push(format!("perfect above {e} at noise {p} N={n}"));
                }
            }
            for a in &estimators {
                for b in &estimators {
                    let (ma, mb) = (get(t, a, "mse", Some(p), Some(n))?, get(t, b, "mse", Some(p), Some(n))?);
                    if ma.0 + 3.0 * ma.1.hypot(mb.1) < mb.0 {
                        ordering_checks += 1;
                        let (sa, sb) = (get(t, a, "ser", Some(p), Some(n))?, get(t, b, "ser", Some(p), Some(n))?);
                        if sa.0 > sb.0 + 3.0 * sa.1.hypot(sb.1) {
                            problems.push(format!(
                                "noise {p} N={n}: {a} has lower MSE than {b} ({:.4} vs {:.4}) but higher SER ({:.4} vs {:.4})",
                                ma.0, mb.0, sa.0, sb.0
                            ));
                        }
                    }
                }
            }
        }
        let best = |n: f64| -> Result<(f64, f64), String> {
            let mut v = Vec::new();
            for e in &estimators {
                v.push(get(t, e, "ser", Some(p), Some(n))?);
            }
            Ok(v.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap())
        };
        let (p16, p64) = (get(t, "perfect", "ser", Some(p), Some(4.0))?, get(t, "perfect", "ser", Some(p), Some(8.0))?);
        let (b16, b64) = (best(4.0)?, best(8.0)?);
        if p64.0 >= p16.0 {
            problems.push(format!("perfect-CSI SER does not fall from M=16 to M=64 at noise {p}"));
        }
        if b64.0 > b16.0 + 3.0 * b64.1.hypot(b16.1) {
            problems.push(format!("best estimator SER rises from M=16 to M=64 at noise {p}"));
        }
        trend.push(format!("{p}: perfect {:.4}->{:.4} best {:.4}->{:.4}", p16.0, p64.0, b16.0, b64.0));
    }
    let detail = format!("{ordering_checks} significant MSE orderings checked; M=16->64 {}", trend.join(", "));
    if problems.is_empty() { Ok(detail) } else { Err(format!("{detail}; {}", problems.join("; "))) }
}

fn criterion_12() -> Outcome {
    let cfg = config("fig6.cfg");
    let mut rng = substream(112, &[]);
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let trials = 100_000u64;
    for n in [4.0, 6.0, 8.0] {
        for noise in [0.8, 1.8] {
            let point = resolve_point(&cfg, &[(SweepVariable::CellsPerSide, n), (SweepVariable::NoisePowerUw, noise)])
                .map_err(|e| e.to_string())?;
            let a = point.geom.half_width();
            let (x0, y0) = (rng.random_range(-0.8 * a..0.8 * a), rng.random_range(-0.8 * a..0.8 * a));
            let b = point.slot.at(x0, y0);
            let w = build_weights((x0 + 0.1, y0 - 0.05), &point.slot, &point.geom).map_err(|e| e.to_string())?;
            let (mu, sigma) = v_moments(&b, &w, &point.geom).map_err(|e| e.to_string())?;
            let sampler = FrameSampler::new(&b, &point.geom);
            let v: Vec<f64> = (0..trials)
                .map(|t| {
                    let mut r = trial_stream(112, t, 0, Purpose::PpmSymbol);
                    simulate_symbol(&sampler, &w, cfg.ppm_order, &mut r).unwrap().v
                })
                .collect();
            let nf = trials as f64;
            let mean = v.iter().sum::<f64>() / nf;
            let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
            let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
            let var = m2 * nf / (nf - 1.0);
            worst_mean = worst_mean.max((mean - mu).abs() / (m2 / nf).sqrt());
            worst_var = worst_var.max((var - sigma * sigma).abs() / ((m4 - m2 * m2) / nf).sqrt());
        }
    }
    let (cfg6, t) = fig6_result().as_ref().map_err(Clone::clone)?;
    let mut worst_rel = (0.0f64, String::new());
    for &p in &cfg6.sweep.as_ref().unwrap().values {
        for &n in &cfg6.series.as_ref().unwrap().values {
            let mc = get(t, "perfect", "ser", Some(p), Some(n))?.0;
            let g = get(t, "perfect", "ser_gaussian", Some(p), Some(n))?.0;
            let rel = (g - mc).abs() / mc;
            if rel > worst_rel.0 {
                worst_rel = (rel, format!("noise {p} N={n}: gaussian {g:.4} mc {mc:.4}"));
            }
        }
    }
    check(
        worst_mean <= 3.0 && worst_var <= 3.0 && worst_rel.0 <= 0.10,
        format!(
            "V mean within {worst_mean:.2} SE, variance within {worst_var:.2} SE; Gaussian SER max rel error {:.3} ({})",
            worst_rel.0, worst_rel.1
        ),
    )
}

fn criterion_13() -> Outcome {
    let mut detail = Vec::new();
    for name in shipped_configs() {
        let mut cfg = config(&name);
        cfg.trials = cfg.trials.min(20);
        let one = run_experiment_with_threads(&cfg, 1)?;
        let many = run_experiment_with_threads(&cfg, 3)?;
        let (a, b) = (to_csv(&one), to_csv(&many));
        if a != b {
            return Err(format!("{name}: CSV differs between 1 and 3 threads"));
        }
        detail.push(format!("{name} ({} rows)", one.rows.len()));
    }
    Ok(format!("identical at 1 and 3 threads: {}", detail.join(", ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 13] = [
        (1, "closed forms vs quadrature", criterion_1),
        (2, "high-SNR CRLB limit", criterion_2),
        (3, "low-SNR CRLB limit", criterion_3),
        (4, "CRLB trends in noise, M and rho", criterion_4),
        (5, "analytic MSE and bias vs Monte Carlo", criterion_5),
        (6, "MDC series vs enumeration", criterion_6),
        (7, "AUC bias", criterion_7),
        (8, "adaptive centroid limits", criterion_8),
        (9, "fit estimators vs centroid family", criterion_9),
        (10, "detection landscape argmax", criterion_10),
        (11, "symbol error trends", criterion_11),
        (12, "Gaussian approximation of V", criterion_12),
        (13, "thread-count determinism", criterion_13),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS [{name}] ({secs:.1}s) {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL [{name}] ({secs:.1}s) {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

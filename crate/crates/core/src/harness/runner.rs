//! Sweep execution.
//!
//! Every sweep point draws from its own seed, derived from the config seed
//! and the point's indices, and every trial from its own substreams of that.
//! Trials run in parallel and are reduced in index order, so the output does
//! not depend on the number of threads.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::analytic::{centroid_mse_bias, mdc_mse_bias, MseBias};
use crate::calibration::{calibrate, FULL_CAPTURE_LAMBDA0};
use crate::crlb::crlb;
use crate::detection::{
    build_weights, simulate_symbol, snr_ratio_landscape, symbol_error_from_ratio, v_moments,
};
use crate::error::{Error, Result};
use crate::estimators::{
    auc_scale_factor, estimate_ace1, estimate_ace2, estimate_auc_with_factor, estimate_centroid,
    estimate_mdc, EstimatorTag, PositionEstimate,
};
use crate::fit::{estimate_mle, estimate_nls};
use crate::ga::GaConfig;
use crate::harness::config::{
    BeamSpec, CenterSpec, ExperimentConfig, ExperimentKind, Knowledge, Sweep, SweepVariable,
};
use crate::model::{ArrayGeometry, BeamConstants};
use crate::rng::{substream, trial_stream, Purpose};
use crate::sim::{sample_calibration_run, FrameSampler, SlotKind};

/// One output record. Analytic rows carry `stderr = 0` and `trials = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_variable: String,
    pub sweep_value: Option<f64>,
    pub series_variable: String,
    pub series_value: Option<f64>,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub degenerate: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
    /// Sweep points that could not be evaluated, with the reason.
    pub failures: Vec<String>,
}

/// Physical setting of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSetting {
    pub geom: ArrayGeometry,
    /// Constants of a single PPM slot.
    pub slot: BeamConstants,
    /// Constants of a tracking frame.
    pub tracking: BeamConstants,
}

/// Photons per slot produced by one microwatt.
fn photons_per_uw(spec: &BeamSpec) -> Result<f64> {
    match spec {
        BeamSpec::Power { link, .. } => link.photons_per_slot(1e-6),
        BeamSpec::Direct { .. } => Ok(1.0),
    }
}

pub fn resolve_point(cfg: &ExperimentConfig, overrides: &[(SweepVariable, f64)]) -> Result<PointSetting> {
    let mut cells = cfg.cells_per_side;
    let mut rho = match (cfg.rho, &cfg.beam) {
        (Some(r), _) => r,
        (None, BeamSpec::Power { link, .. }) => link.spot_size()?,
        (None, BeamSpec::Direct { .. }) => {
            return Err(Error::InvalidParameter {
                name: "beam.rho",
                value: f64::NAN,
                reason: "required with directly given constants",
            })
        }
    };
    let (mut signal, mut noise, direct) = match cfg.beam {
        BeamSpec::Power { signal_uw, noise_uw, .. } => (signal_uw, noise_uw, false),
        BeamSpec::Direct { i0, lambda_n } => (i0, lambda_n, true),
    };
    for &(var, v) in overrides {
        match var {
            SweepVariable::CellsPerSide => cells = v as usize,
            SweepVariable::Rho => rho = v,
            SweepVariable::NoisePowerUw | SweepVariable::LambdaN => noise = v,
            SweepVariable::SignalPowerUw | SweepVariable::I0 => signal = v,
        }
    }
    let geom = ArrayGeometry::new(cfg.half_width, cells)?;
    let slot = if direct {
        BeamConstants::new(signal, rho, noise)?
    } else {
        let s = photons_per_uw(&cfg.beam)?;
        BeamConstants::new(signal * s / (2.0 * PI), rho, noise * s / geom.array_area())?
    };
    let k = cfg.tracking_slots as f64;
    let tracking = BeamConstants::new(slot.i0 * k, rho, slot.lambda_n * k)?;
    Ok(PointSetting {
        geom,
        slot,
        tracking,
    })
}

fn ga_for(cfg: &ExperimentConfig, geom: &ArrayGeometry) -> GaConfig {
    GaConfig {
        mutation_sigma: cfg.ga_sigma.unwrap_or(0.5 * geom.cell_side()),
        ..cfg.ga
    }
}

fn trial_center(cfg: &ExperimentConfig, geom: &ArrayGeometry, seed: u64, t: u64) -> (f64, f64) {
    match cfg.center {
        CenterSpec::Fixed(x, y) => (x, y),
        CenterSpec::Uniform => {
            let a = geom.half_width();
            let mut rng = trial_stream(seed, t, 0, Purpose::Center);
            (rng.random_range(-a..=a), rng.random_range(-a..=a))
        }
    }
}

/// Constants the estimators work with: the truth, or a method-of-moments
/// calibration taken with the beam at the array center.
fn assumed_constants(
    cfg: &ExperimentConfig,
    p: &PointSetting,
    seed: u64,
    t: u64,
) -> Result<BeamConstants> {
    match cfg.knowledge {
        Knowledge::True => Ok(p.tracking),
        Knowledge::Calibrated => {
            let mut rng = trial_stream(seed, t, 0, Purpose::Calibration);
            let run = sample_calibration_run(&p.tracking.at(0.0, 0.0), &p.geom, cfg.calibration_slots, &mut rng)?;
            let est = calibrate(&run.signal, &run.noise, &p.geom, FULL_CAPTURE_LAMBDA0)?;
            BeamConstants::new(est.i0_hat, p.tracking.rho, est.lambda_n_hat)
        }
    }
}

fn estimate_all(
    cfg: &ExperimentConfig,
    p: &PointSetting,
    center: (f64, f64),
    constants: &BeamConstants,
    seed: u64,
    t: u64,
) -> Result<Vec<PositionEstimate>> {
    let beam = p.tracking.at(center.0, center.1);
    let frame = FrameSampler::new(&beam, &p.geom).sample(
        SlotKind::SignalPlusNoise,
        &mut trial_stream(seed, t, 0, Purpose::TrackingFrame),
    );
    let ga = ga_for(cfg, &p.geom);
    let dark = constants.i0 <= 0.0;
    let fallback = |tag| PositionEstimate {
        x: 0.0,
        y: 0.0,
        tag,
        degenerate: true,
    };
    cfg.estimators
        .iter()
        .enumerate()
        .map(|(k, &tag)| {
            let slot = k as u64 + 1;
            Ok(match tag {
                EstimatorTag::Mdc => {
                    estimate_mdc(&frame, &p.geom, &mut trial_stream(seed, t, slot, Purpose::TieBreak))?
                }
                EstimatorTag::Centroid => estimate_centroid(&frame, &p.geom)?,
                EstimatorTag::Auc if dark => fallback(tag),
                EstimatorTag::Auc => {
                    let factor = auc_scale_factor(constants, &p.geom)?;
                    estimate_auc_with_factor(&frame, &p.geom, factor)?
                }
                EstimatorTag::Ace1 => estimate_ace1(&frame, &p.geom, &cfg.ace1)?,
                EstimatorTag::Ace2 => estimate_ace2(&frame, &p.geom, &cfg.ace2)?,
                EstimatorTag::Nls => estimate_nls(
                    &frame,
                    &p.geom,
                    constants,
                    &ga,
                    &mut trial_stream(seed, t, slot, Purpose::Optimizer),
                )?,
                EstimatorTag::Mle => estimate_mle(
                    &frame,
                    &p.geom,
                    constants,
                    &ga,
                    &mut trial_stream(seed, t, slot, Purpose::Optimizer),
                )?,
            })
        })
        .collect()
}

/// Sample mean and its standard error.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct PointContext<'a> {
    cfg: &'a ExperimentConfig,
    sweep: (&'a str, Option<f64>),
    series: (&'a str, Option<f64>),
}

impl PointContext<'_> {
    fn row(&self, estimator: &str, metric: &str, value: f64, stderr: f64, trials: u64, degenerate: u64) -> Row {
        Row {
            sweep_variable: self.sweep.0.to_string(),
            sweep_value: self.sweep.1,
            series_variable: self.series.0.to_string(),
            series_value: self.series.1,
            estimator: estimator.to_string(),
            metric: metric.to_string(),
            value,
            stderr,
            trials,
            degenerate,
        }
    }
}

fn par_trials<T: Send>(trials: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

fn run_estimation(ctx: &PointContext, p: &PointSetting, seed: u64, out: &mut Vec<Row>) -> Result<()> {
    let cfg = ctx.cfg;
    let per_trial = par_trials(cfg.trials, |t| {
        let center = trial_center(cfg, &p.geom, seed, t);
        let constants = assumed_constants(cfg, p, seed, t)?;
        let est = estimate_all(cfg, p, center, &constants, seed, t)?;
        Ok(est
            .into_iter()
            .map(|e| (e.x - center.0, e.y - center.1, e.degenerate))
            .collect::<Vec<_>>())
    })?;
    let n = cfg.trials;
    for (k, tag) in cfg.estimators.iter().enumerate() {
        let dx: Vec<f64> = per_trial.iter().map(|r| r[k].0).collect();
        let dy: Vec<f64> = per_trial.iter().map(|r| r[k].1).collect();
        let sq: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a * a + b * b).collect();
        let degenerate = per_trial.iter().filter(|r| r[k].2).count() as u64;
        let name = tag.as_str();
        let (bx, bx_se) = mean_se(&dx);
        let (by, by_se) = mean_se(&dy);
        if cfg.kind == ExperimentKind::MseSweep {
            let (mse, mse_se) = mean_se(&sq);
            let rmse = mse.sqrt();
            let rmse_se = if rmse > 0.0 { mse_se / (2.0 * rmse) } else { 0.0 };
            out.push(ctx.row(name, "mse", mse, mse_se, n, degenerate));
            out.push(ctx.row(name, "rmse", rmse, rmse_se, n, degenerate));
        }
        out.push(ctx.row(name, "bias_x", bx, bx_se, n, degenerate));
        out.push(ctx.row(name, "bias_y", by, by_se, n, degenerate));
        out.push(ctx.row(name, "abs_bias_x", bx.abs(), bx_se, n, degenerate));
    }
    if cfg.analytic {
        if let CenterSpec::Fixed(x, y) = cfg.center {
            let beam = p.tracking.at(x, y);
            for tag in &cfg.estimators {
                let r: Option<MseBias> = match tag {
                    EstimatorTag::Mdc => Some(mdc_mse_bias(&beam, &p.geom, &cfg.truncation)?),
                    EstimatorTag::Centroid => Some(centroid_mse_bias(&beam, &p.geom, &cfg.truncation, false)?),
                    EstimatorTag::Auc => Some(centroid_mse_bias(&beam, &p.geom, &cfg.truncation, true)?),
                    _ => None,
                };
                if let Some(r) = r {
                    let name = tag.as_str();
                    if cfg.kind == ExperimentKind::MseSweep {
                        out.push(ctx.row(name, "mse_analytic", r.mse, 0.0, 0, 0));
                        out.push(ctx.row(name, "rmse_analytic", r.rmse(), 0.0, 0, 0));
                    }
                    out.push(ctx.row(name, "bias_x_analytic", r.bias_x, 0.0, 0, 0));
                    out.push(ctx.row(name, "bias_y_analytic", r.bias_y, 0.0, 0, 0));
                    out.push(ctx.row(name, "completeness_gap", r.completeness_gap, 0.0, 0, 0));
                }
            }
        }
    }
    Ok(())
}

fn run_ser(ctx: &PointContext, p: &PointSetting, seed: u64, out: &mut Vec<Row>) -> Result<()> {
    let cfg = ctx.cfg;
    let order = cfg.ppm_order;
    let k = cfg.tracking_slots as f64;
    struct Outcome {
        error: bool,
        sq: f64,
        degenerate: bool,
        gaussian: f64,
    }
    let per_trial = par_trials(cfg.trials, |t| {
        let center = trial_center(cfg, &p.geom, seed, t);
        let beam = p.slot.at(center.0, center.1);
        let sampler = FrameSampler::new(&beam, &p.geom);
        let tracking_constants = assumed_constants(cfg, p, seed, t)?;
        let slot_constants = BeamConstants::new(
            tracking_constants.i0 / k,
            tracking_constants.rho,
            tracking_constants.lambda_n / k,
        )?;
        let mut assumed: Vec<((f64, f64), BeamConstants, f64, bool)> = Vec::new();
        if cfg.ppm_perfect {
            assumed.push((center, p.slot, 0.0, false));
        }
        for e in estimate_all(cfg, p, center, &tracking_constants, seed, t)? {
            let sq = e.squared_error(center.0, center.1);
            assumed.push(((e.x, e.y), slot_constants, sq, e.degenerate));
        }
        assumed
            .into_iter()
            .map(|(c, constants, sq, degenerate)| {
                let w = build_weights(c, &constants, &p.geom)?;
                // the same photons for every receiver in this trial
                let mut rng = trial_stream(seed, t, 0, Purpose::PpmSymbol);
                let o = simulate_symbol(&sampler, &w, order, &mut rng)?;
                let gaussian = if cfg.ppm_gaussian {
                    let (mu, sigma) = v_moments(&beam, &w, &p.geom)?;
                    let ratio = if sigma > 0.0 { mu / sigma } else { 0.0 };
                    symbol_error_from_ratio(ratio, order)
                } else {
                    f64::NAN
                };
                Ok(Outcome {
                    error: !o.correct,
                    sq,
                    degenerate,
                    gaussian,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut names: Vec<&str> = Vec::new();
    if cfg.ppm_perfect {
        names.push("perfect");
    }
    names.extend(cfg.estimators.iter().map(|t| t.as_str()));
    let n = cfg.trials;
    for (k, name) in names.iter().enumerate() {
        let errors = per_trial.iter().filter(|r| r[k].error).count() as u64;
        let degenerate = per_trial.iter().filter(|r| r[k].degenerate).count() as u64;
        let ser = errors as f64 / n as f64;
        out.push(ctx.row(name, "ser", ser, (ser * (1.0 - ser) / n as f64).sqrt(), n, degenerate));
        if cfg.ppm_gaussian {
            let g: Vec<f64> = per_trial.iter().map(|r| r[k].gaussian).collect();
            let (m, se) = mean_se(&g);
            out.push(ctx.row(name, "ser_gaussian", m, se, n, degenerate));
        }
        if *name != "perfect" {
            let sq: Vec<f64> = per_trial.iter().map(|r| r[k].sq).collect();
            let (m, se) = mean_se(&sq);
            out.push(ctx.row(name, "mse", m, se, n, degenerate));
        }
    }
    Ok(())
}

fn run_crlb(ctx: &PointContext, p: &PointSetting, seed: u64, out: &mut Vec<Row>) -> Result<()> {
    let cfg = ctx.cfg;
    match cfg.center {
        CenterSpec::Fixed(x, y) => {
            let r = crlb(&p.tracking.at(x, y), &p.geom)?;
            out.push(ctx.row("", "var_x_lb", r.var_x_lb, 0.0, 0, 0));
            out.push(ctx.row("", "var_y_lb", r.var_y_lb, 0.0, 0, 0));
            out.push(ctx.row("", "mse_lb", r.mse_lb(), 0.0, 0, 0));
        }
        CenterSpec::Uniform => {
            let v = par_trials(cfg.trials, |t| {
                let c = trial_center(cfg, &p.geom, seed, t);
                Ok(crlb(&p.tracking.at(c.0, c.1), &p.geom)?.mse_lb())
            })?;
            let (m, se) = mean_se(&v);
            out.push(ctx.row("", "mse_lb", m, se, cfg.trials, 0));
        }
    }
    Ok(())
}

fn run_landscape(ctx: &PointContext, p: &PointSetting, out: &mut Vec<Row>) -> Result<()> {
    let CenterSpec::Fixed(x0, y0) = ctx.cfg.center else {
        return Err(Error::InvalidParameter {
            name: "beam.center",
            value: f64::NAN,
            reason: "a landscape needs a fixed beam center",
        });
    };
    let l = snr_ratio_landscape(&p.slot.at(x0, y0), &p.geom, ctx.cfg.landscape_points)?;
    let n = l.axis.len();
    for r in 0..n {
        for c in 0..n {
            let mut row = ctx.row("", "mu_over_sigma", l.at(c, r), 0.0, 0, 0);
            row.sweep_variable = "x_hat".into();
            row.sweep_value = Some(l.axis[c]);
            row.series_variable = "y_hat".into();
            row.series_value = Some(l.axis[r]);
            out.push(row);
        }
    }
    out.push(ctx.row("", "argmax_x", l.argmax.0, 0.0, 0, 0));
    out.push(ctx.row("", "argmax_y", l.argmax.1, 0.0, 0, 0));
    out.push(ctx.row("", "max_mu_over_sigma", l.max_value, 0.0, 0, 0));
    out.push(ctx.row("", "grid_step", l.step(), 0.0, 0, 0));
    Ok(())
}

fn run_calibration(ctx: &PointContext, p: &PointSetting, seed: u64, out: &mut Vec<Row>) -> Result<()> {
    let cfg = ctx.cfg;
    let v = par_trials(cfg.trials, |t| {
        let c = trial_center(cfg, &p.geom, seed, t);
        let mut rng = trial_stream(seed, t, 0, Purpose::Calibration);
        let run = sample_calibration_run(&p.tracking.at(c.0, c.1), &p.geom, cfg.calibration_slots, &mut rng)?;
        calibrate(&run.signal, &run.noise, &p.geom, FULL_CAPTURE_LAMBDA0)
    })?;
    let clamped = v.iter().filter(|e| e.clamped).count() as u64;
    let i0: Vec<f64> = v.iter().map(|e| e.i0_hat).collect();
    let ln: Vec<f64> = v.iter().map(|e| e.lambda_n_hat).collect();
    let (mi, si) = mean_se(&i0);
    let (ml, sl) = mean_se(&ln);
    out.push(ctx.row("", "i0_hat", mi, si, cfg.trials, clamped));
    out.push(ctx.row("", "lambda_n_hat", ml, sl, cfg.trials, clamped));
    out.push(ctx.row("", "i0_true", p.tracking.i0, 0.0, 0, 0));
    out.push(ctx.row("", "lambda_n_true", p.tracking.lambda_n, 0.0, 0, 0));
    Ok(())
}

fn levels(s: &Option<Sweep>) -> Vec<Option<f64>> {
    match s {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    }
}

/// Runs the experiment on the current rayon pool. Points that fail are
/// listed in `failures`; the remaining points still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> SweepResult {
    let mut result = SweepResult::default();
    let sweep_name = cfg.sweep.as_ref().map_or("", |s| s.variable.as_str());
    let series_name = cfg.series.as_ref().map_or("", |s| s.variable.as_str());
    for (si, series_value) in levels(&cfg.series).into_iter().enumerate() {
        for (pi, sweep_value) in levels(&cfg.sweep).into_iter().enumerate() {
            let ctx = PointContext {
                cfg,
                sweep: (sweep_name, sweep_value),
                series: (series_name, series_value),
            };
            let mut overrides = Vec::new();
            if let (Some(s), Some(v)) = (&cfg.series, series_value) {
                overrides.push((s.variable, v));
            }
            if let (Some(s), Some(v)) = (&cfg.sweep, sweep_value) {
                overrides.push((s.variable, v));
            }
            let seed = substream(cfg.seed, &[si as u64, pi as u64]).next_u64();
            let mut rows = Vec::new();
            let outcome = resolve_point(cfg, &overrides).and_then(|p| match cfg.kind {
                ExperimentKind::CrlbSweep => run_crlb(&ctx, &p, seed, &mut rows),
                ExperimentKind::MseSweep | ExperimentKind::BiasSweep => {
                    run_estimation(&ctx, &p, seed, &mut rows)
                }
                ExperimentKind::SerSweep => run_ser(&ctx, &p, seed, &mut rows),
                ExperimentKind::Landscape => run_landscape(&ctx, &p, &mut rows),
                ExperimentKind::Calibrate => run_calibration(&ctx, &p, seed, &mut rows),
            });
            match outcome {
                Ok(()) => result.rows.extend(rows),
                Err(e) => result.failures.push(format!(
                    "{series_name}={} {sweep_name}={}: {e}",
                    series_value.map_or("-".into(), |v| v.to_string()),
                    sweep_value.map_or("-".into(), |v| v.to_string()),
                )),
            }
        }
    }
    result
}

/// Runs the experiment on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> std::result::Result<SweepResult, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| e.to_string())?;
    Ok(pool.install(|| run_experiment(cfg)))
}

//! Experiment configuration in a flat `key = value` format.
//!
//! One setting per line, `#` starts a comment, nested settings use dotted
//! keys (`estimator.ace1.n = 2`). Lists are comma separated. A repeated key
//! overrides the earlier one and produces a warning.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::analytic::TruncationPolicy;
use crate::estimators::{AceParams, EstimatorTag};
use crate::ga::GaConfig;
use crate::model::LinkBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    CrlbSweep,
    MseSweep,
    BiasSweep,
    SerSweep,
    Landscape,
    Calibrate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::CrlbSweep,
        Self::MseSweep,
        Self::BiasSweep,
        Self::SerSweep,
        Self::Landscape,
        Self::Calibrate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CrlbSweep => "crlb_sweep",
            Self::MseSweep => "mse_sweep",
            Self::BiasSweep => "bias_sweep",
            Self::SerSweep => "ser_sweep",
            Self::Landscape => "landscape",
            Self::Calibrate => "calibrate",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

/// Quantities a sweep or series can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    NoisePowerUw,
    SignalPowerUw,
    Rho,
    CellsPerSide,
    I0,
    LambdaN,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        Self::NoisePowerUw,
        Self::SignalPowerUw,
        Self::Rho,
        Self::CellsPerSide,
        Self::I0,
        Self::LambdaN,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NoisePowerUw => "noise_power_uw",
            Self::SignalPowerUw => "signal_power_uw",
            Self::Rho => "rho",
            Self::CellsPerSide => "cells_per_side",
            Self::I0 => "i0",
            Self::LambdaN => "lambda_n",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown sweep variable `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// How the beam strength is given. Counts are per PPM slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamSpec {
    Power {
        signal_uw: f64,
        noise_uw: f64,
        link: LinkBudget,
    },
    Direct {
        i0: f64,
        lambda_n: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenterSpec {
    Fixed(f64, f64),
    /// Drawn uniformly on the array face for every trial.
    Uniform,
}

/// What the estimators and the receiver assume about `I₀` and `λ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    True,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: u64,
    pub output: Option<String>,
    pub half_width: f64,
    pub cells_per_side: usize,
    pub beam: BeamSpec,
    /// Beam radius; `None` takes the spot size of the link budget.
    pub rho: Option<f64>,
    pub center: CenterSpec,
    /// Slots integrated into one tracking frame.
    pub tracking_slots: u32,
    pub sweep: Option<Sweep>,
    pub series: Option<Sweep>,
    pub estimators: Vec<EstimatorTag>,
    pub ace1: AceParams,
    pub ace2: AceParams,
    pub ga: GaConfig,
    /// Mutation step of the optimizer; `None` uses half a cell side.
    pub ga_sigma: Option<f64>,
    pub truncation: TruncationPolicy,
    /// Add analytic MSE and bias rows where a series exists.
    pub analytic: bool,
    pub knowledge: Knowledge,
    pub calibration_slots: usize,
    pub ppm_order: usize,
    pub ppm_perfect: bool,
    pub ppm_gaussian: bool,
    pub landscape_points: usize,
}

/// A problem found while parsing; `line` is 1-based, 0 for a missing key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "`{}`: {}", self.key, self.message)
        } else {
            write!(f, "line {}: `{}`: {}", self.line, self.key, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

pub const DEFAULT_LINK: LinkBudget = LinkBudget {
    waist: 0.02,
    wavelength: 1550e-9,
    distance: 1000.0,
    slot_duration: 1.25e-12,
    efficiency: 0.5,
};

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "seed",
    "trials",
    "output",
    "geometry.half_width",
    "geometry.cells_per_side",
    "beam.signal_power_uw",
    "beam.noise_power_uw",
    "beam.i0",
    "beam.lambda_n",
    "beam.rho",
    "beam.center",
    "beam.x0",
    "beam.y0",
    "link.waist",
    "link.wavelength",
    "link.distance",
    "link.slot_duration",
    "link.efficiency",
    "tracking_slots",
    "sweep.variable",
    "sweep.values",
    "series.variable",
    "series.values",
    "estimators",
    "estimator.ace1.n",
    "estimator.ace2.n",
    "estimator.ace2.top",
    "ga.population",
    "ga.generations",
    "ga.mutation_prob",
    "ga.mutation_sigma",
    "ga.mutation_decay",
    "ga.crossover_alpha",
    "ga.elitism",
    "truncation.epsilon0",
    "truncation.k_max",
    "analytic",
    "knowledge",
    "calibration.slots",
    "ppm.order",
    "ppm.perfect_csi",
    "ppm.gaussian",
    "landscape.points",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    errors: Vec<ConfigError>,
}

impl Entries {
    fn err(&mut self, key: &str, message: impl Into<String>) {
        let line = self.map.get(key).map_or(0, |e| e.0);
        self.errors.push(ConfigError {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.map.get(key).map(|e| e.1.clone())
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.err(key, format!("cannot parse `{raw}`: {e}"));
                None
            }
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        self.parse(key).unwrap_or(default)
    }

    fn real(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, what: &str) -> f64 {
        let v = self.get(key, default);
        if !ok(v) {
            self.err(key, format!("value {v} out of range: {what}"));
        }
        v
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let v = self.get(key, default);
        if v < min {
            self.err(key, format!("value {v} out of range: must be at least {min}"));
        }
        v
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key).as_deref() {
            None => default,
            Some("true") => true,
            Some("false") => false,
            Some(other) => {
                self.err(key, format!("expected true or false, found `{other}`"));
                default
            }
        }
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let raw = self.raw(key)?;
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.err(key, format!("`{item}` is not a finite number"));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.err(key, "list is empty");
            return None;
        }
        Some(out)
    }

    fn sweep(&mut self, prefix: &str) -> Option<Sweep> {
        let var_key = format!("{prefix}.variable");
        let val_key = format!("{prefix}.values");
        match (self.has(&var_key), self.has(&val_key)) {
            (false, false) => None,
            (true, false) => {
                self.err(&var_key, format!("`{val_key}` is required as well"));
                None
            }
            (false, true) => {
                self.err(&val_key, format!("`{var_key}` is required as well"));
                None
            }
            (true, true) => {
                let variable = self.parse::<SweepVariable>(&var_key)?;
                let values = self.list(&val_key)?;
                Some(Sweep { variable, values })
            }
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Parses and validates a configuration, collecting every error found.
pub fn parse_config(text: &str) -> Result<ParsedConfig, Vec<ConfigError>> {
    let mut e = Entries {
        map: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            e.errors.push(ConfigError {
                line,
                key: content.to_string(),
                message: "expected `key = value`".into(),
            });
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !KNOWN_KEYS.contains(&k.as_str()) {
            e.errors.push(ConfigError {
                line,
                key: k,
                message: "unknown key".into(),
            });
            continue;
        }
        if let Some((prev, _)) = e.map.get(&k) {
            warnings.push(format!(
                "line {line}: `{k}` repeats line {prev}; the later value is used"
            ));
        }
        e.map.insert(k, (line, v));
    }

    let kind = match e.parse::<ExperimentKind>("kind") {
        Some(k) => k,
        None => {
            if !e.has("kind") {
                e.err("kind", "missing required key");
            }
            ExperimentKind::CrlbSweep
        }
    };
    let seed = e.get("seed", 0u64);
    let trials = e.get("trials", 1000u64);
    if trials == 0 {
        e.err("trials", "value 0 out of range: must be at least 1");
    }
    let output = e.raw("output");
    let half_width = e.real("geometry.half_width", 1.0, positive, "must be > 0");
    let cells_per_side = e.count("geometry.cells_per_side", 4, 1);

    let power = e.has("beam.signal_power_uw") || e.has("beam.noise_power_uw");
    let direct = e.has("beam.i0") || e.has("beam.lambda_n");
    let link = LinkBudget {
        waist: e.real("link.waist", DEFAULT_LINK.waist, positive, "must be > 0"),
        wavelength: e.real("link.wavelength", DEFAULT_LINK.wavelength, positive, "must be > 0"),
        distance: e.real("link.distance", DEFAULT_LINK.distance, non_negative, "must be >= 0"),
        slot_duration: e.real(
            "link.slot_duration",
            DEFAULT_LINK.slot_duration,
            positive,
            "must be > 0",
        ),
        efficiency: e.real(
            "link.efficiency",
            DEFAULT_LINK.efficiency,
            |v| v > 0.0 && v <= 1.0,
            "must lie in (0, 1]",
        ),
    };
    let beam = if power && direct {
        e.err(
            "beam.i0",
            "give either signal/noise powers or i0/lambda_n, not both",
        );
        BeamSpec::Direct {
            i0: 0.0,
            lambda_n: 0.0,
        }
    } else if direct {
        for k in ["link.waist", "link.wavelength", "link.slot_duration", "link.efficiency"] {
            if e.has(k) {
                e.err(k, "link keys only apply to the power style");
            }
        }
        BeamSpec::Direct {
            i0: e.real("beam.i0", 1.0, non_negative, "must be >= 0"),
            lambda_n: e.real("beam.lambda_n", 0.0, non_negative, "must be >= 0"),
        }
    } else {
        BeamSpec::Power {
            signal_uw: e.real("beam.signal_power_uw", 1.0, non_negative, "must be >= 0"),
            noise_uw: e.real("beam.noise_power_uw", 0.0, non_negative, "must be >= 0"),
            link,
        }
    };
    let rho = if e.has("beam.rho") {
        Some(e.real("beam.rho", 0.2, positive, "must be > 0"))
    } else {
        if direct {
            e.err("beam.rho", "missing required key (no link budget to derive it)");
        }
        None
    };
    let center = match e.raw("beam.center").as_deref() {
        None | Some("fixed") => CenterSpec::Fixed(
            e.real("beam.x0", 0.0, f64::is_finite, "must be finite"),
            e.real("beam.y0", 0.0, f64::is_finite, "must be finite"),
        ),
        Some("uniform") => {
            for k in ["beam.x0", "beam.y0"] {
                if e.has(k) {
                    e.err(k, "not used with a uniform center");
                }
            }
            CenterSpec::Uniform
        }
        Some(other) => {
            e.err("beam.center", format!("expected fixed or uniform, found `{other}`"));
            CenterSpec::Uniform
        }
    };
    let tracking_slots = e.get("tracking_slots", 1u32);
    if tracking_slots == 0 {
        e.err("tracking_slots", "value 0 out of range: must be at least 1");
    }

    let sweep = e.sweep("sweep");
    let series = e.sweep("series");
    for s in [&sweep, &series].into_iter().flatten() {
        let key = if sweep.as_ref() == Some(s) { "sweep.variable" } else { "series.variable" };
        let ok = match s.variable {
            SweepVariable::NoisePowerUw | SweepVariable::SignalPowerUw => !direct,
            SweepVariable::I0 | SweepVariable::LambdaN => direct,
            _ => true,
        };
        if !ok {
            e.err(key, "variable does not match the beam style");
        }
        let bad = s.values.iter().any(|&v| match s.variable {
            SweepVariable::Rho => v <= 0.0,
            SweepVariable::CellsPerSide => v < 1.0 || v.fract() != 0.0,
            _ => v < 0.0,
        });
        if bad {
            e.err(key, "sweep value out of range for the variable");
        }
    }
    if let (Some(a), Some(b)) = (&sweep, &series) {
        if a.variable == b.variable {
            e.err("series.variable", "must differ from sweep.variable");
        }
    }

    let estimators = match e.raw("estimators") {
        None => Vec::new(),
        Some(raw) => {
            let mut out = Vec::new();
            for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match item.parse::<EstimatorTag>() {
                    Ok(t) if !out.contains(&t) => out.push(t),
                    Ok(t) => e.err("estimators", format!("`{t}` listed twice")),
                    Err(msg) => e.err("estimators", msg),
                }
            }
            out
        }
    };
    let ace1_n = e.real("estimator.ace1.n", 2.0, |v| v >= 1.0 && v.is_finite(), "must be >= 1");
    let ace2_n = e.real("estimator.ace2.n", 2.0, |v| v >= 1.0 && v.is_finite(), "must be >= 1");
    let ace2_top = e.count("estimator.ace2.top", 3, 1);

    let dflt = GaConfig::default();
    let ga = GaConfig {
        population: e.count("ga.population", dflt.population, 4),
        generations: e.count("ga.generations", dflt.generations, 1),
        mutation_sigma: dflt.mutation_sigma,
        mutation_prob: e.real(
            "ga.mutation_prob",
            dflt.mutation_prob,
            |v| (0.0..=1.0).contains(&v),
            "must lie in [0, 1]",
        ),
        crossover_alpha: e.real("ga.crossover_alpha", dflt.crossover_alpha, non_negative, "must be >= 0"),
        elitism: e.get("ga.elitism", dflt.elitism),
        mutation_decay: e.real(
            "ga.mutation_decay",
            dflt.mutation_decay,
            |v| v > 0.0 && v <= 1.0,
            "must lie in (0, 1]",
        ),
    };
    if ga.elitism >= ga.population {
        e.err("ga.elitism", "must be below ga.population");
    }
    let ga_sigma = if e.has("ga.mutation_sigma") {
        Some(e.real("ga.mutation_sigma", 0.0, non_negative, "must be >= 0"))
    } else {
        None
    };
    let td = TruncationPolicy::default();
    let truncation = TruncationPolicy {
        epsilon0: e.real("truncation.epsilon0", td.epsilon0, |v| v > 0.0 && v < 1.0, "must lie in (0, 1)"),
        k_max: e.count("truncation.k_max", td.k_max, 1),
        eta_scale: td.eta_scale,
    };
    let analytic = e.flag("analytic", false);
    let knowledge = match e.raw("knowledge").as_deref() {
        None | Some("true") => Knowledge::True,
        Some("calibrated") => Knowledge::Calibrated,
        Some(other) => {
            e.err("knowledge", format!("expected true or calibrated, found `{other}`"));
            Knowledge::True
        }
    };
    let calibration_slots = e.count("calibration.slots", 100, 1);
    let ppm_order = e.count("ppm.order", 2, 2);
    let ppm_perfect = e.flag("ppm.perfect_csi", true);
    let ppm_gaussian = e.flag("ppm.gaussian", false);
    let landscape_points = e.count("landscape.points", 41, 2);

    let needs_noise = matches!(kind, ExperimentKind::SerSweep | ExperimentKind::Landscape);
    if needs_noise {
        let zero_noise = match beam {
            BeamSpec::Power { noise_uw, .. } => noise_uw == 0.0,
            BeamSpec::Direct { lambda_n, .. } => lambda_n == 0.0,
        };
        let swept = [&sweep, &series].into_iter().flatten().any(|s| {
            matches!(s.variable, SweepVariable::NoisePowerUw | SweepVariable::LambdaN)
                && s.values.iter().all(|&v| v > 0.0)
        });
        if zero_noise && !swept {
            let key = if direct { "beam.lambda_n" } else { "beam.noise_power_uw" };
            e.err(key, "the PPM receiver needs a positive background level");
        }
    }
    if matches!(kind, ExperimentKind::MseSweep | ExperimentKind::BiasSweep) && estimators.is_empty() {
        e.err("estimators", "an estimator sweep needs at least one estimator");
    }
    if kind == ExperimentKind::Landscape {
        if center == CenterSpec::Uniform {
            e.err("beam.center", "a landscape needs a fixed beam center");
        }
        for k in ["sweep.variable", "series.variable"] {
            if e.has(k) {
                e.err(k, "a landscape uses both output axes for its grid");
            }
        }
    }

    if !e.errors.is_empty() {
        e.errors.sort_by_key(|x| x.line);
        return Err(e.errors);
    }
    let config = ExperimentConfig {
        kind,
        seed,
        trials,
        output,
        half_width,
        cells_per_side,
        beam,
        rho,
        center,
        tracking_slots,
        sweep,
        series,
        estimators,
        ace1: AceParams { power: ace1_n, top: 1 },
        ace2: AceParams {
            power: ace2_n,
            top: ace2_top,
        },
        ga,
        ga_sigma,
        truncation,
        analytic,
        knowledge,
        calibration_slots,
        ppm_order,
        ppm_perfect,
        ppm_gaussian,
        landscape_points,
    };
    Ok(ParsedConfig { config, warnings })
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("kind", self.kind.as_str().into());
        kv("seed", self.seed.to_string());
        kv("trials", self.trials.to_string());
        if let Some(o) = &self.output {
            kv("output", o.clone());
        }
        kv("geometry.half_width", self.half_width.to_string());
        kv("geometry.cells_per_side", self.cells_per_side.to_string());
        match self.beam {
            BeamSpec::Power {
                signal_uw,
                noise_uw,
                link,
            } => {
                kv("beam.signal_power_uw", signal_uw.to_string());
                kv("beam.noise_power_uw", noise_uw.to_string());
                kv("link.waist", link.waist.to_string());
                kv("link.wavelength", link.wavelength.to_string());
                kv("link.distance", link.distance.to_string());
                kv("link.slot_duration", link.slot_duration.to_string());
                kv("link.efficiency", link.efficiency.to_string());
            }
            BeamSpec::Direct { i0, lambda_n } => {
                kv("beam.i0", i0.to_string());
                kv("beam.lambda_n", lambda_n.to_string());
            }
        }
        if let Some(r) = self.rho {
            kv("beam.rho", r.to_string());
        }
        match self.center {
            CenterSpec::Fixed(x, y) => {
                kv("beam.center", "fixed".into());
                kv("beam.x0", x.to_string());
                kv("beam.y0", y.to_string());
            }
            CenterSpec::Uniform => kv("beam.center", "uniform".into()),
        }
        kv("tracking_slots", self.tracking_slots.to_string());
        for (p, sw) in [("sweep", &self.sweep), ("series", &self.series)] {
            if let Some(sw) = sw {
                kv(&format!("{p}.variable"), sw.variable.as_str().into());
                kv(&format!("{p}.values"), join(&sw.values));
            }
        }
        let tags: Vec<&str> = self.estimators.iter().map(|t| t.as_str()).collect();
        kv("estimators", tags.join(", "));
        kv("estimator.ace1.n", self.ace1.power.to_string());
        kv("estimator.ace2.n", self.ace2.power.to_string());
        kv("estimator.ace2.top", self.ace2.top.to_string());
        kv("ga.population", self.ga.population.to_string());
        kv("ga.generations", self.ga.generations.to_string());
        kv("ga.mutation_prob", self.ga.mutation_prob.to_string());
        if let Some(s) = self.ga_sigma {
            kv("ga.mutation_sigma", s.to_string());
        }
        kv("ga.mutation_decay", self.ga.mutation_decay.to_string());
        kv("ga.crossover_alpha", self.ga.crossover_alpha.to_string());
        kv("ga.elitism", self.ga.elitism.to_string());
        kv("truncation.epsilon0", self.truncation.epsilon0.to_string());
        kv("truncation.k_max", self.truncation.k_max.to_string());
        kv("analytic", self.analytic.to_string());
        kv(
            "knowledge",
            match self.knowledge {
                Knowledge::True => "true".into(),
                Knowledge::Calibrated => "calibrated".into(),
            },
        );
        kv("calibration.slots", self.calibration_slots.to_string());
        kv("ppm.order", self.ppm_order.to_string());
        kv("ppm.perfect_csi", self.ppm_perfect.to_string());
        kv("ppm.gaussian", self.ppm_gaussian.to_string());
        kv("landscape.points", self.landscape_points.to_string());
        s
    }
}

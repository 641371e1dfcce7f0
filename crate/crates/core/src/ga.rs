//! Real-coded genetic algorithm over a rectangle in the plane.
//!
//! Maximizes. Tournament selection of size 2, BLX-α blend crossover,
//! per-coordinate Gaussian mutation and an elite carried over unchanged.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ArrayGeometry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SearchBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// The array face `[−a, a]²`.
    pub fn array(geom: &ArrayGeometry) -> Self {
        let a = geom.half_width();
        Self {
            x_min: -a,
            x_max: a,
            y_min: -a,
            y_max: a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "search_box",
                value: f64::NAN,
                reason: "bounds must be finite with max > min on both axes",
            })
        }
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        (self.x_min..=self.x_max).contains(&p.0) && (self.y_min..=self.y_max).contains(&p.1)
    }

    fn clamp(&self, p: (f64, f64)) -> (f64, f64) {
        (
            p.0.clamp(self.x_min, self.x_max),
            p.1.clamp(self.y_min, self.y_max),
        )
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        (
            rng.random_range(self.x_min..=self.x_max),
            rng.random_range(self.y_min..=self.y_max),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Standard deviation of the Gaussian mutation step in the first generation.
    pub mutation_sigma: f64,
    pub mutation_prob: f64,
    pub crossover_alpha: f64,
    pub elitism: usize,
    /// Per-generation multiplier on the mutation step; 1 keeps it fixed.
    pub mutation_decay: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 400,
            mutation_sigma: 0.25,
            mutation_prob: 0.1,
            crossover_alpha: 0.5,
            elitism: 2,
            mutation_decay: 1.0,
        }
    }
}

impl GaConfig {
    /// Defaults with the mutation step set to half a cell side.
    pub fn for_geometry(geom: &ArrayGeometry) -> Self {
        Self {
            mutation_sigma: 0.5 * geom.cell_side(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64, reason| {
            Err(Error::InvalidParameter {
                name,
                value,
                reason,
            })
        };
        if self.population < 4 {
            return bad("ga.population", self.population as f64, "must be at least 4");
        }
        if self.generations < 1 {
            return bad("ga.generations", 0.0, "must be at least 1");
        }
        if self.elitism >= self.population {
            return bad("ga.elitism", self.elitism as f64, "must be below the population");
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return bad("ga.mutation_sigma", self.mutation_sigma, "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("ga.mutation_prob", self.mutation_prob, "must lie in [0, 1]");
        }
        if !(self.crossover_alpha.is_finite() && self.crossover_alpha >= 0.0) {
            return bad("ga.crossover_alpha", self.crossover_alpha, "must be finite and >= 0");
        }
        if !(self.mutation_decay > 0.0 && self.mutation_decay <= 1.0) {
            return bad("ga.mutation_decay", self.mutation_decay, "must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub point: (f64, f64),
    pub value: f64,
    /// Best value after the initial population and after every generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Individual {
    p: (f64, f64),
    f: f64,
}

// NaN objective values rank below everything else.
fn fitness(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn sort_desc(pop: &mut [Individual]) {
    pop.sort_by(|a, b| b.f.total_cmp(&a.f));
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if b.f > a.f {
        b
    } else {
        a
    }
}

fn blend<R: Rng + ?Sized>(a: f64, b: f64, alpha: f64, rng: &mut R) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let d = hi - lo;
    let u: f64 = rng.random();
    lo - alpha * d + u * (1.0 + 2.0 * alpha) * d
}

fn mutate<R: Rng + ?Sized>(v: f64, prob: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 && rng.random::<f64>() < prob {
        let z: f64 = StandardNormal.sample(rng);
        v + sigma * z
    } else {
        v
    }
}

/// Maximizes `objective` over `bounds`. The whole run is a deterministic
/// function of the state of `rng`.
pub fn ga_optimize<F, R>(
    mut objective: F,
    bounds: &SearchBox,
    config: &GaConfig,
    rng: &mut R,
) -> Result<GaResult>
where
    F: FnMut(f64, f64) -> f64,
    R: Rng + ?Sized,
{
    bounds.validate()?;
    config.validate()?;
    let mut evaluations = 0usize;
    let mut eval = |p: (f64, f64)| {
        evaluations += 1;
        Individual {
            p,
            f: fitness(objective(p.0, p.1)),
        }
    };

    let mut pop: Vec<Individual> = (0..config.population)
        .map(|_| bounds.sample(rng))
        .map(&mut eval)
        .collect();
    sort_desc(&mut pop);
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(pop[0].f);

    let mut sigma = config.mutation_sigma;
    let mut next = Vec::with_capacity(config.population);
    for _ in 0..config.generations {
        next.clear();
        next.extend_from_slice(&pop[..config.elitism]);
        while next.len() < config.population {
            let a = tournament(&pop, rng).p;
            let b = tournament(&pop, rng).p;
            let child = (
                blend(a.0, b.0, config.crossover_alpha, rng),
                blend(a.1, b.1, config.crossover_alpha, rng),
            );
            let child = (
                mutate(child.0, config.mutation_prob, sigma, rng),
                mutate(child.1, config.mutation_prob, sigma, rng),
            );
            next.push(eval(bounds.clamp(child)));
        }
        std::mem::swap(&mut pop, &mut next);
        sort_desc(&mut pop);
        history.push(pop[0].f);
        sigma *= config.mutation_decay;
    }

    let best = pop[0];
    Ok(GaResult {
        point: best.p,
        value: best.f,
        history,
        evaluations,
    })
}

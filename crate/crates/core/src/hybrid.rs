//! Phase II: per-antibody refinement by simulated annealing or great deluge.
//!
//! Both searches are generic over the [`Scalar`] used for the temperature or
//! water level. Annealing needs `exp`, so it is restricted to floats; the
//! deluge works with any scalar, including exact rationals.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{draw_absent, Population};
use crate::library::{Antibody, ANTIBODY_LEN};
use crate::matching::{antibody_fitness, max_fitness, AntigenSample};
use crate::scalar::Scalar;
use crate::schedule::AntigenUniverse;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeighborOperator {
    /// Replace one position with a job not in the antibody.
    #[default]
    ChangeOneJob,
    /// Exchange the jobs at two distinct positions.
    SwapTwoJobs,
}

impl FromStr for NeighborOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "change" => Ok(NeighborOperator::ChangeOneJob),
            "swap" => Ok(NeighborOperator::SwapTwoJobs),
            other => Err(Error::Config(format!("unknown operator `{other}` (expected change|swap)"))),
        }
    }
}

impl fmt::Display for NeighborOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborOperator::ChangeOneJob => "change",
            NeighborOperator::SwapTwoJobs => "swap",
        })
    }
}

pub fn neighbor<R: Rng + ?Sized>(ab: &Antibody, op: NeighborOperator, rng: &mut R) -> Antibody {
    let mut jobs = *ab.jobs();
    match op {
        NeighborOperator::ChangeOneJob => {
            let k = rng.gen_range(0..ANTIBODY_LEN);
            jobs[k] = draw_absent(&jobs, rng);
        }
        NeighborOperator::SwapTwoJobs => {
            let picks = rand::seq::index::sample(rng, ANTIBODY_LEN, 2);
            jobs.swap(picks.index(0), picks.index(1));
        }
    }
    Antibody::from_array_unchecked(jobs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaConfig<T> {
    pub initial_temperature: T,
    pub final_temperature: T,
    pub cooling_factor: T,
    pub operator: NeighborOperator,
}

impl<T: Float> Default for SaConfig<T> {
    fn default() -> Self {
        SaConfig {
            initial_temperature: T::from(5000.0).unwrap(),
            final_temperature: T::from(0.05).unwrap(),
            cooling_factor: T::from(0.98).unwrap(),
            operator: NeighborOperator::ChangeOneJob,
        }
    }
}

impl<T: Float> SaConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = T::zero() < self.final_temperature
            && self.final_temperature < self.initial_temperature
            && T::zero() < self.cooling_factor
            && self.cooling_factor < T::one();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "annealing needs 0 < final < initial temperature and 0 < cooling < 1".into(),
            ))
        }
    }

    /// Number of temperatures visited by the geometric schedule.
    pub fn temperature_steps(&self) -> usize {
        let mut t = self.initial_temperature;
        let mut n = 0;
        while t > self.final_temperature {
            n += 1;
            t = t * self.cooling_factor;
        }
        n
    }
}

/// Probability of moving to a candidate that is `delta` worse at `temperature`.
pub fn acceptance_probability<T: Float>(delta: T, temperature: T) -> T {
    if delta <= T::zero() {
        T::one()
    } else {
        (-delta / temperature).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub iterations: usize,
    /// Stop after this many consecutive steps without a new best; `None` disables.
    pub stagnation_limit: Option<usize>,
    pub operator: NeighborOperator,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            iterations: 120,
            stagnation_limit: Some(30),
            operator: NeighborOperator::ChangeOneJob,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.stagnation_limit == Some(0) {
            return Err(Error::Config("deluge iterations and stagnation limit must be >= 1".into()));
        }
        Ok(())
    }
}

/// One step of a refinement trace. `level` is the temperature (annealing)
/// or boundary (deluge) in force when the candidate was judged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep<T> {
    pub step: usize,
    pub level: T,
    pub current_fitness: u32,
    pub best_fitness: u32,
    pub accepted: bool,
}

impl<T: fmt::Display> TraceStep<T> {
    pub const CSV_HEADER: &'static str = "step,temperature_or_boundary,current_fitness,best_fitness,accepted";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.step, self.level, self.current_fitness, self.best_fitness, self.accepted
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOutcome<T> {
    /// The refined antibody, or the input when nothing strictly better was found.
    pub antibody: Antibody,
    pub fitness: u32,
    pub steps: usize,
    /// Temperature or boundary after the last step.
    pub final_level: T,
}

pub fn sa_refine<T: Float + Scalar, R: Rng + ?Sized>(
    ab: &Antibody,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    cfg: &SaConfig<T>,
    rng: &mut R,
) -> Antibody {
    sa_search(ab, universe, sample, cfg, rng, |_| {}).antibody
}

/// Simulated annealing with one candidate per temperature.
pub fn sa_search<T, R, F>(
    ab: &Antibody,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    cfg: &SaConfig<T>,
    rng: &mut R,
    mut trace: F,
) -> SearchOutcome<T>
where
    T: Float + Scalar,
    R: Rng + ?Sized,
    F: FnMut(&TraceStep<T>),
{
    let start = antibody_fitness(ab, universe, sample);
    let (mut current, mut current_fit) = (*ab, start);
    let (mut best, mut best_fit) = (*ab, start);
    let mut t = cfg.initial_temperature;
    let mut steps = 0;

    while t > cfg.final_temperature {
        let candidate = neighbor(&current, cfg.operator, rng);
        let cand_fit = antibody_fitness(&candidate, universe, sample);
        let delta = T::from_fitness(current_fit) - T::from_fitness(cand_fit);
        let accepted = delta <= T::zero() || T::from(rng.gen::<f64>()).unwrap() < acceptance_probability(delta, t);
        if accepted {
            current = candidate;
            current_fit = cand_fit;
            if current_fit > best_fit {
                best = current;
                best_fit = current_fit;
            }
        }
        trace(&TraceStep {
            step: steps,
            level: t,
            current_fitness: current_fit,
            best_fitness: best_fit,
            accepted,
        });
        steps += 1;
        t = t * cfg.cooling_factor;
    }

    let (antibody, fitness) = if best_fit > start { (best, best_fit) } else { (*ab, start) };
    SearchOutcome {
        antibody,
        fitness,
        steps,
        final_level: t,
    }
}

/// Decay rate of the deluge level: `(f0 - f_max) / iterations`, never positive.
pub fn deluge_rate<T: Scalar>(start_fitness: u32, target_fitness: u32, iterations: usize) -> T {
    (T::from_fitness(start_fitness) - T::from_fitness(target_fitness)) / T::from_count(iterations)
}

pub fn gd_refine<T: Scalar, R: Rng + ?Sized>(
    ab: &Antibody,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    cfg: &GdConfig,
    rng: &mut R,
) -> Antibody {
    gd_search::<T, _, _>(ab, universe, sample, cfg, rng, |_| {}).antibody
}

/// Great deluge for a maximised fitness.
///
/// The level starts at the initial fitness and rises by `-rate` each step so
/// that it reaches the maximum attainable fitness after `iterations` steps.
/// A candidate is accepted when it is no worse than the current antibody or
/// it is at or above the level.
pub fn gd_search<T, R, F>(
    ab: &Antibody,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    cfg: &GdConfig,
    rng: &mut R,
    mut trace: F,
) -> SearchOutcome<T>
where
    T: Scalar,
    R: Rng + ?Sized,
    F: FnMut(&TraceStep<T>),
{
    let start = antibody_fitness(ab, universe, sample);
    let rate: T = deluge_rate(start, max_fitness(sample.len()), cfg.iterations);
    let mut boundary = T::from_fitness(start);
    let (mut current, mut current_fit) = (*ab, start);
    let (mut best, mut best_fit) = (*ab, start);
    let mut stale = 0;
    let mut steps = 0;

    while steps < cfg.iterations {
        let candidate = neighbor(&current, cfg.operator, rng);
        let cand_fit = antibody_fitness(&candidate, universe, sample);
        let accepted = cand_fit >= current_fit || T::from_fitness(cand_fit) >= boundary;
        if accepted {
            current = candidate;
            current_fit = cand_fit;
        }
        trace(&TraceStep {
            step: steps,
            level: boundary,
            current_fitness: current_fit,
            best_fitness: best_fit.max(current_fit),
            accepted,
        });
        boundary = boundary - rate;
        steps += 1;

        if current_fit > best_fit {
            best = current;
            best_fit = current_fit;
            stale = 0;
        } else {
            stale += 1;
            if cfg.stagnation_limit.is_some_and(|limit| stale >= limit) {
                break;
            }
        }
    }

    let (antibody, fitness) = if best_fit > start { (best, best_fit) } else { (*ab, start) };
    SearchOutcome {
        antibody,
        fitness,
        steps,
        final_level: boundary,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Refinement<T> {
    Annealing(SaConfig<T>),
    Deluge(GdConfig),
}

impl<T: Float> Refinement<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Refinement::Annealing(c) => c.validate(),
            Refinement::Deluge(c) => c.validate(),
        }
    }
}

/// Generator for antibody `index` of a refinement seeded with `seed`.
///
/// Every antibody gets its own ChaCha stream, so serial and parallel runs agree.
pub fn antibody_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Refine every antibody independently, keeping a result only when it is strictly fitter.
pub fn refine_population<T: Float + Scalar>(
    pop: &Population,
    method: &Refinement<T>,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    seed: u64,
) -> Population {
    let refined: Vec<(Antibody, u32)> = pop
        .antibodies()
        .par_iter()
        .zip(pop.fitnesses().par_iter())
        .enumerate()
        .map(|(k, (ab, &fit))| {
            let mut rng = antibody_rng(seed, k);
            let out = match method {
                Refinement::Annealing(cfg) => sa_search(ab, universe, sample, cfg, &mut rng, |_| {}),
                Refinement::Deluge(cfg) => gd_search::<T, _, _>(ab, universe, sample, cfg, &mut rng, |_| {}),
            };
            if out.fitness > fit {
                (out.antibody, out.fitness)
            } else {
                (*ab, fit)
            }
        })
        .collect();
    let (antibodies, fitnesses) = refined.into_iter().unzip();
    Population::from_parts(antibodies, fitnesses).expect("size unchanged")
}

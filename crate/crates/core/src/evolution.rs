//! Phase I: genetic evolution of the antibody population.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{Antibody, ANTIBODY_LEN, INITIAL_POPULATION_SIZE};
use crate::matching::{antibody_fitness, AntigenSample};
use crate::schedule::{AntigenUniverse, JobId, NUM_JOBS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub population_size: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            generations: 250,
            crossover_rate: 0.7,
            mutation_rate: 0.2,
            tournament_size: 2,
            population_size: INITIAL_POPULATION_SIZE,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} {rate} outside [0, 1]")));
            }
        }
        if self.tournament_size == 0 || self.population_size == 0 {
            return Err(Error::Config("tournament and population sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Antibodies with fitness cached against one fixed antigen sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Population {
    antibodies: Vec<Antibody>,
    fitnesses: Vec<u32>,
    best_ever: (Antibody, u32),
}

impl Population {
    pub fn evaluate(antibodies: Vec<Antibody>, universe: &AntigenUniverse, sample: &AntigenSample) -> Result<Self> {
        let fitnesses = antibodies
            .iter()
            .map(|ab| antibody_fitness(ab, universe, sample))
            .collect();
        Self::from_parts(antibodies, fitnesses)
    }

    /// Build from already computed fitness values.
    pub fn from_parts(antibodies: Vec<Antibody>, fitnesses: Vec<u32>) -> Result<Self> {
        if antibodies.is_empty() || antibodies.len() != fitnesses.len() {
            return Err(Error::Config(format!(
                "population needs matching, non-empty antibody ({}) and fitness ({}) lists",
                antibodies.len(),
                fitnesses.len()
            )));
        }
        let k = best_index(&fitnesses);
        let best_ever = (antibodies[k], fitnesses[k]);
        Ok(Population {
            antibodies,
            fitnesses,
            best_ever,
        })
    }

    pub fn antibodies(&self) -> &[Antibody] {
        &self.antibodies
    }

    pub fn fitnesses(&self) -> &[u32] {
        &self.fitnesses
    }

    pub fn best_ever(&self) -> (Antibody, u32) {
        self.best_ever
    }

    pub fn len(&self) -> usize {
        self.antibodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antibodies.is_empty()
    }

    pub fn best_fitness(&self) -> u32 {
        self.fitnesses.iter().copied().max().unwrap_or(0)
    }

    pub fn total_fitness(&self) -> u64 {
        self.fitnesses.iter().map(|&f| u64::from(f)).sum()
    }

    pub fn stats(&self, generation: usize) -> GenerationStats {
        GenerationStats {
            generation,
            best: self.best_fitness(),
            mean: self.total_fitness() as f64 / self.len() as f64,
            worst: self.fitnesses.iter().copied().min().unwrap_or(0),
        }
    }
}

/// Lowest index holding the maximum fitness.
fn best_index(fitnesses: &[u32]) -> usize {
    let mut best = 0;
    for (k, &f) in fitnesses.iter().enumerate() {
        if f > fitnesses[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: u32,
    pub mean: f64,
    pub worst: u32,
}

impl GenerationStats {
    pub const CSV_HEADER: &'static str = "generation,best,mean,worst";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.4},{}", self.generation, self.best, self.mean, self.worst)
    }
}

/// Best of `k` indices drawn with replacement; ties go to the lowest index.
pub fn tournament_select<R: Rng + ?Sized>(fitnesses: &[u32], k: usize, rng: &mut R) -> usize {
    assert!(k >= 1, "tournament size must be at least 1");
    let mut winner = rng.gen_range(0..fitnesses.len());
    for _ in 1..k {
        let challenger = rng.gen_range(0..fitnesses.len());
        let (fw, fc) = (fitnesses[winner], fitnesses[challenger]);
        if fc > fw || (fc == fw && challenger < winner) {
            winner = challenger;
        }
    }
    winner
}

/// Order-based crossover adapted to parents over different job sets.
///
/// Each child keeps its own parent's jobs. The positions holding jobs that
/// both parents contain are refilled with those jobs in the order they appear
/// in the other parent. Consumes no randomness.
pub fn order_crossover(p1: &Antibody, p2: &Antibody) -> (Antibody, Antibody) {
    (reorder_shared(p1, p2), reorder_shared(p2, p1))
}

fn reorder_shared(keep: &Antibody, order: &Antibody) -> Antibody {
    let mut shared = order.jobs().iter().filter(|&&j| keep.contains(j));
    let mut jobs = *keep.jobs();
    for slot in jobs.iter_mut() {
        if order.contains(*slot) {
            *slot = *shared.next().expect("shared counts agree");
        }
    }
    Antibody::from_array_unchecked(jobs)
}

/// Replace each gene with probability `rate` by a job not already present.
pub fn mutate<R: Rng + ?Sized>(ab: &Antibody, rate: f64, rng: &mut R) -> Antibody {
    let mut jobs = *ab.jobs();
    for k in 0..ANTIBODY_LEN {
        if rng.gen_bool(rate) {
            jobs[k] = draw_absent(&jobs, rng);
        }
    }
    Antibody::from_array_unchecked(jobs)
}

/// Uniform job id from `1..=15` minus those in `jobs`.
pub(crate) fn draw_absent<R: Rng + ?Sized>(jobs: &[JobId; ANTIBODY_LEN], rng: &mut R) -> JobId {
    let mut free = [0; NUM_JOBS];
    let mut n = 0;
    for id in 1..=NUM_JOBS as JobId {
        if !jobs.contains(&id) {
            free[n] = id;
            n += 1;
        }
    }
    *free[..n].choose(rng).expect("ten jobs always free")
}

/// Run the generational GA, discarding per-generation statistics.
pub fn evolve<R: Rng + ?Sized>(
    pop: Population,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    cfg: &GaConfig,
    rng: &mut R,
) -> Population {
    evolve_with(pop, universe, sample, cfg, rng, |_| {})
}

/// Run the generational GA, reporting statistics after every generation
/// (generation 0 is the input population).
///
/// Parents are picked by tournament; the two fittest of
/// `{child1, child2, parent1, parent2}` enter the next generation (children
/// win ties). The best antibody seen so far replaces the worst member whenever
/// the new generation would otherwise lose it.
pub fn evolve_with<R, F>(
    mut pop: Population,
    universe: &AntigenUniverse,
    sample: &AntigenSample,
    cfg: &GaConfig,
    rng: &mut R,
    mut observe: F,
) -> Population
where
    R: Rng + ?Sized,
    F: FnMut(&GenerationStats),
{
    observe(&pop.stats(0));
    let size = pop.len();
    for generation in 1..=cfg.generations {
        let mut next = Vec::with_capacity(size);
        let mut next_fit = Vec::with_capacity(size);

        while next.len() < size {
            let a = tournament_select(&pop.fitnesses, cfg.tournament_size, rng);
            let b = tournament_select(&pop.fitnesses, cfg.tournament_size, rng);
            let (p1, p2) = (pop.antibodies[a], pop.antibodies[b]);
            let (c1, c2) = if rng.gen_bool(cfg.crossover_rate) {
                order_crossover(&p1, &p2)
            } else {
                (p1, p2)
            };
            let c1 = mutate(&c1, cfg.mutation_rate, rng);
            let c2 = mutate(&c2, cfg.mutation_rate, rng);

            let mut family = [
                (c1, antibody_fitness(&c1, universe, sample)),
                (c2, antibody_fitness(&c2, universe, sample)),
                (p1, pop.fitnesses[a]),
                (p2, pop.fitnesses[b]),
            ];
            family.sort_by_key(|x| std::cmp::Reverse(x.1));
            for (ab, f) in family.into_iter().take((size - next.len()).min(2)) {
                next.push(ab);
                next_fit.push(f);
                if f > pop.best_ever.1 {
                    pop.best_ever = (ab, f);
                }
            }
        }

        let (best_ab, best_f) = pop.best_ever;
        if next_fit.iter().all(|&f| f < best_f) {
            let worst = (0..size).min_by_key(|&k| next_fit[k]).expect("non-empty");
            next[worst] = best_ab;
            next_fit[worst] = best_f;
        }
        pop.antibodies = next;
        pop.fitnesses = next_fit;
        observe(&pop.stats(generation));
    }
    pop
}

//! Jobs, disturbance scenarios and the antigen universe.
//!
//! A [`BaseProblem`] describes fifteen jobs on one machine. Disturbance
//! scenarios are produced by re-drawing arrival dates, and each scenario is
//! turned into a full machine sequence (an [`Antigen`]) by earliest-due-date
//! dispatch. Ten such antigens form the [`AntigenUniverse`].

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Job identifier in `1..=NUM_JOBS`.
pub type JobId = u8;

pub const NUM_JOBS: usize = 15;
pub const UNIVERSE_SIZE: usize = 10;
/// Upper bound (inclusive) of a re-drawn arrival date.
pub const MAX_ARRIVAL: u32 = 300;
pub const SCENARIO_MUTATION_PROBABILITY: f64 = 0.2;
/// Seed of the synthetic instance shipped with the crate.
pub const DEFAULT_BASE_SEED: u64 = 0x6a62_3131;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub processing_time: u32,
    pub due_date: u32,
    pub arrival_date: u32,
}

impl Job {
    /// Latest admissible arrival: `due_date - processing_time`.
    pub fn latest_arrival(&self) -> u32 {
        self.due_date.saturating_sub(self.processing_time)
    }

    fn validate(&self) -> Result<()> {
        if self.id == 0 || self.id as usize > NUM_JOBS {
            return Err(Error::InvalidProblem(format!("job id {} out of range", self.id)));
        }
        if self.processing_time > self.due_date {
            return Err(Error::InvalidProblem(format!(
                "job {}: processing time {} exceeds due date {}",
                self.id, self.processing_time, self.due_date
            )));
        }
        if self.arrival_date > self.latest_arrival() {
            return Err(Error::InvalidProblem(format!(
                "job {}: arrival {} is later than due - p = {}",
                self.id,
                self.arrival_date,
                self.latest_arrival()
            )));
        }
        Ok(())
    }
}

/// Fifteen jobs with ids `1..=15`, stored in id order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseProblem {
    jobs: Vec<Job>,
}

impl BaseProblem {
    pub fn new(mut jobs: Vec<Job>) -> Result<Self> {
        if jobs.len() != NUM_JOBS {
            return Err(Error::InvalidProblem(format!(
                "expected {NUM_JOBS} jobs, got {}",
                jobs.len()
            )));
        }
        for job in &jobs {
            job.validate()?;
        }
        jobs.sort_by_key(|j| j.id);
        for (k, job) in jobs.iter().enumerate() {
            if job.id as usize != k + 1 {
                return Err(Error::InvalidProblem(format!(
                    "job ids must be 1..={NUM_JOBS} each exactly once"
                )));
            }
        }
        Ok(BaseProblem { jobs })
    }

    /// Random instance: processing times in `1..=20`, due dates in
    /// `30..=300`, arrivals uniform in `0..=due - p`.
    pub fn synthetic(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jobs = (1..=NUM_JOBS as JobId)
            .map(|id| {
                let processing_time = rng.gen_range(1..=20);
                let due_date = rng.gen_range(30..=MAX_ARRIVAL);
                let arrival_date = rng.gen_range(0..=due_date - processing_time);
                Job {
                    id,
                    processing_time,
                    due_date,
                    arrival_date,
                }
            })
            .collect();
        BaseProblem { jobs }
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, id: JobId) -> &Job {
        &self.jobs[id as usize - 1]
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        match lines.next() {
            Some((_, header)) if header.split_whitespace().eq(["jobs", "15"]) => {}
            Some((n, other)) => {
                return Err(Error::parse(n, format!("expected header `jobs 15`, found `{other}`")))
            }
            None => return Err(Error::parse(0, "empty base-problem file")),
        }

        let mut jobs = Vec::with_capacity(NUM_JOBS);
        let mut last_line = 1;
        for (n, line) in lines {
            last_line = n;
            let fields = parse_ints(line, n)?;
            let [id, processing_time, due_date, arrival_date] = fields[..] else {
                return Err(Error::parse(n, format!("expected 4 fields, found {}", fields.len())));
            };
            let job = Job {
                id: u8::try_from(id).map_err(|_| Error::parse(n, format!("job id {id} out of range")))?,
                processing_time,
                due_date,
                arrival_date,
            };
            job.validate().map_err(|e| Error::parse(n, e.to_string()))?;
            if jobs.iter().any(|j: &Job| j.id == job.id) {
                return Err(Error::parse(n, format!("duplicate job id {}", job.id)));
            }
            jobs.push(job);
        }
        if jobs.len() != NUM_JOBS {
            return Err(Error::parse(
                last_line,
                format!("expected {NUM_JOBS} jobs, found {}", jobs.len()),
            ));
        }
        BaseProblem::new(jobs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl Default for BaseProblem {
    fn default() -> Self {
        BaseProblem::synthetic(DEFAULT_BASE_SEED)
    }
}

impl fmt::Display for BaseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "jobs {NUM_JOBS}")?;
        for j in &self.jobs {
            writeln!(
                f,
                "{} {} {} {}",
                j.id, j.processing_time, j.due_date, j.arrival_date
            )?;
        }
        Ok(())
    }
}

/// A full single-machine schedule: a permutation of job ids `1..=15`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Antigen([JobId; NUM_JOBS]);

impl Antigen {
    pub fn new(sequence: [JobId; NUM_JOBS]) -> Result<Self> {
        let mut seen = [false; NUM_JOBS + 1];
        for &id in &sequence {
            if id == 0 || id as usize > NUM_JOBS {
                return Err(Error::InvalidAntigen(format!("job id {id} out of range")));
            }
            if std::mem::replace(&mut seen[id as usize], true) {
                return Err(Error::InvalidAntigen(format!("duplicate job id {id}")));
            }
        }
        Ok(Antigen(sequence))
    }

    pub fn from_slice(sequence: &[JobId]) -> Result<Self> {
        let arr: [JobId; NUM_JOBS] = sequence.try_into().map_err(|_| {
            Error::InvalidAntigen(format!("expected {NUM_JOBS} jobs, got {}", sequence.len()))
        })?;
        Self::new(arr)
    }

    pub fn identity() -> Self {
        let mut seq = [0; NUM_JOBS];
        for (k, s) in seq.iter_mut().enumerate() {
            *s = k as JobId + 1;
        }
        Antigen(seq)
    }

    pub fn jobs(&self) -> &[JobId; NUM_JOBS] {
        &self.0
    }
}

impl fmt::Display for Antigen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_joined(f, &self.0)
    }
}

/// The ten antigens every antibody is built from and evaluated against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntigenUniverse {
    antigens: Vec<Antigen>,
}

impl AntigenUniverse {
    pub fn new(antigens: Vec<Antigen>) -> Result<Self> {
        if antigens.len() != UNIVERSE_SIZE {
            return Err(Error::InvalidAntigen(format!(
                "expected {UNIVERSE_SIZE} antigens, got {}",
                antigens.len()
            )));
        }
        Ok(AntigenUniverse { antigens })
    }

    pub fn antigens(&self) -> &[Antigen] {
        &self.antigens
    }

    pub fn get(&self, index: usize) -> &Antigen {
        &self.antigens[index]
    }

    pub fn len(&self) -> usize {
        self.antigens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antigens.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut antigens = Vec::with_capacity(UNIVERSE_SIZE);
        let mut last_line = 0;
        for (k, raw) in text.lines().enumerate() {
            let n = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            last_line = n;
            let ids = parse_ints(line, n)?
                .into_iter()
                .map(|v| {
                    JobId::try_from(v).map_err(|_| Error::parse(n, format!("job id {v} out of range")))
                })
                .collect::<Result<Vec<_>>>()?;
            let antigen = Antigen::from_slice(&ids).map_err(|e| Error::parse(n, e.to_string()))?;
            antigens.push(antigen);
        }
        if antigens.len() != UNIVERSE_SIZE {
            return Err(Error::parse(
                last_line,
                format!("expected {UNIVERSE_SIZE} antigens, found {}", antigens.len()),
            ));
        }
        Ok(AntigenUniverse { antigens })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for AntigenUniverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.antigens {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Re-draw each job's arrival date with the given probability.
///
/// Draws are uniform in `0..=MAX_ARRIVAL` and clamped to `due - p`.
pub fn mutate_scenario<R: Rng + ?Sized>(base: &BaseProblem, probability: f64, rng: &mut R) -> BaseProblem {
    assert!((0.0..=1.0).contains(&probability), "probability {probability} outside [0, 1]");
    let jobs = base
        .jobs
        .iter()
        .map(|job| {
            let mut job = *job;
            if rng.gen_bool(probability) {
                let draw = rng.gen_range(0..=MAX_ARRIVAL);
                job.arrival_date = draw.min(job.latest_arrival());
            }
            job
        })
        .collect();
    BaseProblem { jobs }
}

/// Earliest-due-date dispatch on one machine.
///
/// Among released, unscheduled jobs the smallest due date wins (ties by id).
/// When nothing is released the clock jumps to the next arrival.
pub fn schedule_scenario(scenario: &BaseProblem) -> Antigen {
    let mut pending: Vec<&Job> = scenario.jobs.iter().collect();
    let mut sequence = [0; NUM_JOBS];
    let mut time: u64 = 0;

    for slot in sequence.iter_mut() {
        let k = loop {
            let released = pending
                .iter()
                .enumerate()
                .filter(|(_, j)| u64::from(j.arrival_date) <= time)
                .min_by_key(|(_, j)| (j.due_date, j.id))
                .map(|(k, _)| k);
            match released {
                Some(k) => break k,
                None => {
                    time = pending
                        .iter()
                        .map(|j| u64::from(j.arrival_date))
                        .min()
                        .expect("pending jobs remain");
                }
            }
        };
        let job = pending.swap_remove(k);
        *slot = job.id;
        time += u64::from(job.processing_time);
    }
    Antigen(sequence)
}

pub fn generate_universe<R: Rng + ?Sized>(base: &BaseProblem, rng: &mut R) -> AntigenUniverse {
    generate_universe_with(base, SCENARIO_MUTATION_PROBABILITY, rng)
}

pub fn generate_universe_with<R: Rng + ?Sized>(
    base: &BaseProblem,
    probability: f64,
    rng: &mut R,
) -> AntigenUniverse {
    let antigens = (0..UNIVERSE_SIZE)
        .map(|_| schedule_scenario(&mutate_scenario(base, probability, rng)))
        .collect();
    AntigenUniverse { antigens }
}

fn parse_ints(line: &str, n: usize) -> Result<Vec<u32>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<u32>()
                .map_err(|_| Error::parse(n, format!("`{tok}` is not a non-negative integer")))
        })
        .collect()
}

pub(crate) fn write_joined<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (k, item) in items.iter().enumerate() {
        if k > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

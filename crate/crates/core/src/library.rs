//! Gene libraries and the combinatorial antibody pools built from them.
//!
//! Each antigen is cut into five contiguous three-job components; library `s`
//! collects slot `s` of every antigen. An antibody is formed by taking two
//! components from different libraries (lower index first), concatenating
//! them, and dropping one of the six jobs.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{write_joined, AntigenUniverse, JobId, NUM_JOBS, UNIVERSE_SIZE};

pub const COMPONENT_LEN: usize = 3;
pub const NUM_LIBRARIES: usize = NUM_JOBS / COMPONENT_LEN;
pub const ANTIBODY_LEN: usize = 5;
pub const INITIAL_POPULATION_SIZE: usize = 100;

const COMBINED_LEN: usize = 2 * COMPONENT_LEN;

/// A partial schedule of five distinct jobs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Antibody([JobId; ANTIBODY_LEN]);

impl Antibody {
    pub fn new(jobs: [JobId; ANTIBODY_LEN]) -> Result<Self> {
        for (k, &id) in jobs.iter().enumerate() {
            if id == 0 || id as usize > NUM_JOBS {
                return Err(Error::InvalidAntibody(format!("job id {id} out of range")));
            }
            if jobs[..k].contains(&id) {
                return Err(Error::InvalidAntibody(format!("duplicate job id {id}")));
            }
        }
        Ok(Antibody(jobs))
    }

    /// Wrap without validation; callers guarantee distinct ids in range.
    pub(crate) fn from_array_unchecked(jobs: [JobId; ANTIBODY_LEN]) -> Self {
        debug_assert!(Antibody::new(jobs).is_ok(), "{jobs:?}");
        Antibody(jobs)
    }

    pub fn jobs(&self) -> &[JobId; ANTIBODY_LEN] {
        &self.0
    }

    pub fn contains(&self, id: JobId) -> bool {
        self.0.contains(&id)
    }

    pub fn has_distinct_jobs(&self) -> bool {
        (1..ANTIBODY_LEN).all(|k| !self.0[..k].contains(&self.0[k]))
            && self.0.iter().all(|&j| (1..=NUM_JOBS as JobId).contains(&j))
    }
}

impl fmt::Display for Antibody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_joined(f, &self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Component {
    pub jobs: [JobId; COMPONENT_LEN],
    /// Index of the antigen the slice was cut from.
    pub antigen: usize,
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneLibrary {
    pub index: usize,
    pub components: Vec<Component>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LibrarySet {
    pub libraries: Vec<GeneLibrary>,
}

impl LibrarySet {
    /// Concatenate the slot components of antigen `k` back into a sequence.
    pub fn reassemble(&self, antigen: usize) -> Vec<JobId> {
        self.libraries
            .iter()
            .flat_map(|lib| lib.components[antigen].jobs)
            .collect()
    }
}

pub fn build_libraries(universe: &AntigenUniverse) -> LibrarySet {
    let libraries = (0..NUM_LIBRARIES)
        .map(|slot| GeneLibrary {
            index: slot,
            components: universe
                .antigens()
                .iter()
                .enumerate()
                .map(|(k, antigen)| {
                    let start = slot * COMPONENT_LEN;
                    let mut jobs = [0; COMPONENT_LEN];
                    jobs.copy_from_slice(&antigen.jobs()[start..start + COMPONENT_LEN]);
                    Component {
                        jobs,
                        antigen: k,
                        slot,
                    }
                })
                .collect(),
        })
        .collect();
    LibrarySet { libraries }
}

/// Where a pooled antibody came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub library_pair: (usize, usize),
    pub components: (usize, usize),
    /// Bit `k` set when position `k` of the six-job concatenation is kept.
    pub mask: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PoolEntry {
    pub antibody: Antibody,
    pub provenance: Provenance,
}

/// Enumerate every order-preserving five-job subsequence of `c1 ++ c2`.
///
/// Candidates are produced by dropping position 5, 4, ..., 0 in that order;
/// those that still hold a repeated job are discarded. `components` is left
/// as `(0, 0)` for the caller to fill in.
pub fn combine_components(c1: &Component, c2: &Component) -> Vec<PoolEntry> {
    let mut joined = [0; COMBINED_LEN];
    joined[..COMPONENT_LEN].copy_from_slice(&c1.jobs);
    joined[COMPONENT_LEN..].copy_from_slice(&c2.jobs);

    (0..COMBINED_LEN)
        .rev()
        .filter_map(|dropped| {
            let mut jobs = [0; ANTIBODY_LEN];
            let mut it = joined
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != dropped)
                .map(|(_, &j)| j);
            jobs.fill_with(|| it.next().expect("five survivors"));
            let antibody = Antibody::new(jobs).ok()?;
            Some(PoolEntry {
                antibody,
                provenance: Provenance {
                    library_pair: (c1.slot, c2.slot),
                    components: (0, 0),
                    mask: (0b11_1111 & !(1u8 << dropped)),
                },
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PopulationType {
    /// Every candidate kept, duplicates included.
    A,
    /// One copy of each distinct job sequence.
    B,
    /// One copy of each distinct sequence per source library pair.
    C,
}

impl std::str::FromStr for PopulationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(PopulationType::A),
            "b" => Ok(PopulationType::B),
            "c" => Ok(PopulationType::C),
            other => Err(Error::Config(format!("unknown population type `{other}`"))),
        }
    }
}

impl fmt::Display for PopulationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PopulationType::A => "a",
            PopulationType::B => "b",
            PopulationType::C => "c",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AntibodyPool {
    pub population_type: PopulationType,
    pub entries: Vec<PoolEntry>,
}

impl AntibodyPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn antibodies(&self) -> impl Iterator<Item = &Antibody> + '_ {
        self.entries.iter().map(|e| &e.antibody)
    }

    /// One line per antibody: `j1 j2 j3 j4 j5 | i j ci cj mask`.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 32);
        for e in &self.entries {
            let p = &e.provenance;
            out.push_str(&format!(
                "{} | {} {} {} {} {}\n",
                e.antibody, p.library_pair.0, p.library_pair.1, p.components.0, p.components.1, p.mask
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}

/// Every cross-library candidate in enumeration order, before deduplication.
fn enumerate_candidates(libset: &LibrarySet) -> Vec<PoolEntry> {
    let mut out = Vec::with_capacity(NUM_LIBRARIES * (NUM_LIBRARIES - 1) / 2 * UNIVERSE_SIZE.pow(2) * 6);
    for (i, lib_i) in libset.libraries.iter().enumerate() {
        for lib_j in &libset.libraries[i + 1..] {
            for (ci, c1) in lib_i.components.iter().enumerate() {
                for (cj, c2) in lib_j.components.iter().enumerate() {
                    out.extend(combine_components(c1, c2).into_iter().map(|mut e| {
                        e.provenance.components = (ci, cj);
                        e
                    }));
                }
            }
        }
    }
    out
}

pub fn generate_pool(libset: &LibrarySet, population_type: PopulationType) -> Result<AntibodyPool> {
    let candidates = enumerate_candidates(libset);
    let entries: Vec<PoolEntry> = match population_type {
        PopulationType::A => candidates,
        PopulationType::B => {
            let mut seen = HashSet::new();
            candidates.into_iter().filter(|e| seen.insert(e.antibody)).collect()
        }
        PopulationType::C => {
            let mut seen = HashSet::new();
            candidates
                .into_iter()
                .filter(|e| seen.insert((e.provenance.library_pair, e.antibody)))
                .collect()
        }
    };
    if entries.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(AntibodyPool {
        population_type,
        entries,
    })
}

/// Draw `size` distinct pool members uniformly, in random order.
pub fn sample_initial<R: Rng + ?Sized>(pool: &AntibodyPool, size: usize, rng: &mut R) -> Result<Vec<Antibody>> {
    if pool.len() < size {
        return Err(Error::PoolTooSmall {
            available: pool.len(),
            requested: size,
        });
    }
    Ok(rand::seq::index::sample(rng, pool.len(), size)
        .into_iter()
        .map(|k| pool.entries[k].antibody)
        .collect())
}

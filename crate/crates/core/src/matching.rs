//! Sliding-window matching of antibodies against antigens.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{Antibody, ANTIBODY_LEN};
use crate::schedule::{Antigen, AntigenUniverse, NUM_JOBS};

/// Score contributed by each aligned position that agrees.
pub const SCORE_PER_MATCH: u32 = 5;
/// Highest alignment offset; offsets `0..=MAX_OFFSET` are evaluated.
pub const MAX_OFFSET: usize = NUM_JOBS - ANTIBODY_LEN;
/// Best score an antibody can reach against one antigen.
pub const MAX_SCORE: u32 = SCORE_PER_MATCH * ANTIBODY_LEN as u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub best_count: u32,
    pub best_score: u32,
    pub best_offset: usize,
}

/// Indices of the antigens used for fitness, drawn once per run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntigenSample {
    indices: Vec<usize>,
}

impl AntigenSample {
    pub fn new(indices: Vec<usize>, universe_len: usize) -> Result<Self> {
        for (k, &i) in indices.iter().enumerate() {
            if i >= universe_len || indices[..k].contains(&i) {
                return Err(Error::Config(format!("invalid antigen sample {indices:?}")));
            }
        }
        if indices.is_empty() {
            return Err(Error::Config("antigen sample is empty".into()));
        }
        Ok(AntigenSample { indices })
    }

    /// Uniform draw without replacement.
    pub fn draw<R: Rng + ?Sized>(size: usize, universe_len: usize, rng: &mut R) -> Result<Self> {
        if size == 0 || size > universe_len {
            return Err(Error::SampleTooLarge {
                available: universe_len,
                requested: size,
            });
        }
        let indices = rand::seq::index::sample(rng, universe_len, size).into_vec();
        Ok(AntigenSample { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Positions `j` with `antibody[j] == antigen[offset + j]`.
pub fn alignment_count(antigen: &Antigen, antibody: &Antibody, offset: usize) -> u32 {
    assert!(offset <= MAX_OFFSET, "offset {offset} out of range 0..={MAX_OFFSET}");
    antigen.jobs()[offset..offset + ANTIBODY_LEN]
        .iter()
        .zip(antibody.jobs())
        .filter(|(a, b)| a == b)
        .count() as u32
}

/// Best alignment over all offsets; the first offset wins ties.
pub fn best_match(antigen: &Antigen, antibody: &Antibody) -> MatchResult {
    let mut best = (0, 0);
    for offset in 0..=MAX_OFFSET {
        let count = alignment_count(antigen, antibody, offset);
        if count > best.0 {
            best = (count, offset);
            if count == ANTIBODY_LEN as u32 {
                break;
            }
        }
    }
    MatchResult {
        best_count: best.0,
        best_score: SCORE_PER_MATCH * best.0,
        best_offset: best.1,
    }
}

/// Sum of best scores over the sampled antigens.
pub fn antibody_fitness(antibody: &Antibody, universe: &AntigenUniverse, sample: &AntigenSample) -> u32 {
    sample
        .indices
        .iter()
        .map(|&i| best_match(universe.get(i), antibody).best_score)
        .sum()
}

pub fn is_matched(antigen: &Antigen, antibody: &Antibody, threshold: u32) -> bool {
    best_match(antigen, antibody).best_count >= threshold
}

/// Highest attainable fitness for a sample of the given size.
pub fn max_fitness(sample_size: usize) -> u32 {
    MAX_SCORE * sample_size as u32
}

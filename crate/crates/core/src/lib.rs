//! Artificial immune system for job-shop rescheduling.
//!
//! Ten disturbance schedules (antigens) for one machine are sliced into gene
//! libraries, from which pools of five-job partial schedules (antibodies) are
//! enumerated. A genetic algorithm evolves a population of antibodies to match
//! a sample of antigens (Phase I); simulated annealing or the great deluge
//! algorithm then refines each antibody (Phase II). The [`experiment`] module
//! runs the replicated protocol and reports antigen coverage and fitness gains.
//!
//! Annealing temperatures and deluge levels are generic over [`Scalar`];
//! the aliases below fix the common choices.

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod hybrid;
pub mod library;
pub mod matching;
pub mod scalar;
pub mod schedule;

pub use error::{Error, Result};
pub use evolution::{evolve, evolve_with, mutate, order_crossover, tournament_select, GaConfig, GenerationStats, Population};
pub use experiment::{
    coverage, emit_reports, fitness_improvement, run_experiment, run_on_universe, CoverageTable, ExperimentConfig, Phase2,
    RunReport,
};
pub use hybrid::{
    gd_refine, gd_search, neighbor, refine_population, sa_refine, sa_search, GdConfig, NeighborOperator, Refinement,
    SaConfig, SearchOutcome, TraceStep,
};
pub use library::{
    build_libraries, combine_components, generate_pool, sample_initial, Antibody, AntibodyPool, Component, GeneLibrary,
    LibrarySet, PopulationType,
};
pub use matching::{alignment_count, antibody_fitness, best_match, is_matched, max_fitness, AntigenSample, MatchResult};
pub use scalar::Scalar;
pub use schedule::{
    generate_universe, mutate_scenario, schedule_scenario, Antigen, AntigenUniverse, BaseProblem, Job, JobId,
};

/// Exact rational level, for deluge runs whose boundary must land on the target exactly.
pub type ExactLevel = num_rational::Ratio<i64>;

pub type SaConfig32 = SaConfig<f32>;
pub type SaConfig64 = SaConfig<f64>;
pub type Refinement64 = Refinement<f64>;
pub type ExactOutcome = SearchOutcome<ExactLevel>;
pub type Outcome64 = SearchOutcome<f64>;

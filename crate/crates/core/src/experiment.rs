//! End-to-end experiment runner: replicated Phase I / Phase II runs,
//! coverage tables and fitness-improvement reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, GaConfig, Population};
use crate::hybrid::{refine_population, GdConfig, NeighborOperator, Refinement, SaConfig};
use crate::library::{build_libraries, generate_pool, sample_initial, Antibody, AntibodyPool, PopulationType, ANTIBODY_LEN};
use crate::matching::{is_matched, AntigenSample};
use crate::schedule::{generate_universe, AntigenUniverse, BaseProblem};

const STREAM_UNIVERSE: u64 = 1;
const STREAM_PHASE1: u64 = 2;
const STREAM_PHASE2: u64 = 3;

/// Deterministic child seed from a master seed and a path of indices (SplitMix64 chain).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase2 {
    #[default]
    None,
    Sa,
    Gd,
}

impl FromStr for Phase2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Phase2::None),
            "sa" => Ok(Phase2::Sa),
            "gd" => Ok(Phase2::Gd),
            other => Err(Error::Config(format!("unknown phase2 `{other}` (expected none|sa|gd)"))),
        }
    }
}

impl std::fmt::Display for Phase2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase2::None => "none",
            Phase2::Sa => "sa",
            Phase2::Gd => "gd",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Universe file; generated from the base problem when absent.
    pub universe: Option<PathBuf>,
    /// Base-problem file; the built-in synthetic instance when absent.
    pub base_problem: Option<PathBuf>,
    pub population_type: PopulationType,
    pub ag_sample_sizes: Vec<usize>,
    pub thresholds: Vec<u32>,
    pub replicates: usize,
    pub phase2: Phase2,
    pub operator: NeighborOperator,
    pub ga: GaConfig,
    pub sa: SaConfig<f64>,
    pub gd: GdConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            universe: None,
            base_problem: None,
            population_type: PopulationType::A,
            ag_sample_sizes: vec![1, 4, 8],
            thresholds: vec![2, 3, 4, 5],
            replicates: 10,
            phase2: Phase2::None,
            operator: NeighborOperator::ChangeOneJob,
            ga: GaConfig::default(),
            sa: SaConfig::default(),
            gd: GdConfig::default(),
            seed: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        self.refinement().map(|r| r.validate()).transpose()?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if self.ag_sample_sizes.is_empty() || self.thresholds.is_empty() {
            return Err(Error::Config("need at least one sample size and threshold".into()));
        }
        if let Some(&t) = self.thresholds.iter().find(|&&t| t as usize > ANTIBODY_LEN) {
            return Err(Error::Config(format!("threshold {t} exceeds antibody length")));
        }
        Ok(())
    }

    /// The Phase II method with the configured operator, if any.
    pub fn refinement(&self) -> Option<Refinement<f64>> {
        match self.phase2 {
            Phase2::None => None,
            Phase2::Sa => Some(Refinement::Annealing(SaConfig {
                operator: self.operator,
                ..self.sa
            })),
            Phase2::Gd => Some(Refinement::Deluge(GdConfig {
                operator: self.operator,
                ..self.gd
            })),
        }
    }

    /// Apply one `key=value` setting. Keys mirror the command-line flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "seed" => self.seed = parse_value(key, value)?,
            "universe" => self.universe = Some(PathBuf::from(value)),
            "base-problem" => self.base_problem = Some(PathBuf::from(value)),
            "type" => self.population_type = value.parse()?,
            "ag-sample" => self.ag_sample_sizes = parse_list(key, value)?,
            "thresholds" => self.thresholds = parse_list(key, value)?,
            "replicates" => self.replicates = parse_value(key, value)?,
            "phase2" => self.phase2 = value.parse()?,
            "operator" => self.operator = value.parse()?,
            "generations" => self.ga.generations = parse_value(key, value)?,
            "crossover-rate" => self.ga.crossover_rate = parse_value(key, value)?,
            "mutation-rate" => self.ga.mutation_rate = parse_value(key, value)?,
            "tournament-size" => self.ga.tournament_size = parse_value(key, value)?,
            "population-size" => self.ga.population_size = parse_value(key, value)?,
            "initial-temperature" => self.sa.initial_temperature = parse_value(key, value)?,
            "final-temperature" => self.sa.final_temperature = parse_value(key, value)?,
            "cooling-factor" => self.sa.cooling_factor = parse_value(key, value)?,
            "gd-iterations" => self.gd.iterations = parse_value(key, value)?,
            "stagnation-limit" => {
                self.gd.stagnation_limit = match value {
                    "none" | "0" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Apply a plain-text `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(k + 1, "expected key=value"))?;
            self.set(key, value).map_err(|e| Error::parse(k + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn load_universe(&self) -> Result<AntigenUniverse> {
        if let Some(path) = &self.universe {
            return AntigenUniverse::load(path);
        }
        let base = match &self.base_problem {
            Some(path) => BaseProblem::load(path)?,
            None => BaseProblem::default(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[STREAM_UNIVERSE]));
        Ok(generate_universe(&base, &mut rng))
    }
}

/// Antigens in the universe that no antibody matches at `threshold`.
pub fn coverage(antibodies: &[Antibody], universe: &AntigenUniverse, threshold: u32) -> usize {
    universe
        .antigens()
        .iter()
        .filter(|ag| !antibodies.iter().any(|ab| is_matched(ag, ab, threshold)))
        .count()
}

/// `100 * (sum(after) - sum(before)) / sum(before)`.
pub fn fitness_improvement(before: &[u64], after: &[u64]) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::Config(format!(
            "{} totals before refinement but {} after",
            before.len(),
            after.len()
        )));
    }
    let b: u64 = before.iter().sum();
    let a: u64 = after.iter().sum();
    if b == 0 {
        return Err(Error::DegenerateFitness);
    }
    Ok(100.0 * (a as f64 - b as f64) / b as f64)
}

/// Average unmatched-antigen counts, `cells[threshold][sample size]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub thresholds: Vec<u32>,
    pub ag_sample_sizes: Vec<usize>,
    pub cells: Vec<Vec<f64>>,
}

impl CoverageTable {
    pub fn get(&self, threshold: u32, ag_sample_size: usize) -> Option<f64> {
        let r = self.thresholds.iter().position(|&t| t == threshold)?;
        let c = self.ag_sample_sizes.iter().position(|&s| s == ag_sample_size)?;
        Some(self.cells[r][c])
    }

    /// Rows are thresholds, columns sample sizes; cells to one decimal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold");
        for s in &self.ag_sample_sizes {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
        for (t, row) in self.thresholds.iter().zip(&self.cells) {
            let _ = write!(out, "{t}");
            for v in row {
                let _ = write!(out, ",{v:.1}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty coverage table"))?;
        let mut cols = header.split(',');
        if cols.next() != Some("threshold") {
            return Err(Error::parse(1, "header must start with `threshold`"));
        }
        let ag_sample_sizes = cols
            .map(|c| c.parse().map_err(|_| Error::parse(1, format!("bad column `{c}`"))))
            .collect::<Result<Vec<usize>>>()?;
        let mut thresholds = Vec::new();
        let mut cells = Vec::new();
        for (k, line) in lines {
            let mut fields = line.split(',');
            let bad = |f: &str| Error::parse(k + 1, format!("bad field `{f}`"));
            let t = fields.next().unwrap_or_default();
            thresholds.push(t.parse().map_err(|_| bad(t))?);
            let row = fields
                .map(|f| f.parse::<f64>().map_err(|_| bad(f)))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != ag_sample_sizes.len() {
                return Err(Error::parse(k + 1, "row width differs from header"));
            }
            cells.push(row);
        }
        Ok(CoverageTable {
            thresholds,
            ag_sample_sizes,
            cells,
        })
    }
}

/// One (replicate, sample size) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub ag_sample_size: usize,
    pub sample: Vec<usize>,
    /// Unmatched counts after Phase I, one per threshold.
    pub phase1_unmatched: Vec<usize>,
    /// Unmatched counts after Phase II, when it ran.
    pub phase2_unmatched: Option<Vec<usize>>,
    pub fitness_before: u64,
    pub fitness_after: Option<u64>,
    pub best_fitness: u32,
    #[serde(skip)]
    pub phase1_time: Duration,
    #[serde(skip)]
    pub phase2_time: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub pool: Duration,
    /// Summed over all replicate runs.
    pub phase1: Duration,
    pub phase2: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pool_size: usize,
    pub ag_sample_sizes: Vec<usize>,
    pub records: Vec<ReplicateRecord>,
    /// Coverage of the Phase I populations; equals the final table when Phase II is off.
    pub phase1_coverage: CoverageTable,
    /// Improvement percentage per sample size, when Phase II ran.
    pub improvement: Vec<Option<f64>>,
    pub timings: StageTimings,
}

impl RunReport {
    pub fn records_for(&self, ag_sample_size: usize) -> impl Iterator<Item = &ReplicateRecord> + '_ {
        self.records.iter().filter(move |r| r.ag_sample_size == ag_sample_size)
    }

    pub fn fitness_csv(&self) -> String {
        let mut out = String::from("ag_sample,replicates,fitness_before,fitness_after,improvement_pct\n");
        for (s, imp) in self.ag_sample_sizes.iter().zip(&self.improvement) {
            let recs: Vec<_> = self.records_for(*s).collect();
            let before: u64 = recs.iter().map(|r| r.fitness_before).sum();
            let after = recs.iter().map(|r| r.fitness_after).sum::<Option<u64>>();
            let fmt_opt = |v: Option<String>| v.unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                out,
                "{s},{},{before},{},{}",
                recs.len(),
                fmt_opt(after.map(|a| a.to_string())),
                fmt_opt(imp.map(|p| format!("{p:.1}")))
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let t = &self.timings;
        format!(
            "stage,seconds\npool,{:.3}\nphase1,{:.3}\nphase2,{:.3}\ntotal,{:.3}\n",
            t.pool.as_secs_f64(),
            t.phase1.as_secs_f64(),
            t.phase2.as_secs_f64(),
            t.total.as_secs_f64()
        )
    }
}

fn run_replicate(
    cfg: &ExperimentConfig,
    universe: &AntigenUniverse,
    pool: &AntibodyPool,
    replicate: usize,
    ag_sample_size: usize,
) -> Result<ReplicateRecord> {
    let key = [replicate as u64, ag_sample_size as u64];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_PHASE1, key[0], key[1]]));

    let started = Instant::now();
    let sample = AntigenSample::draw(ag_sample_size, universe.len(), &mut rng)?;
    let initial = sample_initial(pool, cfg.ga.population_size, &mut rng)?;
    let pop = Population::evaluate(initial, universe, &sample)?;
    let pop = evolve(pop, universe, &sample, &cfg.ga, &mut rng);
    let phase1_time = started.elapsed();

    let unmatched = |p: &Population| -> Vec<usize> {
        cfg.thresholds
            .iter()
            .map(|&t| coverage(p.antibodies(), universe, t))
            .collect()
    };
    let mut record = ReplicateRecord {
        replicate,
        ag_sample_size,
        sample: sample.indices().to_vec(),
        phase1_unmatched: unmatched(&pop),
        phase2_unmatched: None,
        fitness_before: pop.total_fitness(),
        fitness_after: None,
        best_fitness: pop.best_fitness(),
        phase1_time,
        phase2_time: Duration::ZERO,
    };

    if let Some(method) = cfg.refinement() {
        let started = Instant::now();
        let seed = derive_seed(cfg.seed, &[STREAM_PHASE2, key[0], key[1]]);
        let refined = refine_population(&pop, &method, universe, &sample, seed);
        record.phase2_time = started.elapsed();
        record.phase2_unmatched = Some(unmatched(&refined));
        record.fitness_after = Some(refined.total_fitness());
        record.best_fitness = refined.best_fitness();
    }
    Ok(record)
}

fn average_table(cfg: &ExperimentConfig, records: &[ReplicateRecord], pick: impl Fn(&ReplicateRecord) -> &[usize]) -> CoverageTable {
    let cells = (0..cfg.thresholds.len())
        .map(|ti| {
            cfg.ag_sample_sizes
                .iter()
                .map(|&s| {
                    let vals: Vec<usize> = records
                        .iter()
                        .filter(|r| r.ag_sample_size == s)
                        .map(|r| pick(r)[ti])
                        .collect();
                    vals.iter().sum::<usize>() as f64 / vals.len() as f64
                })
                .collect()
        })
        .collect();
    CoverageTable {
        thresholds: cfg.thresholds.clone(),
        ag_sample_sizes: cfg.ag_sample_sizes.clone(),
        cells,
    }
}

/// Run the replicated protocol on a given universe.
pub fn run_on_universe(cfg: &ExperimentConfig, universe: &AntigenUniverse) -> Result<(CoverageTable, RunReport)> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = generate_pool(&build_libraries(universe), cfg.population_type)?;
    let pool_time = started.elapsed();

    let jobs: Vec<(usize, usize)> = (0..cfg.replicates)
        .flat_map(|r| cfg.ag_sample_sizes.iter().map(move |&s| (r, s)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(r, s)| {
            run_replicate(cfg, universe, &pool, r, s).map_err(|e| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let phase1_coverage = average_table(cfg, &records, |r| &r.phase1_unmatched);
    let table = if cfg.phase2 == Phase2::None {
        phase1_coverage.clone()
    } else {
        average_table(cfg, &records, |r| r.phase2_unmatched.as_deref().expect("phase 2 ran"))
    };

    let improvement = cfg
        .ag_sample_sizes
        .iter()
        .map(|&s| {
            let recs: Vec<_> = records.iter().filter(|r| r.ag_sample_size == s).collect();
            let before: Vec<u64> = recs.iter().map(|r| r.fitness_before).collect();
            match recs.iter().map(|r| r.fitness_after).collect::<Option<Vec<u64>>>() {
                Some(after) => fitness_improvement(&before, &after).map(Some),
                None => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let timings = StageTimings {
        pool: pool_time,
        phase1: records.iter().map(|r| r.phase1_time).sum(),
        phase2: records.iter().map(|r| r.phase2_time).sum(),
        total: started.elapsed(),
    };
    let report = RunReport {
        pool_size: pool.len(),
        ag_sample_sizes: cfg.ag_sample_sizes.clone(),
        records,
        phase1_coverage,
        improvement,
        timings,
    };
    Ok((table, report))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(CoverageTable, RunReport)> {
    let universe = cfg.load_universe()?;
    run_on_universe(cfg, &universe)
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    pool_size: usize,
}

/// Write `coverage.csv`, `fitness.csv`, `timings.csv` and `run.json` into `dir`.
///
/// Everything except `timings.csv` is a pure function of the configuration.
pub fn emit_reports(table: &CoverageTable, report: &RunReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))
    };
    write("coverage.csv", table.to_csv())?;
    write("fitness.csv", report.fitness_csv())?;
    write("timings.csv", report.timings_csv())?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        pool_size: report.pool_size,
    };
    let path = dir.join("run.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    write("run.json", json + "\n")
}

/// Read back the configuration stored in a `run.json` manifest.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    #[derive(Deserialize)]
    struct Stored {
        config: ExperimentConfig,
    }
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<Stored>(&text)
        .map(|s| s.config)
        .map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
}

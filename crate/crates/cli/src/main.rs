use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use immune_resched::evolution::{evolve_with, Population};
use immune_resched::experiment::{coverage, emit_reports, run_experiment, ExperimentConfig};
use immune_resched::hybrid::refine_population;
use immune_resched::{
    build_libraries, generate_pool, sample_initial, AntigenSample, AntigenUniverse, GenerationStats,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod popfile;

#[derive(Parser)]
#[command(name = "immune-resched", version, about = "Antibody libraries of partial schedules for job-shop rescheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ten-antigen universe from a base problem.
    GenUniverse(Common),
    /// Enumerate the antibody pool of one population type.
    BuildPool(Common),
    /// Phase I: sample an initial population and evolve it.
    Evolve(Common),
    /// Phase II: refine an evolved population.
    Refine(RefineArgs),
    /// Report unmatched antigens per threshold for a population.
    Evaluate(EvaluateArgs),
    /// Run the replicated protocol and write CSV reports.
    Experiment(Common),
}

/// Flags shared by every subcommand; each overrides the `--config` file.
#[derive(Args, Clone, Default)]
struct Common {
    /// Plain-text key=value file with default settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Antigen universe file (generated when absent).
    #[arg(long)]
    universe: Option<PathBuf>,
    #[arg(long)]
    base_problem: Option<PathBuf>,
    /// Population type: a, b or c.
    #[arg(long = "type")]
    population_type: Option<String>,
    /// Antigen sample size(s), comma separated.
    #[arg(long)]
    ag_sample: Option<String>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    /// none, sa or gd.
    #[arg(long)]
    phase2: Option<String>,
    /// change or swap.
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-generation statistics CSV (evolve only).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    common: Common,
    /// Population file written by `evolve`.
    #[arg(long)]
    population: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    population: PathBuf,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_file_text(&text)
                .with_context(|| format!("in config file {}", path.display()))?;
        }
        let flags: [(&str, Option<String>); 11] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("universe", self.universe.as_ref().map(|p| p.display().to_string())),
            ("base-problem", self.base_problem.as_ref().map(|p| p.display().to_string())),
            ("type", self.population_type.clone()),
            ("ag-sample", self.ag_sample.clone()),
            ("generations", self.generations.map(|v| v.to_string())),
            ("crossover-rate", self.crossover_rate.map(|v| v.to_string())),
            ("mutation-rate", self.mutation_rate.map(|v| v.to_string())),
            ("phase2", self.phase2.clone()),
            ("operator", self.operator.clone()),
            ("replicates", self.replicates.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn single_sample_size(cfg: &ExperimentConfig) -> Result<usize> {
        match cfg.ag_sample_sizes[..] {
            [s] => Ok(s),
            _ => bail!("--ag-sample must name a single size for this subcommand"),
        }
    }
}

fn write_output(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenUniverse(c) => {
            let mut cfg = c.config()?;
            cfg.universe = None;
            let universe = cfg.load_universe()?;
            write_output(c.out.as_deref(), &universe.to_string())
        }
        Command::BuildPool(c) => {
            let cfg = c.config()?;
            let universe = cfg.load_universe()?;
            let pool = generate_pool(&build_libraries(&universe), cfg.population_type)?;
            eprintln!("type {}: {} antibodies", cfg.population_type, pool.len());
            write_output(c.out.as_deref(), &pool.dump())
        }
        Command::Evolve(c) => {
            let cfg = c.config()?;
            let universe = cfg.load_universe()?;
            let size = Common::single_sample_size(&cfg)?;
            let pool = generate_pool(&build_libraries(&universe), cfg.population_type)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let sample = AntigenSample::draw(size, universe.len(), &mut rng)?;
            let initial = sample_initial(&pool, cfg.ga.population_size, &mut rng)?;
            let pop = Population::evaluate(initial, &universe, &sample)?;
            let mut stats = String::from(GenerationStats::CSV_HEADER);
            stats.push('\n');
            let pop = evolve_with(pop, &universe, &sample, &cfg.ga, &mut rng, |s| {
                stats.push_str(&s.csv_row());
                stats.push('\n');
            });
            if let Some(path) = &c.stats {
                fs::write(path, stats).with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!("best {} total {}", pop.best_fitness(), pop.total_fitness());
            write_output(c.out.as_deref(), &popfile::render(&sample, &pop))
        }
        Command::Refine(r) => {
            let cfg = r.common.config()?;
            let universe = cfg.load_universe()?;
            let (sample, pop) = popfile::load(&r.population, &universe)?;
            let Some(method) = cfg.refinement() else {
                bail!("--phase2 sa|gd is required for refine");
            };
            let refined = refine_population(&pop, &method, &universe, &sample, cfg.seed);
            eprintln!("total fitness {} -> {}", pop.total_fitness(), refined.total_fitness());
            write_output(r.common.out.as_deref(), &popfile::render(&sample, &refined))
        }
        Command::Evaluate(e) => {
            let cfg = e.common.config()?;
            let universe: AntigenUniverse = cfg.load_universe()?;
            let (_, pop) = popfile::load(&e.population, &universe)?;
            let mut body = String::from("threshold,unmatched\n");
            for &t in &cfg.thresholds {
                body.push_str(&format!("{t},{}\n", coverage(pop.antibodies(), &universe, t)));
            }
            write_output(e.common.out.as_deref(), &body)
        }
        Command::Experiment(c) => {
            let cfg = c.config()?;
            let (table, report) = run_experiment(&cfg)?;
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            emit_reports(&table, &report, &cfg, &dir)?;
            print!("{}", table.to_csv());
            print!("{}", report.fitness_csv());
            eprintln!("reports written to {}", dir.display());
            Ok(())
        }
    }
}

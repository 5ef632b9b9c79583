use immune_resched::experiment::{derive_seed, load_manifest};
use immune_resched::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, sample_size: usize, ty: PopulationType) -> (AntigenUniverse, AntigenSample, AntibodyPool, ChaCha8Rng) {
    let u = generate_universe(&BaseProblem::default(), &mut ChaCha8Rng::seed_from_u64(seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let sample = AntigenSample::draw(sample_size, 10, &mut rng).unwrap();
    let pool = generate_pool(&build_libraries(&u), ty).unwrap();
    (u, sample, pool, rng)
}

#[test]
fn evolution_reaches_reachable_optimum() {
    let (u, sample, pool, mut rng) = setup(3, 1, PopulationType::A);
    let target = sample.indices()[0];
    let prefix: [u8; 5] = u.get(target).jobs()[..5].try_into().unwrap();
    let prefix = Antibody::new(prefix).unwrap();
    assert!(pool.antibodies().any(|ab| *ab == prefix), "pool holds the antigen prefix");

    let mut initial = sample_initial(&pool, 99, &mut rng).unwrap();
    initial.push(prefix);
    let pop = Population::evaluate(initial, &u, &sample).unwrap();
    let out = evolve(pop, &u, &sample, &GaConfig::default(), &mut rng);
    assert_eq!(out.best_fitness(), 25);
}

#[test]
fn best_fitness_never_drops() {
    for seed in 0..5 {
        for size in [1, 4, 8] {
            let (u, sample, pool, mut rng) = setup(seed, size, PopulationType::C);
            let pop = Population::evaluate(sample_initial(&pool, 100, &mut rng).unwrap(), &u, &sample).unwrap();
            let mut history = Vec::new();
            let out = evolve_with(pop, &u, &sample, &GaConfig::default(), &mut rng, |s| history.push(*s));
            assert_eq!(history.len(), 251);
            assert!(history.windows(2).all(|w| w[1].best >= w[0].best));
            assert_eq!(out.len(), 100);
            for (ab, &f) in out.antibodies().iter().zip(out.fitnesses()) {
                assert!(ab.has_distinct_jobs());
                assert_eq!(f, antibody_fitness(ab, &u, &sample));
            }
        }
    }
}

#[test]
fn evolution_is_reproducible() {
    let run = || {
        let (u, sample, pool, mut rng) = setup(9, 4, PopulationType::B);
        let pop = Population::evaluate(sample_initial(&pool, 100, &mut rng).unwrap(), &u, &sample).unwrap();
        evolve(pop, &u, &sample, &GaConfig::default(), &mut rng)
    };
    assert_eq!(run(), run());
}

#[test]
fn refinement_of_initial_population_golden() {
    // The unevolved initial population leaves room for improvement.
    let (u, sample, pool, mut rng) = setup(1, 1, PopulationType::A);
    let pop = Population::evaluate(sample_initial(&pool, 100, &mut rng).unwrap(), &u, &sample).unwrap();
    let sa = refine_population(&pop, &Refinement::Annealing(SaConfig64::default()), &u, &sample, 5);
    let gd = refine_population(&pop, &Refinement::<f64>::Deluge(GdConfig::default()), &u, &sample, 5);
    let totals = (pop.total_fitness(), sa.total_fitness(), gd.total_fitness());
    assert!(totals.1 > totals.0 && totals.2 > totals.0, "{totals:?}");
    assert_eq!(totals, GOLDEN_REFINE_TOTALS);
}

const GOLDEN_REFINE_TOTALS: (u64, u64, u64) = (1635, 2450, 2110);

#[test]
fn experiment_reports_are_reproducible() {
    let cfg = ExperimentConfig {
        replicates: 3,
        phase2: Phase2::Gd,
        seed: 12,
        ..ExperimentConfig::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let (table, report) = run_experiment(&cfg).unwrap();
        emit_reports(&table, &report, &cfg, dir.path()).unwrap();
    }
    for name in ["coverage.csv", "fitness.csv", "run.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
    assert!(dirs[0].path().join("timings.csv").exists());

    let restored = load_manifest(dirs[0].path().join("run.json")).unwrap();
    assert_eq!(restored, cfg);

    let csv = std::fs::read_to_string(dirs[0].path().join("coverage.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("threshold,1,4,8"));
    let parsed = CoverageTable::parse_csv(&csv).unwrap();
    let (table, _) = run_experiment(&cfg).unwrap();
    for (r_parsed, r_mem) in parsed.cells.iter().zip(&table.cells) {
        for (p, m) in r_parsed.iter().zip(r_mem) {
            assert!((p - m).abs() <= 0.05 + 1e-12);
        }
    }
}

#[test]
fn loaded_universe_drives_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("universe.txt");
    let u = generate_universe(&BaseProblem::synthetic(4), &mut ChaCha8Rng::seed_from_u64(derive_seed(4, &[1])));
    u.save(&path).unwrap();
    let cfg = ExperimentConfig {
        universe: Some(path),
        replicates: 2,
        ag_sample_sizes: vec![4],
        ..ExperimentConfig::default()
    };
    assert_eq!(cfg.load_universe().unwrap(), u);
    let (table, report) = run_experiment(&cfg).unwrap();
    assert_eq!(table.ag_sample_sizes, vec![4]);
    assert_eq!(report.records.len(), 2);
    assert_eq!(report.improvement, vec![None]);
}

#[test]
fn small_pool_error_names_replicate() {
    let u = AntigenUniverse::new(vec![Antigen::identity(); 10]).unwrap();
    let cfg = ExperimentConfig {
        population_type: PopulationType::B,
        replicates: 1,
        ..ExperimentConfig::default()
    };
    // the identical-antigen universe yields 60 distinct antibodies, fewer than 100
    let err = run_on_universe(&cfg, &u).unwrap_err();
    assert!(matches!(err, Error::Replicate { replicate: 0, .. }), "{err}");
}

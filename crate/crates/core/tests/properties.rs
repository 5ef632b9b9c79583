use std::collections::HashSet;

use immune_resched::evolution::tournament_select;
use immune_resched::hybrid::{antibody_rng, deluge_rate};
use immune_resched::library::{Component, PoolEntry};
use immune_resched::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn antigen_strategy() -> impl Strategy<Value = Antigen> {
    Just((1..=15u8).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Antigen::from_slice(&v).unwrap())
}

fn antibody_strategy() -> impl Strategy<Value = Antibody> {
    Just((1..=15u8).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Antibody::new(v[..5].try_into().unwrap()).unwrap())
}

fn component_strategy() -> impl Strategy<Value = [u8; 3]> {
    Just((1..=15u8).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| v[..3].try_into().unwrap())
}

/// Best (count, offset) by direct enumeration of every window.
fn brute_best(ag: &Antigen, ab: &Antibody) -> (u32, usize) {
    let mut best = (0, 0);
    for off in 0..=10 {
        let mut c = 0;
        for j in 0..5 {
            if ag.jobs()[off + j] == ab.jobs()[j] {
                c += 1;
            }
        }
        if c > best.0 {
            best = (c, off);
        }
    }
    best
}

fn relabel(perm: &[u8], ids: &[u8]) -> Vec<u8> {
    ids.iter().map(|&j| perm[j as usize - 1]).collect()
}

fn random_universe(seed: u64) -> AntigenUniverse {
    generate_universe(&BaseProblem::synthetic(seed), &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn best_match_equals_brute_force(ag in antigen_strategy(), ab in antibody_strategy()) {
        let m = best_match(&ag, &ab);
        let (count, offset) = brute_best(&ag, &ab);
        prop_assert_eq!(m.best_count, count);
        prop_assert_eq!(m.best_score, 5 * count);
        prop_assert_eq!(m.best_offset, offset);
    }

    #[test]
    fn threshold_monotone(ag in antigen_strategy(), ab in antibody_strategy(), t in 1u32..=5) {
        if is_matched(&ag, &ab, t) {
            for lower in 0..t {
                prop_assert!(is_matched(&ag, &ab, lower));
            }
        }
    }

    #[test]
    fn relabeling_preserves_count(
        ag in antigen_strategy(),
        ab in antibody_strategy(),
        perm in Just((1..=15u8).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let ag2 = Antigen::from_slice(&relabel(&perm, ag.jobs())).unwrap();
        let ab2 = Antibody::new(relabel(&perm, ab.jobs()).try_into().unwrap()).unwrap();
        prop_assert_eq!(best_match(&ag, &ab).best_count, best_match(&ag2, &ab2).best_count);
    }

    #[test]
    fn crossover_invariants(p1 in antibody_strategy(), p2 in antibody_strategy()) {
        let (c1, c2) = order_crossover(&p1, &p2);
        for (child, own, other) in [(c1, p1, p2), (c2, p2, p1)] {
            prop_assert!(child.has_distinct_jobs());
            let mut a = *child.jobs();
            let mut b = *own.jobs();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            let shared_child: Vec<u8> = child.jobs().iter().copied().filter(|&j| other.contains(j)).collect();
            let shared_other: Vec<u8> = other.jobs().iter().copied().filter(|&j| own.contains(j)).collect();
            prop_assert_eq!(shared_child, shared_other);
            for k in 0..5 {
                if !other.contains(own.jobs()[k]) {
                    prop_assert_eq!(child.jobs()[k], own.jobs()[k]);
                }
            }
        }
    }

    #[test]
    fn mutation_and_neighbors_keep_distinct_jobs(ab in antibody_strategy(), seed in any::<u64>(), rate in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(mutate(&ab, rate, &mut rng).has_distinct_jobs());
        prop_assert!(neighbor(&ab, NeighborOperator::ChangeOneJob, &mut rng).has_distinct_jobs());
        prop_assert!(neighbor(&ab, NeighborOperator::SwapTwoJobs, &mut rng).has_distinct_jobs());
    }

    #[test]
    fn combine_matches_mask_enumeration(c1 in component_strategy(), c2 in component_strategy()) {
        let a = Component { jobs: c1, antigen: 0, slot: 0 };
        let b = Component { jobs: c2, antigen: 0, slot: 1 };
        let got: Vec<Antibody> = combine_components(&a, &b).iter().map(|e| e.antibody).collect();

        let joined: Vec<u8> = c1.iter().chain(&c2).copied().collect();
        let mut expected = Vec::new();
        for mask in (0u8..64).filter(|m| m.count_ones() == 5) {
            let pick: Vec<u8> = (0..6).filter(|k| mask & (1 << k) != 0).map(|k| joined[k]).collect();
            let distinct: HashSet<_> = pick.iter().collect();
            if distinct.len() == 5 {
                expected.push(Antibody::new(pick.try_into().unwrap()).unwrap());
            }
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn coverage_monotone_under_addition(seed in 0u64..50, extra in antibody_strategy(), t in 0u32..=5) {
        let u = random_universe(seed);
        let pool = generate_pool(&build_libraries(&u), PopulationType::B).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut abs = sample_initial(&pool, 20.min(pool.len()), &mut rng).unwrap();
        let before = coverage(&abs, &u, t);
        abs.push(extra);
        prop_assert!(coverage(&abs, &u, t) <= before);
        for lower in 0..t {
            prop_assert!(coverage(&abs, &u, lower) <= coverage(&abs, &u, t));
        }
    }
}

#[test]
fn fitness_is_bounded_and_composes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = random_universe(3);
    for _ in 0..500 {
        let mut ids: Vec<u8> = (1..=15).collect();
        ids.shuffle(&mut rng);
        let ab = Antibody::new(ids[..5].try_into().unwrap()).unwrap();
        let sample = AntigenSample::draw(8, 10, &mut rng).unwrap();
        let f = antibody_fitness(&ab, &u, &sample);
        let oracle: u32 = sample.indices().iter().map(|&i| 5 * brute_best(u.get(i), &ab).0).sum();
        assert_eq!(f, oracle);
        assert!(f <= max_fitness(8));
    }
}

#[test]
fn pooled_antibodies_are_subsequences_of_their_components() {
    for seed in 0..5 {
        let u = random_universe(seed);
        let libs = build_libraries(&u);
        let pool = generate_pool(&libs, PopulationType::A).unwrap();
        for PoolEntry { antibody, provenance } in &pool.entries {
            let (i, j) = provenance.library_pair;
            assert!(i < j);
            let (ci, cj) = provenance.components;
            let joined: Vec<u8> = libs.libraries[i].components[ci]
                .jobs
                .iter()
                .chain(&libs.libraries[j].components[cj].jobs)
                .copied()
                .collect();
            let picked: Vec<u8> = (0..6)
                .filter(|k| provenance.mask & (1 << k) != 0)
                .map(|k| joined[k])
                .collect();
            assert_eq!(&picked[..], antibody.jobs());
            assert!(antibody.has_distinct_jobs());
        }
    }
}

#[test]
fn tournament_prefers_fitter() {
    let fit: Vec<u32> = (0..10).map(|k| k * 5).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = [0u32; 10];
    for _ in 0..10_000 {
        counts[tournament_select(&fit, 2, &mut rng)] += 1;
    }
    // P(index k wins) = (2k + 1) / 100 for binary tournaments over distinct fitnesses
    assert!(counts[9] > counts[0] * 5, "{counts:?}");
    for (k, &c) in counts.iter().enumerate() {
        let expected = 10_000.0 * (2.0 * k as f64 + 1.0) / 100.0;
        assert!((c as f64 - expected).abs() < 4.0 * expected.sqrt() + 5.0, "k={k} c={c} e={expected}");
    }
}

#[test]
fn deluge_boundary_telescopes() {
    let u = random_universe(4);
    let sample = AntigenSample::new(vec![0], 10).unwrap();
    let cfg = GdConfig {
        stagnation_limit: None,
        ..GdConfig::default()
    };
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<u8> = (1..=15).collect();
        ids.shuffle(&mut rng);
        let ab = Antibody::new(ids[..5].try_into().unwrap()).unwrap();
        let f0 = antibody_fitness(&ab, &u, &sample);
        let beta: ExactLevel = deluge_rate(f0, 25, 120);
        let mut levels = Vec::new();
        let out = gd_search::<ExactLevel, _, _>(&ab, &u, &sample, &cfg, &mut antibody_rng(seed, 0), |t| {
            levels.push(t.level)
        });
        assert_eq!(out.steps, 120);
        assert_eq!(out.final_level, ExactLevel::from_integer(25));
        for (k, level) in levels.iter().enumerate() {
            assert_eq!(*level, ExactLevel::from_integer(f0 as i64) - beta * ExactLevel::from_integer(k as i64));
        }
        assert!(levels.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.fitness >= f0);
    }
}

#[test]
fn refinement_never_regresses() {
    let u = random_universe(6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for size in [1, 4, 8] {
        let sample = AntigenSample::draw(size, 10, &mut rng).unwrap();
        let pool = generate_pool(&build_libraries(&u), PopulationType::A).unwrap();
        let pop = Population::evaluate(sample_initial(&pool, 40, &mut rng).unwrap(), &u, &sample).unwrap();
        for op in [NeighborOperator::ChangeOneJob, NeighborOperator::SwapTwoJobs] {
            let methods = [
                Refinement::Annealing(SaConfig64 { operator: op, ..SaConfig::default() }),
                Refinement::Deluge(GdConfig { operator: op, ..GdConfig::default() }),
            ];
            for m in &methods {
                let out = refine_population(&pop, m, &u, &sample, 77);
                assert_eq!(out.len(), pop.len());
                for (k, (&a, &b)) in pop.fitnesses().iter().zip(out.fitnesses()).enumerate() {
                    assert!(b >= a);
                    if b == a {
                        assert_eq!(out.antibodies()[k], pop.antibodies()[k]);
                    }
                    assert_eq!(b, antibody_fitness(&out.antibodies()[k], &u, &sample));
                }
                assert_eq!(out, refine_population(&pop, m, &u, &sample, 77));
            }
        }
    }
}

#[test]
fn f32_annealing_schedule_is_close_to_f64() {
    let n32 = SaConfig32::default().temperature_steps();
    let n64 = SaConfig64::default().temperature_steps();
    assert!(n32.abs_diff(n64) <= 1, "{n32} vs {n64}");
}

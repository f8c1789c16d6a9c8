use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(n: usize, m: usize, values: Vec<f64>) -> AttributionMatrix {
    AttributionMatrix::from_dense(n, m, values).unwrap()
}

fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> AttributionMatrix {
    let values = (0..n * m).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-0.3..1.0) }).collect();
    dense(n, m, values)
}

#[test]
fn one_by_one() {
    let t = dense(1, 1, vec![1.0]);
    let sol = solve_lp(&build_problem(&t, 1, 0.5, 2.0).unwrap()).unwrap();
    assert_eq!(sol.w, vec![1.0]);
    assert_eq!(sol.t, vec![0.0]);
    assert!((sol.objective - 0.5).abs() < 1e-12);
    assert_eq!(sol.selected, vec![0]);
    assert_eq!(sol.status, SolverStatus::Optimal);
}

#[test]
fn build_problem_rejects_bad_parameters() {
    let t = dense(2, 1, vec![0.5, 0.5]);
    assert!(build_problem(&t, 0, 0.5, 1.0).is_err());
    assert!(build_problem(&t, 3, 0.5, 1.0).is_err());
    assert!(build_problem(&t, 1, 1.5, 1.0).is_err());
    assert!(build_problem(&t, 1, 0.5, -0.1).is_err());
    assert!(build_problem(&t, 1, 0.5, f64::INFINITY).is_ok());
}

#[test]
fn alpha_one_is_the_naive_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = random_matrix(9, 5, &mut rng);
    let p = build_problem(&t, 4, 1.0, 0.3).unwrap();
    let sol = solve_lp(&p).unwrap();
    let mut sums = t.row_sums();
    sums.sort_by(|a, b| b.total_cmp(a));
    let naive: f64 = sums[..4].iter().sum();
    assert!((sol.objective - naive).abs() < 1e-9);
}

#[test]
fn huge_kappa_leaves_slack_at_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = random_matrix(7, 4, &mut rng);
    for kappa in [50.0, f64::INFINITY] {
        let sol = solve_lp(&build_problem(&t, 3, 0.5, kappa).unwrap()).unwrap();
        assert!(sol.t.iter().all(|&x| x.abs() < 1e-12), "{:?}", sol.t);
    }
}

#[test]
fn full_budget_forces_all_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_matrix(6, 3, &mut rng);
    let p = build_problem(&t, 6, 0.3, 0.2).unwrap();
    let sol = solve_lp(&p).unwrap();
    assert!(sol.w.iter().all(|&w| (w - 1.0).abs() < 1e-12));
    let v: Vec<f64> = (0..3).map(|j| (0..6).map(|i| t.get(i, j)).sum()).collect();
    let direct = 0.3 * v.iter().sum::<f64>() - 0.7 * v.iter().map(|x| (x - 0.2).max(0.0)).sum::<f64>();
    assert!((sol.objective - direct).abs() < 1e-9);
    assert_eq!(sol.selected, (0..6).collect::<Vec<_>>());
}

#[test]
fn block_instance_keeps_one_unit_per_cluster() {
    let blocks = ClusterBlocks::new(vec![3, 2, 2, 1], vec![4, 3, 2, 2], vec![0.6; 4]).unwrap();
    let t = blocks.to_matrix();
    let kappa = blocks.kappa_tau();
    let sol = solve_lp(&build_problem(&t, 4, 0.5, kappa).unwrap()).unwrap();
    let cl = blocks.train_cluster();
    for k in 0..4 {
        let mass: f64 = (0..8).filter(|&i| cl[i] == k).map(|i| sol.w[i]).sum();
        assert!((mass - 1.0).abs() < 1e-9, "cluster {k} mass {mass}");
    }
    let m_total: usize = blocks.test_sizes.iter().sum();
    assert!((sol.objective - 0.5 * kappa * m_total as f64).abs() < 1e-9);
    assert!(verify_cluster_coverage(&sol.selected, &cl).all_covered);
}

#[test]
fn block_instance_objective_with_unequal_tau() {
    let blocks = ClusterBlocks::new(vec![3, 2, 2, 1], vec![2, 2, 3, 1], vec![0.9, 0.4, 0.7, 0.5]).unwrap();
    let t = blocks.to_matrix();
    let kappa = blocks.kappa_tau();
    let sol = solve_lp(&build_problem(&t, 4, 0.5, kappa).unwrap()).unwrap();
    assert!((sol.objective - 0.5 * kappa * 8.0).abs() < 1e-9);
    let cov = verify_cluster_coverage(&sol.selected, &blocks.train_cluster());
    assert!(cov.all_covered, "{cov:?} from w = {:?}", sol.w);
}

#[test]
fn lp_bounds_binary_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let t = random_matrix(8, 4, &mut rng);
        let alpha = rng.gen_range(0.0..1.0);
        let kappa = rng.gen_range(0.0..2.0);
        let p = build_problem(&t, 3, alpha, kappa).unwrap();
        let lp = solve_lp(&p).unwrap();
        let exact = solve_exact(&p.clone().with_integrality(Integrality::ExactEnumeration)).unwrap();
        assert!(lp.objective >= exact.objective - 1e-9);
        if lp.fractional_count == 0 {
            assert!((lp.objective - exact.objective).abs() < 1e-9);
        }
        assert!(lp.feasibility_residual(&p) <= 1e-7);
    }
}

#[test]
fn exact_enumeration_rejects_large_n() {
    let t = dense(21, 1, vec![0.1; 21]);
    let p = build_problem(&t, 2, 0.5, 1.0).unwrap().with_integrality(Integrality::ExactEnumeration);
    assert!(matches!(solve(&p), Err(Error::TooManyPlayers { .. })));
}

#[test]
fn rounding_rules() {
    assert_eq!(round_top_s(&[0.9, 0.6, 0.6, 0.1], 2), vec![0, 1]);
    assert_eq!(round_top_s(&[0.0, 1.0, 0.0, 1.0], 2), vec![1, 3]);
    assert_eq!(fractional_count(&[0.0, 0.5, 1.0, 0.999]), 2);
}

#[test]
fn default_kappa_formula() {
    let mut values = vec![0.0; 10];
    values[3] = 1.0;
    let t = dense(2, 5, values);
    assert!((default_kappa(&t, 5) - 1.5).abs() < 1e-15);
    assert_eq!(default_kappa(&dense(3, 3, vec![0.0; 9]), 2), 0.0);
}

#[test]
fn grid_search_single_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_matrix(6, 3, &mut rng);
    let g = grid_search(&t, 2, &[0.4], &[0.7], |s| Ok(s.len() as f64)).unwrap();
    assert_eq!((g.alpha, g.kappa), (0.4, 0.7));
    assert_eq!(g.scores.len(), 1);
    assert!(grid_search(&t, 2, &[], &[0.7], |_| Ok(0.0)).is_err());
}

#[test]
fn grid_search_finds_coverage() {
    let blocks = ClusterBlocks::new(vec![4, 3, 2, 1], vec![2, 2, 2, 2], vec![0.8, 0.6, 0.5, 0.9]).unwrap();
    let t = blocks.to_matrix();
    let cl = blocks.train_cluster();
    let kappa_tau = blocks.kappa_tau();
    let coverage_score = |s: &[usize]| {
        let c = verify_cluster_coverage(s, &cl);
        Ok(c.counts.iter().filter(|&&x| x > 0).count() as f64 / 4.0)
    };
    let default = default_kappa(&t, 4);
    let g = grid_search(&t, 4, &[0.1, 0.5, 0.9], &[kappa_tau, default, 10.0], coverage_score).unwrap();
    assert!(verify_cluster_coverage(&g.solution.selected, &cl).all_covered, "{:?}", g.scores);
    assert_eq!(g.score, 1.0);
    let default_score = g.scores.iter().find(|s| s.0 == 0.5 && s.1 == default).unwrap().2;
    assert!(g.score >= default_score);
    // Ties resolve to the smallest kappa first.
    assert_eq!(g.kappa, kappa_tau);
}

#[test]
fn warm_start_matches_cold_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = random_matrix(10, 6, &mut rng);
    let mut solver = CdvmSolver::new(&t, 4).unwrap();
    for &(alpha, kappa) in &[(0.5, 0.8), (0.2, 0.8), (0.9, 0.8), (0.5, 0.3), (0.5, 1.5)] {
        let warm = solver.solve(alpha, kappa).unwrap();
        let cold = solve_lp(&build_problem(&t, 4, alpha, kappa).unwrap()).unwrap();
        assert!((warm.objective - cold.objective).abs() < 1e-9);
    }
}

#[test]
fn surrogate_values() {
    let blocks = ClusterBlocks::new(vec![3, 2, 2], vec![2, 1, 4], vec![0.5, 0.3, 0.9]).unwrap();
    let k = blocks.kappa_tau();
    assert!((blocks.surrogate_objective(&[1, 2, 1], k).unwrap() - k * 7.0).abs() < 1e-15);
    assert_eq!(blocks.surrogate_objective(&[0, 0, 0], 0.4).unwrap(), 0.0);
    let direct = 2.0 * (0.5f64 * 2.0).min(0.7) + 1.0 * (0.3f64).min(0.7) + 4.0 * 0.0;
    assert_eq!(blocks.surrogate_objective(&[2, 1, 0], 0.7).unwrap(), direct);
    assert!(blocks.surrogate_objective(&[4, 0, 0], 0.7).is_err());
}

#[test]
fn coverage_checks() {
    let cl = [0, 0, 1, 2, 2];
    assert!(verify_cluster_coverage(&[0, 2, 3], &cl).all_covered);
    let empty = verify_cluster_coverage(&[], &cl);
    assert!(!empty.all_covered);
    assert_eq!(empty.counts, vec![0, 0, 0]);
}

#[test]
fn solution_json_shape() {
    let t = dense(1, 1, vec![1.0]);
    let sol = solve_lp(&build_problem(&t, 1, 0.5, 2.0).unwrap()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&sol.to_json().unwrap()).unwrap();
    assert_eq!(v["S"], 1);
    assert_eq!(v["selected"], serde_json::json!([0]));
    assert_eq!(v["fractional_count"], 0);
    assert_eq!(v["objective"], 0.5);
}

#[test]
fn identical_instances_identical_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = random_matrix(12, 5, &mut rng);
    let p = build_problem(&t, 5, 0.5, default_kappa(&t, 5)).unwrap();
    assert_eq!(solve_lp(&p).unwrap(), solve_lp(&p).unwrap());
}

#[test]
fn cdvm_solutions_need_not_be_nested() {
    // Row 0 spreads over both columns and wins alone; the two specialists beat
    // it as a pair.
    let t = dense(
        3,
        2,
        vec![
            0.6, 0.6, // spreads over both columns
            1.0, 0.0, //
            0.0, 1.0, //
        ],
    );
    let at = |s: usize| {
        let p = build_problem(&t, s, 0.5, 1.0).unwrap().with_integrality(Integrality::ExactEnumeration);
        solve(&p).unwrap().selected
    };
    assert_eq!(at(1), vec![0]);
    assert_eq!(at(2), vec![1, 2]);
}

#[test]
fn swap_repair_restores_a_dropped_cluster() {
    // Cluster sizes 4, 3, 2, 1. Rounding the vertex below keeps two points of the
    // third cluster and drops the singleton.
    let blocks = ClusterBlocks::new(vec![4, 3, 2, 1], vec![2, 2, 2, 2], vec![0.8, 0.6, 0.5, 0.9]).unwrap();
    let t = blocks.to_matrix();
    let p = build_problem(&t, 4, 0.5, blocks.kappa_tau()).unwrap();
    let mut w = vec![0.0; 10];
    w[0] = 0.625;
    w[4] = 0.5 / 0.6;
    w[7] = 1.0;
    w[8] = 4.0 - 0.625 - 0.5 / 0.6 - 1.0 - 0.5 / 0.9;
    w[9] = 0.5 / 0.9;
    let rounded = round_top_s(&w, 4);
    assert_eq!(rounded, vec![0, 4, 7, 8]);
    let repaired = swap_repair(&p, &rounded);
    assert!(verify_cluster_coverage(&repaired, &blocks.train_cluster()).all_covered);
    assert!(p.binary_objective(&repaired) > p.binary_objective(&rounded));
}

#[test]
fn swap_repair_keeps_binary_optima() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let t = random_matrix(7, 3, &mut rng);
        let p = build_problem(&t, 3, rng.gen_range(0.0..=1.0), rng.gen_range(0.0..1.5)).unwrap();
        let (_, optima) = binary_optima(&p, 0.0).unwrap();
        for s in optima {
            assert_eq!(swap_repair(&p, &s), s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn repair_never_lowers_the_rounded_objective(seed in any::<u64>(), n in 2usize..=12, m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_matrix(n, m, &mut rng);
        let budget = rng.gen_range(1..=n);
        let p = build_problem(&t, budget, rng.gen_range(0.0..=1.0), rng.gen_range(0.0..1.5)).unwrap();
        let lp = solve_lp(&p).unwrap();
        let rounded = round_top_s(&lp.w, budget);
        prop_assert!(p.binary_objective(&lp.selected) >= p.binary_objective(&rounded));
        if lp.fractional_count == 0 {
            prop_assert_eq!(&lp.selected, &rounded);
        }
    }

    #[test]
    fn relaxation_is_feasible_and_bounds_binaries(seed in any::<u64>(), n in 2usize..=10, m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_matrix(n, m, &mut rng);
        let budget = rng.gen_range(1..=n);
        let alpha = rng.gen_range(0.0..=1.0);
        let kappa = rng.gen_range(0.0..1.5);
        let p = build_problem(&t, budget, alpha, kappa).unwrap();
        let lp = solve_lp(&p).unwrap();
        prop_assert!(lp.feasibility_residual(&p) <= 1e-7);
        prop_assert_eq!(lp.selected.len(), budget);
        let (best, _) = binary_optima(&p, 0.0).unwrap();
        prop_assert!(lp.objective >= best - 1e-9);
        if lp.fractional_count == 0 {
            prop_assert!((lp.objective - best).abs() <= 1e-9);
        }
    }

    #[test]
    fn cluster_optima_never_drop_a_cluster(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let tests: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let tau: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let blocks = ClusterBlocks::new(sizes, tests, tau).unwrap();
        let n: usize = blocks.cluster_sizes.iter().sum();
        let budget = rng.gen_range(k..=n);
        let t = blocks.to_matrix();
        let cl = blocks.train_cluster();
        let p = build_problem(&t, budget, 0.5, blocks.kappa_tau()).unwrap();
        let (_, optima) = binary_optima(&p, 1e-12).unwrap();
        for s in optima {
            prop_assert!(verify_cluster_coverage(&s, &cl).all_covered);
        }
        let lp = solve_lp(&p).unwrap();
        prop_assert!(verify_cluster_coverage(&lp.selected, &cl).all_covered, "w = {:?}", lp.w);
    }
}

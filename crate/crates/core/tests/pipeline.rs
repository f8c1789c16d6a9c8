use std::sync::Arc;

use cdvm::attribution::{msr_estimate, AttributionMatrix, MsrConfig};
use cdvm::bench::{
    banzhaf_strategy, retention_eval, CdvmParams, CdvmStrategy, MatrixSource, MsrCache, RandomStrategy, Strategy,
};
use cdvm::cdvm::{build_problem, default_kappa, solve_lp, verify_cluster_coverage, KappaChoice};
use cdvm::dataset::{fig1_preset, gen_clustered, LabeledDataset, LearnerSpec};
use cdvm::semivalues::ValueVector;

fn three_class_clusters(seed: u64) -> LabeledDataset {
    let centers = vec![vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 6.0]];
    gen_clustered(&centers, &[3, 3, 3], &[0, 1, 2], 0.1, &[2, 2, 2], seed).unwrap()
}

#[test]
fn files_survive_the_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = fig1_preset(3);
    let path = dir.path().join("data.csv");
    data.save_csv(&path).unwrap();
    let loaded = LabeledDataset::load_csv(&path).unwrap();
    assert_eq!(loaded.n_train(), 8);
    assert_eq!(loaded.cluster_of(), data.cluster_of());
    for r in 0..data.num_rows() {
        assert_eq!(loaded.row(r), data.row(r));
        assert_eq!(loaded.label(r), data.label(r));
    }

    let cfg = MsrConfig { p: 0.5, num_models: 500, seed: 1, ..MsrConfig::default() };
    let t = msr_estimate(&loaded, &cfg).unwrap();
    let t_path = dir.path().join("t.txt");
    t.save(&t_path).unwrap();
    let back = AttributionMatrix::load(&t_path).unwrap();
    assert_eq!(back.triplets(), t.triplets());
    assert_eq!((back.p(), back.num_models(), back.seed()), (0.5, 500, cfg.seed));
}

#[test]
fn learner_knockout_matches_the_idealized_game() {
    // Three classes, one per cluster: dropping a cluster misclassifies exactly its
    // own validation points, so T is block diagonal with (1 - p)^2 on the blocks.
    let data = three_class_clusters(11);
    let cfg = MsrConfig { p: 0.5, num_models: 5000, seed: 4, ..MsrConfig::default() };
    let t = msr_estimate(&data, &cfg).unwrap();
    let train = data.cluster_of().unwrap().to_vec();
    let val = [0, 0, 1, 1, 2, 2];
    for i in 0..9 {
        for (j, &c) in val.iter().enumerate() {
            let want = if train[i] == c { 0.25 } else { 0.0 };
            assert!((t.get(i, j) - want).abs() < 0.05, "T[{i},{j}] = {}", t.get(i, j));
        }
    }
    let sol = solve_lp(&build_problem(&t, 3, 0.5, 0.25).unwrap()).unwrap();
    assert!(verify_cluster_coverage(&sol.selected, &train).all_covered);
}

#[test]
fn default_kappa_solution_on_the_eight_points() {
    let data = fig1_preset(5);
    let cfg = MsrConfig { p: 0.5, num_models: 2000, seed: 2, ..MsrConfig::default() };
    let t = msr_estimate(&data, &cfg).unwrap();
    for budget in 1..=8 {
        let p = build_problem(&t, budget, 0.5, default_kappa(&t, budget)).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.selected.len(), budget);
        assert!(sol.feasibility_residual(&p) <= 1e-7);
    }
}

#[test]
fn retention_benchmark_with_shared_matrices() {
    let data = fig1_preset(6);
    let spec = LearnerSpec::default();
    let cache = Arc::new(MsrCache::new(MsrConfig { p: 0.5, num_models: 1000, ..MsrConfig::default() }));
    let params = CdvmParams::Grid { alphas: vec![0.5], kappas: vec![KappaChoice::Default, KappaChoice::Value(0.1)] };
    let cdvm = CdvmStrategy::new(MatrixSource::PerSeed(cache.clone()), params, spec);
    let banzhaf = banzhaf_strategy("banzhaf", MatrixSource::PerSeed(cache));
    let roster: [&dyn Strategy; 3] = [&RandomStrategy, &banzhaf, &cdvm];
    let run = || retention_eval(&data, &spec, &roster, &[0.5, 0.25], &[1, 2]).unwrap();
    let report = run();
    assert_eq!(report.records.len(), 3 * 2 * 2);
    assert_eq!(report.methods, vec!["random", "banzhaf", "cdvm"]);
    for r in &report.records {
        assert_eq!(r.retained.len(), if r.level == 0.5 { 4 } else { 2 });
    }
    assert_eq!(report, run());
    let freq = report.selection_frequencies("cdvm", 8);
    assert!(freq.iter().all(|f| f.iter().all(|&x| (0.0..=1.0).contains(&x))));
    let total: f64 = freq.iter().map(|f| f[0]).sum();
    assert!((total - 4.0).abs() < 1e-12);
}

#[test]
fn fixed_matrix_must_match_the_dataset() {
    let data = fig1_preset(0);
    let t = AttributionMatrix::from_dense(3, 2, vec![0.0; 6]).unwrap();
    let cdvm = CdvmStrategy::new(MatrixSource::Fixed(Arc::new(t)), CdvmParams::default(), LearnerSpec::default());
    assert!(retention_eval(&data, &LearnerSpec::default(), &[&cdvm], &[0.5], &[0]).is_err());
}

#[test]
fn value_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("values.csv");
    let v = ValueVector::new(vec![0.1, -2.5, 1e-17], cdvm::semivalues::Estimator::Loo);
    v.save_csv(&path).unwrap();
    assert_eq!(ValueVector::load_csv(&path).unwrap().values, v.values);
}

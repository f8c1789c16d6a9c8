//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cdvm::attribution::{msr_estimate, msr_estimate_with, AttributionMatrix, ClusterKnockout, MsrConfig};
use cdvm::bench::{normalize_performance, pruning_order_from_values, removal_curve, Direction};
use cdvm::cdvm::{
    binary_optima, build_problem, default_kappa, grid_search, solve_lp, verify_cluster_coverage, ClusterBlocks,
};
use cdvm::dataset::{fig1_preset, subset_accuracy, LearnerSpec, Split};
use cdvm::games::{ClusteredGame, LearnerGame};
use cdvm::semivalues::{exact_banzhaf, exact_shapley, loo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_clustered_game(rng: &mut ChaCha8Rng, max_n: usize) -> ClusteredGame {
    loop {
        let k = rng.gen_range(1..=5);
        let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=5)).collect();
        if sizes.iter().sum::<usize>() <= max_n {
            let utilities = (0..k).map(|_| rng.gen_range(0.01..2.0)).collect();
            return ClusteredGame::new(sizes, utilities).unwrap();
        }
    }
}

fn c1_closed_form_shapley() -> Outcome {
    let start = Instant::now();
    let game = ClusteredGame::new(vec![3, 2, 2, 1], vec![1.0; 4]).unwrap();
    let v = exact_shapley(&game).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let want = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.5, 0.5, 0.5, 0.5, 1.0];
    let err = v.values.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(err <= 1e-12, format!("max error {err:e}"))?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("max error {err:.1e}, {elapsed:.2?}"))
}

fn c2_closed_form_banzhaf() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let game = random_clustered_game(&mut rng, 12);
        let v = exact_banzhaf(&game).map_err(|e| e.to_string())?;
        for (i, &c) in game.cluster_of().iter().enumerate() {
            let nk = game.cluster_sizes()[c] as i32;
            let want = game.utilities()[c] / 2f64.powi(nk - 1);
            worst = worst.max((v.values[i] - want).abs());
        }
    }
    let v = exact_banzhaf(&ClusteredGame::new(vec![3], vec![1.0]).unwrap()).unwrap();
    check(v.values.iter().all(|&x| (x - 0.25).abs() <= 1e-12), "n_k = 3 does not give 1/4")?;
    let elapsed = start.elapsed();
    check(worst <= 1e-12, format!("max error {worst:e}"))?;
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("100 games, max error {worst:.1e}, {elapsed:.2?}"))
}

fn c3_equal_distribution_collapse() -> Outcome {
    let sizes = vec![1, 2, 3, 4, 5];
    let lambda2 = 2.0;
    let tests: Vec<usize> = sizes.iter().map(|&n| (lambda2 * n as f64) as usize).collect();
    // Accuracy utility: each covered test point is worth 1/m.
    let lambda1 = 1.0 / tests.iter().sum::<usize>() as f64;
    let game = ClusteredGame::from_test_counts(sizes.clone(), &tests, lambda1).unwrap();
    let shapley = exact_shapley(&game).map_err(|e| e.to_string())?;
    let target = lambda1 * lambda2;
    let err = shapley.values.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
    check(err <= 1e-12, format!("Shapley deviates from lambda1*lambda2 by {err:e}"))?;
    let banzhaf = exact_banzhaf(&game).map_err(|e| e.to_string())?;
    let per_cluster: Vec<f64> = sizes
        .iter()
        .map(|&nk| banzhaf.values[game.cluster_of().iter().position(|&c| game.cluster_sizes()[c] == nk).unwrap()])
        .collect();
    let decreasing = per_cluster[1..].windows(2).all(|w| w[1] < w[0]);
    check(decreasing, format!("Banzhaf by cluster size: {per_cluster:?}"))?;
    Ok(format!("Shapley error {err:.1e}; Banzhaf {per_cluster:.4?}"))
}

fn c4_cluster_coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut violations, mut enumerated) = (0, 0);
    for _ in 0..200 {
        let k = rng.gen_range(2..=5);
        let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
        let tests: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
        let tau: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let blocks = ClusterBlocks::new(sizes, tests, tau).unwrap();
        let n: usize = blocks.cluster_sizes.iter().sum();
        let budget = rng.gen_range(k..=n);
        let t = blocks.to_matrix();
        let clusters = blocks.train_cluster();
        let p = build_problem(&t, budget, 0.5, blocks.kappa_tau()).unwrap();
        let lp = solve_lp(&p).map_err(|e| e.to_string())?;
        if !verify_cluster_coverage(&lp.selected, &clusters).all_covered {
            violations += 1;
        }
        if n <= 12 {
            enumerated += 1;
            let (_, optima) = binary_optima(&p, 1e-12).map_err(|e| e.to_string())?;
            if optima.iter().any(|s| !verify_cluster_coverage(s, &clusters).all_covered) {
                return Err(format!("an integral optimum drops a cluster (sizes {:?})", blocks.cluster_sizes));
            }
        }
    }
    check(violations == 0, format!("{violations} rounded solutions drop a cluster"))?;
    Ok(format!("200 instances, 0 violations; {enumerated} enumerated"))
}

fn c5_lp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut integral, mut worst_residual) = (0, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(1..=6);
        let values = (0..n * m).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-0.5..1.0) }).collect();
        let t = AttributionMatrix::from_dense(n, m, values).unwrap();
        let p = build_problem(&t, rng.gen_range(1..=n), rng.gen_range(0.0..=1.0), rng.gen_range(0.0..2.0)).unwrap();
        let lp = solve_lp(&p).map_err(|e| e.to_string())?;
        let (best, _) = binary_optima(&p, 0.0).map_err(|e| e.to_string())?;
        check(lp.objective >= best - 1e-9, format!("LP {} below binary optimum {best}", lp.objective))?;
        if lp.fractional_count == 0 {
            integral += 1;
            check((lp.objective - best).abs() <= 1e-9, format!("integral LP {} != {best}", lp.objective))?;
        }
        worst_residual = worst_residual.max(lp.feasibility_residual(&p));
    }
    check(worst_residual <= 1e-7, format!("feasibility residual {worst_residual:e}"))?;
    Ok(format!("50 instances ({integral} integral), max residual {worst_residual:.1e}"))
}

fn c6_msr_convergence() -> Outcome {
    let eval = ClusterKnockout { train_cluster: vec![0, 0, 0, 1, 1, 1, 2, 2, 2], val_cluster: vec![0, 0, 1, 1, 2, 2] };
    let mut notes = Vec::new();
    for (models, tol) in [(5000, 0.05), (20000, 0.02)] {
        let cfg = MsrConfig { p: 0.5, num_models: models, seed: 6, ..MsrConfig::default() };
        let t = msr_estimate_with(&eval, &cfg).map_err(|e| e.to_string())?;
        let (mut on, mut off) = (0.0f64, 0.0f64);
        for i in 0..9 {
            for j in 0..6 {
                if eval.train_cluster[i] == eval.val_cluster[j] {
                    on = on.max((t.get(i, j) - 0.25).abs());
                } else {
                    off = off.max(t.get(i, j).abs());
                }
            }
        }
        check(on <= tol, format!("{models} models: block error {on:.4} > {tol}"))?;
        check(off <= 0.05, format!("{models} models: off-block error {off:.4} > 0.05"))?;
        notes.push(format!("{models}: block {on:.4}, off {off:.4}"));
    }
    Ok(notes.join("; "))
}

fn c7_removal_curves() -> Outcome {
    let data = fig1_preset(7);
    let spec = LearnerSpec::default();
    // Train indices by cluster: C1 = 0..3, C2 = 3..5, C3 = 5..7, C4 = 7.
    // Removal by cluster: c1, c1, c2, c3, c2, c1, c3, c4.
    let optimal = removal_curve(&data, &spec, &[0, 1, 3, 5, 4, 2, 6, 7]).map_err(|e| e.to_string())?;
    check(
        optimal.accuracies[..=4].iter().all(|&a| a == 1.0),
        format!("optimal order accuracies {:?}", optimal.accuracies),
    )?;
    let game = LearnerGame::new(&data, spec).map_err(|e| e.to_string())?;
    let shapley = exact_shapley(&game).map_err(|e| e.to_string())?;
    let order = pruning_order_from_values(&shapley.values, Direction::LowFirst).map_err(|e| e.to_string())?;
    let by_shapley = removal_curve(&data, &spec, &order).map_err(|e| e.to_string())?;
    let (opt_drop, sh_drop) = (optimal.first_drop().unwrap_or(9), by_shapley.first_drop().unwrap_or(9));
    check(sh_drop < opt_drop, format!("Shapley first drop at {sh_drop}, optimal at {opt_drop}"))?;

    let msr = MsrConfig { p: 0.5, num_models: 5000, seed: 7, learner: spec };
    let t = msr_estimate(&data, &msr).map_err(|e| e.to_string())?;
    let budget = 4;
    let max = t.max_entry();
    let kappas = [default_kappa(&t, budget), 0.1 * max, 0.25 * max, 0.5 * max, max];
    let alphas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let eval = |s: &[usize]| subset_accuracy(&data, s, &spec, Split::Val);
    let g = grid_search(&t, budget, &alphas, &kappas, eval).map_err(|e| e.to_string())?;
    let acc = subset_accuracy(&data, &g.solution.selected, &spec, Split::Test).map_err(|e| e.to_string())?;
    check(acc == 1.0, format!("CDVM at S = 4 keeps {:?}, test accuracy {acc}", g.solution.selected))?;
    Ok(format!(
        "first drop: optimal step {opt_drop}, Shapley step {sh_drop}; CDVM S=4 keeps {:?} (alpha {}, kappa {:.3}), accuracy {acc}",
        g.solution.selected, g.alpha, g.kappa
    ))
}

fn c8_loo_redundancy() -> Outcome {
    let data = fig1_preset(8);
    let game = LearnerGame::new(&data, LearnerSpec::default()).map_err(|e| e.to_string())?;
    let v = loo(&game);
    let nonzero: Vec<usize> = (0..v.len()).filter(|&i| v.values[i] != 0.0).collect();
    check(nonzero == vec![7], format!("nonzero LOO at {nonzero:?}: {:?}", v.values))?;
    Ok(format!("only the singleton is valued ({:.3})", v.values[7]))
}

fn c9_default_kappa() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(1..=30), rng.gen_range(1..=20));
        let values: Vec<f64> =
            (0..n * m).map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let budget = rng.gen_range(1..=n);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let want = max + budget as f64 * mean;
        let t = AttributionMatrix::from_dense(n, m, values).unwrap();
        worst = worst.max((default_kappa(&t, budget) - want).abs());
    }
    check(worst <= 1e-12, format!("max error {worst:e}"))?;
    Ok(format!("100 matrices, max error {worst:.1e}"))
}

fn run_bench(dir: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let output = Command::new(env!("CARGO_BIN_EXE_cdvm"))
        .args([
            "bench",
            "--preset",
            "fig1",
            "--seed",
            "10",
            "--seeds",
            "5",
            "--num-models",
            "2000",
            "--threads",
            threads,
        ])
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    check(output.status.success(), format!("bench exited with {}", output.status))?;
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let a = run_bench(&tmp.path().join("a"), "4")?;
    let elapsed = start.elapsed();
    let b = run_bench(&tmp.path().join("b"), "4")?;
    let one = run_bench(&tmp.path().join("one"), "1")?;
    let eight = run_bench(&tmp.path().join("eight"), "8")?;
    check(a.keys().any(|k| k.ends_with(".csv")), "bench wrote no CSVs")?;
    check(a == b, "two runs with the same config differ")?;
    check(one == eight, "--threads 1 and --threads 8 differ")?;
    Ok(format!("{} files identical across runs and thread counts; one run {elapsed:.1?}", a.len()))
}

fn c11_normalization() -> Outcome {
    let mut scores = BTreeMap::new();
    scores.insert("a".to_string(), vec![0.9, 0.6]);
    scores.insert("b".to_string(), vec![0.7, 0.8]);
    scores.insert("c".to_string(), vec![0.5, 0.4]);
    let norm = normalize_performance(&scores).map_err(|e| e.to_string())?;
    // P_max = 0.9 + 0.8 = 1.7, P_min = 0.5 + 0.4 = 0.9; sums a = 1.5, b = 1.5, c = 0.9.
    let want = [("a", 0.75), ("b", 0.75), ("c", 0.0)];
    for (m, w) in want {
        check((norm[m] - w).abs() <= 1e-12, format!("{m}: {} != {w}", norm[m]))?;
    }
    let mut ordered = BTreeMap::new();
    ordered.insert("best".to_string(), vec![0.9, 0.9]);
    ordered.insert("mid".to_string(), vec![0.6, 0.7]);
    ordered.insert("worst".to_string(), vec![0.2, 0.3]);
    let norm2 = normalize_performance(&ordered).map_err(|e| e.to_string())?;
    check(norm2["best"] == 1.0 && norm2["worst"] == 0.0, format!("{norm2:?}"))?;
    Ok(format!("a {:.2}, b {:.2}, c {:.2}", norm["a"], norm["b"], norm["c"]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form Shapley on the (3,2,2,1) game", c1_closed_form_shapley),
        ("closed-form Banzhaf on 100 random clustered games", c2_closed_form_banzhaf),
        ("equal-distribution Shapley collapse", c3_equal_distribution_collapse),
        ("cluster coverage of rounded CDVM solutions", c4_cluster_coverage),
        ("LP relaxation against binary enumeration", c5_lp_oracle),
        ("MSR convergence on the knockout game", c6_msr_convergence),
        ("removal curves and CDVM on the 8-point dataset", c7_removal_curves),
        ("LOO redundancy bias", c8_loo_redundancy),
        ("default kappa formula", c9_default_kappa),
        ("bench determinism", c10_determinism),
        ("performance normalization", c11_normalization),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

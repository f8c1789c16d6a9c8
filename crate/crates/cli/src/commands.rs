use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use cdvm::attribution::{msr_estimate, AttributionMatrix, MsrConfig};
use cdvm::bench::{
    banzhaf_strategy, budget_for_level, frequency_spectrum, normalize_performance, overlap_matrix, retention_eval,
    CdvmParams, CdvmStrategy, MatrixSource, MsrCache, Pairing, RandomStrategy, Strategy, ValueStrategy, CI_SEEDS,
    DEFAULT_LEVELS,
};
use cdvm::cdvm::{build_problem, grid_search, solve_lp, verify_cluster_coverage, KappaChoice};
use cdvm::dataset::{fig1_preset, gen_clustered, subset_accuracy, LabeledDataset, LearnerSpec, Split};
use cdvm::games::LearnerGame;
use cdvm::rng::derive_seed;
use cdvm::semivalues::{dataoob, exact_shapley, loo, MAX_EXACT_PLAYERS};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{config_error, parse_centers, parse_list, pick, GenSpec, RunConfig};
use crate::{AnalyzeArgs, AttributeArgs, BenchArgs, DataArgs, GenArgs, LearnerArgs, MsrArgs, PruneArgs};

pub const ALL_METHODS: [&str; 6] = ["random", "loo", "shapley", "banzhaf", "dataoob", "cdvm"];
const DEFAULT_BOOTSTRAPS: usize = 500;

fn parse_flag<T: std::str::FromStr>(flag: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    parse_list(value).map_err(|e| config_error(format!("--{flag}: {e}")))
}

fn require_out(flag: Option<&PathBuf>, config: &RunConfig) -> Result<PathBuf> {
    pick(flag.cloned(), &config.out).ok_or_else(|| config_error("an output path is required (--out)"))
}

fn preset(name: &str, seed: u64) -> Result<LabeledDataset> {
    match name {
        "fig1" => Ok(fig1_preset(seed)),
        other => Err(config_error(format!("unknown preset `{other}`"))),
    }
}

/// Dataset from `--data`, `--preset`, or the config's data/preset/generate fields.
fn load_data(args: &DataArgs, config: &RunConfig, seed: u64) -> Result<Option<LabeledDataset>> {
    if let Some(path) = &args.data {
        return Ok(Some(LabeledDataset::load_csv(path).with_context(|| path.display().to_string())?));
    }
    if let Some(name) = &args.preset {
        return preset(name, seed).map(Some);
    }
    if let Some(path) = &config.data {
        return Ok(Some(LabeledDataset::load_csv(path).with_context(|| path.display().to_string())?));
    }
    if let Some(name) = &config.preset {
        return preset(name, seed).map(Some);
    }
    if let Some(g) = &config.generate {
        return Ok(Some(gen_clustered(&g.centers, &g.sizes, &g.labels, g.sigma, &g.test_sizes, seed)?));
    }
    Ok(None)
}

fn require_data(args: &DataArgs, config: &RunConfig, seed: u64) -> Result<LabeledDataset> {
    load_data(args, config, seed)?.ok_or_else(|| config_error("a dataset is required (--data or --preset)"))
}

fn learner(args: &LearnerArgs, config: &RunConfig) -> Result<LearnerSpec> {
    let mut spec = config.learner.unwrap_or_default();
    if let Some(kind) = &args.learner {
        spec.kind = kind.parse().map_err(|e: cdvm::Error| config_error(e.to_string()))?;
    }
    spec.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(spec)
}

fn msr_config(args: &MsrArgs, config: &RunConfig, learner: LearnerSpec, seed: u64) -> Result<MsrConfig> {
    let section = config.msr.unwrap_or_default();
    let cfg = MsrConfig {
        p: args.p.unwrap_or(section.p),
        num_models: args.num_models.unwrap_or(section.num_models),
        seed,
        learner,
    };
    cfg.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(cfg)
}

fn alphas(flag: Option<&String>, config: &RunConfig) -> Result<Vec<f64>> {
    let a = match flag {
        Some(s) => parse_flag("alpha", s)?,
        None => config.alpha.clone().unwrap_or_else(|| vec![0.5]),
    };
    if a.is_empty() || a.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(config_error("alpha values must lie in [0, 1]"));
    }
    Ok(a)
}

fn kappas(flag: Option<&String>, config: &RunConfig) -> Result<Vec<KappaChoice>> {
    let k = match flag {
        Some(s) => parse_flag("kappa", s)?,
        None => config.kappa.clone().unwrap_or_else(|| vec![KappaChoice::Default]),
    };
    if k.is_empty() {
        return Err(config_error("at least one kappa is required"));
    }
    Ok(k)
}

fn levels(flag: Option<&String>, config: &RunConfig) -> Result<Option<Vec<f64>>> {
    let l = match flag {
        Some(s) => Some(parse_flag("levels", s)?),
        None => config.levels.clone(),
    };
    if let Some(l) = &l {
        if l.is_empty() || l.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(config_error("retention levels must lie in (0, 1]"));
        }
    }
    Ok(l)
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| path.display().to_string())?))
}

pub fn gen(args: &GenArgs, config: &RunConfig, seed: u64) -> Result<()> {
    let out = require_out(args.out.as_ref(), config)?;
    let explicit = args.centers.is_some() || args.sizes.is_some() || args.labels.is_some() || args.test_sizes.is_some();
    let data = if let Some(name) = args.preset.as_ref().or(if explicit { None } else { config.preset.as_ref() }) {
        preset(name, seed)?
    } else {
        let base = config.generate.clone();
        let field = |flag: &Option<String>, name: &str, from: Option<Vec<usize>>| -> Result<Vec<usize>> {
            match flag {
                Some(s) => parse_flag(name, s),
                None => from.ok_or_else(|| config_error(format!("--{name} is required without a preset"))),
            }
        };
        let centers = match &args.centers {
            Some(s) => parse_centers(s).map_err(|e| config_error(format!("--centers: {e}")))?,
            None => base.as_ref().map(|g| g.centers.clone()).ok_or_else(|| config_error("--centers is required"))?,
        };
        let spec = GenSpec {
            centers,
            sizes: field(&args.sizes, "sizes", base.as_ref().map(|g| g.sizes.clone()))?,
            labels: field(&args.labels, "labels", base.as_ref().map(|g| g.labels.clone()))?,
            sigma: args.sigma.or(base.as_ref().map(|g| g.sigma)).unwrap_or(0.1),
            test_sizes: field(&args.test_sizes, "test-sizes", base.as_ref().map(|g| g.test_sizes.clone()))?,
        };
        gen_clustered(&spec.centers, &spec.sizes, &spec.labels, spec.sigma, &spec.test_sizes, seed)?
    };
    data.save_csv(&out)?;
    let k = data.cluster_of().map_or(0, |c| c.iter().max().map_or(0, |m| m + 1));
    println!("n={} val={} test={} K={}", data.n_train(), data.n_val(), data.n_test(), k);
    Ok(())
}

pub fn attribute(args: &AttributeArgs, config: &RunConfig, seed: u64) -> Result<()> {
    let out = require_out(args.out.as_ref(), config)?;
    let data = require_data(&args.data, config, seed)?;
    let spec = learner(&args.learner, config)?;
    let cfg = msr_config(&args.msr, config, spec, derive_seed(seed, "msr", 0))?;
    let t = msr_estimate(&data, &cfg)?;
    let undefined = t.undefined_rows().iter().filter(|&&u| u).count();
    info!("num_models={} p={} undefined_rows={undefined}", cfg.num_models, cfg.p);
    t.save(&out)?;
    println!("n={} m={} nnz={} undefined_rows={undefined}", t.n_train(), t.n_val(), t.nnz());
    Ok(())
}

pub fn prune(args: &PruneArgs, config: &RunConfig, seed: u64) -> Result<()> {
    let out = require_out(args.out.as_ref(), config)?;
    let t_path = pick(args.attribution.clone(), &config.attribution)
        .ok_or_else(|| config_error("an attribution matrix is required (--t)"))?;
    let t = AttributionMatrix::load(&t_path).with_context(|| t_path.display().to_string())?;
    let data = load_data(&args.data, config, seed)?;
    let n = t.n_train();
    let mut budgets: Vec<usize> = match &args.budgets {
        Some(s) => parse_flag("budgets", s)?,
        None if args.levels.is_some() => Vec::new(),
        None => config.budgets.clone().unwrap_or_default(),
    };
    if let Some(l) = levels(args.levels.as_ref(), config)? {
        budgets.extend(l.iter().map(|&x| budget_for_level(x, n)));
    }
    if budgets.is_empty() {
        return Err(config_error("no budget given (--budgets or --levels)"));
    }
    if let Some(&b) = budgets.iter().find(|&&b| b == 0 || b > n) {
        return Err(config_error(format!("budget {b} outside 1..={n}")));
    }
    let alphas = alphas(args.alpha.as_ref(), config)?;
    let kappas = kappas(args.kappa.as_ref(), config)?;
    let spec = learner(&args.learner, config)?;
    fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
    for &budget in &budgets {
        let solution = if alphas.len() == 1 && kappas.len() == 1 {
            solve_lp(&build_problem(&t, budget, alphas[0], kappas[0].resolve(&t, budget))?)?
        } else {
            let data = data.as_ref().ok_or_else(|| config_error("grid search needs the dataset (--data)"))?;
            if data.n_train() != n {
                return Err(config_error("dataset and attribution matrix sizes differ"));
            }
            let ks: Vec<f64> = kappas.iter().map(|k| k.resolve(&t, budget)).collect();
            let eval = |s: &[usize]| subset_accuracy(data, s, &spec, Split::Val);
            let g = grid_search(&t, budget, &alphas, &ks, eval)?;
            info!("S={budget}: grid picked alpha={} kappa={} (validation accuracy {})", g.alpha, g.kappa, g.score);
            g.solution
        };
        let path = out.join(format!("solution-S{budget}.json"));
        fs::write(&path, solution.to_json()? + "\n").with_context(|| path.display().to_string())?;
        let mut line = format!(
            "S={budget} alpha={} kappa={} objective={} fractional={}",
            solution.alpha, solution.kappa, solution.objective, solution.fractional_count
        );
        if let Some(clusters) = data.as_ref().and_then(|d| d.cluster_of()).filter(|c| c.len() == n) {
            let cov = verify_cluster_coverage(&solution.selected, clusters);
            let covered = cov.counts.iter().filter(|&&c| c > 0).count();
            line += &format!(" clusters_covered={covered}/{}", cov.counts.len());
        }
        println!("{line}");
    }
    Ok(())
}

/// Retained sets of a run, as consumed by `analyze`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RetainedSets {
    pub n_train: usize,
    pub levels: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Method → level → seed → ascending indices.
    pub methods: BTreeMap<String, Vec<Vec<Vec<usize>>>>,
}

fn write_overlap(path: &Path, per_method: &BTreeMap<String, Vec<Vec<f64>>>, levels: &[f64]) -> Result<()> {
    let mut w = create_writer(path)?;
    writeln!(w, "method,level_a,level_b,overlap")?;
    for (m, mat) in per_method {
        for (a, row) in mat.iter().enumerate() {
            for (b, x) in row.iter().enumerate() {
                writeln!(w, "{m},{},{},{x}", levels[a], levels[b])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum(path: &Path, sets: &RetainedSets) -> Result<()> {
    let mut w = create_writer(path)?;
    writeln!(w, "method,instance,class,peak_frequency,majority_levels")?;
    for (m, per_level) in &sets.methods {
        let mut freq = vec![vec![0.0; per_level.len()]; sets.n_train];
        for (li, seeds) in per_level.iter().enumerate() {
            for s in seeds {
                for &i in s {
                    if i >= sets.n_train {
                        return Err(config_error(format!("index {i} outside {} training points", sets.n_train)));
                    }
                    freq[i][li] += 1.0 / seeds.len() as f64;
                }
            }
        }
        for e in frequency_spectrum(&freq)? {
            writeln!(w, "{m},{},{},{},{}", e.instance, e.class.as_str(), e.peak_frequency, e.majority_levels)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn overlaps(sets: &RetainedSets, pairing: Pairing) -> Result<BTreeMap<String, Vec<Vec<f64>>>> {
    sets.methods.iter().map(|(m, s)| Ok((m.clone(), overlap_matrix(s, pairing)?))).collect()
}

pub fn bench(args: &BenchArgs, config: &RunConfig, seed: u64) -> Result<()> {
    let out = require_out(args.out.as_ref(), config)?;
    let data = require_data(&args.data, config, seed)?;
    let n = data.n_train();
    let spec = learner(&args.learner, config)?;
    let levels = levels(args.levels.as_ref(), config)?.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    let num_seeds = args.seeds.or(config.seeds).unwrap_or(CI_SEEDS);
    if num_seeds == 0 {
        return Err(config_error("at least one seed is required"));
    }
    let seeds: Vec<u64> = (0..num_seeds as u64).map(|k| derive_seed(seed, "bench", k)).collect();
    let methods: Vec<String> = match &args.methods {
        Some(s) => parse_flag("methods", s)?,
        None => config.methods.clone().unwrap_or_else(|| {
            ALL_METHODS.iter().filter(|&&m| m != "shapley" || n <= MAX_EXACT_PLAYERS).map(|m| m.to_string()).collect()
        }),
    };
    if n > MAX_EXACT_PLAYERS && methods.iter().any(|m| m == "shapley") {
        return Err(config_error(format!("exact Shapley order needs n <= {MAX_EXACT_PLAYERS}, got n = {n}")));
    }
    let bootstraps = args.dataoob_bootstraps.or(config.dataoob_bootstraps).unwrap_or(DEFAULT_BOOTSTRAPS);
    let msr = msr_config(&args.msr, config, spec, seed)?;
    let source = match pick(args.attribution.clone(), &config.attribution) {
        Some(path) if path.exists() => {
            MatrixSource::Fixed(Arc::new(AttributionMatrix::load(&path).with_context(|| path.display().to_string())?))
        }
        other => {
            if let Some(path) = other {
                info!("{} not found; estimating attribution matrices per seed", path.display());
            }
            MatrixSource::PerSeed(Arc::new(MsrCache::new(msr)))
        }
    };
    let alphas = alphas(args.alpha.as_ref(), config)?;
    let kappas = kappas(args.kappa.as_ref(), config)?;
    let params = if alphas.len() == 1 && kappas.len() == 1 {
        CdvmParams::Single { alpha: alphas[0], kappa: kappas[0] }
    } else {
        CdvmParams::Grid { alphas, kappas }
    };

    let learner_for = move |s: u64| LearnerSpec { seed: derive_seed(s, "learner", 0), ..spec };
    let mut roster: Vec<Box<dyn Strategy>> = Vec::new();
    for m in &methods {
        let strategy: Box<dyn Strategy> = match m.as_str() {
            "random" => Box::new(RandomStrategy),
            "loo" => Box::new(ValueStrategy::new("loo", move |d, s| Ok(loo(&LearnerGame::new(d, learner_for(s))?)))),
            "shapley" => Box::new(ValueStrategy::new("shapley", move |d, s| {
                exact_shapley(&LearnerGame::new(d, learner_for(s))?)
            })),
            "banzhaf" => Box::new(banzhaf_strategy("banzhaf", source.clone())),
            "dataoob" => Box::new(ValueStrategy::new("dataoob", move |d, s| {
                dataoob(d, &learner_for(s), bootstraps, derive_seed(s, "dataoob", 0))
            })),
            "cdvm" => Box::new(CdvmStrategy::new(source.clone(), params.clone(), spec)),
            other => return Err(config_error(format!("unknown method `{other}`"))),
        };
        roster.push(strategy);
    }
    let refs: Vec<&dyn Strategy> = roster.iter().map(|s| s.as_ref()).collect();
    info!("bench: n={n} methods={} levels={} seeds={num_seeds}", methods.len(), levels.len());
    let report = retention_eval(&data, &spec, &refs, &levels, &seeds)?;

    fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
    let mut w = create_writer(&out.join("report.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create_writer(&out.join("summary.csv"))?;
    report.write_summary_csv(&mut w)?;
    w.flush()?;

    let sets = RetainedSets {
        n_train: n,
        levels: levels.clone(),
        seeds: seeds.clone(),
        methods: report.methods.iter().map(|m| (m.clone(), report.retained_sets(m))).collect(),
    };
    fs::write(out.join("retained.json"), serde_json::to_string(&sets)? + "\n")?;
    write_overlap(&out.join("overlap.csv"), &overlaps(&sets, Pairing::SameSeedDiagonal)?, &levels)?;
    write_spectrum(&out.join("spectrum.csv"), &sets)?;
    match normalize_performance(&report.per_setting_scores()) {
        Ok(norm) => {
            let mut w = create_writer(&out.join("normalized.csv"))?;
            writeln!(w, "method,normalized")?;
            for (m, x) in norm {
                writeln!(w, "{m},{x}")?;
            }
            w.flush()?;
        }
        Err(e) => warn!("normalized performance not written: {e}"),
    }
    for c in report.summary() {
        println!("{:<8} level={:<5} mean={:.4} sd={:.4}", c.method, c.level, c.mean, c.sd);
    }
    Ok(())
}

#[derive(Deserialize)]
struct SavedSolution {
    #[serde(rename = "S")]
    budget: usize,
    selected: Vec<usize>,
}

pub fn analyze(args: &AnalyzeArgs, config: &RunConfig) -> Result<()> {
    let out = require_out(args.out.as_ref(), config)?;
    let pairing = match args.pairing.as_str() {
        "same-seed" => Pairing::SameSeedDiagonal,
        "cross-level" => Pairing::CrossLevel,
        other => return Err(config_error(format!("unknown pairing `{other}`"))),
    };
    let sets = if let Some(path) = &args.retained {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        serde_json::from_str::<RetainedSets>(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
    } else if !args.solutions.is_empty() {
        let mut per_level = Vec::new();
        let mut levels = Vec::new();
        for path in &args.solutions {
            let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
            let s: SavedSolution =
                serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            levels.push(s.budget as f64);
            per_level.push(vec![s.selected]);
        }
        let max_index = per_level.iter().flatten().flatten().copied().max().map_or(0, |m| m + 1);
        let n_train = args.n.unwrap_or(max_index);
        RetainedSets { n_train, levels, seeds: vec![0], methods: BTreeMap::from([("cdvm".to_string(), per_level)]) }
    } else {
        return Err(config_error("analyze needs --retained or --solutions"));
    };
    fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
    write_overlap(&out.join("overlap.csv"), &overlaps(&sets, pairing)?, &sets.levels)?;
    write_spectrum(&out.join("spectrum.csv"), &sets)?;
    println!("methods={} levels={} seeds={}", sets.methods.len(), sets.levels.len(), sets.seeds.len());
    Ok(())
}

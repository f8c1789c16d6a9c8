//! Pruning benchmarks: removal curves, retention-level reports, overlap between
//! retained sets, selection-frequency spectra and cross-method normalization.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use parking_lot::Mutex;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{banzhaf_from_t, msr_estimate, AttributionMatrix, MsrConfig};
use crate::cdvm::{build_problem, grid_search, solve_lp, KappaChoice};
use crate::dataset::{subset_accuracy, LabeledDataset, LearnerSpec, Split};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_for};
use crate::semivalues::ValueVector;

/// Retention levels used by the benchmark protocol.
pub const DEFAULT_LEVELS: [f64; 6] = [0.30, 0.25, 0.20, 0.15, 0.10, 0.05];
pub const DEFAULT_SEEDS: usize = 25;
pub const CI_SEEDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    LowFirst,
    HighFirst,
}

/// Removal order induced by data values; equal values keep ascending index order.
pub fn pruning_order_from_values(values: &[f64], direction: Direction) -> Result<Vec<usize>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("values must be finite"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    match direction {
        Direction::LowFirst => order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))),
        Direction::HighFirst => order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b))),
    }
    Ok(order)
}

/// Test accuracy after each removal step; step 0 is the full training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalCurve {
    pub order: Vec<usize>,
    pub accuracies: Vec<f64>,
    pub seed: u64,
}

impl RemovalCurve {
    /// Index of the first step whose accuracy is below step 0.
    pub fn first_drop(&self) -> Option<usize> {
        let base = self.accuracies[0];
        self.accuracies.iter().position(|&a| a < base)
    }

    /// `step,removed_index,accuracy`; step 0 has no removed index.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "step,removed_index,accuracy")?;
        for (k, acc) in self.accuracies.iter().enumerate() {
            let removed = if k == 0 { String::new() } else { self.order[k - 1].to_string() };
            writeln!(out, "{k},{removed},{acc}")?;
        }
        Ok(())
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(invalid(format!("order has {} entries for {n} training points", order.len())));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(invalid("order is not a permutation of the training indices"));
        }
    }
    Ok(())
}

/// Retrains after every removal in `order`; training on nothing scores the
/// majority-class baseline.
pub fn removal_curve(data: &LabeledDataset, spec: &LearnerSpec, order: &[usize]) -> Result<RemovalCurve> {
    check_permutation(order, data.n_train())?;
    let accuracies = (0..=order.len())
        .into_par_iter()
        .map(|k| {
            let mut survivors = order[k..].to_vec();
            survivors.sort_unstable();
            subset_accuracy(data, &survivors, spec, Split::Test)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RemovalCurve { order: order.to_vec(), accuracies, seed: spec.seed })
}

/// Number of points kept at a retention fraction: `round(level · n)`, at least 1.
pub fn budget_for_level(level: f64, n: usize) -> usize {
    ((level * n as f64).round() as usize).clamp(1, n.max(1))
}

/// Chooses retained sets for one dataset and seed.
pub trait Selector: Sync {
    /// Exactly `budget` distinct training positions.
    fn select(&self, budget: usize) -> Result<Vec<usize>>;
}

/// A pruning method; `prepare` does the per-seed work shared by all budgets.
pub trait Strategy: Sync {
    fn name(&self) -> &str;
    fn prepare<'a>(&'a self, data: &'a LabeledDataset, seed: u64) -> Result<Box<dyn Selector + 'a>>;
}

/// Uniformly random retained set.
#[derive(Debug, Clone, Default)]
pub struct RandomStrategy;

struct RandomSelector {
    n: usize,
    seed: u64,
}

impl Selector for RandomSelector {
    fn select(&self, budget: usize) -> Result<Vec<usize>> {
        let mut rng = rng_for(self.seed, "random-strategy", budget as u64);
        let mut s = sample(&mut rng, self.n, budget.min(self.n)).into_vec();
        s.sort_unstable();
        Ok(s)
    }
}

impl Strategy for RandomStrategy {
    fn name(&self) -> &str {
        "random"
    }

    fn prepare<'a>(&'a self, data: &'a LabeledDataset, seed: u64) -> Result<Box<dyn Selector + 'a>> {
        Ok(Box::new(RandomSelector { n: data.n_train(), seed }))
    }
}

type ValueFn = dyn Fn(&LabeledDataset, u64) -> Result<ValueVector> + Sync + Send;

/// Keeps the highest-valued points, i.e. prunes in low-first order.
pub struct ValueStrategy {
    name: String,
    values: Box<ValueFn>,
}

impl ValueStrategy {
    pub fn new(
        name: impl Into<String>,
        values: impl Fn(&LabeledDataset, u64) -> Result<ValueVector> + Sync + Send + 'static,
    ) -> Self {
        Self { name: name.into(), values: Box::new(values) }
    }

    /// Same values for every seed.
    pub fn fixed(name: impl Into<String>, values: ValueVector) -> Self {
        Self::new(name, move |_, _| Ok(values.clone()))
    }
}

struct OrderSelector {
    order: Vec<usize>,
}

impl Selector for OrderSelector {
    fn select(&self, budget: usize) -> Result<Vec<usize>> {
        let n = self.order.len();
        let mut kept = self.order[n - budget.min(n)..].to_vec();
        kept.sort_unstable();
        Ok(kept)
    }
}

impl Strategy for ValueStrategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn prepare<'a>(&'a self, data: &'a LabeledDataset, seed: u64) -> Result<Box<dyn Selector + 'a>> {
        let v = (self.values)(data, seed)?;
        if v.len() != data.n_train() {
            return Err(invalid(format!("{} produced {} values for {} points", self.name, v.len(), data.n_train())));
        }
        Ok(Box::new(OrderSelector { order: pruning_order_from_values(&v.values, Direction::LowFirst)? }))
    }
}

/// How CDVM picks `(α, κ)` for each budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdvmParams {
    Single {
        alpha: f64,
        kappa: KappaChoice,
    },
    /// Grid search on validation accuracy.
    Grid {
        alphas: Vec<f64>,
        kappas: Vec<KappaChoice>,
    },
}

impl Default for CdvmParams {
    /// `α = 0.5` with the budget-adaptive default κ.
    fn default() -> Self {
        Self::Single { alpha: 0.5, kappa: KappaChoice::Default }
    }
}

/// Per-seed MSR matrices for one dataset, computed once and shared between methods.
#[derive(Debug)]
pub struct MsrCache {
    msr: MsrConfig,
    matrices: Mutex<BTreeMap<u64, Arc<AttributionMatrix>>>,
}

impl MsrCache {
    pub fn new(msr: MsrConfig) -> Self {
        Self { msr, matrices: Mutex::new(BTreeMap::new()) }
    }

    /// Matrix for benchmark `seed`; the MSR seed is derived from it.
    pub fn get(&self, data: &LabeledDataset, seed: u64) -> Result<Arc<AttributionMatrix>> {
        if let Some(t) = self.matrices.lock().get(&seed) {
            return Ok(t.clone());
        }
        let cfg = MsrConfig { seed: derive_seed(seed, "bench-msr", 0), ..self.msr };
        let t = Arc::new(msr_estimate(data, &cfg)?);
        Ok(self.matrices.lock().entry(seed).or_insert(t).clone())
    }
}

/// Where a strategy gets its attribution matrix.
#[derive(Debug, Clone)]
pub enum MatrixSource {
    /// One precomputed matrix for every seed.
    Fixed(Arc<AttributionMatrix>),
    PerSeed(Arc<MsrCache>),
}

impl MatrixSource {
    pub fn get(&self, data: &LabeledDataset, seed: u64) -> Result<Arc<AttributionMatrix>> {
        let t = match self {
            Self::Fixed(t) => t.clone(),
            Self::PerSeed(cache) => cache.get(data, seed)?,
        };
        if t.n_train() != data.n_train() || t.n_val() != data.n_val() {
            return Err(invalid(format!(
                "attribution matrix is {}x{} but the dataset has {} training and {} validation points",
                t.n_train(),
                t.n_val(),
                data.n_train(),
                data.n_val()
            )));
        }
        Ok(t)
    }
}

/// Banzhaf values read off the attribution matrix (row means).
pub fn banzhaf_strategy(name: impl Into<String>, source: MatrixSource) -> ValueStrategy {
    ValueStrategy::new(name, move |data, seed| Ok(banzhaf_from_t(&*source.get(data, seed)?)))
}

/// CDVM on an attribution matrix, re-solved for every budget.
pub struct CdvmStrategy {
    pub source: MatrixSource,
    pub params: CdvmParams,
    /// Learner used to score grid points on validation data.
    pub learner: LearnerSpec,
    name: String,
}

impl CdvmStrategy {
    pub fn new(source: MatrixSource, params: CdvmParams, learner: LearnerSpec) -> Self {
        Self { source, params, learner, name: "cdvm".into() }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

struct CdvmSelector<'a> {
    data: &'a LabeledDataset,
    t: Arc<AttributionMatrix>,
    params: &'a CdvmParams,
    learner: LearnerSpec,
}

impl Selector for CdvmSelector<'_> {
    fn select(&self, budget: usize) -> Result<Vec<usize>> {
        let t = &*self.t;
        match self.params {
            CdvmParams::Single { alpha, kappa } => {
                Ok(solve_lp(&build_problem(t, budget, *alpha, kappa.resolve(t, budget))?)?.selected)
            }
            CdvmParams::Grid { alphas, kappas } => {
                let kappas: Vec<f64> = kappas.iter().map(|k| k.resolve(t, budget)).collect();
                let eval = |s: &[usize]| subset_accuracy(self.data, s, &self.learner, Split::Val);
                Ok(grid_search(t, budget, alphas, &kappas, eval)?.solution.selected)
            }
        }
    }
}

impl Strategy for CdvmStrategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn prepare<'a>(&'a self, data: &'a LabeledDataset, seed: u64) -> Result<Box<dyn Selector + 'a>> {
        let t = self.source.get(data, seed)?;
        Ok(Box::new(CdvmSelector { data, t, params: &self.params, learner: self.learner }))
    }
}

/// One `(method, level, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    pub level: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub retained: Vec<usize>,
}

/// Mean and sample standard deviation of one `(method, level)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub level: f64,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub levels: Vec<f64>,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    /// Ordered by method, then level, then seed.
    pub records: Vec<Record>,
}

impl RetentionReport {
    fn cell(&self, method: &str, level_idx: usize) -> impl Iterator<Item = &Record> {
        let level = self.levels[level_idx];
        let method = method.to_string();
        self.records.iter().filter(move |r| r.method == method && r.level == level)
    }

    pub fn summary(&self) -> Vec<CellSummary> {
        let mut out = Vec::new();
        for m in &self.methods {
            for (li, &level) in self.levels.iter().enumerate() {
                let acc: Vec<f64> = self.cell(m, li).map(|r| r.accuracy).collect();
                let count = acc.len();
                let mean = acc.iter().sum::<f64>() / count.max(1) as f64;
                let sd = if count > 1 {
                    (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
                } else {
                    0.0
                };
                out.push(CellSummary { method: m.clone(), level, mean, sd, count });
            }
        }
        out
    }

    /// Retained sets of `method` indexed by level, then seed.
    pub fn retained_sets(&self, method: &str) -> Vec<Vec<Vec<usize>>> {
        (0..self.levels.len()).map(|li| self.cell(method, li).map(|r| r.retained.clone()).collect()).collect()
    }

    /// `f(i, level)`: fraction of seeds in which point `i` was retained, indexed by
    /// instance, then level.
    pub fn selection_frequencies(&self, method: &str, n_train: usize) -> Vec<Vec<f64>> {
        let mut freq = vec![vec![0.0; self.levels.len()]; n_train];
        for (li, sets) in self.retained_sets(method).iter().enumerate() {
            let k = sets.len().max(1) as f64;
            for s in sets {
                for &i in s {
                    freq[i][li] += 1.0 / k;
                }
            }
        }
        freq
    }

    /// Mean accuracy per method over all levels, for [`normalize_performance`].
    pub fn per_setting_scores(&self) -> BTreeMap<String, Vec<f64>> {
        let summary = self.summary();
        self.methods
            .iter()
            .map(|m| (m.clone(), summary.iter().filter(|c| &c.method == m).map(|c| c.mean).collect()))
            .collect()
    }

    /// `method,level,seed,accuracy`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "method,level,seed,accuracy")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.method, r.level, r.seed, r.accuracy)?;
        }
        Ok(())
    }

    /// `method,level,mean,sd,count`.
    pub fn write_summary_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "method,level,mean,sd,count")?;
        for c in self.summary() {
            writeln!(out, "{},{},{},{},{}", c.method, c.level, c.mean, c.sd, c.count)?;
        }
        Ok(())
    }
}

/// Runs every strategy at every retention level for every seed and records test
/// accuracy of the learner retrained on the retained set.
pub fn retention_eval(
    data: &LabeledDataset,
    spec: &LearnerSpec,
    strategies: &[&dyn Strategy],
    levels: &[f64],
    seeds: &[u64],
) -> Result<RetentionReport> {
    if levels.is_empty() || levels.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(invalid("retention levels must lie in (0, 1]"));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("retention levels must be strictly decreasing"));
    }
    let n = data.n_train();
    let jobs: Vec<(usize, usize)> = (0..strategies.len()).flat_map(|m| (0..seeds.len()).map(move |s| (m, s))).collect();
    let results: Vec<Result<Vec<Record>>> = jobs
        .par_iter()
        .map(|&(m, s)| {
            let strategy = strategies[m];
            let selector = strategy.prepare(data, seeds[s])?;
            levels
                .iter()
                .map(|&level| {
                    let budget = budget_for_level(level, n);
                    let retained = selector.select(budget)?;
                    let mut check = retained.clone();
                    check.sort_unstable();
                    check.dedup();
                    if check.len() != budget || retained.len() != budget || check.last().is_some_and(|&i| i >= n) {
                        return Err(invalid(format!(
                            "{} returned {} points for budget {budget}",
                            strategy.name(),
                            retained.len()
                        )));
                    }
                    let accuracy = subset_accuracy(data, &retained, spec, Split::Test)?;
                    Ok(Record { method: strategy.name().to_string(), level, seed: seeds[s], accuracy, retained })
                })
                .collect()
        })
        .collect();
    // jobs are (method, seed); reorder records to (method, level, seed).
    let mut per_job = Vec::with_capacity(results.len());
    for r in results {
        per_job.push(r?);
    }
    let mut records = Vec::new();
    for m in 0..strategies.len() {
        for li in 0..levels.len() {
            for s in 0..seeds.len() {
                records.push(per_job[m * seeds.len() + s][li].clone());
            }
        }
    }
    Ok(RetentionReport {
        levels: levels.to_vec(),
        methods: strategies.iter().map(|s| s.name().to_string()).collect(),
        seeds: seeds.to_vec(),
        records,
    })
}

/// `|A ∩ B| / min(|A|, |B|)`.
pub fn overlap_coefficient(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("overlap coefficient of an empty set"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(common as f64 / a.len().min(b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Off-diagonal cells pair identical seed indices; diagonal cells average over
    /// pairs of distinct seeds (a set always fully overlaps itself).
    SameSeedDiagonal,
    /// Every cell averages over all pairs of distinct seeds.
    CrossLevel,
}

/// Average overlap coefficient between retained sets of every pair of levels.
/// `sets[level][seed]` is one retained set.
pub fn overlap_matrix(sets: &[Vec<Vec<usize>>], pairing: Pairing) -> Result<Vec<Vec<f64>>> {
    let l = sets.len();
    let mut out = vec![vec![0.0; l]; l];
    for a in 0..l {
        for b in 0..l {
            let (sa, sb) = (&sets[a], &sets[b]);
            let mut pairs = Vec::new();
            let same_seed = matches!(pairing, Pairing::SameSeedDiagonal) && a != b;
            if same_seed || sa.len().min(sb.len()) < 2 {
                pairs.extend((0..sa.len().min(sb.len())).map(|s| (s, s)));
            } else {
                for x in 0..sa.len() {
                    for y in 0..sb.len() {
                        if x != y {
                            pairs.push((x, y));
                        }
                    }
                }
            }
            if pairs.is_empty() {
                return Err(invalid("no retained sets to compare"));
            }
            let mut total = 0.0;
            for &(x, y) in &pairs {
                total += overlap_coefficient(&sa[x], &sb[y])?;
            }
            out[a][b] = total / pairs.len() as f64;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumClass {
    /// Majority-selected at every level.
    StableCore,
    /// Majority-selected at four or five levels.
    UsefulPoolHigh,
    /// Majority-selected at two or three levels.
    UsefulPoolLow,
    /// Majority-selected at exactly one level.
    BudgetSpecific,
    /// Never a majority; peak frequency in [0.3, 0.5].
    Approaching,
    /// Peak in [0.1, 0.3).
    Occasional,
    /// Peak in [0.01, 0.1).
    Rare,
    /// Peak below 0.01.
    VirtuallyNever,
}

impl SpectrumClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::StableCore => "stable-core",
            Self::UsefulPoolHigh => "useful-pool-high",
            Self::UsefulPoolLow => "useful-pool-low",
            Self::BudgetSpecific => "budget-specific",
            Self::Approaching => "approaching",
            Self::Occasional => "occasional",
            Self::Rare => "rare",
            Self::VirtuallyNever => "virtually-never",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub instance: usize,
    pub class: SpectrumClass,
    pub peak_frequency: f64,
    pub majority_levels: usize,
}

/// Classifies each instance from its per-level selection frequencies
/// (`freqs[instance][level]`); majority means `f > 0.5`.
pub fn frequency_spectrum(freqs: &[Vec<f64>]) -> Result<Vec<SpectrumEntry>> {
    freqs
        .iter()
        .enumerate()
        .map(|(instance, f)| {
            if f.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(invalid(format!("instance {instance} has a frequency outside [0, 1]")));
            }
            let majority_levels = f.iter().filter(|&&x| x > 0.5).count();
            let peak = f.iter().copied().fold(0.0, f64::max);
            let class = match majority_levels {
                0 if peak >= 0.3 => SpectrumClass::Approaching,
                0 if peak >= 0.1 => SpectrumClass::Occasional,
                0 if peak >= 0.01 => SpectrumClass::Rare,
                0 => SpectrumClass::VirtuallyNever,
                k if k == f.len() => SpectrumClass::StableCore,
                1 => SpectrumClass::BudgetSpecific,
                2 | 3 => SpectrumClass::UsefulPoolLow,
                _ => SpectrumClass::UsefulPoolHigh,
            };
            Ok(SpectrumEntry { instance, class, peak_frequency: peak, majority_levels })
        })
        .collect()
}

/// `instance,class,peak_frequency,majority_levels`.
pub fn write_spectrum_csv<W: Write>(entries: &[SpectrumEntry], out: &mut W) -> Result<()> {
    writeln!(out, "instance,class,peak_frequency,majority_levels")?;
    for e in entries {
        writeln!(out, "{},{},{},{}", e.instance, e.class.as_str(), e.peak_frequency, e.majority_levels)?;
    }
    Ok(())
}

/// `(P_m − P_min) / (P_max − P_min)` where `P_m` sums a method's per-setting scores
/// and `P_max`, `P_min` sum the per-setting best and worst scores.
pub fn normalize_performance(scores: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, f64>> {
    if scores.len() < 2 {
        return Err(invalid("normalization needs at least two methods"));
    }
    let settings = scores.values().next().map_or(0, Vec::len);
    if settings == 0 || scores.values().any(|v| v.len() != settings) {
        return Err(invalid("every method must cover the same non-empty set of settings"));
    }
    let (mut p_max, mut p_min) = (0.0, 0.0);
    for s in 0..settings {
        let col = scores.values().map(|v| v[s]);
        p_max += col.clone().fold(f64::NEG_INFINITY, f64::max);
        p_min += col.fold(f64::INFINITY, f64::min);
    }
    if p_max - p_min <= 0.0 {
        return Err(invalid("all methods score identically; normalization is undefined"));
    }
    Ok(scores.iter().map(|(m, v)| (m.clone(), (v.iter().sum::<f64>() - p_min) / (p_max - p_min))).collect())
}

//! Attribution matrix `T` (train x validation) estimated by maximum sample reuse.
//!
//! Every sampled subset trains one model whose per-validation scores are reused for
//! all training points at once: `T_ij` is the mean score of validation point `j` over
//! subsets containing `i`, minus the mean over subsets excluding `i`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{correctness_vector, train_learner, LabeledDataset, LearnerSpec, Split};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::semivalues::{Estimator, ValueVector};

/// Stored entries above this density switch to dense storage.
const DENSE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
enum Storage {
    /// Nonzero `(i, j, value)` sorted by `(i, j)`; `row_start` has `n + 1` offsets.
    Sparse {
        entries: Vec<(usize, usize, f64)>,
        row_start: Vec<usize>,
    },
    Dense(Vec<f64>),
}

/// How many sampled subsets contained / excluded each training point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCounts {
    pub counts_in: Vec<usize>,
    pub counts_out: Vec<usize>,
}

/// Attribution matrix with entries in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AttributionMatrix {
    n_train: usize,
    n_val: usize,
    storage: Storage,
    p: f64,
    num_models: usize,
    seed: u64,
    counts: Option<SampleCounts>,
    /// Rows whose point was never sampled in (or never out); their entries are 0.
    undefined: Vec<bool>,
}

impl PartialEq for AttributionMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_train == other.n_train
            && self.n_val == other.n_val
            && self.p.to_bits() == other.p.to_bits()
            && self.num_models == other.num_models
            && self.seed == other.seed
            && self.triplets() == other.triplets()
    }
}

fn check_entry(i: usize, j: usize, v: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(invalid(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
    }
    Ok(())
}

impl AttributionMatrix {
    /// Matrix from row-major values; metadata defaults to `p = 0`, no models.
    pub fn from_dense(n_train: usize, n_val: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_train * n_val {
            return Err(invalid("dense values do not match the matrix shape"));
        }
        let mut entries = Vec::new();
        for (idx, &v) in values.iter().enumerate() {
            let (i, j) = (idx / n_val.max(1), idx % n_val.max(1));
            check_entry(i, j, v)?;
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
        Ok(Self::assemble(n_train, n_val, entries))
    }

    /// Matrix from nonzero triplets; duplicates are rejected.
    pub fn from_triplets(n_train: usize, n_val: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &entries {
            if i >= n_train || j >= n_val {
                return Err(invalid(format!("entry ({i}, {j}) outside a {n_train}x{n_val} matrix")));
            }
            check_entry(i, j, v)?;
        }
        entries.retain(|e| e.2 != 0.0);
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(invalid("duplicate matrix entry"));
        }
        Ok(Self::assemble(n_train, n_val, entries))
    }

    /// `entries` must be sorted, unique, nonzero and in range.
    fn assemble(n_train: usize, n_val: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        let cells = (n_train * n_val).max(1) as f64;
        let storage = if entries.len() as f64 / cells > DENSE_THRESHOLD {
            let mut dense = vec![0.0; n_train * n_val];
            for (i, j, v) in entries {
                dense[i * n_val + j] = v;
            }
            Storage::Dense(dense)
        } else {
            let mut row_start = vec![0; n_train + 1];
            for &(i, _, _) in &entries {
                row_start[i + 1] += 1;
            }
            for i in 0..n_train {
                row_start[i + 1] += row_start[i];
            }
            Storage::Sparse { entries, row_start }
        };
        Self { n_train, n_val, storage, p: 0.0, num_models: 0, seed: 0, counts: None, undefined: vec![false; n_train] }
    }

    /// Sets the sampling metadata carried by the file format.
    pub fn with_metadata(mut self, p: f64, num_models: usize, seed: u64) -> Self {
        self.p = p;
        self.num_models = num_models;
        self.seed = seed;
        self
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_val(&self) -> usize {
        self.n_val
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn num_models(&self) -> usize {
        self.num_models
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counts(&self) -> Option<&SampleCounts> {
        self.counts.as_ref()
    }

    pub fn undefined_rows(&self) -> &[bool] {
        &self.undefined
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n_train && j < self.n_val, "index ({i}, {j}) out of bounds");
        match &self.storage {
            Storage::Dense(d) => d[i * self.n_val + j],
            Storage::Sparse { entries, row_start } => {
                let row = &entries[row_start[i]..row_start[i + 1]];
                row.binary_search_by_key(&j, |e| e.1).map_or(0.0, |k| row[k].2)
            }
        }
    }

    /// Nonzero `(column, value)` pairs of row `i` in column order.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(d) => d[i * self.n_val..(i + 1) * self.n_val]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect(),
            Storage::Sparse { entries, row_start } => {
                entries[row_start[i]..row_start[i + 1]].iter().map(|&(_, j, v)| (j, v)).collect()
            }
        }
    }

    /// All nonzero entries sorted by `(i, j)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match &self.storage {
            Storage::Sparse { entries, .. } => entries.clone(),
            Storage::Dense(d) => d
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, &v)| (k / self.n_val, k % self.n_val, v))
                .collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Sparse { entries, .. } => entries.len(),
            Storage::Dense(d) => d.iter().filter(|v| **v != 0.0).count(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse { entries, .. } => {
                let mut d = vec![0.0; self.n_train * self.n_val];
                for &(i, j, v) in entries {
                    d[i * self.n_val + j] = v;
                }
                d
            }
        }
    }

    /// Largest entry over all `n·m` cells, implicit zeros included.
    pub fn max_entry(&self) -> f64 {
        let stored = self.triplets().into_iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
        if self.nnz() < self.n_train * self.n_val {
            stored.max(0.0)
        } else {
            stored
        }
    }

    /// Mean over all `n·m` cells, implicit zeros included.
    pub fn mean_entry(&self) -> f64 {
        let cells = self.n_train * self.n_val;
        if cells == 0 {
            return 0.0;
        }
        self.triplets().iter().map(|e| e.2).sum::<f64>() / cells as f64
    }

    /// Column sums `Σ_j T_ij` per training point.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_train).map(|i| self.row_entries(i).iter().map(|e| e.1).sum()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Text format: header `CDVM-T v1 n m nnz p num_models seed`, then one
    /// `i j value` line per nonzero entry (17 significant digits).
    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        let entries = self.triplets();
        writeln!(
            out,
            "CDVM-T v1 {} {} {} {} {} {}",
            self.n_train,
            self.n_val,
            entries.len(),
            self.p,
            self.num_models,
            self.seed
        )?;
        for (i, j, v) in entries {
            writeln!(out, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        let malformed = || Error::Parse(format!("malformed header `{header}`"));
        if h.len() != 8 || h[0] != "CDVM-T" || h[1] != "v1" {
            return Err(malformed());
        }
        let n: usize = h[2].parse().map_err(|_| malformed())?;
        let m: usize = h[3].parse().map_err(|_| malformed())?;
        let nnz: usize = h[4].parse().map_err(|_| malformed())?;
        let p: f64 = h[5].parse().map_err(|_| malformed())?;
        let num_models: usize = h[6].parse().map_err(|_| malformed())?;
        let seed: u64 = h[7].parse().map_err(|_| malformed())?;
        let mut entries = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("malformed entry `{line}`"));
            let mut f = line.split_whitespace();
            let i: usize = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let j: usize = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let v: f64 = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if f.next().is_some() {
                return Err(bad());
            }
            entries.push((i, j, v));
        }
        if entries.len() != nnz {
            return Err(Error::Parse(format!("header declares {nnz} entries, found {}", entries.len())));
        }
        Ok(Self::from_triplets(n, m, entries)?.with_metadata(p, num_models, seed))
    }
}

/// Per-validation scores of a model trained on a subset of training points.
pub trait SubsetEvaluator: Sync {
    fn n_train(&self) -> usize;
    fn n_val(&self) -> usize;
    /// Scores in `[0, 1]` for every validation point; `subset` is non-empty.
    fn scores(&self, subset: &[usize], seed: u64) -> Result<Vec<f64>>;
}

/// 0/1 validation correctness of a trained learner.
#[derive(Debug, Clone)]
pub struct LearnerEvaluator<'a> {
    pub data: &'a LabeledDataset,
    pub spec: LearnerSpec,
}

impl SubsetEvaluator for LearnerEvaluator<'_> {
    fn n_train(&self) -> usize {
        self.data.n_train()
    }

    fn n_val(&self) -> usize {
        self.data.n_val()
    }

    fn scores(&self, subset: &[usize], seed: u64) -> Result<Vec<f64>> {
        let spec = LearnerSpec { seed, ..self.spec };
        let model = train_learner(self.data, subset, &spec)?;
        Ok(correctness_vector(&model, self.data, Split::Val).into_iter().map(f64::from).collect())
    }
}

/// Idealized utility: a validation point is correct iff its cluster has a
/// representative in the subset.
#[derive(Debug, Clone)]
pub struct ClusterKnockout {
    pub train_cluster: Vec<usize>,
    pub val_cluster: Vec<usize>,
}

impl SubsetEvaluator for ClusterKnockout {
    fn n_train(&self) -> usize {
        self.train_cluster.len()
    }

    fn n_val(&self) -> usize {
        self.val_cluster.len()
    }

    fn scores(&self, subset: &[usize], _seed: u64) -> Result<Vec<f64>> {
        let k = self.train_cluster.iter().chain(&self.val_cluster).max().map_or(0, |c| c + 1);
        let mut hit = vec![false; k];
        for &i in subset {
            hit[self.train_cluster[i]] = true;
        }
        Ok(self.val_cluster.iter().map(|&c| f64::from(u8::from(hit[c]))).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsrConfig {
    /// Inclusion probability of each training point.
    pub p: f64,
    pub num_models: usize,
    pub seed: u64,
    pub learner: LearnerSpec,
}

impl Default for MsrConfig {
    fn default() -> Self {
        Self { p: 0.03, num_models: 5000, seed: 0, learner: LearnerSpec::default() }
    }
}

impl MsrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid(format!("inclusion probability {} not in (0, 1)", self.p)));
        }
        if self.num_models == 0 {
            return Err(invalid("num_models must be at least 1"));
        }
        Ok(())
    }
}

/// Bernoulli(p) subset for model `t`; empty draws are redrawn from the same stream.
pub fn sample_subset(n: usize, p: f64, seed: u64, t: usize) -> Vec<usize> {
    let mut rng = rng_for(seed, "msr-subset", t as u64);
    loop {
        let s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
        if !s.is_empty() || n == 0 {
            return s;
        }
    }
}

/// Estimates `T` with the dataset's validation split and the configured learner.
pub fn msr_estimate(data: &LabeledDataset, cfg: &MsrConfig) -> Result<AttributionMatrix> {
    cfg.learner.validate()?;
    msr_estimate_with(&LearnerEvaluator { data, spec: cfg.learner }, cfg)
}

/// Estimates `T` for an arbitrary evaluator; `cfg.learner` is ignored.
pub fn msr_estimate_with<E: SubsetEvaluator + ?Sized>(eval: &E, cfg: &MsrConfig) -> Result<AttributionMatrix> {
    cfg.validate()?;
    let (n, m) = (eval.n_train(), eval.n_val());
    if m == 0 {
        return Err(invalid("validation split is empty"));
    }
    if n == 0 {
        return Err(invalid("no training points"));
    }
    let mut sum_in = vec![0.0; n * m];
    let mut total = vec![0.0; m];
    let mut counts_in = vec![0usize; n];

    const CHUNK: usize = 256;
    let mut start = 0;
    while start < cfg.num_models {
        let end = (start + CHUNK).min(cfg.num_models);
        let batch: Vec<Result<(Vec<usize>, Vec<f64>)>> = (start..end)
            .into_par_iter()
            .map(|t| {
                let subset = sample_subset(n, cfg.p, cfg.seed, t);
                let scores = eval.scores(&subset, derive_seed(cfg.seed, "msr-train", t as u64))?;
                if scores.len() != m || scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return Err(invalid("evaluator scores must be m values in [0, 1]"));
                }
                Ok((subset, scores))
            })
            .collect();
        // Reduction in model order keeps the result independent of thread count.
        for item in batch {
            let (subset, scores) = item?;
            for (t, s) in total.iter_mut().zip(&scores) {
                *t += s;
            }
            for &i in &subset {
                counts_in[i] += 1;
                for (acc, s) in sum_in[i * m..(i + 1) * m].iter_mut().zip(&scores) {
                    *acc += s;
                }
            }
        }
        start = end;
    }

    let counts_out: Vec<usize> = counts_in.iter().map(|c| cfg.num_models - c).collect();
    let undefined: Vec<bool> = (0..n).map(|i| counts_in[i] == 0 || counts_out[i] == 0).collect();
    let mut entries = Vec::new();
    for i in (0..n).filter(|&i| !undefined[i]) {
        let (cin, cout) = (counts_in[i] as f64, counts_out[i] as f64);
        for j in 0..m {
            let inside = sum_in[i * m + j];
            let v = (inside / cin - (total[j] - inside) / cout).clamp(-1.0, 1.0);
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    let mut out = AttributionMatrix::assemble(n, m, entries).with_metadata(cfg.p, cfg.num_models, cfg.seed);
    out.counts = Some(SampleCounts { counts_in, counts_out });
    out.undefined = undefined;
    Ok(out)
}

/// Row means of `T`: a Banzhaf-style value per training point.
pub fn banzhaf_from_t(t: &AttributionMatrix) -> ValueVector {
    let m = t.n_val().max(1) as f64;
    let values = t.row_sums().into_iter().map(|s| s / m).collect();
    let mut out = ValueVector::new(values, Estimator::MsrBanzhaf);
    out.undefined = t.undefined_rows().to_vec();
    if let Some(c) = t.counts() {
        out.samples = Some(c.counts_in.clone());
    }
    out.seed = Some(t.seed());
    out
}

/// Keeps the `⌈keep_fraction·n·m⌉` entries of largest magnitude (ties by `(i, j)`)
/// and zeroes the rest.
pub fn sparsify(t: &AttributionMatrix, keep_fraction: f64) -> Result<AttributionMatrix> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(invalid(format!("keep fraction {keep_fraction} not in (0, 1]")));
    }
    let cells = (t.n_train() * t.n_val()) as f64;
    let keep = (keep_fraction * cells - 1e-9).ceil().max(0.0) as usize;
    let mut entries = t.triplets();
    entries.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then((a.0, a.1).cmp(&(b.0, b.1))));
    entries.truncate(keep);
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = AttributionMatrix::assemble(t.n_train(), t.n_val(), entries);
    out.p = t.p;
    out.num_models = t.num_models;
    out.seed = t.seed;
    out.counts = t.counts.clone();
    out.undefined = t.undefined.clone();
    Ok(out)
}

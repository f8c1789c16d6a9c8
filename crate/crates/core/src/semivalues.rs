//! Data values: leave-one-out, Shapley, Banzhaf and out-of-bag estimates.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{train_learner, LabeledDataset, LearnerSpec, Split};
use crate::error::{invalid, Error, Result};
use crate::games::{ClusteredGame, Game};
use crate::rng::rng_for;

/// Largest player count accepted by the exact enumerators.
pub const MAX_EXACT_PLAYERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Loo,
    ExactShapley,
    ExactBanzhaf,
    ClusterShapley,
    ClusterBanzhaf,
    McShapley,
    DataOob,
    MsrBanzhaf,
    Loaded,
}

/// One value per training player.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector {
    pub values: Vec<f64>,
    /// Per-player standard error, for sampled estimators.
    pub stderr: Option<Vec<f64>>,
    pub estimator: Estimator,
    /// Number of samples that informed each player's value.
    pub samples: Option<Vec<usize>>,
    /// Players whose value could not be estimated and were set to 0.
    pub undefined: Vec<bool>,
    pub seed: Option<u64>,
}

impl ValueVector {
    pub fn new(values: Vec<f64>, estimator: Estimator) -> Self {
        let n = values.len();
        Self { values, stderr: None, estimator, samples: None, undefined: vec![false; n], seed: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Writes `index,value,stderr` rows; stderr is empty when unknown.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "index,value,stderr")?;
        for (i, v) in self.values.iter().enumerate() {
            match &self.stderr {
                Some(se) => writeln!(out, "{i},{v},{}", se[i])?,
                None => writeln!(out, "{i},{v},")?,
            }
        }
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty value file".into()))??;
        if header.trim() != "index,value,stderr" {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let mut values = Vec::new();
        let mut stderr = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: `{line}`", k + 2));
            let f: Vec<&str> = line.trim_end().split(',').collect();
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(values.len()) {
                return Err(bad());
            }
            values.push(f[1].parse::<f64>().map_err(|_| bad())?);
            stderr.push(if f[2].is_empty() { None } else { Some(f[2].parse::<f64>().map_err(|_| bad())?) });
        }
        let mut out = Self::new(values, Estimator::Loaded);
        if stderr.iter().all(Option::is_some) && !stderr.is_empty() {
            out.stderr = Some(stderr.into_iter().flatten().collect());
        }
        Ok(out)
    }
}

/// `v(D) − v(D ∖ {i})` for every player.
pub fn loo<G: Game + ?Sized>(game: &G) -> ValueVector {
    let n = game.n_players();
    let all: Vec<usize> = (0..n).collect();
    let full = game.value(&all);
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let rest: Vec<usize> = all.iter().copied().filter(|&j| j != i).collect();
            full - game.value(&rest)
        })
        .collect();
    ValueVector::new(values, Estimator::Loo)
}

fn value_table<G: Game + ?Sized>(game: &G) -> Result<Vec<f64>> {
    let n = game.n_players();
    if n > MAX_EXACT_PLAYERS {
        return Err(Error::TooManyPlayers { n, max: MAX_EXACT_PLAYERS });
    }
    Ok((0..1u64 << n).into_par_iter().map(|m| game.value_mask(m)).collect())
}

/// Sums `weight(|S|) · (v(S ∪ {i}) − v(S))` over all `S ⊆ D ∖ {i}`.
fn weighted_marginals(n: usize, table: &[f64], weight: &[f64]) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = 0.0;
            for m in 0..table.len() {
                if m & bit == 0 {
                    acc += weight[m.count_ones() as usize] * (table[m | bit] - table[m]);
                }
            }
            acc
        })
        .collect()
}

/// Shapley value by enumerating all `2^n` coalitions.
pub fn exact_shapley<G: Game + ?Sized>(game: &G) -> Result<ValueVector> {
    let n = game.n_players();
    let table = value_table(game)?;
    // |S|!(n−|S|−1)!/n! = 1 / (n · C(n−1, |S|))
    let mut weight = vec![0.0; n.max(1)];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate().take(n) {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    Ok(ValueVector::new(weighted_marginals(n, &table, &weight), Estimator::ExactShapley))
}

/// Banzhaf value `2^{−(n−1)} Σ_{S ⊆ D∖{i}} [v(S∪{i}) − v(S)]`.
pub fn exact_banzhaf<G: Game + ?Sized>(game: &G) -> Result<ValueVector> {
    let n = game.n_players();
    let table = value_table(game)?;
    let w = if n == 0 { 0.0 } else { 0.5f64.powi(n as i32 - 1) };
    Ok(ValueVector::new(weighted_marginals(n, &table, &vec![w; n.max(1)]), Estimator::ExactBanzhaf))
}

/// `u_k / n_k` for every member of cluster `k`.
pub fn cluster_shapley_closed_form(g: &ClusteredGame) -> ValueVector {
    let values = g.cluster_of().iter().map(|&k| g.utilities()[k] / g.cluster_sizes()[k] as f64).collect();
    ValueVector::new(values, Estimator::ClusterShapley)
}

/// `u_k / 2^{n_k − 1}` for every member of cluster `k`.
pub fn cluster_banzhaf_closed_form(g: &ClusteredGame) -> ValueVector {
    let values =
        g.cluster_of().iter().map(|&k| g.utilities()[k] * 0.5f64.powi(g.cluster_sizes()[k] as i32 - 1)).collect();
    ValueVector::new(values, Estimator::ClusterBanzhaf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    /// Number of sampling units; a unit is one permutation, or a permutation and its
    /// reverse when `antithetic` is set.
    pub permutations: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl MonteCarlo {
    pub fn new(permutations: usize, seed: u64) -> Self {
        Self { permutations, seed, antithetic: false }
    }
}

fn permutation_marginals<G: Game + ?Sized>(game: &G, order: &[usize], out: &mut [f64]) {
    let mut prefix = Vec::with_capacity(order.len());
    let mut prev = game.value(&prefix);
    for &i in order {
        prefix.push(i);
        let cur = game.value(&prefix);
        out[i] += cur - prev;
        prev = cur;
    }
}

/// Permutation-sampling Shapley estimate with per-player standard errors.
pub fn mc_shapley<G: Game + ?Sized>(game: &G, cfg: &MonteCarlo) -> Result<ValueVector> {
    if cfg.permutations == 0 {
        return Err(invalid("at least one permutation is required"));
    }
    let n = game.n_players();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    const CHUNK: usize = 1024;
    let mut start = 0;
    while start < cfg.permutations {
        let end = (start + CHUNK).min(cfg.permutations);
        let units: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|u| {
                let mut rng = rng_for(cfg.seed, "mc-shapley", u as u64);
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let mut marg = vec![0.0; n];
                permutation_marginals(game, &order, &mut marg);
                if cfg.antithetic {
                    order.reverse();
                    permutation_marginals(game, &order, &mut marg);
                    marg.iter_mut().for_each(|x| *x *= 0.5);
                }
                marg
            })
            .collect();
        for marg in &units {
            for i in 0..n {
                sum[i] += marg[i];
                sum_sq[i] += marg[i] * marg[i];
            }
        }
        start = end;
    }
    let k = cfg.permutations as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let stderr = (0..n)
        .map(|i| {
            if cfg.permutations < 2 {
                return f64::NAN;
            }
            let var = ((sum_sq[i] - k * values[i] * values[i]) / (k - 1.0)).max(0.0);
            (var / k).sqrt()
        })
        .collect();
    let mut out = ValueVector::new(values, Estimator::McShapley);
    out.stderr = Some(stderr);
    out.samples = Some(vec![cfg.permutations; n]);
    out.seed = Some(cfg.seed);
    Ok(out)
}

/// Out-of-bag value: mean correctness of each training point over the bootstrap
/// models that did not see it. Bootstraps draw `n` points with replacement; points
/// that are never out of bag get 0 and are flagged in `undefined`.
pub fn dataoob(data: &LabeledDataset, spec: &LearnerSpec, num_bootstraps: usize, seed: u64) -> Result<ValueVector> {
    if num_bootstraps == 0 {
        return Err(invalid("at least one bootstrap is required"));
    }
    let n = data.n_train();
    if n == 0 {
        return Err(invalid("dataset has no training points"));
    }
    // (point, correct) pairs per bootstrap, accumulated in bootstrap order.
    let per_boot: Vec<Result<Vec<(usize, bool)>>> = (0..num_bootstraps)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, "dataoob", b as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut in_bag = vec![false; n];
            for &i in &sample {
                in_bag[i] = true;
            }
            let model = train_learner(data, &sample, spec)?;
            Ok((0..n)
                .filter(|&i| !in_bag[i])
                .map(|i| {
                    let pred = model.predict(data.point(Split::Train, i));
                    (i, pred == data.point_label(Split::Train, i))
                })
                .collect())
        })
        .collect();
    let mut hits = vec![0usize; n];
    let mut counts = vec![0usize; n];
    for boot in per_boot {
        for (i, correct) in boot? {
            counts[i] += 1;
            hits[i] += usize::from(correct);
        }
    }
    let values = (0..n).map(|i| if counts[i] == 0 { 0.0 } else { hits[i] as f64 / counts[i] as f64 }).collect();
    let mut out = ValueVector::new(values, Estimator::DataOob);
    out.undefined = counts.iter().map(|&c| c == 0).collect();
    out.samples = Some(counts);
    out.seed = Some(seed);
    Ok(out)
}

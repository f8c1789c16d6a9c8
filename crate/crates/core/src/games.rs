//! Cooperative games over training points.

use std::collections::HashMap;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::dataset::{subset_accuracy, LabeledDataset, LearnerSpec, Split};
use crate::error::{invalid, Error, Result};

/// A transferable-utility game on players `0..n_players()`.
///
/// `value` receives a duplicate-free list of in-range players; use [`char_value`]
/// for validated access.
pub trait Game: Sync {
    fn n_players(&self) -> usize;

    fn value(&self, subset: &[usize]) -> f64;

    /// Value of the coalition encoded by the low `n_players()` bits of `mask`.
    fn value_mask(&self, mask: u64) -> f64 {
        let members: Vec<usize> = (0..self.n_players()).filter(|&i| mask >> i & 1 == 1).collect();
        self.value(&members)
    }
}

impl<G: Game + ?Sized> Game for &G {
    fn n_players(&self) -> usize {
        (**self).n_players()
    }
    fn value(&self, subset: &[usize]) -> f64 {
        (**self).value(subset)
    }
    fn value_mask(&self, mask: u64) -> f64 {
        (**self).value_mask(mask)
    }
}

fn check_subset(n: usize, subset: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::PlayerOutOfRange { player: i, n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(invalid(format!("player {i} listed twice")));
        }
    }
    Ok(())
}

/// Characteristic value of `subset`.
pub fn char_value<G: Game + ?Sized>(game: &G, subset: &[usize]) -> Result<f64> {
    check_subset(game.n_players(), subset)?;
    Ok(game.value(subset))
}

/// `v(S ∪ {player}) − v(S)`.
pub fn marginal<G: Game + ?Sized>(game: &G, subset: &[usize], player: usize) -> Result<f64> {
    let n = game.n_players();
    check_subset(n, subset)?;
    if player >= n {
        return Err(Error::PlayerOutOfRange { player, n });
    }
    if subset.contains(&player) {
        return Err(Error::PlayerInSubset(player));
    }
    let mut with = subset.to_vec();
    with.push(player);
    Ok(game.value(&with) - game.value(subset))
}

/// Game whose value is `Σ u_k` over the clusters hit by the coalition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusteredGameRepr", into = "ClusteredGameRepr")]
pub struct ClusteredGame {
    cluster_sizes: Vec<usize>,
    utilities: Vec<f64>,
    cluster_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ClusteredGameRepr {
    cluster_sizes: Vec<usize>,
    utilities: Vec<f64>,
}

impl TryFrom<ClusteredGameRepr> for ClusteredGame {
    type Error = Error;
    fn try_from(r: ClusteredGameRepr) -> Result<Self> {
        ClusteredGame::new(r.cluster_sizes, r.utilities)
    }
}

impl From<ClusteredGame> for ClusteredGameRepr {
    fn from(g: ClusteredGame) -> Self {
        Self { cluster_sizes: g.cluster_sizes, utilities: g.utilities }
    }
}

impl ClusteredGame {
    /// Players are assigned to clusters contiguously: the first `sizes[0]` players form
    /// cluster 0, and so on.
    pub fn new(cluster_sizes: Vec<usize>, utilities: Vec<f64>) -> Result<Self> {
        let cluster_of = cluster_sizes.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect();
        Self::with_assignment(cluster_of, utilities)
    }

    /// Arbitrary player → cluster map; every cluster must be non-empty.
    pub fn with_assignment(cluster_of: Vec<usize>, utilities: Vec<f64>) -> Result<Self> {
        let k = utilities.len();
        if k == 0 {
            return Err(invalid("a clustered game needs at least one cluster"));
        }
        if utilities.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(invalid("cluster utilities must be positive and finite"));
        }
        let mut cluster_sizes = vec![0; k];
        for &c in &cluster_of {
            *cluster_sizes.get_mut(c).ok_or_else(|| invalid(format!("cluster id {c} has no utility")))? += 1;
        }
        if cluster_sizes.contains(&0) {
            return Err(invalid("every cluster needs at least one player"));
        }
        Ok(Self { cluster_sizes, utilities, cluster_of })
    }

    /// Accuracy parametrization `u_k = λ₁ m_k`, where `m_k` counts test points of cluster k.
    pub fn from_test_counts(cluster_sizes: Vec<usize>, test_sizes: &[usize], lambda1: f64) -> Result<Self> {
        let utilities = test_sizes.iter().map(|&m| lambda1 * m as f64).collect();
        Self::new(cluster_sizes, utilities)
    }

    /// Equal train–test distribution: `m_k = λ₂ n_k` and `u_k = λ₁ m_k`.
    pub fn equal_distribution(cluster_sizes: Vec<usize>, lambda1: f64, lambda2: f64) -> Result<Self> {
        let utilities = cluster_sizes.iter().map(|&n| lambda1 * lambda2 * n as f64).collect();
        Self::new(cluster_sizes, utilities)
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn num_clusters(&self) -> usize {
        self.utilities.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Game for ClusteredGame {
    fn n_players(&self) -> usize {
        self.cluster_of.len()
    }

    fn value(&self, subset: &[usize]) -> f64 {
        let mut hit = vec![false; self.num_clusters()];
        for &i in subset {
            hit[self.cluster_of[i]] = true;
        }
        hit.iter().zip(&self.utilities).filter(|(h, _)| **h).map(|(_, u)| u).sum()
    }

    fn value_mask(&self, mask: u64) -> f64 {
        let mut hit = vec![false; self.num_clusters()];
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            hit[self.cluster_of[i]] = true;
            m &= m - 1;
        }
        hit.iter().zip(&self.utilities).filter(|(h, _)| **h).map(|(_, u)| u).sum()
    }
}

/// Largest player count for which coalition values are cached by bitmask.
pub const MEMO_MAX_PLAYERS: usize = 24;

/// Validation accuracy of a learner trained on the coalition.
///
/// The empty coalition scores the majority-class validation accuracy. For up to
/// [`MEMO_MAX_PLAYERS`] players results are cached by coalition bitmask.
#[derive(Debug)]
pub struct LearnerGame<'a> {
    data: &'a LabeledDataset,
    spec: LearnerSpec,
    split: Split,
    cache: Option<Mutex<HashMap<u32, f64>>>,
}

impl<'a> LearnerGame<'a> {
    pub fn new(data: &'a LabeledDataset, spec: LearnerSpec) -> Result<Self> {
        spec.validate()?;
        if data.n_val() == 0 {
            return Err(invalid("learner game needs a non-empty validation split"));
        }
        let cache = (data.n_train() <= MEMO_MAX_PLAYERS).then(|| Mutex::new(HashMap::new()));
        Ok(Self { data, spec, split: Split::Val, cache })
    }

    /// Scores coalitions on `split` instead of validation.
    pub fn on_split(mut self, split: Split) -> Self {
        self.split = split;
        if let Some(c) = &self.cache {
            c.lock().clear();
        }
        self
    }

    fn evaluate(&self, subset: &[usize]) -> f64 {
        subset_accuracy(self.data, subset, &self.spec, self.split).expect("subset validated by caller")
    }
}

impl Game for LearnerGame<'_> {
    fn n_players(&self) -> usize {
        self.data.n_train()
    }

    fn value(&self, subset: &[usize]) -> f64 {
        let Some(cache) = &self.cache else {
            return self.evaluate(subset);
        };
        let mask = subset.iter().fold(0u32, |m, &i| m | 1 << i);
        if let Some(&v) = cache.lock().get(&mask) {
            return v;
        }
        // Canonical order so the cached value does not depend on caller ordering.
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        let v = self.evaluate(&sorted);
        cache.lock().insert(mask, v);
        v
    }
}

/// `v(S) = Σ_{i∈S} weights[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveGame {
    pub weights: Vec<f64>,
}

impl Game for AdditiveGame {
    fn n_players(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&i| self.weights[i]).sum()
    }
}

/// Game given by an explicit value per coalition bitmask (`2^n` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    n: usize,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > 30 || values.len() != 1usize << n {
            return Err(invalid("table game needs exactly 2^n values with n <= 30"));
        }
        Ok(Self { n, values })
    }

    /// Tabulates any game with at most 30 players.
    pub fn from_game<G: Game + ?Sized>(game: &G) -> Result<Self> {
        let n = game.n_players();
        if n > 30 {
            return Err(Error::TooManyPlayers { n, max: 30 });
        }
        Ok(Self { n, values: (0..1u64 << n).map(|m| game.value_mask(m)).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Game for TableGame {
    fn n_players(&self) -> usize {
        self.n
    }

    fn value(&self, subset: &[usize]) -> f64 {
        self.values[subset.iter().fold(0usize, |m, &i| m | 1 << i)]
    }

    fn value_mask(&self, mask: u64) -> f64 {
        self.values[mask as usize]
    }
}

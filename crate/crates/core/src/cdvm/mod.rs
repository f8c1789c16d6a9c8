//! The constraint data-value maximization program.
//!
//! Given an attribution matrix `T` (n train x m validation), a retention budget `S`,
//! a trade-off `α` and a slack threshold `κ`:
//!
//! ```text
//! max_{w,t}  α Σ_j v_j − (1 − α) Σ_j t_j
//! s.t.       v = Tᵀ w,  Σ_i w_i = S,  t_j ≥ 0,  t_j ≥ v_j − κ,  w ∈ [0, 1]ⁿ
//! ```
//!
//! The relaxation is solved with an in-repo bounded-variable simplex and rounded by
//! keeping the `S` largest `w_i`, then repaired with objective-improving swaps.
//! Binary enumeration over all `C(n, S)` subsets is
//! available as an exact reference for small `n`.

mod simplex;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::AttributionMatrix;
use crate::error::{invalid, Error, Result};
use simplex::{BoundedSimplex, Outcome};

/// Largest `n` accepted by exact enumeration.
pub const MAX_ENUMERATION_PLAYERS: usize = 20;

/// Tolerance for counting a `w_i` as fractional.
const FRACTIONAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrality {
    Relaxed,
    ExactEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// A fully specified pruning program.
#[derive(Debug, Clone)]
pub struct CdvmProblem<'a> {
    pub t: &'a AttributionMatrix,
    pub budget: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub integrality: Integrality,
}

/// Validates `1 ≤ S ≤ n`, `α ∈ [0, 1]` and `κ ≥ 0` (κ may be `+∞`).
pub fn build_problem(t: &AttributionMatrix, budget: usize, alpha: f64, kappa: f64) -> Result<CdvmProblem<'_>> {
    let n = t.n_train();
    if budget == 0 || budget > n {
        return Err(invalid(format!("budget {budget} outside 1..={n}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if kappa.is_nan() || kappa < 0.0 {
        return Err(invalid(format!("kappa {kappa} must be non-negative")));
    }
    Ok(CdvmProblem { t, budget, alpha, kappa, integrality: Integrality::Relaxed })
}

impl CdvmProblem<'_> {
    pub fn with_integrality(mut self, integrality: Integrality) -> Self {
        self.integrality = integrality;
        self
    }

    /// `v = Tᵀ w`.
    pub fn induced_utility(&self, w: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.t.n_val()];
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                for (j, tij) in self.t.row_entries(i) {
                    v[j] += tij * wi;
                }
            }
        }
        v
    }

    /// Objective at `(w, t)`.
    pub fn objective(&self, v: &[f64], t: &[f64]) -> f64 {
        self.alpha * v.iter().sum::<f64>() - (1.0 - self.alpha) * t.iter().sum::<f64>()
    }

    /// Objective of a binary selection with the slack at its optimum
    /// `t_j = max(v_j − κ, 0)`.
    pub fn binary_objective(&self, selected: &[usize]) -> f64 {
        let mut v = vec![0.0; self.t.n_val()];
        for &i in selected {
            for (j, tij) in self.t.row_entries(i) {
                v[j] += tij;
            }
        }
        let excess: f64 = v.iter().map(|&x| (x - self.kappa).max(0.0)).sum();
        self.alpha * v.iter().sum::<f64>() - (1.0 - self.alpha) * excess
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdvmSolution {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub t: Vec<f64>,
    pub objective: f64,
    /// Retained indices in ascending order.
    pub selected: Vec<usize>,
    pub fractional_count: usize,
    pub status: SolverStatus,
    pub budget: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub iterations: usize,
}

#[derive(Serialize)]
struct SolutionDump<'a> {
    #[serde(rename = "S")]
    budget: usize,
    alpha: f64,
    kappa: f64,
    objective: f64,
    selected: &'a [usize],
    fractional_count: usize,
}

impl CdvmSolution {
    /// `{ "S", "alpha", "kappa", "objective", "selected", "fractional_count" }`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SolutionDump {
            budget: self.budget,
            alpha: self.alpha,
            kappa: self.kappa,
            objective: self.objective,
            selected: &self.selected,
            fractional_count: self.fractional_count,
        })?)
    }

    /// Largest violation of `Σw = S`, `0 ≤ w ≤ 1`, `t ≥ 0`, `t ≥ v − κ`.
    pub fn feasibility_residual(&self, problem: &CdvmProblem<'_>) -> f64 {
        let mut worst = (self.w.iter().sum::<f64>() - problem.budget as f64).abs();
        for &w in &self.w {
            worst = worst.max(-w).max(w - 1.0);
        }
        let v = problem.induced_utility(&self.w);
        for (j, &tj) in self.t.iter().enumerate() {
            worst = worst.max(-tj).max(v[j] - problem.kappa - tj);
            worst = worst.max((v[j] - self.v[j]).abs());
        }
        worst
    }
}

/// Indices of the `S` largest entries of `w` (ties to the lower index), ascending.
pub fn round_top_s(w: &[f64], budget: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order.truncate(budget);
    order.sort_unstable();
    order
}

/// One-for-one swap local search on the binary objective, starting from `selected`.
///
/// A swap is taken only when it raises the objective by more than a relative 1e-10, so
/// a selection that is already a binary optimum (e.g. the support of an integral LP
/// optimum) comes back unchanged. Each pass tries every retained index in ascending
/// order against its best replacement (lowest index on ties).
pub fn swap_repair(problem: &CdvmProblem<'_>, selected: &[usize]) -> Vec<usize> {
    let (n, m) = (problem.t.n_train(), problem.t.n_val());
    let (alpha, kappa) = (problem.alpha, problem.kappa);
    let g = |x: f64| alpha * x - (1.0 - alpha) * (x - kappa).max(0.0);
    let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| problem.t.row_entries(i)).collect();
    let mut inside = vec![false; n];
    let mut v = vec![0.0; m];
    for &i in selected {
        inside[i] = true;
        for &(j, x) in &rows[i] {
            v[j] += x;
        }
    }
    let scale = 1.0 + v.iter().map(|&x| g(x).abs()).sum::<f64>();
    let mut u = v.clone();
    let max_swaps = 10 * n;
    let mut swaps = 0;
    loop {
        let mut improved = false;
        for out in 0..n {
            if !inside[out] {
                continue;
            }
            let mut removal = 0.0;
            for &(j, x) in &rows[out] {
                u[j] = v[j] - x;
                removal += g(u[j]) - g(v[j]);
            }
            let mut best: Option<(usize, f64)> = None;
            for cand in 0..n {
                if inside[cand] {
                    continue;
                }
                let gain: f64 = rows[cand].iter().map(|&(j, x)| g(u[j] + x) - g(u[j])).sum();
                if best.is_none_or(|b| removal + gain > b.1) {
                    best = Some((cand, removal + gain));
                }
            }
            for &(j, _) in &rows[out] {
                u[j] = v[j];
            }
            if let Some((cand, delta)) = best {
                if delta > 1e-10 * scale {
                    inside[out] = false;
                    inside[cand] = true;
                    for &(j, x) in &rows[out] {
                        v[j] -= x;
                    }
                    for &(j, x) in &rows[cand] {
                        v[j] += x;
                    }
                    u.copy_from_slice(&v);
                    improved = true;
                    swaps += 1;
                }
            }
            if swaps >= max_swaps {
                break;
            }
        }
        if !improved || swaps >= max_swaps {
            break;
        }
    }
    (0..n).filter(|&i| inside[i]).collect()
}

pub fn fractional_count(w: &[f64]) -> usize {
    w.iter().filter(|&&x| x > FRACTIONAL_TOL && x < 1.0 - FRACTIONAL_TOL).count()
}

/// `κ = max_ij T_ij + S · mean_ij T_ij`, both over all `n·m` cells.
pub fn default_kappa(t: &AttributionMatrix, budget: usize) -> f64 {
    t.max_entry() + budget as f64 * t.mean_entry()
}

/// A κ setting: a fixed value or the budget-dependent [`default_kappa`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaChoice {
    Default,
    Value(f64),
}

impl KappaChoice {
    pub fn resolve(self, t: &AttributionMatrix, budget: usize) -> f64 {
        match self {
            Self::Default => default_kappa(t, budget),
            Self::Value(k) => k,
        }
    }
}

impl std::str::FromStr for KappaChoice {
    type Err = Error;

    /// `default`, `inf`, or a non-negative number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("default") {
            return Ok(Self::Default);
        }
        match s.parse::<f64>() {
            Ok(k) if k >= 0.0 => Ok(Self::Value(k)),
            _ => Err(invalid(format!("kappa `{s}` is neither `default` nor a non-negative number"))),
        }
    }
}

impl std::fmt::Display for KappaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Default => f.write_str("default"),
            Self::Value(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for KappaChoice {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Default => ser.serialize_str("default"),
            Self::Value(k) => ser.serialize_f64(*k),
        }
    }
}

impl<'de> Deserialize<'de> for KappaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(k) if k >= 0.0 => Ok(Self::Value(k)),
            Raw::Number(k) => Err(serde::de::Error::custom(format!("kappa {k} is negative"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Solves according to `problem.integrality`.
pub fn solve(problem: &CdvmProblem<'_>) -> Result<CdvmSolution> {
    match problem.integrality {
        Integrality::Relaxed => solve_lp(problem),
        Integrality::ExactEnumeration => solve_exact(problem),
    }
}

/// Solves the relaxation `w ∈ [0, 1]ⁿ`, rounds it with [`round_top_s`] and repairs
/// the rounded set with [`swap_repair`].
pub fn solve_lp(problem: &CdvmProblem<'_>) -> Result<CdvmSolution> {
    let mut solver = CdvmSolver::new(problem.t, problem.budget)?;
    solver.solve(problem.alpha, problem.kappa)
}

/// Best binary selection by enumerating all `C(n, S)` subsets; the first optimum in
/// lexicographic order wins ties.
pub fn solve_exact(problem: &CdvmProblem<'_>) -> Result<CdvmSolution> {
    let (best, optima) = binary_optima(problem, 0.0)?;
    let selected = optima.into_iter().next().expect("at least one subset");
    let mut w = vec![0.0; problem.t.n_train()];
    for &i in &selected {
        w[i] = 1.0;
    }
    let v = problem.induced_utility(&w);
    let t = v.iter().map(|&x| (x - problem.kappa).max(0.0)).collect();
    Ok(CdvmSolution {
        w,
        v,
        t,
        objective: best,
        selected,
        fractional_count: 0,
        status: SolverStatus::Optimal,
        budget: problem.budget,
        alpha: problem.alpha,
        kappa: problem.kappa,
        iterations: 0,
    })
}

/// Best binary objective and every subset within `tol` of it, in lexicographic order.
pub fn binary_optima(problem: &CdvmProblem<'_>, tol: f64) -> Result<(f64, Vec<Vec<usize>>)> {
    let n = problem.t.n_train();
    if n > MAX_ENUMERATION_PLAYERS {
        return Err(Error::TooManyPlayers { n, max: MAX_ENUMERATION_PLAYERS });
    }
    let scored: Vec<(Vec<usize>, f64)> = (0..n)
        .combinations(problem.budget)
        .map(|s| {
            let obj = problem.binary_objective(&s);
            (s, obj)
        })
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let optima = scored.into_iter().filter(|s| s.1 >= best - tol).map(|s| s.0).collect();
    Ok((best, optima))
}

/// The relaxed program for a fixed `(T, S)`, re-solvable for many `(α, κ)`.
///
/// Column layout: `w (n) | t (m) | s (m) | a`, rows `Σw + a = S` and
/// `Σ_i T_ij w_i − t_j + s_j = κ`. The artificial `a` starts basic at `S` and carries
/// a penalty larger than any per-unit objective change of `w`, so it is driven to 0.
/// Successive solves warm-start from the previous basis whenever it stays feasible.
#[derive(Debug, Clone)]
pub struct CdvmSolver<'a> {
    t: &'a AttributionMatrix,
    budget: usize,
    row_sums: Vec<f64>,
    penalty: f64,
    /// κ values at or above this never bind.
    kappa_cap: f64,
    lp: Option<BoundedSimplex>,
}

impl<'a> CdvmSolver<'a> {
    pub fn new(t: &'a AttributionMatrix, budget: usize) -> Result<Self> {
        build_problem(t, budget, 0.5, 0.0)?;
        let row_sums = t.row_sums();
        let abs_max =
            (0..t.n_train()).map(|i| t.row_entries(i).iter().map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut col_pos = vec![0.0; t.n_val()];
        for (_, j, v) in t.triplets() {
            col_pos[j] += v.max(0.0);
        }
        let kappa_cap = col_pos.iter().copied().fold(0.0, f64::max) + 1.0;
        Ok(Self { t, budget, row_sums, penalty: 2.0 * abs_max.max(1.0), kappa_cap, lp: None })
    }

    fn costs(&self, alpha: f64) -> Vec<f64> {
        let (n, m) = (self.t.n_train(), self.t.n_val());
        let mut c = Vec::with_capacity(n + 2 * m + 1);
        c.extend(self.row_sums.iter().map(|r| alpha * r));
        c.extend(std::iter::repeat_n(-(1.0 - alpha), m));
        c.extend(std::iter::repeat_n(0.0, m));
        c.push(-self.penalty);
        c
    }

    fn rhs(&self, kappa: f64) -> Vec<f64> {
        let mut b = vec![kappa.min(self.kappa_cap); self.t.n_val() + 1];
        b[0] = self.budget as f64;
        b
    }

    fn cold_start(&self, alpha: f64, kappa: f64) -> BoundedSimplex {
        let (n, m) = (self.t.n_train(), self.t.n_val());
        let cols = n + 2 * m + 1;
        let rows = m + 1;
        let mut a = vec![0.0; rows * cols];
        a[..n].fill(1.0);
        a[cols - 1] = 1.0;
        for (i, j, v) in self.t.triplets() {
            a[(j + 1) * cols + i] = v;
        }
        for j in 0..m {
            a[(j + 1) * cols + n + j] = -1.0;
            a[(j + 1) * cols + n + m + j] = 1.0;
        }
        let mut lower = vec![0.0; cols];
        let mut upper = vec![f64::INFINITY; cols];
        upper[..n].iter_mut().for_each(|u| *u = 1.0);
        lower[cols - 1] = 0.0;
        let basis = std::iter::once(cols - 1).chain((0..m).map(|j| n + m + j)).collect();
        BoundedSimplex::new(rows, cols, a, self.rhs(kappa), lower, upper, self.costs(alpha), basis)
    }

    /// Solves for `(α, κ)`, warm-starting from the previous solve when possible.
    pub fn solve(&mut self, alpha: f64, kappa: f64) -> Result<CdvmSolution> {
        let problem = build_problem(self.t, self.budget, alpha, kappa)?;
        let (rhs, costs) = (self.rhs(kappa), self.costs(alpha));
        let warm = match self.lp.as_mut() {
            Some(lp) => {
                let ok = lp.set_rhs(rhs);
                if ok {
                    lp.set_cost(costs);
                }
                ok
            }
            None => false,
        };
        if !warm {
            self.lp = Some(self.cold_start(alpha, kappa));
        }
        let lp = self.lp.as_mut().expect("initialized above");
        let (n, m) = (self.t.n_train(), self.t.n_val());
        let limit = 50 * (n + 3 * m + 1) + 10_000;
        match lp.solve(limit) {
            Outcome::Optimal => {}
            Outcome::IterationLimit => {
                self.lp = None;
                return Err(Error::Solver(format!("iteration limit {limit} exceeded")));
            }
            Outcome::Unbounded => {
                self.lp = None;
                return Err(Error::Solver("relaxation reported unbounded".into()));
            }
        }
        lp.refine();
        let (primal, dual) = (lp.primal_residual(), lp.dual_residual());
        if primal > 1e-7 || dual > 1e-7 {
            self.lp = None;
            return Err(Error::Solver(format!("residuals after refinement: primal {primal:e}, dual {dual:e}")));
        }
        let x = lp.values();
        let artificial = x[n + 2 * m];
        // w = S/n is always feasible, so a positive artificial means numerical trouble.
        if artificial > 1e-7 {
            self.lp = None;
            return Err(Error::Solver(format!("artificial variable stuck at {artificial}")));
        }
        let w: Vec<f64> = x[..n].iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let t: Vec<f64> = x[n..n + m].iter().map(|v| v.max(0.0)).collect();
        let v = problem.induced_utility(&w);
        let objective = problem.objective(&v, &t);
        let iterations = lp.iterations;
        let selected = swap_repair(&problem, &round_top_s(&w, self.budget));
        Ok(CdvmSolution {
            selected,
            fractional_count: fractional_count(&w),
            w,
            v,
            t,
            objective,
            status: SolverStatus::Optimal,
            budget: self.budget,
            alpha,
            kappa,
            iterations,
        })
    }
}

/// Outcome of [`grid_search`].
#[derive(Debug, Clone)]
pub struct GridResult {
    pub alpha: f64,
    pub kappa: f64,
    pub score: f64,
    pub solution: CdvmSolution,
    /// `(alpha, kappa, score)` for every grid point in grid order (κ outer, α inner).
    pub scores: Vec<(f64, f64, f64)>,
}

/// Solves every `(α, κ)` pair, scores the rounded selection with `evaluator`
/// (validation accuracy) and returns the best pair; ties prefer the smaller κ, then
/// the larger α.
pub fn grid_search<F>(
    t: &AttributionMatrix,
    budget: usize,
    alphas: &[f64],
    kappas: &[f64],
    evaluator: F,
) -> Result<GridResult>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if alphas.is_empty() || kappas.is_empty() {
        return Err(invalid("grid search needs at least one alpha and one kappa"));
    }
    CdvmSolver::new(t, budget)?;
    // One warm-started chain per κ; chains are independent.
    let chains: Vec<Result<Vec<(CdvmSolution, f64)>>> = kappas
        .par_iter()
        .map(|&kappa| {
            let mut solver = CdvmSolver::new(t, budget)?;
            alphas
                .iter()
                .map(|&alpha| {
                    let sol = solver.solve(alpha, kappa)?;
                    let score = evaluator(&sol.selected)?;
                    Ok((sol, score))
                })
                .collect()
        })
        .collect();
    let mut scores = Vec::new();
    let mut best: Option<(CdvmSolution, f64)> = None;
    for chain in chains {
        for (sol, score) in chain? {
            scores.push((sol.alpha, sol.kappa, score));
            let replace = match &best {
                None => true,
                Some((b, s)) => {
                    score > *s
                        || (score == *s && (sol.kappa < b.kappa || (sol.kappa == b.kappa && sol.alpha > b.alpha)))
                }
            };
            if replace {
                best = Some((sol, score));
            }
        }
    }
    let (solution, score) = best.expect("non-empty grid");
    Ok(GridResult { alpha: solution.alpha, kappa: solution.kappa, score, solution, scores })
}

/// Block-structured attribution model: training cluster `k` (size `n_k`) gives
/// `τ_k` to each of the `m_k` validation points of its own cluster and nothing
/// elsewhere. Rows and columns are grouped by cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBlocks {
    pub cluster_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
    pub tau: Vec<f64>,
}

impl ClusterBlocks {
    pub fn new(cluster_sizes: Vec<usize>, test_sizes: Vec<usize>, tau: Vec<f64>) -> Result<Self> {
        let k = cluster_sizes.len();
        if k == 0 || test_sizes.len() != k || tau.len() != k {
            return Err(invalid("cluster sizes, test sizes and tau must share a positive length"));
        }
        if cluster_sizes.contains(&0) {
            return Err(invalid("every cluster needs a training point"));
        }
        if tau.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(invalid("tau must lie in (0, 1]"));
        }
        Ok(Self { cluster_sizes, test_sizes, tau })
    }

    pub fn num_clusters(&self) -> usize {
        self.tau.len()
    }

    /// Cluster id per training row.
    pub fn train_cluster(&self) -> Vec<usize> {
        self.cluster_sizes.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect()
    }

    /// Cluster id per validation column.
    pub fn test_cluster(&self) -> Vec<usize> {
        self.test_sizes.iter().enumerate().flat_map(|(k, &m)| std::iter::repeat_n(k, m)).collect()
    }

    /// `κ_τ = min_k τ_k`.
    pub fn kappa_tau(&self) -> f64 {
        self.tau.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_matrix(&self) -> AttributionMatrix {
        let (rows, cols) = (self.train_cluster(), self.test_cluster());
        let mut entries = Vec::new();
        for (i, &a) in rows.iter().enumerate() {
            for (j, &b) in cols.iter().enumerate() {
                if a == b {
                    entries.push((i, j, self.tau[a]));
                }
            }
        }
        AttributionMatrix::from_triplets(rows.len(), cols.len(), entries).expect("tau lies in (0, 1]")
    }

    /// `Σ_k m_k min{τ_k s_k, κ}` for per-cluster selection counts `s`.
    pub fn surrogate_objective(&self, s: &[usize], kappa: f64) -> Result<f64> {
        if s.len() != self.num_clusters() {
            return Err(invalid("one selection count per cluster expected"));
        }
        if let Some(k) = (0..s.len()).find(|&k| s[k] > self.cluster_sizes[k]) {
            return Err(invalid(format!("cluster {k} has only {} points", self.cluster_sizes[k])));
        }
        Ok((0..s.len()).map(|k| self.test_sizes[k] as f64 * (self.tau[k] * s[k] as f64).min(kappa)).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    /// Selected points per cluster.
    pub counts: Vec<usize>,
    pub all_covered: bool,
}

/// Per-cluster selection counts `s_k` and whether every cluster keeps a point.
pub fn verify_cluster_coverage(selected: &[usize], cluster_of: &[usize]) -> Coverage {
    let k = cluster_of.iter().max().map_or(0, |c| c + 1);
    let mut counts = vec![0; k];
    for &i in selected {
        counts[cluster_of[i]] += 1;
    }
    let all_covered = counts.iter().all(|&c| c >= 1);
    Coverage { counts, all_covered }
}

#[cfg(test)]
mod tests;

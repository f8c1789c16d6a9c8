//! Dense bounded-variable primal simplex.
//!
//! Solves `max cᵀx  s.t.  A x = b,  l ≤ x ≤ u` from a starting basis made of signed
//! unit columns. Nonbasic variables sit at one of their bounds; entering variables
//! may flip between bounds without a pivot. Pricing is largest reduced cost until a
//! run of degenerate steps trips a counter, then Bland's rule until progress resumes.

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct BoundedSimplex {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    /// `B⁻¹A`, row-major.
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    reduced: Vec<f64>,
    /// Starting basis column and its sign per row; the tableau columns of these
    /// variables hold `B⁻¹` up to sign.
    unit_cols: Vec<(usize, f64)>,
    pub(crate) iterations: usize,
}

impl BoundedSimplex {
    /// `a` is row-major `rows x cols`. Column `basis[r]` must equal `±e_r`, every
    /// other variable starts at its lower bound, and the implied basic values must
    /// respect their bounds.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        rows: usize,
        cols: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        cost: Vec<f64>,
        basis: Vec<usize>,
    ) -> Self {
        assert_eq!(a.len(), rows * cols);
        assert_eq!(basis.len(), rows);
        let mut state = vec![VarState::AtLower; cols];
        let mut unit_cols = Vec::with_capacity(rows);
        let mut tab = a.clone();
        for (r, &c) in basis.iter().enumerate() {
            let sign = a[r * cols + c];
            debug_assert!(sign.abs() == 1.0);
            debug_assert!((0..rows).all(|q| q == r || a[q * cols + c] == 0.0));
            for x in &mut tab[r * cols..(r + 1) * cols] {
                *x *= sign;
            }
            state[c] = VarState::Basic(r);
            unit_cols.push((c, sign));
        }
        let mut s = Self {
            rows,
            cols,
            a,
            b,
            lower,
            upper,
            cost,
            tab,
            beta: vec![0.0; rows],
            basis,
            state,
            reduced: vec![0.0; cols],
            unit_cols,
            iterations: 0,
        };
        s.recompute_beta();
        s.recompute_reduced();
        s
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Basic(_) => unreachable!(),
        }
    }

    /// `B⁻¹e_r` read from the tableau column of the starting unit basis.
    fn binv_column(&self, r: usize) -> Vec<f64> {
        let (c, sign) = self.unit_cols[r];
        (0..self.rows).map(|q| self.tab[q * self.cols + c] * sign).collect()
    }

    /// `x_B = B⁻¹b − Σ_N (B⁻¹A_j) x_j`.
    fn recompute_beta(&mut self) {
        let mut beta = vec![0.0; self.rows];
        for r in 0..self.rows {
            if self.b[r] != 0.0 {
                for (q, v) in self.binv_column(r).into_iter().enumerate() {
                    beta[q] += v * self.b[r];
                }
            }
        }
        for j in 0..self.cols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let x = self.nonbasic_value(j);
            if x != 0.0 {
                for (q, bq) in beta.iter_mut().enumerate() {
                    *bq -= self.tab[q * self.cols + j] * x;
                }
            }
        }
        self.beta = beta;
    }

    fn recompute_reduced(&mut self) {
        let mut d = self.cost.clone();
        for r in 0..self.rows {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for (dj, t) in d.iter_mut().zip(&self.tab[r * self.cols..(r + 1) * self.cols]) {
                    *dj -= cb * t;
                }
            }
        }
        for &c in &self.basis {
            d[c] = 0.0;
        }
        self.reduced = d;
    }

    pub(crate) fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.recompute_reduced();
    }

    /// Replaces the right-hand side keeping the current basis. Returns `false` (and
    /// leaves the basic values inconsistent) when the basis is no longer feasible.
    pub(crate) fn set_rhs(&mut self, b: Vec<f64>) -> bool {
        self.b = b;
        self.recompute_beta();
        self.basis.iter().zip(&self.beta).all(|(&c, &x)| x >= self.lower[c] - FEAS_TOL && x <= self.upper[c] + FEAS_TOL)
    }

    /// Current primal point.
    pub(crate) fn values(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| match self.state[j] {
                VarState::Basic(r) => self.beta[r],
                _ => self.nonbasic_value(j),
            })
            .collect()
    }

    /// Largest violation of `A x = b` and of the bounds at the current point.
    pub(crate) fn primal_residual(&self) -> f64 {
        let x = self.values();
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            let ax: f64 = self.a[r * self.cols..(r + 1) * self.cols].iter().zip(&x).map(|(a, x)| a * x).sum();
            worst = worst.max((ax - self.b[r]).abs());
        }
        for j in 0..self.cols {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// Largest reduced cost that still points to an improving direction.
    pub(crate) fn dual_residual(&self) -> f64 {
        (0..self.cols)
            .map(|j| match self.state[j] {
                VarState::Basic(_) => 0.0,
                _ if self.lower[j] == self.upper[j] => 0.0,
                VarState::AtLower => self.reduced[j].max(0.0),
                VarState::AtUpper => (-self.reduced[j]).max(0.0),
            })
            .fold(0.0, f64::max)
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.lower[j] == self.upper[j] {
                continue;
            }
            let dir = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower if self.reduced[j] > OPT_TOL => 1.0,
                VarState::AtUpper if self.reduced[j] < -OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(k, _)| self.reduced[j].abs() > self.reduced[k].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    pub(crate) fn solve(&mut self, max_iterations: usize) -> Outcome {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((j, dir)) = self.price(bland) else {
                return Outcome::Optimal;
            };
            if self.iterations >= max_iterations {
                return Outcome::IterationLimit;
            }
            self.iterations += 1;

            // Ratio test: basic r moves by −dir·tab[r][j] per unit step.
            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..self.rows {
                let alpha = self.tab[r * self.cols + j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let delta = -dir * alpha;
                let c = self.basis[r];
                let (limit, to_upper) = if delta < 0.0 {
                    (((self.beta[r] - self.lower[c]) / -delta).max(0.0), false)
                } else if self.upper[c].is_finite() {
                    (((self.upper[c] - self.beta[r]) / delta).max(0.0), true)
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < step - 1e-12 => true,
                    Some((q, _)) if limit <= step + 1e-12 => {
                        if bland {
                            c < self.basis[q]
                        } else {
                            alpha.abs() > self.tab[q * self.cols + j].abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    step = limit;
                    leave = Some((r, to_upper));
                }
            }
            if step.is_infinite() {
                return Outcome::Unbounded;
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            for r in 0..self.rows {
                self.beta[r] -= dir * step * self.tab[r * self.cols + j];
            }
            match leave {
                None => {
                    self.state[j] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                }
                Some((r, to_upper)) => {
                    let entering_value = if dir > 0.0 { self.lower[j] + step } else { self.upper[j] - step };
                    let old = self.basis[r];
                    self.state[old] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.tab[r * cols + j];
        for x in &mut self.tab[r * cols..(r + 1) * cols] {
            *x /= p;
        }
        let pivot_row: Vec<f64> = self.tab[r * cols..(r + 1) * cols].to_vec();
        for q in 0..self.rows {
            if q == r {
                continue;
            }
            let f = self.tab[q * cols + j];
            if f != 0.0 {
                for (x, pr) in self.tab[q * cols..(q + 1) * cols].iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                self.tab[q * cols + j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (d, pr) in self.reduced.iter_mut().zip(&pivot_row) {
                *d -= f * pr;
            }
        }
        self.reduced[j] = 0.0;
        self.basis[r] = j;
        self.state[j] = VarState::Basic(r);
    }

    /// Recomputes the basic values by solving `B x_B = b − A_N x_N` from the
    /// original data, removing drift accumulated by tableau updates.
    pub(crate) fn refine(&mut self) {
        let n = self.rows;
        let mut rhs = self.b.clone();
        for j in 0..self.cols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let x = self.nonbasic_value(j);
            if x != 0.0 {
                for (r, v) in rhs.iter_mut().enumerate() {
                    *v -= self.a[r * self.cols + j] * x;
                }
            }
        }
        let mut m: Vec<f64> = (0..n)
            .flat_map(|r| self.basis.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.a[r * self.cols + c])
            .collect();
        if let Some(x) = lu_solve(n, &mut m, rhs) {
            self.beta = x;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` for a singular matrix.
fn lu_solve(n: usize, m: &mut [f64], mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    for k in 0..n {
        let piv = (k..n).max_by(|&a, &b| m[a * n + k].abs().total_cmp(&m[b * n + k].abs()))?;
        if m[piv * n + k].abs() < 1e-14 {
            return None;
        }
        if piv != k {
            for c in 0..n {
                m.swap(k * n + c, piv * n + c);
            }
            rhs.swap(k, piv);
        }
        for r in k + 1..n {
            let f = m[r * n + k] / m[k * n + k];
            if f != 0.0 {
                for c in k..n {
                    m[r * n + c] -= f * m[k * n + c];
                }
                rhs[r] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| m[k * n + c] * x[c]).sum();
        x[k] = (rhs[k] - s) / m[k * n + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_box_lp() {
        // max x + 2y  s.t. x + y + s = 1.5, 0 ≤ x, y ≤ 1, s ≥ 0
        let a = vec![1.0, 1.0, 1.0];
        let mut lp = BoundedSimplex::new(
            1,
            3,
            a,
            vec![1.5],
            vec![0.0; 3],
            vec![1.0, 1.0, f64::INFINITY],
            vec![1.0, 2.0, 0.0],
            vec![2],
        );
        assert_eq!(lp.solve(100), Outcome::Optimal);
        let x = lp.values();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(lp.primal_residual() < 1e-12);
        assert_eq!(lp.dual_residual(), 0.0);
    }

    #[test]
    fn unbounded_direction() {
        // max x  s.t. x − s = 0 with s free above
        let mut lp = BoundedSimplex::new(
            1,
            2,
            vec![1.0, -1.0],
            vec![0.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY; 2],
            vec![1.0, 0.0],
            vec![1],
        );
        assert_eq!(lp.solve(100), Outcome::Unbounded);
    }

    #[test]
    fn lu_solves_permuted_system() {
        let mut m = vec![0.0, 2.0, 1.0, 1.0];
        let x = lu_solve(2, &mut m, vec![4.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        let mut singular = vec![1.0, 2.0, 2.0, 4.0];
        assert!(lu_solve(2, &mut singular, vec![1.0, 1.0]).is_none());
    }
}

//! Dense revised simplex with a two-phase start.
//!
//! Pricing is Dantzig's most-negative reduced cost until a run of degenerate
//! pivots is observed, after which Bland's smallest-index rule is used for the
//! rest of the solve. The returned dual vector is the basic dual solution of
//! the final basis.

use nalgebra::{DMatrix, DVector};

use super::SolverOptions;
use crate::{Error, Result};

/// `min c^T x` subject to `a x <= b` rows, `a x = b` rows and variable bounds.
///
/// Variables are free unless bounds are set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    c: Vec<f64>,
    ineq: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            ineq: Vec::new(),
            eq: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// Adds the row `row^T x <= rhs`.
    pub fn with_le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.push_le(row, rhs);
        self
    }

    /// Adds `row^T x >= rhs`, stored as `-row^T x <= -rhs`.
    pub fn with_ge(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.push_le(row.into_iter().map(|v| -v).collect(), -rhs);
        self
    }

    pub fn with_eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.push_eq(row, rhs);
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn nonnegative(mut self) -> Self {
        self.lower = vec![0.0; self.c.len()];
        self
    }

    pub fn push_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq.push((row, rhs));
    }

    pub fn push_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq.push((row, rhs));
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.c
    }

    pub fn inequalities(&self) -> &[(Vec<f64>, f64)] {
        &self.ineq
    }

    pub fn equalities(&self) -> &[(Vec<f64>, f64)] {
        &self.eq
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension(format!(
                "{} variables but {} lower and {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (kind, rows) in [("inequality", &self.ineq), ("equality", &self.eq)] {
            for (i, (row, rhs)) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Dimension(format!(
                        "{kind} row {i} has width {} instead of {n}",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "{kind} row {i} has non-finite data"
                    )));
                }
            }
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite objective".into()));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY || lo.is_nan() || hi.is_nan()
            {
                return Err(Error::InvalidBounds {
                    index: j,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// One multiplier per inequality row, each `<= 0`.
    pub dual_ineq: Vec<f64>,
    /// One multiplier per equality row, free in sign.
    pub dual_eq: Vec<f64>,
    /// `c - A^T y`: the multipliers of the active variable bounds.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn empty(status: LpStatus, n: usize, lp: &LinearProgram, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            dual_ineq: vec![0.0; lp.ineq.len()],
            dual_eq: vec![0.0; lp.eq.len()],
            reduced_costs: vec![0.0; n],
            objective: match status {
                LpStatus::Infeasible => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            iterations,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SolverOptions::default())
}

#[derive(Debug, Clone, Copy)]
enum Column {
    /// `x = offset + y`
    Shift { col: usize, offset: f64 },
    /// `x = offset - y`
    Mirror { col: usize, offset: f64 },
    /// `x = y_pos - y_neg`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    cost: DVector<f64>,
    columns: Vec<Column>,
    /// +1 or -1 per row: whether the row was negated to make `b >= 0`.
    sign: Vec<f64>,
    basis: Vec<usize>,
    artificial_start: usize,
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.c.len();
    let mut columns = Vec::with_capacity(n);
    let mut next = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let col = if lo.is_finite() {
            let c = Column::Shift { col: next, offset: lo };
            if hi.is_finite() {
                bound_rows.push((next, hi - lo));
            }
            next += 1;
            c
        } else if hi.is_finite() {
            let c = Column::Mirror { col: next, offset: hi };
            next += 1;
            c
        } else {
            let c = Column::Split { pos: next, neg: next + 1 };
            next += 2;
            c
        };
        columns.push(col);
    }
    let n_struct = next;
    let m_le = lp.ineq.len() + bound_rows.len();
    let m = m_le + lp.eq.len();

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m);
    let substitute = |row: &[f64], rhs: f64| {
        let mut out = vec![0.0; n_struct];
        let mut r = rhs;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match columns[j] {
                Column::Shift { col, offset } => {
                    out[col] += a;
                    r -= a * offset;
                }
                Column::Mirror { col, offset } => {
                    out[col] -= a;
                    r -= a * offset;
                }
                Column::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, r)
    };
    for (row, rhs) in &lp.ineq {
        rows.push(substitute(row, *rhs));
    }
    for &(col, width) in &bound_rows {
        let mut out = vec![0.0; n_struct];
        out[col] = 1.0;
        rows.push((out, width));
    }
    for (row, rhs) in &lp.eq {
        rows.push(substitute(row, *rhs));
    }

    let needs_artificial: Vec<bool> = rows
        .iter()
        .enumerate()
        .map(|(i, (_, rhs))| i >= m_le || *rhs < 0.0)
        .collect();
    let n_art = needs_artificial.iter().filter(|&&f| f).count();
    let artificial_start = n_struct + m_le;
    let ncol = artificial_start + n_art;

    let mut a = DMatrix::zeros(m, ncol);
    let mut b = DVector::zeros(m);
    let mut sign = vec![1.0; m];
    let mut basis = vec![0usize; m];
    let mut art = artificial_start;
    for (i, (row, rhs)) in rows.iter().enumerate() {
        let s = if *rhs < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        for (j, &v) in row.iter().enumerate() {
            a[(i, j)] = s * v;
        }
        b[i] = s * rhs;
        if i < m_le {
            a[(i, n_struct + i)] = s;
        }
        if needs_artificial[i] {
            a[(i, art)] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n_struct + i;
        }
    }

    let mut cost = DVector::zeros(ncol);
    for (j, col) in columns.iter().enumerate() {
        match *col {
            Column::Shift { col, .. } => cost[col] = lp.c[j],
            Column::Mirror { col, .. } => cost[col] = -lp.c[j],
            Column::Split { pos, neg } => {
                cost[pos] = lp.c[j];
                cost[neg] = -lp.c[j];
            }
        }
    }

    StandardForm {
        a,
        b,
        cost,
        columns,
        sign,
        basis,
        artificial_start,
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    opts: &'a SolverOptions,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm, opts: &'a SolverOptions) -> Result<Self> {
        let mut is_basic = vec![false; sf.a.ncols()];
        for &j in &sf.basis {
            is_basic[j] = true;
        }
        let m = sf.b.len();
        let mut s = Self {
            a: &sf.a,
            b: &sf.b,
            basis: sf.basis.clone(),
            is_basic,
            binv: DMatrix::identity(m, m),
            xb: DVector::zeros(m),
            opts,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        };
        s.refactor()?;
        Ok(s)
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.basis.len();
        let mut bmat = DMatrix::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            bmat.set_column(i, &self.a.column(j));
        }
        self.binv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Solver("singular basis matrix".into()))?;
        self.xb = &self.binv * self.b;
        let tol = self.opts.feasibility_tol;
        self.xb.iter_mut().for_each(|v| {
            if *v < 0.0 && *v > -tol {
                *v = 0.0;
            }
        });
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &DVector<f64>) -> DVector<f64> {
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
        self.binv.tr_mul(&cb)
    }

    fn pivot(&mut self, r: usize, j: usize, u: &DVector<f64>, step: f64) -> Result<()> {
        self.xb.axpy(-step, u, 1.0);
        self.xb[r] = step;
        let tol = self.opts.feasibility_tol;
        self.xb.iter_mut().for_each(|v| {
            if *v < 0.0 && *v > -tol {
                *v = 0.0;
            }
        });
        let pivot_row: DVector<f64> = self.binv.row(r).transpose() / u[r];
        let mut e = u.clone();
        e[r] -= 1.0;
        self.binv.ger(-1.0, &e, &pivot_row, 1.0);
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = j;
        self.is_basic[j] = true;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_every {
            self.refactor()?;
        }
        Ok(())
    }

    fn run(&mut self, cost: &DVector<f64>, allowed: impl Fn(usize) -> bool) -> Result<PhaseOutcome> {
        let opts = self.opts;
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(Error::Solver(format!(
                    "simplex iteration limit {} reached",
                    opts.max_iterations
                )));
            }
            let pi = self.duals(cost);
            let reduced = cost - self.a.tr_mul(&pi);
            let mut entering: Option<usize> = None;
            for j in 0..reduced.len() {
                if self.is_basic[j] || !allowed(j) || reduced[j] >= -opts.optimality_tol {
                    continue;
                }
                match entering {
                    None => entering = Some(j),
                    Some(_) if self.bland => {}
                    Some(e) if reduced[j] < reduced[e] => entering = Some(j),
                    Some(_) => {}
                }
                if self.bland {
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };
            let u = &self.binv * self.a.column(j);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..u.len() {
                if u[i] <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / u[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let slack = 1e-12 * (1.0 + br.abs());
                        if ratio < br - slack {
                            Some((i, ratio))
                        } else if ratio <= br + slack {
                            let better = if self.bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                u[i] > u[bi]
                            };
                            if better {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };
            if step <= opts.feasibility_tol {
                self.degenerate_run += 1;
                if self.degenerate_run > opts.bland_after {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.iterations += 1;
            self.pivot(r, j, &u, step)?;
        }
    }

    /// Pivots basic artificial columns out where a structural or slack
    /// column can replace them. Artificials left behind sit on redundant rows.
    fn expel_artificials(&mut self, artificial_start: usize) -> Result<()> {
        for r in 0..self.basis.len() {
            if self.basis[r] < artificial_start {
                continue;
            }
            let row = self.a.tr_mul(&self.binv.row(r).transpose());
            let mut best: Option<(usize, f64)> = None;
            for j in 0..artificial_start {
                if self.is_basic[j] {
                    continue;
                }
                let v = row[j].abs();
                if v > 1e-7 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let u = &self.binv * self.a.column(j);
                let step = self.xb[r] / u[r];
                self.pivot(r, j, &u, step)?;
            }
        }
        self.refactor()
    }
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.c.len();
    let sf = standard_form(lp);
    let m = sf.b.len();
    let ncol = sf.a.ncols();

    if m == 0 {
        if sf.cost.iter().any(|&c| c < -opts.optimality_tol) {
            return Ok(LpSolution::empty(LpStatus::Unbounded, n, lp, 0));
        }
        let y = vec![0.0; ncol];
        return Ok(finish(lp, &sf, &y, &DVector::zeros(0), 0));
    }

    let mut simplex = Simplex::new(&sf, opts)?;
    let art = sf.artificial_start;
    if art < ncol {
        let mut phase1 = DVector::zeros(ncol);
        for j in art..ncol {
            phase1[j] = 1.0;
        }
        simplex.run(&phase1, |_| true)?;
        simplex.refactor()?;
        let infeas: f64 = simplex
            .basis
            .iter()
            .zip(simplex.xb.iter())
            .filter(|(&j, _)| j >= art)
            .map(|(_, &v)| v.abs())
            .sum();
        let bnorm = sf.b.amax();
        if infeas > 10.0 * opts.feasibility_tol * (1.0 + bnorm) {
            return Ok(LpSolution::empty(LpStatus::Infeasible, n, lp, simplex.iterations));
        }
        simplex.expel_artificials(art)?;
        simplex.degenerate_run = 0;
    }

    let outcome = simplex.run(&sf.cost, |j| j < art)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(LpSolution::empty(LpStatus::Unbounded, n, lp, simplex.iterations));
    }
    simplex.refactor()?;
    let mut y = vec![0.0; ncol];
    for (i, &j) in simplex.basis.iter().enumerate() {
        if j < art {
            y[j] = simplex.xb[i].max(0.0);
        }
    }
    let pi = simplex.duals(&sf.cost);
    Ok(finish(lp, &sf, &y, &pi, simplex.iterations))
}

fn finish(
    lp: &LinearProgram,
    sf: &StandardForm,
    y: &[f64],
    pi: &DVector<f64>,
    iterations: usize,
) -> LpSolution {
    let n = lp.c.len();
    let x: Vec<f64> = sf
        .columns
        .iter()
        .map(|col| match *col {
            Column::Shift { col, offset } => offset + y[col],
            Column::Mirror { col, offset } => offset - y[col],
            Column::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let n_ineq = lp.ineq.len();
    let m_le = sf.b.len() - lp.eq.len();
    let dual_ineq: Vec<f64> = (0..n_ineq).map(|i| sf.sign[i] * pi[i]).collect();
    let dual_eq: Vec<f64> = (0..lp.eq.len())
        .map(|i| sf.sign[m_le + i] * pi[m_le + i])
        .collect();
    let mut reduced_costs = lp.c.clone();
    for ((row, _), &g) in lp.ineq.iter().zip(&dual_ineq) {
        for (z, &a) in reduced_costs.iter_mut().zip(row) {
            *z -= a * g;
        }
    }
    for ((row, _), &g) in lp.eq.iter().zip(&dual_eq) {
        for (z, &a) in reduced_costs.iter_mut().zip(row) {
            *z -= a * g;
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    debug_assert_eq!(x.len(), n);
    LpSolution {
        status: LpStatus::Optimal,
        x,
        dual_ineq,
        dual_eq,
        reduced_costs,
        objective,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_active_row() {
        let lp = LinearProgram::new(vec![1.0]).with_ge(vec![1.0], 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        // stored as -x <= -1, so the sensitivity to that rhs is -1
        assert_abs_diff_eq!(s.dual_ineq[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_objective_has_zero_duals() {
        let lp = LinearProgram::new(vec![0.0])
            .with_le(vec![1.0], 1.0)
            .with_le(vec![-1.0], 0.0);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert!(s.x[0].abs() < 1e-12 || (s.x[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.objective, 0.0);
        assert!(s.dual_ineq.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn detects_infeasible() {
        let lp = LinearProgram::new(vec![1.0, 1.0])
            .with_le(vec![1.0, 1.0], 1.0)
            .with_ge(vec![1.0, 1.0], 2.0)
            .nonnegative();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram::new(vec![-1.0, 0.0])
            .with_le(vec![0.0, 1.0], 1.0)
            .nonnegative();
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_bounds() {
        // min -x - 2y, x + y = 3, 0 <= x <= 2, 0 <= y <= 2
        let lp = LinearProgram::new(vec![-1.0, -2.0])
            .with_eq(vec![1.0, 1.0], 3.0)
            .with_bounds(vec![0.0, 0.0], vec![2.0, 2.0]);
        let s = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.objective, -5.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.dual_eq[0], -1.0, epsilon = 1e-10);
        // y sits on its upper bound with multiplier -1
        assert_abs_diff_eq!(s.reduced_costs[1], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.reduced_costs[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn mirrored_and_fixed_variables() {
        // max x with x <= 4 via upper bound only, and a fixed variable
        let lp = LinearProgram::new(vec![-1.0, 1.0])
            .with_bounds(vec![f64::NEG_INFINITY, 3.0], vec![4.0, 3.0])
            .with_le(vec![1.0, 1.0], 10.0);
        let s = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(s.x[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::new(vec![1.0, 1.0])
            .with_eq(vec![1.0, 1.0], 2.0)
            .with_eq(vec![2.0, 2.0], 4.0)
            .nonnegative();
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.objective, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let lp = LinearProgram::new(vec![1.0, 1.0]).with_le(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Dimension(_))));
    }

    #[test]
    fn crossed_bounds_are_an_error() {
        let lp = LinearProgram::new(vec![1.0]).with_bounds(vec![2.0], vec![1.0]);
        assert!(matches!(solve_lp(&lp), Err(Error::InvalidBounds { .. })));
    }

    #[test]
    fn no_rows() {
        let lp = LinearProgram::new(vec![1.0, 0.0]).nonnegative();
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert_eq!(s.x, vec![0.0, 0.0]);
        let lp = LinearProgram::new(vec![1.0]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn deterministic() {
        let lp = LinearProgram::new(vec![1.0, 2.0, -1.0])
            .with_le(vec![1.0, 1.0, 1.0], 4.0)
            .with_le(vec![-1.0, 0.0, 1.0], 1.0)
            .with_ge(vec![1.0, 2.0, 0.0], 1.0)
            .nonnegative();
        assert_eq!(solve_lp(&lp).unwrap(), solve_lp(&lp).unwrap());
    }
}

//! Primal active-set method for strictly convex quadratic programs.
//!
//! A feasible vertex from an LP phase 1 seeds the working set. Each step solves
//! the equality-constrained subproblem through its KKT system.

use nalgebra::{DMatrix, DVector};

use super::{lp, LinearProgram, SolverOptions};
use crate::{Error, Result};

/// `min 1/2 x^T Q x + c^T x` subject to rows and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    q: DMatrix<f64>,
    c: Vec<f64>,
    ineq: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl QuadraticProgram {
    pub fn new(q: DMatrix<f64>, c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            q,
            c,
            ineq: Vec::new(),
            eq: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.ineq.push((row, rhs));
        self
    }

    pub fn with_ge(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.ineq.push((row.into_iter().map(|v| -v).collect(), -rhs));
        self
    }

    pub fn with_eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.eq.push((row, rhs));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear(&self) -> &[f64] {
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

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(&self.q * &xv)) + self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
    }

    fn feasibility_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(vec![0.0; self.c.len()])
            .with_bounds(self.lower.clone(), self.upper.clone());
        for (row, rhs) in &self.ineq {
            lp.push_le(row.clone(), *rhs);
        }
        for (row, rhs) in &self.eq {
            lp.push_eq(row.clone(), *rhs);
        }
        lp
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(Error::Dimension(format!(
                "quadratic matrix is {}x{} for {n} variables",
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        let scale = 1.0 + self.q.amax();
        for i in 0..n {
            for j in 0..i {
                if (self.q[(i, j)] - self.q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        if self.q.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        self.feasibility_lp().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    /// Multipliers of the equality rows.
    pub dual_eq: Vec<f64>,
    /// Multipliers of the inequality rows, each `<= 0`.
    pub dual_ineq: Vec<f64>,
    /// `Q x + c - A^T y`: multipliers of the active variable bounds.
    pub bound_multipliers: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution> {
    solve_qp_with(qp, &SolverOptions::default())
}

/// Inequality used inside the active-set loop: user rows first, then bounds.
struct Constraint {
    row: DVector<f64>,
    rhs: f64,
}

pub fn solve_qp_with(qp: &QuadraticProgram, opts: &SolverOptions) -> Result<QpSolution> {
    qp.validate()?;
    let n = qp.c.len();
    let start = lp::solve_lp_with(&qp.feasibility_lp(), opts)?;
    if !start.is_optimal() {
        return Ok(QpSolution {
            status: QpStatus::Infeasible,
            x: vec![0.0; n],
            dual_eq: vec![0.0; qp.eq.len()],
            dual_ineq: vec![0.0; qp.ineq.len()],
            bound_multipliers: vec![0.0; n],
            objective: f64::INFINITY,
            iterations: start.iterations,
        });
    }

    let mut cons: Vec<Constraint> = qp
        .ineq
        .iter()
        .map(|(row, rhs)| Constraint {
            row: DVector::from_column_slice(row),
            rhs: *rhs,
        })
        .collect();
    for j in 0..n {
        if qp.lower[j].is_finite() {
            let mut row = DVector::zeros(n);
            row[j] = -1.0;
            cons.push(Constraint {
                row,
                rhs: -qp.lower[j],
            });
        }
        if qp.upper[j].is_finite() {
            let mut row = DVector::zeros(n);
            row[j] = 1.0;
            cons.push(Constraint {
                row,
                rhs: qp.upper[j],
            });
        }
    }
    let eqs: Vec<DVector<f64>> = qp
        .eq
        .iter()
        .map(|(row, _)| DVector::from_column_slice(row))
        .collect();
    let eq_basis = independent_subset(&eqs, &[]);

    let tol = opts.feasibility_tol;
    let mut x = DVector::from_vec(start.x.clone());
    let mut working: Vec<usize> = Vec::new();
    for (i, con) in cons.iter().enumerate() {
        let slack = con.rhs - con.row.dot(&x);
        if slack.abs() <= tol * (1.0 + con.rhs.abs()) {
            let mut rows: Vec<&DVector<f64>> = eq_basis.iter().map(|&k| &eqs[k]).collect();
            rows.extend(working.iter().map(|&w| &cons[w].row));
            if is_independent(&rows, &con.row) {
                working.push(i);
            }
        }
    }

    let q = &qp.q;
    let c = DVector::from_column_slice(&qp.c);
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::Solver("active-set iteration limit reached".into()));
        }
        let g = q * &x + &c;
        let rows: Vec<&DVector<f64>> = eq_basis
            .iter()
            .map(|&k| &eqs[k])
            .chain(working.iter().map(|&w| &cons[w].row))
            .collect();
        let (p, lambda) = kkt_step(q, &g, &rows)?;
        let pnorm = p.amax();
        if pnorm <= 1e-11 * (1.0 + x.amax()) {
            let n_eq = eq_basis.len();
            let worst = working
                .iter()
                .enumerate()
                .map(|(k, &w)| (k, w, lambda[n_eq + k]))
                .filter(|&(_, _, l)| l > 1e-10 * (1.0 + g.amax()))
                .max_by(|a, b| a.2.total_cmp(&b.2).then(b.1.cmp(&a.1)));
            match worst {
                Some((k, _, _)) => {
                    working.remove(k);
                    continue;
                }
                None => {
                    return Ok(finish(qp, &cons, &eqs, &eq_basis, &working, &lambda, x, iterations));
                }
            }
        }
        let mut step = 1.0;
        let mut blocking: Option<usize> = None;
        for (i, con) in cons.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = con.row.dot(&p);
            if ap > 1e-12 * (1.0 + con.row.amax() * pnorm) {
                let alpha = ((con.rhs - con.row.dot(&x)) / ap).max(0.0);
                if alpha < step {
                    step = alpha;
                    blocking = Some(i);
                }
            }
        }
        x.axpy(step, &p, 1.0);
        if let Some(i) = blocking {
            working.push(i);
        }
    }
}

/// Solves `[Q -A^T; A 0] [p; lambda] = [-g; 0]`, so that `Q p + g = A^T lambda`.
fn kkt_step(
    q: &DMatrix<f64>,
    g: &DVector<f64>,
    rows: &[&DVector<f64>],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = g.len();
    let m = rows.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(q);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..n {
            k[(n + i, j)] = row[j];
            k[(j, n + i)] = -row[j];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-g));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular KKT system".into()))?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

fn is_independent(rows: &[&DVector<f64>], candidate: &DVector<f64>) -> bool {
    // residual of the candidate after projecting on the span of `rows`
    let n = candidate.len();
    if rows.is_empty() {
        return candidate.amax() > 1e-12;
    }
    if rows.len() >= n {
        return false;
    }
    let mut a = DMatrix::zeros(n, rows.len());
    for (j, r) in rows.iter().enumerate() {
        a.set_column(j, r);
    }
    let svd = a.clone().svd(true, true);
    let Ok(coef) = svd.solve(candidate, 1e-12) else {
        return false;
    };
    let resid = candidate - &a * coef;
    resid.norm() > 1e-9 * (1.0 + candidate.norm())
}

fn independent_subset(rows: &[DVector<f64>], seed: &[&DVector<f64>]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut current: Vec<&DVector<f64>> = seed.to_vec();
        current.extend(chosen.iter().map(|&k| &rows[k]));
        if is_independent(&current, r) {
            chosen.push(i);
        }
    }
    chosen
}

#[allow(clippy::too_many_arguments)]
fn finish(
    qp: &QuadraticProgram,
    cons: &[Constraint],
    eqs: &[DVector<f64>],
    eq_basis: &[usize],
    working: &[usize],
    lambda: &DVector<f64>,
    x: DVector<f64>,
    iterations: usize,
) -> QpSolution {
    let n = x.len();
    let mut dual_eq = vec![0.0; eqs.len()];
    for (k, &e) in eq_basis.iter().enumerate() {
        dual_eq[e] = lambda[k];
    }
    let mut dual_ineq = vec![0.0; qp.ineq.len()];
    for (k, &w) in working.iter().enumerate() {
        if w < qp.ineq.len() {
            dual_ineq[w] = lambda[eq_basis.len() + k];
        }
    }
    let mut z = &qp.q * &x + DVector::from_column_slice(&qp.c);
    for (row, &y) in eqs.iter().zip(&dual_eq) {
        z.axpy(-y, row, 1.0);
    }
    for (con, &y) in cons.iter().zip(&dual_ineq) {
        z.axpy(-y, &con.row, 1.0);
    }
    let xs: Vec<f64> = x.iter().copied().collect();
    debug_assert_eq!(xs.len(), n);
    QpSolution {
        status: QpStatus::Optimal,
        objective: qp.objective_at(&xs),
        x: xs,
        dual_eq,
        dual_ineq,
        bound_multipliers: z.iter().copied().collect(),
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn univariate_projection_with_bound() {
        let qp = QuadraticProgram::new(DMatrix::from_element(1, 1, 2.0), vec![0.0])
            .with_bounds(vec![2.0], vec![f64::INFINITY]);
        let s = solve_qp(&qp).unwrap();
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.bound_multipliers[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn univariate_projection_with_row() {
        let qp = QuadraticProgram::new(DMatrix::from_element(1, 1, 2.0), vec![0.0])
            .with_ge(vec![1.0], 2.0);
        let s = solve_qp(&qp).unwrap();
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-12);
        // row stored as -x <= -2; value 4 = b^2 so dv/db = 2b = -4
        assert_abs_diff_eq!(s.dual_ineq[0], -4.0, epsilon = 1e-12);
    }

    #[test]
    fn equality_constrained_projection() {
        // min (x-10)^2 + (y+6)^2 s.t. x + y = 0
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2) * 2.0, vec![-20.0, 12.0])
            .with_eq(vec![1.0, 1.0], 0.0);
        let s = solve_qp(&qp).unwrap();
        assert_abs_diff_eq!(s.x[0], 8.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], -8.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.dual_eq[0], -4.0, epsilon = 1e-10);
    }

    #[test]
    fn leaves_inactive_rows() {
        // starts at a vertex where both rows are active, ends interior
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2) * 2.0, vec![-1.0, -1.0])
            .with_le(vec![1.0, 0.0], 5.0)
            .with_le(vec![0.0, 1.0], 5.0)
            .with_bounds(vec![-5.0, -5.0], vec![5.0, 5.0]);
        let s = solve_qp(&qp).unwrap();
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 0.5, epsilon = 1e-10);
        assert!(s.dual_ineq.iter().all(|&y| y == 0.0));
        assert!(s.bound_multipliers.iter().all(|&z| z.abs() < 1e-10));
    }

    #[test]
    fn infeasible_status() {
        let qp = QuadraticProgram::new(DMatrix::identity(1, 1), vec![0.0])
            .with_le(vec![1.0], -1.0)
            .with_bounds(vec![0.0], vec![1.0]);
        assert_eq!(solve_qp(&qp).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let qp = QuadraticProgram::new(q, vec![0.0, 0.0]);
        assert_eq!(solve_qp(&qp), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let qp = QuadraticProgram::new(q, vec![0.0, 0.0]);
        assert_eq!(solve_qp(&qp), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn duplicated_active_rows() {
        // two identical rows active at the optimum; only one enters the working set
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2) * 2.0, vec![-4.0, -4.0])
            .with_le(vec![1.0, 1.0], 1.0)
            .with_le(vec![1.0, 1.0], 1.0);
        let s = solve_qp(&qp).unwrap();
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], 0.5, epsilon = 1e-10);
        let total: f64 = s.dual_ineq.iter().sum();
        assert_abs_diff_eq!(total, -3.0, epsilon = 1e-10);
    }
}

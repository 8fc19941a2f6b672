//! Convex-combination linearisation of the central problem and its
//! multi-parametric LP form
//!
//! ```text
//! v(theta) = min c^T x  s.t.  A x <= t + B theta
//! ```
//!
//! The variables `x` are the interpolation weights of every user. Equalities
//! are split into pairs of inequalities and weight nonnegativity is written as
//! rows, so every optimal dual `gamma` lies in `{gamma <= 0 | A^T gamma = c}`.

use std::io::{self, Write};

use crate::market::{CentralSolution, MarketInstance, User};
use crate::polytope::{dot, Polyhedron};
use crate::solver::{solve_lp, LinearProgram, LpStatus};
use crate::{Error, Result};

/// Breakpoints and values of a piecewise-linear interpolant of one user's
/// disutility over its adjustment range.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedDisutility {
    /// kW, strictly increasing.
    pub breakpoints: Vec<f64>,
    /// $, the disutility at each breakpoint.
    pub values: Vec<f64>,
    /// Column of the first weight in the assembled LP.
    pub first_var: usize,
}

impl LinearizedDisutility {
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn vars(&self) -> std::ops::Range<usize> {
        self.first_var..self.first_var + self.len()
    }

    /// Interpolated adjustment `sum_j sigma_j xi_j`.
    pub fn delta_d(&self, x: &[f64]) -> f64 {
        dot(&x[self.vars()], &self.breakpoints)
    }

    /// Interpolated cost `sum_j sigma_j z_j`.
    pub fn cost(&self, x: &[f64]) -> f64 {
        dot(&x[self.vars()], &self.values)
    }

    /// Linear interpolation between neighbouring breakpoints.
    pub fn interpolate(&self, dd: f64) -> f64 {
        let xi = &self.breakpoints;
        if xi.len() == 1 {
            return self.values[0];
        }
        let seg = xi
            .windows(2)
            .position(|w| dd <= w[1])
            .unwrap_or(xi.len() - 2);
        let s = (dd - xi[seg]) / (xi[seg + 1] - xi[seg]);
        self.values[seg] * (1.0 - s) + self.values[seg + 1] * s
    }

    /// Worst overestimate of a quadratic with curvature `alpha`: `alpha h^2 / 4`.
    pub fn interpolation_bound(&self, alpha: f64) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let h = self.breakpoints[1] - self.breakpoints[0];
        alpha * h * h / 4.0
    }
}

/// Uniform breakpoints over the user's adjustment range. A user with an empty
/// range gets a single breakpoint at zero.
pub fn linearize_disutility(user: &User, k: usize) -> Result<LinearizedDisutility> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two breakpoints are needed, got {k}"
        )));
    }
    let (lo, hi) = user.adjustment_range();
    let breakpoints: Vec<f64> = if user.is_pinned() {
        vec![0.0]
    } else {
        let h = (hi - lo) / (k - 1) as f64;
        (0..k)
            .map(|j| if j + 1 == k { hi } else { lo + h * j as f64 })
            .collect()
    };
    let values = breakpoints.iter().map(|&x| user.disutility(x)).collect();
    Ok(LinearizedDisutility {
        breakpoints,
        values,
        first_var: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    WeightSumUpper { user: usize },
    WeightSumLower { user: usize },
    WeightNonnegative { user: usize, weight: usize },
    BalanceUpper,
    BalanceLower,
    FlowUpper { line: usize },
    FlowLower { line: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpLp {
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    t: Vec<f64>,
    b: Vec<Vec<f64>>,
    /// Derivative of each right-hand side with respect to each user's
    /// unadjusted schedule.
    sens: Vec<Vec<f64>>,
    kinds: Vec<RowKind>,
    users: Vec<LinearizedDisutility>,
    domain: Polyhedron,
    theta_lower: Vec<f64>,
    theta_upper: Vec<f64>,
    /// Rows that hold strictly for every weight vector and every parameter in
    /// the box; left out of the per-parameter solves with zero multiplier.
    slack: Vec<bool>,
}

/// One LP solve at a fixed parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LpPoint {
    pub theta: Vec<f64>,
    pub value: f64,
    pub x: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Builds the parametric LP with `k` breakpoints per adjustable user.
pub fn assemble_mplp(inst: &MarketInstance, k: usize) -> Result<MpLp> {
    let mut users = Vec::with_capacity(inst.users().len());
    let mut next = 0;
    for u in inst.users() {
        let mut lin = linearize_disutility(u, k)?;
        lin.first_var = next;
        next += lin.len();
        users.push(lin);
    }
    let nx = next;
    let n_users = users.len();
    let p = inst.num_params();

    let mut c = vec![0.0; nx];
    for lin in &users {
        c[lin.vars()].copy_from_slice(&lin.values);
    }

    let mut a = Vec::new();
    let mut rhs0 = Vec::new();
    let mut sens = Vec::new();
    let mut kinds = Vec::new();
    let mut push = |row: Vec<f64>, r: f64, s: Vec<f64>, kind: RowKind| {
        a.push(row);
        rhs0.push(r);
        sens.push(s);
        kinds.push(kind);
    };
    for (ui, lin) in users.iter().enumerate() {
        let mut ones = vec![0.0; nx];
        ones[lin.vars()].iter_mut().for_each(|v| *v = 1.0);
        push(ones.clone(), 1.0, vec![0.0; n_users], RowKind::WeightSumUpper { user: ui });
        push(
            ones.iter().map(|v| -v).collect(),
            -1.0,
            vec![0.0; n_users],
            RowKind::WeightSumLower { user: ui },
        );
        for (w, col) in lin.vars().enumerate() {
            let mut row = vec![0.0; nx];
            row[col] = -1.0;
            push(
                row,
                0.0,
                vec![0.0; n_users],
                RowKind::WeightNonnegative { user: ui, weight: w },
            );
        }
    }
    let in_weights = |coeffs: &[f64]| {
        let mut row = vec![0.0; nx];
        for (lin, &ck) in users.iter().zip(coeffs) {
            for (col, &xi) in lin.vars().zip(&lin.breakpoints) {
                row[col] = ck * xi;
            }
        }
        row
    };
    let bal = inst.balance_row();
    push(in_weights(&bal.coeffs), bal.rhs0, bal.sens.clone(), RowKind::BalanceUpper);
    push(
        in_weights(&bal.coeffs.iter().map(|v| -v).collect::<Vec<_>>()),
        -bal.rhs0,
        bal.sens.iter().map(|v| -v).collect(),
        RowKind::BalanceLower,
    );
    for (i, row) in inst.flow_rows().into_iter().enumerate() {
        let kind = if i % 2 == 0 {
            RowKind::FlowUpper { line: i / 2 }
        } else {
            RowKind::FlowLower { line: i / 2 }
        };
        push(in_weights(&row.coeffs), row.rhs0, row.sens, kind);
    }

    let base0 = inst.base_schedules(&vec![0.0; p]);
    let t: Vec<f64> = rhs0
        .iter()
        .zip(&sens)
        .map(|(r, s)| r + dot(s, &base0))
        .collect();
    // d base_k / d theta_j = -1 for the owner of parameter j
    let b: Vec<Vec<f64>> = sens
        .iter()
        .map(|s| {
            let mut row = vec![0.0; p];
            for (k, u) in inst.users().iter().enumerate() {
                if let Some(j) = u.parameter {
                    row[j] -= s[k];
                }
            }
            row
        })
        .collect();

    let mut out = MpLp {
        c,
        a,
        t,
        b,
        sens,
        kinds,
        users,
        domain: inst.theta_domain()?,
        theta_lower: inst.theta_lower().to_vec(),
        theta_upper: inst.theta_upper().to_vec(),
        slack: Vec::new(),
    };
    out.slack = out.screen_rows();
    Ok(out)
}

impl MpLp {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    pub fn num_params(&self) -> usize {
        self.theta_lower.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn b(&self) -> &[Vec<f64>] {
        &self.b
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    pub fn users(&self) -> &[LinearizedDisutility] {
        &self.users
    }

    pub fn domain(&self) -> &Polyhedron {
        &self.domain
    }

    pub fn theta_lower(&self) -> &[f64] {
        &self.theta_lower
    }

    pub fn theta_upper(&self) -> &[f64] {
        &self.theta_upper
    }

    /// A copy analysed over a different parameter box.
    pub fn with_domain(&self, lower: &[f64], upper: &[f64]) -> Result<MpLp> {
        let mut out = self.clone();
        out.domain = Polyhedron::from_box(lower, upper)?;
        out.theta_lower = lower.to_vec();
        out.theta_upper = upper.to_vec();
        out.slack = out.screen_rows();
        Ok(out)
    }

    /// Interval bound of each row over weights in [0, 1] and the box.
    fn screen_rows(&self) -> Vec<bool> {
        self.a
            .iter()
            .zip(&self.b)
            .zip(&self.t)
            .zip(&self.kinds)
            .map(|(((a, b), t), kind)| {
                if matches!(kind, RowKind::WeightNonnegative { .. }) {
                    return false;
                }
                let lhs: f64 = a.iter().map(|v| v.max(0.0)).sum::<f64>()
                    + b.iter()
                        .zip(self.theta_lower.iter().zip(&self.theta_upper))
                        .map(|(bj, (lo, hi))| (-bj * lo).max(-bj * hi))
                        .sum::<f64>();
                lhs < t - 1e-6 * (1.0 + t.abs())
            })
            .collect()
    }

    /// `t + B theta`.
    pub fn rhs_at(&self, theta: &[f64]) -> Vec<f64> {
        self.t
            .iter()
            .zip(&self.b)
            .map(|(t, b)| t + dot(b, theta))
            .collect()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                self.num_params()
            )));
        }
        Ok(())
    }

    /// Solves the LP at `theta`, returning the primal vertex and basic dual.
    pub fn evaluate_lp_at(&self, theta: &[f64]) -> Result<LpPoint> {
        self.check_theta(theta)?;
        // weight signs go in as bounds; their multipliers come back as
        // reduced costs
        let mut lp = LinearProgram::new(self.c.clone()).nonnegative();
        let rhs = self.rhs_at(theta);
        let kept: Vec<usize> = (0..self.num_rows())
            .filter(|&i| {
                !self.slack[i] && !matches!(self.kinds[i], RowKind::WeightNonnegative { .. })
            })
            .collect();
        for &i in &kept {
            lp.push_le(self.a[i].clone(), rhs[i]);
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {
                let mut gamma = vec![0.0; self.num_rows()];
                for (&i, g) in kept.iter().zip(&sol.dual_ineq) {
                    gamma[i] = *g;
                }
                for (i, kind) in self.kinds.iter().enumerate() {
                    if let RowKind::WeightNonnegative { user, weight } = *kind {
                        let col = self.users[user].first_var + weight;
                        gamma[i] = (-sol.reduced_costs[col]).min(0.0);
                    }
                }
                Ok(LpPoint {
                    theta: theta.to_vec(),
                    value: sol.objective,
                    x: sol.x,
                    gamma,
                })
            }
            LpStatus::Infeasible => Err(Error::Infeasible {
                theta: theta.to_vec(),
            }),
            LpStatus::Unbounded => Err(Error::Internal(format!(
                "weights are bounded, yet the LP is unbounded at {theta:?}"
            ))),
        }
    }

    /// Intercept `gamma^T t` and slope `B^T gamma` of the dual piece.
    pub fn piece_of(&self, gamma: &[f64]) -> (f64, Vec<f64>) {
        let m = dot(gamma, &self.t);
        let n = (0..self.num_params())
            .map(|j| gamma.iter().zip(&self.b).map(|(g, row)| g * row[j]).sum())
            .collect();
        (m, n)
    }

    /// `max |A^T gamma - c|` together with `max gamma`.
    pub fn dual_residual(&self, gamma: &[f64]) -> (f64, f64) {
        let mut r = self.c.iter().map(|v| -v).collect::<Vec<_>>();
        for (g, row) in gamma.iter().zip(&self.a) {
            for (ri, a) in r.iter_mut().zip(row) {
                *ri += g * a;
            }
        }
        let res = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let gmax = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (res, gmax)
    }

    /// Demand adjustment of every user encoded by the weights `x`.
    pub fn delta_d(&self, x: &[f64]) -> Vec<f64> {
        self.users.iter().map(|u| u.delta_d(x)).collect()
    }

    /// Per-user schedule multipliers `S^T gamma`.
    pub fn eta(&self, gamma: &[f64]) -> Vec<f64> {
        let n = self.users.len();
        (0..n)
            .map(|k| gamma.iter().zip(&self.sens).map(|(g, s)| g * s[k]).sum())
            .collect()
    }

    /// Plain-text dump of `c`, `A`, `t` and `B`.
    pub fn write_matrices<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let line = |v: &[f64]| v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(" ");
        writeln!(w, "# c ({})", self.c.len())?;
        writeln!(w, "{}", line(&self.c))?;
        writeln!(w, "# A ({} x {})", self.a.len(), self.c.len())?;
        for row in &self.a {
            writeln!(w, "{}", line(row))?;
        }
        writeln!(w, "# t ({})", self.t.len())?;
        writeln!(w, "{}", line(&self.t))?;
        writeln!(w, "# B ({} x {})", self.b.len(), self.num_params())?;
        for row in &self.b {
            writeln!(w, "{}", line(row))?;
        }
        Ok(())
    }
}

/// The central solution read off the linearised problem: adjustments from the
/// weights and schedule multipliers from the LP dual.
pub fn central_from_lp(mplp: &MpLp, inst: &MarketInstance, theta: &[f64]) -> Result<CentralSolution> {
    inst.check_theta(theta)?;
    let pt = mplp.evaluate_lp_at(theta)?;
    let delta_d = mplp.delta_d(&pt.x);
    let schedules = inst
        .base_schedules(theta)
        .iter()
        .zip(&delta_d)
        .map(|(b, d)| b + d)
        .collect();
    Ok(CentralSolution {
        theta: theta.to_vec(),
        eta: mplp.eta(&pt.gamma),
        cost: pt.value,
        delta_d,
        schedules,
    })
}

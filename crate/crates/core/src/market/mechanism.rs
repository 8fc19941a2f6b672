//! The bidding mechanism: operator clearing, user best responses and the
//! iterated exchange between them.

use nalgebra::DMatrix;

use super::{Equilibrium, MarketInstance, User};
use crate::solver::{solve_qp, QuadraticProgram};
use crate::{Error, Result};

/// Operator schedules and the gaps `schedule - bid`, kW per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Clearing {
    pub schedules: Vec<f64>,
    pub gaps: Vec<f64>,
}

/// Projects the bids onto the balanced, line-feasible schedules in the
/// least-squares sense.
pub fn operator_clear(bids: &[f64], inst: &MarketInstance) -> Result<Clearing> {
    let n = inst.users().len();
    if bids.len() != n {
        return Err(Error::Dimension(format!("{} bids for {n} users", bids.len())));
    }
    if bids.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument("non-finite bid".into()));
    }
    let zero = vec![0.0; n];
    let balance = inst.balance_row();
    let mut qp = QuadraticProgram::new(
        DMatrix::identity(n, n) * 2.0,
        bids.iter().map(|b| -2.0 * b).collect(),
    )
    .with_eq(balance.coeffs.clone(), balance.rhs(&zero));
    for row in inst.flow_rows() {
        qp = qp.with_le(row.coeffs.clone(), row.rhs(&zero));
    }
    let sol = solve_qp(&qp)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible { theta: Vec::new() });
    }
    let gaps = sol.x.iter().zip(bids).map(|(q, b)| q - b).collect();
    Ok(Clearing {
        schedules: sol.x,
        gaps,
    })
}

/// A user's reply to its schedule and gap: minimises
/// `f(dd) + tau/2 (schedule - bid)^2` with the bid fixed by the user's balance
/// `bid = d + dd - w - dw - gap`. Returns `(dd, bid)`.
pub fn user_best_response(user: &User, schedule: f64, gap: f64, deviation: f64, tau: f64) -> (f64, f64) {
    let target = schedule + gap - user.demand + user.forecast + deviation;
    let (lo, hi) = user.adjustment_range();
    let dd = ((tau * target - user.beta) / (2.0 * user.alpha + tau)).clamp(lo, hi);
    let bid = user.demand + dd - user.forecast - deviation - gap;
    (dd, bid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseOptions {
    /// Stop when schedules and gaps both move less than this, kW.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseRound {
    pub iteration: usize,
    pub delta_d: Vec<f64>,
    pub gaps: Vec<f64>,
    pub schedules: Vec<f64>,
    /// Largest schedule change from the previous round, kW.
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    /// The last iterate, an equilibrium when `converged`.
    pub equilibrium: Equilibrium,
    pub rounds: Vec<BestResponseRound>,
    pub converged: bool,
}

/// All users respond simultaneously, then the operator clears; repeated until
/// the schedules settle and agree with the users' own balances.
pub fn simulate_best_response(
    inst: &MarketInstance,
    theta: &[f64],
    opts: &BestResponseOptions,
) -> Result<SimulationOutcome> {
    inst.check_theta(theta)?;
    let users = inst.users();
    let tau = inst.tau();
    let base = inst.base_schedules(theta);
    let initial: Vec<f64> = users
        .iter()
        .zip(&base)
        .map(|(u, &b)| match u.kind {
            super::UserKind::Consumer => 0.0,
            super::UserKind::Prosumer => b,
        })
        .collect();
    let with_theta = |e: Error| match e {
        Error::Infeasible { .. } => Error::Infeasible {
            theta: theta.to_vec(),
        },
        other => other,
    };
    let mut prev = operator_clear(&initial, inst).map_err(with_theta)?;
    let mut rounds = Vec::new();
    let mut delta_d = vec![0.0; users.len()];
    let mut bids = initial;
    let mut converged = false;
    for iteration in 1..=opts.max_iter {
        (delta_d, bids) = users
            .iter()
            .enumerate()
            .map(|(k, u)| {
                user_best_response(u, prev.schedules[k], prev.gaps[k], u.deviation(theta), tau)
            })
            .unzip();
        let clear = operator_clear(&bids, inst).map_err(with_theta)?;
        let change = max_abs_diff(&clear.schedules, &prev.schedules);
        let mismatch = clear
            .schedules
            .iter()
            .zip(base.iter().zip(&delta_d))
            .map(|(q, (b, d))| (q - b - d).abs())
            .fold(0.0, f64::max);
        rounds.push(BestResponseRound {
            iteration,
            delta_d: delta_d.clone(),
            gaps: clear.gaps.clone(),
            schedules: clear.schedules.clone(),
            change,
        });
        prev = clear;
        if change < opts.tol && mismatch < opts.tol {
            converged = true;
            break;
        }
    }
    let equilibrium = Equilibrium {
        cost: inst.total_disutility(&delta_d),
        eta: prev.gaps.iter().map(|g| -tau * g).collect(),
        delta_d,
        bids,
        schedules: prev.schedules,
        gaps: prev.gaps,
    };
    Ok(SimulationOutcome {
        equilibrium,
        rounds,
        converged,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

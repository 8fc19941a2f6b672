//! The central quadratic program over demand adjustments and the recovery of
//! the market equilibrium from its solution.

use nalgebra::DMatrix;

use super::{Equilibrium, MarketInstance};
use crate::solver::{solve_qp, QuadraticProgram};
use crate::{Error, Result};

/// Optimal demand adjustments with the multipliers of the schedule rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSolution {
    pub theta: Vec<f64>,
    /// kW per user.
    pub delta_d: Vec<f64>,
    /// kW per user.
    pub schedules: Vec<f64>,
    /// Sensitivity of the optimal cost to each user's schedule definition, $/kW.
    pub eta: Vec<f64>,
    /// Total disutility, $.
    pub cost: f64,
}

/// Minimises total disutility subject to balance, line limits and demand
/// ranges. Schedules are substituted out, so the variables are the
/// adjustments alone; `eta` is recovered from the coupling-row multipliers.
pub fn solve_central(inst: &MarketInstance, theta: &[f64]) -> Result<CentralSolution> {
    inst.check_theta(theta)?;
    let users = inst.users();
    let n = users.len();
    let base = inst.base_schedules(theta);

    let q = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 * users[i].alpha } else { 0.0 });
    let c: Vec<f64> = users.iter().map(|u| u.beta).collect();
    let (lower, upper): (Vec<f64>, Vec<f64>) = users.iter().map(|u| u.adjustment_range()).unzip();
    let balance = inst.balance_row();
    let flows = inst.flow_rows();
    let mut qp = QuadraticProgram::new(q, c)
        .with_bounds(lower, upper)
        .with_eq(balance.coeffs.clone(), balance.rhs(&base));
    for row in &flows {
        qp = qp.with_le(row.coeffs.clone(), row.rhs(&base));
    }
    let sol = solve_qp(&qp)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible {
            theta: theta.to_vec(),
        });
    }

    let mut eta: Vec<f64> = balance.sens.iter().map(|s| s * sol.dual_eq[0]).collect();
    for (row, &y) in flows.iter().zip(&sol.dual_ineq) {
        for (e, s) in eta.iter_mut().zip(&row.sens) {
            *e += y * s;
        }
    }
    let delta_d = sol.x;
    let schedules = base.iter().zip(&delta_d).map(|(b, d)| b + d).collect();
    Ok(CentralSolution {
        theta: theta.to_vec(),
        cost: inst.total_disutility(&delta_d),
        delta_d,
        schedules,
        eta,
    })
}

/// Gaps `-eta / tau`, bids `schedule - gap`; adjustments are taken verbatim.
pub fn recover_gne(central: &CentralSolution, inst: &MarketInstance) -> Equilibrium {
    let tau = inst.tau();
    let gaps: Vec<f64> = central.eta.iter().map(|e| -e / tau).collect();
    let bids = central
        .schedules
        .iter()
        .zip(&gaps)
        .map(|(q, g)| q - g)
        .collect();
    Equilibrium {
        delta_d: central.delta_d.clone(),
        bids,
        schedules: central.schedules.clone(),
        gaps,
        eta: central.eta.clone(),
        cost: central.cost,
    }
}

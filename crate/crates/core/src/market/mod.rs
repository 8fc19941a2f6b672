//! Market instance model and equilibrium computation.
//!
//! A user's schedule `q^c_k` is its net withdrawal from the network:
//! `d_k + dd_k - w_k - dw_k`, where `dw_k` is the prosumer's deviation
//! parameter (zero for consumers). Inelastic loads are fixed withdrawals at
//! their buses. Flows are `PTDF * injection` with injection `= -withdrawal`.

mod central;
mod mechanism;
mod network;

pub use central::{recover_gne, solve_central, CentralSolution};
pub use mechanism::{
    operator_clear, simulate_best_response, user_best_response, BestResponseOptions,
    BestResponseRound, Clearing, SimulationOutcome,
};
pub use network::{Line, Network, Ptdf};

use crate::polytope::Polyhedron;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserKind {
    Consumer,
    Prosumer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub name: String,
    pub kind: UserKind,
    pub bus: usize,
    /// Contract demand `d`, kW.
    pub demand: f64,
    /// Lowest admissible demand, kW.
    pub lower: f64,
    /// Highest admissible demand, kW.
    pub upper: f64,
    /// Quadratic disutility coefficient, $/kW^2.
    pub alpha: f64,
    /// Linear disutility coefficient, $/kW.
    pub beta: f64,
    /// Constant disutility, $.
    pub zeta: f64,
    /// Forecast renewable output `w`, kW (zero for consumers).
    pub forecast: f64,
    /// Index of this prosumer's deviation in the parameter vector.
    pub parameter: Option<usize>,
}

impl User {
    pub fn consumer(
        name: impl Into<String>,
        bus: usize,
        demand: f64,
        range: (f64, f64),
        coeffs: (f64, f64, f64),
    ) -> Self {
        Self {
            name: name.into(),
            kind: UserKind::Consumer,
            bus,
            demand,
            lower: range.0,
            upper: range.1,
            alpha: coeffs.0,
            beta: coeffs.1,
            zeta: coeffs.2,
            forecast: 0.0,
            parameter: None,
        }
    }

    pub fn prosumer(
        name: impl Into<String>,
        bus: usize,
        demand: f64,
        range: (f64, f64),
        coeffs: (f64, f64, f64),
        forecast: f64,
        parameter: usize,
    ) -> Self {
        Self {
            kind: UserKind::Prosumer,
            forecast,
            parameter: Some(parameter),
            ..Self::consumer(name, bus, demand, range, coeffs)
        }
    }

    /// `f(dd) = alpha dd^2 + beta dd + zeta`, $.
    pub fn disutility(&self, dd: f64) -> f64 {
        self.alpha * dd * dd + self.beta * dd + self.zeta
    }

    pub fn marginal_disutility(&self, dd: f64) -> f64 {
        2.0 * self.alpha * dd + self.beta
    }

    /// Admissible adjustment interval `[lower - d, upper - d]`.
    pub fn adjustment_range(&self) -> (f64, f64) {
        (self.lower - self.demand, self.upper - self.demand)
    }

    /// No demand adjustment is possible.
    pub fn is_pinned(&self) -> bool {
        self.lower == self.upper
    }

    /// Renewable deviation seen by this user.
    pub fn deviation(&self, theta: &[f64]) -> f64 {
        self.parameter.map_or(0.0, |j| theta[j])
    }

    /// Schedule with no demand adjustment: `d - w - dw`.
    pub fn base_schedule(&self, theta: &[f64]) -> f64 {
        self.demand - self.forecast - self.deviation(theta)
    }

    fn validate(&self, index: usize, n_bus: usize, n_params: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInstance(format!("user {index} ({}): {msg}", self.name)));
        if self.bus >= n_bus {
            return fail(format!("bus {} does not exist", self.bus));
        }
        let finite = [
            self.demand,
            self.lower,
            self.upper,
            self.alpha,
            self.beta,
            self.zeta,
            self.forecast,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("non-finite data".into());
        }
        if !(self.lower <= self.demand && self.demand <= self.upper) {
            return fail(format!(
                "demand {} outside [{}, {}]",
                self.demand, self.lower, self.upper
            ));
        }
        if !(self.alpha > 0.0) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        match (self.kind, self.parameter) {
            (UserKind::Consumer, None) if self.forecast == 0.0 => Ok(()),
            (UserKind::Consumer, _) => fail("consumers carry no forecast or parameter".into()),
            (UserKind::Prosumer, Some(j)) if j < n_params => Ok(()),
            (UserKind::Prosumer, Some(j)) => fail(format!("parameter {j} out of range")),
            (UserKind::Prosumer, None) => fail("prosumer without parameter".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    users: Vec<User>,
    network: Network,
    ptdf: Ptdf,
    tau: f64,
    theta_lower: Vec<f64>,
    theta_upper: Vec<f64>,
    inelastic: Vec<f64>,
}

impl MarketInstance {
    /// `theta_box[j]` bounds the deviation of the prosumer owning parameter `j`.
    /// `inelastic` holds one fixed load per bus, kW.
    pub fn new(
        users: Vec<User>,
        network: Network,
        tau: f64,
        theta_box: Vec<(f64, f64)>,
        inelastic: Vec<f64>,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidInstance("no users".into()));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidInstance(format!("tau must be positive, got {tau}")));
        }
        let n_bus = network.num_buses();
        if inelastic.len() != n_bus {
            return Err(Error::InvalidInstance(format!(
                "{} inelastic loads for {n_bus} buses",
                inelastic.len()
            )));
        }
        if inelastic.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite inelastic load".into()));
        }
        let p = theta_box.len();
        for (j, &(lo, hi)) in theta_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidInstance(format!(
                    "parameter {j} has invalid box [{lo}, {hi}]"
                )));
            }
        }
        for (k, u) in users.iter().enumerate() {
            u.validate(k, n_bus, p)?;
        }
        for j in 0..p {
            let owners = users.iter().filter(|u| u.parameter == Some(j)).count();
            if owners != 1 {
                return Err(Error::InvalidInstance(format!(
                    "parameter {j} is owned by {owners} prosumers"
                )));
            }
        }
        let ptdf = network.compute_ptdf()?;
        Ok(Self {
            users,
            network,
            ptdf,
            tau,
            theta_lower: theta_box.iter().map(|b| b.0).collect(),
            theta_upper: theta_box.iter().map(|b| b.1).collect(),
            inelastic,
        })
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn ptdf(&self) -> &Ptdf {
        &self.ptdf
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn inelastic(&self) -> &[f64] {
        &self.inelastic
    }

    pub fn num_params(&self) -> usize {
        self.theta_lower.len()
    }

    pub fn theta_lower(&self) -> &[f64] {
        &self.theta_lower
    }

    pub fn theta_upper(&self) -> &[f64] {
        &self.theta_upper
    }

    pub fn theta_box(&self) -> Vec<(f64, f64)> {
        self.theta_lower
            .iter()
            .copied()
            .zip(self.theta_upper.iter().copied())
            .collect()
    }

    pub fn theta_center(&self) -> Vec<f64> {
        self.theta_lower
            .iter()
            .zip(&self.theta_upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn theta_domain(&self) -> Result<Polyhedron> {
        Polyhedron::from_box(&self.theta_lower, &self.theta_upper)
    }

    /// A copy with a different parameter box.
    pub fn with_theta_box(&self, theta_box: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(
            self.users.clone(),
            self.network.clone(),
            self.tau,
            theta_box,
            self.inelastic.clone(),
        )
    }

    /// A copy with a different trade-off parameter.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(
            self.users.clone(),
            self.network.clone(),
            tau,
            self.theta_box(),
            self.inelastic.clone(),
        )
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "theta has {} entries, instance has {} parameters",
                theta.len(),
                self.num_params()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite theta".into()));
        }
        Ok(())
    }

    pub fn total_inelastic(&self) -> f64 {
        self.inelastic.iter().sum()
    }

    /// Schedules with zero demand adjustment, one per user.
    pub fn base_schedules(&self, theta: &[f64]) -> Vec<f64> {
        self.users.iter().map(|u| u.base_schedule(theta)).collect()
    }

    /// Net withdrawal per bus for the given user schedules.
    pub fn bus_withdrawals(&self, schedules: &[f64]) -> Vec<f64> {
        let mut w = self.inelastic.clone();
        for (u, q) in self.users.iter().zip(schedules) {
            w[u.bus] += q;
        }
        w
    }

    /// Line flows (from -> to), kW.
    pub fn line_flows(&self, schedules: &[f64]) -> Vec<f64> {
        let injection: Vec<f64> = self.bus_withdrawals(schedules).iter().map(|w| -w).collect();
        self.ptdf.flows(&injection)
    }

    /// `sum_k q^c_k + sum_b inelastic_b`, zero when balanced.
    pub fn balance_residual(&self, schedules: &[f64]) -> f64 {
        schedules.iter().sum::<f64>() + self.total_inelastic()
    }

    /// Largest violation of a line limit (negative when all lines have margin).
    pub fn max_line_violation(&self, schedules: &[f64]) -> f64 {
        self.line_flows(schedules)
            .iter()
            .zip(self.network.lines())
            .map(|(f, l)| f.abs() - l.limit)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_disutility(&self, dd: &[f64]) -> f64 {
        self.users.iter().zip(dd).map(|(u, &x)| u.disutility(x)).sum()
    }
}

/// A coupling constraint written in the demand adjustments:
/// `coeffs . dd <= rhs0 + sens . base` (or `=` for the balance), where `base`
/// holds the users' unadjusted schedules.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CouplingRow {
    pub coeffs: Vec<f64>,
    pub rhs0: f64,
    pub sens: Vec<f64>,
}

impl CouplingRow {
    pub fn rhs(&self, base: &[f64]) -> f64 {
        self.rhs0 + self.sens.iter().zip(base).map(|(s, b)| s * b).sum::<f64>()
    }
}

impl MarketInstance {
    /// Energy balance `sum dd = -L - sum base`.
    pub(crate) fn balance_row(&self) -> CouplingRow {
        let n = self.users.len();
        CouplingRow {
            coeffs: vec![1.0; n],
            rhs0: -self.total_inelastic(),
            sens: vec![-1.0; n],
        }
    }

    /// Two rows per line, upper limit first: `-F <= flow <= F`.
    pub(crate) fn flow_rows(&self) -> Vec<CouplingRow> {
        let mut rows = Vec::with_capacity(2 * self.network.lines().len());
        for (l, line) in self.network.lines().iter().enumerate() {
            let pt: Vec<f64> = self.users.iter().map(|u| self.ptdf.get(l, u.bus)).collect();
            let pl: f64 = self
                .inelastic
                .iter()
                .enumerate()
                .map(|(b, load)| self.ptdf.get(l, b) * load)
                .sum();
            rows.push(CouplingRow {
                coeffs: pt.iter().map(|v| -v).collect(),
                rhs0: line.limit + pl,
                sens: pt.clone(),
            });
            rows.push(CouplingRow {
                coeffs: pt.clone(),
                rhs0: line.limit - pl,
                sens: pt.iter().map(|v| -v).collect(),
            });
        }
        rows
    }
}

/// A market equilibrium profile, one entry per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Demand adjustments, kW.
    pub delta_d: Vec<f64>,
    /// Bids, kW.
    pub bids: Vec<f64>,
    /// Operator schedules, kW.
    pub schedules: Vec<f64>,
    /// Gaps between schedule and bid, kW.
    pub gaps: Vec<f64>,
    /// Multipliers of the schedule-definition rows, $/kW.
    pub eta: Vec<f64>,
    /// Total disutility, $.
    pub cost: f64,
}

//! DC network model and power transfer distribution factors.

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series reactance, per unit.
    pub reactance: f64,
    /// Flow limit, kW.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n_bus: usize,
    lines: Vec<Line>,
    slack: usize,
}

/// Line-by-bus shift factors: flow on line `l` (from -> to) per kW injected at
/// bus `b` and withdrawn at the slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptdf(DMatrix<f64>);

impl Ptdf {
    pub fn get(&self, line: usize, bus: usize) -> f64 {
        self.0[(line, bus)]
    }

    pub fn num_lines(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_buses(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Line flows for a nodal injection vector.
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        (0..self.num_lines())
            .map(|l| (0..self.num_buses()).map(|b| self.0[(l, b)] * injection[b]).sum())
            .collect()
    }
}

impl Network {
    pub fn new(n_bus: usize, lines: Vec<Line>, slack: usize) -> Result<Self> {
        if n_bus == 0 {
            return Err(Error::InvalidInstance("network has no buses".into()));
        }
        if slack >= n_bus {
            return Err(Error::InvalidInstance(format!(
                "slack bus {slack} out of range for {n_bus} buses"
            )));
        }
        for (i, l) in lines.iter().enumerate() {
            if l.from >= n_bus || l.to >= n_bus || l.from == l.to {
                return Err(Error::InvalidInstance(format!(
                    "line {i} joins buses {} and {}",
                    l.from, l.to
                )));
            }
            if !(l.reactance > 0.0) || !l.reactance.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "line {i} has non-positive reactance {}",
                    l.reactance
                )));
            }
            if !(l.limit > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "line {i} has non-positive limit {}",
                    l.limit
                )));
            }
        }
        let net = Self {
            n_bus,
            lines,
            slack,
        };
        net.check_connected()?;
        Ok(net)
    }

    pub fn num_buses(&self) -> usize {
        self.n_bus
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.n_bus];
        let mut stack = vec![self.slack];
        seen[self.slack] = true;
        while let Some(b) = stack.pop() {
            for l in &self.lines {
                let next = if l.from == b {
                    l.to
                } else if l.to == b {
                    l.from
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(b) => Err(Error::Disconnected(b)),
            None => Ok(()),
        }
    }

    /// Nodal susceptance matrix.
    pub fn susceptance(&self) -> DMatrix<f64> {
        let mut bm = DMatrix::zeros(self.n_bus, self.n_bus);
        for l in &self.lines {
            let y = 1.0 / l.reactance;
            bm[(l.from, l.from)] += y;
            bm[(l.to, l.to)] += y;
            bm[(l.from, l.to)] -= y;
            bm[(l.to, l.from)] -= y;
        }
        bm
    }

    pub fn compute_ptdf(&self) -> Result<Ptdf> {
        let n = self.n_bus;
        let keep: Vec<usize> = (0..n).filter(|&b| b != self.slack).collect();
        let bm = self.susceptance();
        let reduced = DMatrix::from_fn(n - 1, n - 1, |i, j| bm[(keep[i], keep[j])]);
        let inv = if n == 1 {
            reduced
        } else {
            reduced
                .lu()
                .try_inverse()
                .ok_or(Error::SingularNetwork)?
        };
        let mut x = DMatrix::zeros(n, n);
        for (i, &bi) in keep.iter().enumerate() {
            for (j, &bj) in keep.iter().enumerate() {
                x[(bi, bj)] = inv[(i, j)];
            }
        }
        let pt = DMatrix::from_fn(self.lines.len(), n, |l, b| {
            let line = &self.lines[l];
            (x[(line.from, b)] - x[(line.to, b)]) / line.reactance
        });
        Ok(Ptdf(pt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(from: usize, to: usize, x: f64) -> Line {
        Line {
            from,
            to,
            reactance: x,
            limit: 100.0,
        }
    }

    #[test]
    fn two_bus_flows_back_to_slack() {
        let net = Network::new(2, vec![line(0, 1, 0.1)], 0).unwrap();
        let pt = net.compute_ptdf().unwrap();
        assert_abs_diff_eq!(pt.get(0, 0), 0.0);
        assert_abs_diff_eq!(pt.get(0, 1), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn triangle_splits_two_to_one() {
        let net = Network::new(3, vec![line(0, 1, 1.0), line(1, 2, 1.0), line(0, 2, 1.0)], 0)
            .unwrap();
        let pt = net.compute_ptdf().unwrap();
        // unit injection at bus 1 returning to bus 0
        let f = pt.flows(&[-1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(f[0], -2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn slack_column_is_zero() {
        let net = Network::new(3, vec![line(0, 1, 1.0), line(1, 2, 2.0)], 1).unwrap();
        let pt = net.compute_ptdf().unwrap();
        assert_eq!(pt.get(0, 1), 0.0);
        assert_eq!(pt.get(1, 1), 0.0);
    }

    #[test]
    fn disconnected_rejected() {
        let err = Network::new(3, vec![line(0, 1, 1.0)], 0).unwrap_err();
        assert_eq!(err, Error::Disconnected(2));
    }

    #[test]
    fn bad_reactance_rejected() {
        assert!(Network::new(2, vec![line(0, 1, 0.0)], 0).is_err());
        assert!(Network::new(2, vec![line(0, 1, 1.0)], 5).is_err());
    }
}

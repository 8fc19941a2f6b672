//! Optimiser recovery on critical regions and per-user flexibility
//! requirements: the range of equilibrium demand adjustments each user must be
//! able to deliver over the parameter box.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::avg::PwaValueFunction;
use crate::market::MarketInstance;
use crate::mplp::MpLp;
use crate::polytope::dot;
use crate::solver::{solve_lp, LinearProgram, LpStatus};
use crate::{Error, Result};

/// Dual components below `-ACTIVE_TOL` mark rows that hold with equality.
pub const ACTIVE_TOL: f64 = 1e-9;
/// Regions with certified error at most this use the active-row equalities.
const EXACT_TOL: f64 = 1e-9;
/// Demand within this of a bound counts as fully exploited, kW.
const EXPLOITED_TOL: f64 = 1e-6;

/// `constant + coeffs^T theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub coeffs: Vec<f64>,
}

impl AffineExpr {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPolicy {
    pub region: usize,
    /// Rows whose multiplier is strictly negative.
    pub active_rows: Vec<usize>,
    /// `x(theta)` per variable when the active system pins `x` down.
    pub explicit: Option<Vec<AffineExpr>>,
    /// Demand adjustment of each user as a function of `theta`, when the
    /// active rows fix it.
    pub delta_d: Vec<Option<AffineExpr>>,
}

impl RegionPolicy {
    pub fn x_at(&self, theta: &[f64]) -> Option<Vec<f64>> {
        self.explicit
            .as_ref()
            .map(|xs| xs.iter().map(|e| e.eval(theta)).collect())
    }
}

/// Reads the active rows off the region's dual vertex and, when they
/// determine `x` uniquely, returns the affine optimiser.
pub fn recover_policy(pwa: &PwaValueFunction, region: usize, mplp: &MpLp) -> Result<RegionPolicy> {
    let reg = pwa
        .regions
        .get(region)
        .ok_or_else(|| Error::InvalidArgument(format!("no region {region}")))?;
    let piece = &pwa.pieces[reg.piece];
    let active_rows: Vec<usize> = piece
        .gamma
        .iter()
        .enumerate()
        .filter(|(_, &g)| g < -ACTIVE_TOL)
        .map(|(i, _)| i)
        .collect();
    let nx = mplp.num_vars();
    let p = mplp.num_params();
    let a = DMatrix::from_fn(active_rows.len(), nx, |i, j| mplp.a()[active_rows[i]][j]);
    let t = DVector::from_iterator(active_rows.len(), active_rows.iter().map(|&i| mplp.t()[i]));
    let b = DMatrix::from_fn(active_rows.len(), p, |i, j| mplp.b()[active_rows[i]][j]);

    let svd = a.clone().svd(true, true);
    let tol = 1e-9 * (1.0 + svd.singular_values.max());
    let rank = svd.rank(tol);
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::Solver(e.to_string()))?;

    // x(theta) is pinned down only when the active rows have full column rank
    let explicit: Option<Vec<AffineExpr>> = (rank == nx && !active_rows.is_empty()).then(|| {
        let x0 = &pinv * &t;
        let xt = &pinv * &b;
        (0..nx)
            .map(|j| AffineExpr {
                constant: x0[j],
                coeffs: xt.row(j).iter().copied().collect(),
            })
            .collect()
    });

    let scale = 1.0 + reg.poly.rhs().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let (centre, _) = reg
        .poly
        .chebyshev_ball(scale)?
        .ok_or_else(|| Error::Internal(format!("region {region} is empty")))?;
    let rhs = mplp.rhs_at(&centre);
    let rhs_scale = 1.0 + rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let x_centre = match &explicit {
        Some(xs) => xs.iter().map(|e| e.eval(&centre)).collect(),
        None => mplp.evaluate_lp_at(&centre)?.x,
    };
    let resid = active_rows
        .iter()
        .map(|&i| (dot(&mplp.a()[i], &x_centre) - rhs[i]).abs())
        .fold(0.0, f64::max);
    if resid > 1e-6 * rhs_scale {
        return Err(Error::Internal(format!(
            "active system of region {region} is inconsistent (residual {resid:e})"
        )));
    }

    // Delta d_k = w^T x is fixed by the active rows iff w = A'^T lambda for
    // some lambda; then Delta d_k = lambda^T (t' + B' theta).
    let delta_d = mplp
        .users()
        .iter()
        .map(|u| {
            let mut w = DVector::zeros(nx);
            for (col, xi) in u.vars().zip(&u.breakpoints) {
                w[col] = *xi;
            }
            let lambda = pinv.transpose() * &w;
            let back = a.transpose() * &lambda;
            let w_scale = 1.0 + w.amax();
            ((back - &w).amax() <= 1e-7 * w_scale).then(|| AffineExpr {
                constant: lambda.dot(&t),
                coeffs: (b.transpose() * &lambda).iter().copied().collect(),
            })
        })
        .collect();
    Ok(RegionPolicy {
        region,
        active_rows,
        explicit,
        delta_d,
    })
}

/// An extreme of one user's adjustment and a parameter attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Extreme {
    /// kW.
    pub value: f64,
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionInterval {
    pub lower: Extreme,
    pub upper: Extreme,
}

/// Min and max of user `k`'s adjustment over all optimal solutions for all
/// parameters in the region.
///
/// The optimal set is described by the active rows as equalities when the
/// region is exact; otherwise by the cut `c^T x <= piece(theta) + error`,
/// which contains every optimal solution on the region.
pub fn flexibility_in_region(
    pwa: &PwaValueFunction,
    policy: &RegionPolicy,
    mplp: &MpLp,
    user: usize,
) -> Result<RegionInterval> {
    let lin = mplp
        .users()
        .get(user)
        .ok_or_else(|| Error::InvalidArgument(format!("no user {user}")))?;
    let region = &pwa.regions[policy.region];
    let error = pwa.region_errors[policy.region];
    let exact = error <= EXACT_TOL;
    let solve = |sign: f64, use_active: bool| -> Result<Option<Extreme>> {
        let nx = mplp.num_vars();
        let p = mplp.num_params();
        let mut obj = vec![0.0; nx + p];
        for (col, xi) in lin.vars().zip(&lin.breakpoints) {
            obj[col] = sign * xi;
        }
        let mut lp = LinearProgram::new(obj);
        let joint = |ax: &[f64], bt: &[f64]| {
            let mut row = ax.to_vec();
            row.extend(bt.iter().map(|v| -v));
            row
        };
        for ((a, b), t) in mplp.a().iter().zip(mplp.b()).zip(mplp.t()) {
            lp.push_le(joint(a, b), *t);
        }
        for (h, r) in region.poly.rows().iter().zip(region.poly.rhs()) {
            let mut row = vec![0.0; nx];
            row.extend(h);
            lp.push_le(row, *r);
        }
        if use_active {
            for &i in &policy.active_rows {
                lp.push_eq(joint(&mplp.a()[i], &mplp.b()[i]), mplp.t()[i]);
            }
        } else {
            let piece = &pwa.pieces[region.piece];
            lp.push_le(joint(mplp.c(), &piece.n), piece.m + error + 1e-7);
        }
        let sol = solve_lp(&lp)?;
        Ok(match sol.status {
            LpStatus::Optimal => Some(Extreme {
                value: sign * sol.objective,
                theta: sol.x[nx..].to_vec(),
                x: sol.x[..nx].to_vec(),
            }),
            _ => None,
        })
    };
    let extreme = |sign: f64| -> Result<Extreme> {
        if exact {
            if let Some(e) = solve(sign, true)? {
                return Ok(e);
            }
        }
        solve(sign, false)?.ok_or_else(|| {
            Error::Internal(format!("no optimal solution found on region {}", policy.region))
        })
    };
    Ok(RegionInterval {
        lower: extreme(1.0)?,
        upper: extreme(-1.0)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserFlexibility {
    pub user: usize,
    pub name: String,
    /// Contract demand, kW.
    pub demand: f64,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub lower_theta: Vec<f64>,
    pub upper_theta: Vec<f64>,
    /// Every region attaining the lower end.
    pub lower_regions: Vec<usize>,
    pub upper_regions: Vec<usize>,
    /// Demand reaches its lowest admissible value.
    pub lower_exploited: bool,
    pub upper_exploited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexibilityReport {
    pub users: Vec<UserFlexibility>,
    /// `regions[r][k]`: interval of user `k` on region `r`.
    pub regions: Vec<Vec<RegionInterval>>,
    pub policies: Vec<RegionPolicy>,
    /// User indices by decreasing width.
    pub ranking: Vec<usize>,
}

/// Global intervals as the hull of the per-region intervals.
pub fn flexibility_report(
    pwa: &PwaValueFunction,
    mplp: &MpLp,
    inst: &MarketInstance,
) -> Result<FlexibilityReport> {
    let n_users = mplp.users().len();
    let per_region = (0..pwa.regions.len())
        .into_par_iter()
        .map(|r| {
            let policy = recover_policy(pwa, r, mplp)?;
            let intervals = (0..n_users)
                .map(|k| flexibility_in_region(pwa, &policy, mplp, k))
                .collect::<Result<Vec<_>>>()?;
            Ok((policy, intervals))
        })
        .collect::<Result<Vec<_>>>()?;
    let (policies, regions): (Vec<_>, Vec<_>) = per_region.into_iter().unzip();
    if regions.is_empty() {
        return Err(Error::InvalidArgument("no critical regions".into()));
    }

    let users: Vec<UserFlexibility> = inst
        .users()
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let lo = regions
                .iter()
                .map(|iv: &Vec<RegionInterval>| iv[k].lower.value)
                .fold(f64::INFINITY, f64::min);
            let hi = regions
                .iter()
                .map(|iv| iv[k].upper.value)
                .fold(f64::NEG_INFINITY, f64::max);
            let tie = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            let lower_regions: Vec<usize> = (0..regions.len())
                .filter(|&r| regions[r][k].lower.value <= lo + tie)
                .collect();
            let upper_regions: Vec<usize> = (0..regions.len())
                .filter(|&r| regions[r][k].upper.value >= hi - tie)
                .collect();
            UserFlexibility {
                user: k,
                name: u.name.clone(),
                demand: u.demand,
                lower: lo,
                upper: hi,
                width: hi - lo,
                lower_theta: regions[lower_regions[0]][k].lower.theta.clone(),
                upper_theta: regions[upper_regions[0]][k].upper.theta.clone(),
                lower_regions,
                upper_regions,
                lower_exploited: (u.demand + lo - u.lower).abs() <= EXPLOITED_TOL,
                upper_exploited: (u.demand + hi - u.upper).abs() <= EXPLOITED_TOL,
            }
        })
        .collect();
    let mut ranking: Vec<usize> = (0..users.len()).collect();
    ranking.sort_by(|&a, &b| users[b].width.total_cmp(&users[a].width).then(a.cmp(&b)));
    Ok(FlexibilityReport {
        users,
        regions,
        policies,
        ranking,
    })
}

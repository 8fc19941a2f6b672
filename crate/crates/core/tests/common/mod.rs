//! Shared helpers for the integration tests: a seeded generator of small
//! feasible markets and grid oracles built on direct LP solves.

#![allow(dead_code)]

use itertools::Itertools;
use mpflex_core::avg::PwaValueFunction;
use mpflex_core::market::{solve_central, Line, MarketInstance, Network, User};
use mpflex_core::mplp::MpLp;
use mpflex_core::polytope::Polyhedron;
use mpflex_core::solver::{solve_lp, LinearProgram, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Breakpoints used with [`random_market`].
pub const RANDOM_BREAKPOINTS: usize = 4;

/// A connected market on 3 to 6 buses with `p` elastic prosumers, each owning
/// one parameter, and 2 to 4 consumers. Line limits are set around the
/// unadjusted flows so that some of them bind. The instance is feasible at
/// every corner of its parameter box, hence on the whole box.
pub fn random_market(seed: u64, p: usize) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(inst) = try_market(&mut rng, p) {
            return inst;
        }
    }
}

fn try_market(rng: &mut ChaCha8Rng, p: usize) -> Option<MarketInstance> {
    let n_bus = rng.gen_range(3..=6);
    let mut lines: Vec<Line> = (1..n_bus)
        .map(|b| Line {
            from: rng.gen_range(0..b),
            to: b,
            reactance: rng.gen_range(0.01..0.05),
            limit: 1.0,
        })
        .collect();
    let (a, b) = (rng.gen_range(0..n_bus), rng.gen_range(0..n_bus));
    if a != b {
        lines.push(Line {
            from: a,
            to: b,
            reactance: rng.gen_range(0.01..0.05),
            limit: 1.0,
        });
    }

    let mut users = Vec::new();
    for k in 0..rng.gen_range(2..=4) {
        let d = rng.gen_range(20.0..80.0);
        users.push(User::consumer(
            format!("c{k}"),
            rng.gen_range(0..n_bus),
            d,
            (d - rng.gen_range(5.0..30.0), d + rng.gen_range(5.0..40.0)),
            coeffs(rng),
        ));
    }
    let consumer_load: f64 = users.iter().map(|u| u.demand).sum();
    for j in 0..p {
        let d = rng.gen_range(10.0..40.0);
        let w = d + consumer_load / p as f64 * rng.gen_range(0.8..1.2);
        users.push(User::prosumer(
            format!("p{j}"),
            rng.gen_range(0..n_bus),
            d,
            (d - rng.gen_range(5.0..20.0), d + rng.gen_range(5.0..20.0)),
            coeffs(rng),
            w,
            j,
        ));
    }
    let theta_box: Vec<(f64, f64)> = (0..p)
        .map(|_| (-rng.gen_range(3.0..10.0), rng.gen_range(3.0..10.0)))
        .collect();

    // size limits against the flows of the unconstrained optimum at the centre
    let loose: Vec<Line> = lines
        .iter()
        .map(|l| Line {
            limit: 1e6,
            ..l.clone()
        })
        .collect();
    let network = Network::new(n_bus, loose, 0).ok()?;
    let probe = MarketInstance::new(
        users.clone(),
        network,
        1.0,
        theta_box.clone(),
        vec![0.0; n_bus],
    )
    .ok()?;
    let centre = probe.theta_center();
    let sol = solve_central(&probe, &centre).ok()?;
    let flows = probe.line_flows(&sol.schedules);
    for (l, f) in lines.iter_mut().zip(flows) {
        l.limit = f.abs() * rng.gen_range(0.85..1.6) + rng.gen_range(2.0..10.0);
    }
    let network = Network::new(n_bus, lines, 0).ok()?;
    let inst = MarketInstance::new(users, network, 1.0, theta_box, vec![0.0; n_bus]).ok()?;
    let corners_ok = box_corners(inst.theta_lower(), inst.theta_upper())
        .iter()
        .all(|c| solve_central(&inst, c).is_ok());
    corners_ok.then_some(inst)
}

fn coeffs(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    (
        rng.gen_range(0.002..0.02),
        rng.gen_range(1.0..3.0),
        rng.gen_range(0.0..50.0),
    )
}

pub fn box_corners(lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| [l, u])
        .multi_cartesian_product()
        .collect()
}

/// `n` evenly spaced points per axis, endpoints included.
pub fn grid(lower: &[f64], upper: &[f64], n: usize) -> Vec<Vec<f64>> {
    lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| {
            (0..n)
                .map(|i| l + (u - l) * i as f64 / (n - 1) as f64)
                .collect::<Vec<_>>()
        })
        .multi_cartesian_product()
        .collect()
}

pub fn random_point(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| rng.gen_range(l..u))
        .collect()
}

/// Smallest and largest `LP(theta) - v(theta)` over a grid of direct solves.
pub fn grid_gap(pwa: &PwaValueFunction, mplp: &MpLp, n: usize) -> (f64, f64) {
    grid(mplp.theta_lower(), mplp.theta_upper(), n)
        .iter()
        .map(|t| {
            let lp = mplp.evaluate_lp_at(t).expect("feasible grid point").value;
            lp - pwa.value(t)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| {
            (lo.min(g), hi.max(g))
        })
}

/// Per-user hull of the LP demand adjustments over a grid.
pub fn grid_hull(mplp: &MpLp, n: usize) -> Vec<(f64, f64)> {
    let mut hull = vec![(f64::INFINITY, f64::NEG_INFINITY); mplp.users().len()];
    for t in grid(mplp.theta_lower(), mplp.theta_upper(), n) {
        let pt = mplp.evaluate_lp_at(&t).expect("feasible grid point");
        for (h, dd) in hull.iter_mut().zip(mplp.delta_d(&pt.x)) {
            h.0 = h.0.min(dd);
            h.1 = h.1.max(dd);
        }
    }
    hull
}

pub fn random_polyhedron(rng: &mut ChaCha8Rng, dim: usize) -> Polyhedron {
    let lower: Vec<f64> = (0..dim).map(|_| -rng.gen_range(1.0..4.0)).collect();
    let upper: Vec<f64> = (0..dim).map(|_| rng.gen_range(1.0..4.0)).collect();
    let mut poly = Polyhedron::from_box(&lower, &upper).unwrap();
    for _ in 0..rng.gen_range(2..10) {
        let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        poly.push(row, rng.gen_range(0.2..4.0)).unwrap();
    }
    poly
}

/// Row `j` is redundant iff maximising its normal over the other rows stays
/// within its offset.
pub fn lp_max_oracle(poly: &Polyhedron, j: usize) -> bool {
    let mut lp = LinearProgram::new(poly.rows()[j].iter().map(|v| -v).collect());
    for (i, (r, b)) in poly.rows().iter().zip(poly.rhs()).enumerate() {
        if i != j {
            lp.push_le(r.clone(), *b);
        }
    }
    let sol = solve_lp(&lp).unwrap();
    match sol.status {
        LpStatus::Optimal => -sol.objective <= poly.rhs()[j] + 1e-9 * (1.0 + poly.rhs()[j].abs()),
        LpStatus::Unbounded => false,
        LpStatus::Infeasible => true,
    }
}

pub fn random_sphere_points(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| 2.0 * x / norm + 0.5).collect()
        })
        .collect()
}

/// Facets of the hull of points in general position: every `dim`-subset
/// whose affine hyperplane leaves all points on one side.
pub fn hull_facets(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dim = points[0].len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for subset in (0..points.len()).combinations(dim) {
        let normal = match dim {
            2 => {
                let (a, b) = (&points[subset[0]], &points[subset[1]]);
                vec![b[1] - a[1], a[0] - b[0]]
            }
            3 => {
                let (a, b, c) = (&points[subset[0]], &points[subset[1]], &points[subset[2]]);
                let u: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
                let v: Vec<f64> = (0..3).map(|i| c[i] - a[i]).collect();
                vec![
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ]
            }
            _ => unreachable!(),
        };
        let offset: f64 = normal.iter().zip(&points[subset[0]]).map(|(a, b)| a * b).sum();
        let side: Vec<f64> = points
            .iter()
            .map(|p| normal.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - offset)
            .collect();
        if side.iter().all(|s| *s <= 1e-9) {
            rows.push(normal);
            rhs.push(offset);
        } else if side.iter().all(|s| *s >= -1e-9) {
            rows.push(normal.iter().map(|v| -v).collect());
            rhs.push(-offset);
        }
    }
    (rows, rhs)
}

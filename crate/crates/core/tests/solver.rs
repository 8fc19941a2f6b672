use approx::assert_abs_diff_eq;
use itertools::Itertools;
use mpflex_core::solver::{solve_lp, solve_qp, LinearProgram, LpStatus, QpStatus, QuadraticProgram};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A bounded random polytope `{x | G x <= h}` in `dim` dimensions that
/// contains the origin in its interior.
fn random_polytope(rng: &mut ChaCha8Rng, dim: usize, rows: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut g = Vec::new();
    let mut h = Vec::new();
    for d in 0..dim {
        for s in [1.0, -1.0] {
            let mut row = vec![0.0; dim];
            row[d] = s;
            g.push(row);
            h.push(rng.gen_range(1.0..5.0));
        }
    }
    for _ in 0..rows {
        g.push((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        h.push(rng.gen_range(0.5..3.0));
    }
    (g, h)
}

/// Minimum of `c^T x` over all vertices found by brute-force subset solves.
fn vertex_oracle(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> f64 {
    let dim = c.len();
    let mut best = f64::INFINITY;
    for subset in (0..g.len()).combinations(dim) {
        let m = DMatrix::from_fn(dim, dim, |i, j| g[subset[i]][j]);
        let rhs = DVector::from_iterator(dim, subset.iter().map(|&i| h[i]));
        let Some(x) = m.lu().solve(&rhs) else { continue };
        let feasible = g
            .iter()
            .zip(h)
            .all(|(row, hi)| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() <= hi + 1e-9);
        if feasible {
            best = best.min(c.iter().zip(x.iter()).map(|(a, b)| a * b).sum());
        }
    }
    best
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let dim = 2 + trial % 2;
        let (g, h) = random_polytope(&mut rng, dim, 6);
        let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lp = LinearProgram::new(c.clone());
        for (row, hi) in g.iter().zip(&h) {
            lp.push_le(row.clone(), *hi);
        }
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, vertex_oracle(&c, &g, &h), epsilon = 1e-8);

        // KKT: sign, complementary slackness, stationarity
        for ((row, hi), gam) in g.iter().zip(&h).zip(&sol.dual_ineq) {
            assert!(*gam <= 1e-12);
            let slack = hi - row.iter().zip(&sol.x).map(|(a, b)| a * b).sum::<f64>();
            assert!(slack >= -1e-9);
            assert!((gam * slack).abs() < 1e-8);
        }
        for j in 0..dim {
            let at_gamma: f64 = g.iter().zip(&sol.dual_ineq).map(|(row, y)| row[j] * y).sum();
            assert_abs_diff_eq!(at_gamma, c[j], epsilon = 1e-8);
        }
        // strong duality with gamma = dv/dh
        let dual: f64 = h.iter().zip(&sol.dual_ineq).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(dual, sol.objective, epsilon = 1e-8);
    }
}

#[test]
fn lp_multipliers_are_rhs_sensitivities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (g, h) = random_polytope(&mut rng, 3, 5);
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let solve = |h: &[f64]| {
            let mut lp = LinearProgram::new(c.clone());
            for (row, hi) in g.iter().zip(h) {
                lp.push_le(row.clone(), *hi);
            }
            solve_lp(&lp).unwrap()
        };
        let base = solve(&h);
        let step = 1e-6;
        for i in 0..h.len() {
            let mut hp = h.clone();
            hp[i] += step;
            let diff = (solve(&hp).objective - base.objective) / step;
            // one-sided derivative agrees with the multiplier away from ties
            if (diff - base.dual_ineq[i]).abs() > 1e-4 {
                let mut hm = h.clone();
                hm[i] -= step;
                let back = (base.objective - solve(&hm).objective) / step;
                assert!(
                    base.dual_ineq[i] >= diff.min(back) - 1e-4
                        && base.dual_ineq[i] <= diff.max(back) + 1e-4
                );
            }
        }
    }
}

#[test]
fn lp_detects_infeasible_and_unbounded() {
    let lp = LinearProgram::new(vec![1.0, 1.0])
        .with_le(vec![1.0, 1.0], -1.0)
        .nonnegative();
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    let lp = LinearProgram::new(vec![-1.0, 0.0]).with_le(vec![0.0, 1.0], 1.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
}

/// Equality-constrained QP by its KKT system.
fn kkt_oracle(q: &DMatrix<f64>, c: &[f64], e: &[Vec<f64>], f: &[f64]) -> DVector<f64> {
    let n = c.len();
    let m = e.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = q[(i, j)];
        }
        rhs[i] = -c[i];
    }
    for (r, row) in e.iter().enumerate() {
        for j in 0..n {
            k[(n + r, j)] = row[j];
            k[(j, n + r)] = row[j];
        }
        rhs[n + r] = f[r];
    }
    k.lu().solve(&rhs).unwrap().rows(0, n).into_owned()
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.transpose() * &m + DMatrix::identity(n, n) * 0.5
}

#[test]
fn qp_matches_kkt_solution_with_equalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let n = rng.gen_range(2..6);
        let q = random_spd(&mut rng, n);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = rng.gen_range(1..n);
        let e: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let f: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut qp = QuadraticProgram::new(q.clone(), c.clone());
        for (row, fi) in e.iter().zip(&f) {
            qp = qp.with_eq(row.clone(), *fi);
        }
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let x = kkt_oracle(&q, &c, &e, &f);
        for j in 0..n {
            assert_abs_diff_eq!(sol.x[j], x[j], epsilon = 1e-7);
        }
    }
}

#[test]
fn qp_with_inequalities_satisfies_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let n = rng.gen_range(2..5);
        let q = random_spd(&mut rng, n);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (g, h) = random_polytope(&mut rng, n, 4);
        let mut qp = QuadraticProgram::new(q.clone(), c.clone());
        for (row, hi) in g.iter().zip(&h) {
            qp = qp.with_le(row.clone(), *hi);
        }
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let x = DVector::from_vec(sol.x.clone());
        let grad = &q * &x + DVector::from_vec(c.clone());
        let mut stat = grad.clone();
        for ((row, hi), y) in g.iter().zip(&h).zip(&sol.dual_ineq) {
            assert!(*y <= 1e-10);
            let ax: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            assert!(ax <= hi + 1e-8);
            assert!((y * (hi - ax)).abs() < 1e-7);
            for j in 0..n {
                stat[j] -= row[j] * y;
            }
        }
        assert!(stat.amax() < 1e-7, "stationarity residual {}", stat.amax());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_optimum_is_no_worse_than_feasible_points(
        seed in 0u64..10_000,
        probe in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, h) = random_polytope(&mut rng, 3, 4);
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lp = LinearProgram::new(c.clone());
        for (row, hi) in g.iter().zip(&h) {
            lp.push_le(row.clone(), *hi);
        }
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        // scale the probe into the polytope (the origin is interior)
        let worst = g.iter().zip(&h)
            .map(|(row, hi)| row.iter().zip(&probe).map(|(a, b)| a * b).sum::<f64>() / hi)
            .fold(0.0_f64, f64::max);
        let s = if worst > 1.0 { 1.0 / worst } else { 1.0 };
        let val: f64 = c.iter().zip(&probe).map(|(a, b)| a * b * s).sum();
        prop_assert!(sol.objective <= val + 1e-9);
    }

    #[test]
    fn qp_optimum_beats_feasible_perturbations(
        seed in 0u64..10_000,
        dir in proptest::collection::vec(-1.0f64..1.0, 3),
        step in 1e-3f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_spd(&mut rng, 3);
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (g, h) = random_polytope(&mut rng, 3, 3);
        let mut qp = QuadraticProgram::new(q, c);
        for (row, hi) in g.iter().zip(&h) {
            qp = qp.with_le(row.clone(), *hi);
        }
        let sol = solve_qp(&qp).unwrap();
        let y: Vec<f64> = sol.x.iter().zip(&dir).map(|(x, d)| x + step * d).collect();
        let feasible = g.iter().zip(&h)
            .all(|(row, hi)| row.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() <= *hi);
        if feasible {
            prop_assert!(qp.objective_at(&sol.x) <= qp.objective_at(&y) + 1e-9);
        }
    }
}

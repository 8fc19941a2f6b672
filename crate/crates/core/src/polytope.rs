//! Halfspace polyhedra `{theta | H theta <= h}` in a low-dimensional
//! parameter space.
//!
//! Rows are scaled to unit normals on construction so that the fixed
//! tolerances below are independent of the input scaling.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::solver::{solve_lp, LinearProgram, LpStatus};
use crate::{Error, Result};

/// Feasibility tolerance for membership and vertex tests.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Two vertices closer than this (relative to `1 + |theta|`) are the same point.
pub const DEDUP_TOL: f64 = 1e-7;
/// Largest dimension accepted by vertex enumeration.
pub const MAX_ENUMERATION_DIM: usize = 6;
/// Slack allowed on the right-hand side in the Farkas redundancy test.
const REDUNDANCY_TOL: f64 = 1e-9;
const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl Polyhedron {
    /// Builds a polyhedron, scaling each row to a unit normal.
    pub fn new(dim: usize, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                rhs.len()
            )));
        }
        let mut poly = Self {
            dim,
            rows: Vec::with_capacity(rows.len()),
            rhs: Vec::with_capacity(rows.len()),
        };
        for (row, b) in rows.into_iter().zip(rhs) {
            poly.push(row, b)?;
        }
        Ok(poly)
    }

    /// The box `lower <= theta <= upper`.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        let p = lower.len();
        let mut rows = Vec::with_capacity(2 * p);
        let mut rhs = Vec::with_capacity(2 * p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = -1.0;
            rows.push(e.clone());
            rhs.push(-lower[j]);
            e[j] = 1.0;
            rows.push(e);
            rhs.push(upper[j]);
        }
        Self::new(p, rows, rhs)
    }

    /// Appends `row^T theta <= rhs` after normalisation.
    pub fn push(&mut self, row: Vec<f64>, rhs: f64) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension(format!(
                "row of width {} in dimension {}",
                row.len(),
                self.dim
            )));
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > MIN_NORM) || !rhs.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "halfspace normal has norm {norm:e} or non-finite offset"
            )));
        }
        self.rows.push(row.into_iter().map(|v| v / norm).collect());
        self.rhs.push(rhs / norm);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Intersection: rows of `self` followed by rows of `other`.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if self.dim != other.dim {
            return Err(Error::Dimension("intersecting polyhedra of different dimension".into()));
        }
        let mut out = self.clone();
        out.rows.extend(other.rows.iter().cloned());
        out.rhs.extend(other.rhs.iter().copied());
        Ok(out)
    }

    fn without_row(&self, j: usize) -> Polyhedron {
        let mut out = self.clone();
        out.rows.remove(j);
        out.rhs.remove(j);
        out
    }

    /// Largest violation `max_j (H_j theta - h_j)`, or `-inf` with no rows.
    pub fn max_violation(&self, theta: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| dot(r, theta) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        self.max_violation(theta) <= tol
    }

    /// Every row holds with slack strictly greater than `tol`.
    pub fn contains_strictly(&self, theta: &[f64], tol: f64) -> bool {
        self.max_violation(theta) < -tol
    }

    fn lp_over(&self, c: Vec<f64>) -> LinearProgram {
        let mut lp = LinearProgram::new(c);
        for (r, b) in self.rows.iter().zip(&self.rhs) {
            lp.push_le(r.clone(), *b);
        }
        lp
    }

    /// Phase-1 emptiness test.
    pub fn is_empty(&self) -> Result<bool> {
        let sol = solve_lp(&self.lp_over(vec![0.0; self.dim]))?;
        Ok(sol.status == LpStatus::Infeasible)
    }

    /// Centre and radius of the largest inscribed ball, with the radius capped
    /// at `cap` so unbounded inputs stay finite. `None` when empty.
    pub fn chebyshev_ball(&self, cap: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let p = self.dim;
        let mut c = vec![0.0; p + 1];
        c[p] = -1.0;
        let mut lp = LinearProgram::new(c);
        for (r, b) in self.rows.iter().zip(&self.rhs) {
            let mut row = r.clone();
            row.push(1.0);
            lp.push_le(row, *b);
        }
        let mut lower = vec![f64::NEG_INFINITY; p + 1];
        let mut upper = vec![f64::INFINITY; p + 1];
        lower[p] = f64::NEG_INFINITY;
        upper[p] = cap;
        let lp = lp.with_bounds(lower, upper);
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {
                let r = sol.x[p];
                Ok(Some((sol.x[..p].to_vec(), r)))
            }
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Internal("unbounded Chebyshev LP".into())),
        }
    }

    /// Whether row `j` can be dropped without changing the point set.
    ///
    /// Tests feasibility of `{v >= 0 | v^T H_{-j} = H_j, v^T h_{-j} <= h_j}`:
    /// a nonnegative combination of the other rows that dominates row `j`.
    pub fn is_redundant(&self, j: usize) -> Result<bool> {
        if j >= self.rows.len() {
            return Err(Error::RowIndex {
                index: j,
                rows: self.rows.len(),
            });
        }
        let others: Vec<usize> = (0..self.rows.len()).filter(|&i| i != j).collect();
        let m = others.len();
        let mut lp = LinearProgram::new(vec![0.0; m]).nonnegative();
        for d in 0..self.dim {
            let row: Vec<f64> = others.iter().map(|&i| self.rows[i][d]).collect();
            lp.push_eq(row, self.rows[j][d]);
        }
        let offsets: Vec<f64> = others.iter().map(|&i| self.rhs[i]).collect();
        lp.push_le(offsets, self.rhs[j] + REDUNDANCY_TOL * (1.0 + self.rhs[j].abs()));
        Ok(solve_lp(&lp)?.status == LpStatus::Optimal)
    }

    /// Removes redundant rows one at a time; survivors keep their order.
    pub fn minimal_representation(&self) -> Result<Polyhedron> {
        if self.is_empty()? {
            return Err(Error::EmptyPolyhedron);
        }
        let mut current = self.clone();
        let mut j = 0;
        while j < current.rows.len() {
            if current.rows.len() > 1 && current.is_redundant(j)? {
                current = current.without_row(j);
            } else {
                j += 1;
            }
        }
        Ok(current)
    }

    /// Checks boundedness with one LP per coordinate direction.
    pub fn check_bounded(&self) -> Result<()> {
        for d in 0..self.dim {
            for s in [1.0, -1.0] {
                let mut c = vec![0.0; self.dim];
                c[d] = s;
                match solve_lp(&self.lp_over(c))?.status {
                    LpStatus::Optimal => {}
                    LpStatus::Unbounded => return Err(Error::UnboundedPolyhedron(d)),
                    LpStatus::Infeasible => return Err(Error::EmptyPolyhedron),
                }
            }
        }
        Ok(())
    }

    /// All vertices, found by solving every `p`-subset of rows.
    pub fn enumerate_vertices(&self) -> Result<Vec<Vec<f64>>> {
        let p = self.dim;
        if p > MAX_ENUMERATION_DIM {
            return Err(Error::DimensionTooLarge(p, MAX_ENUMERATION_DIM));
        }
        if p == 0 {
            return Ok(vec![Vec::new()]);
        }
        self.check_bounded()?;
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for subset in (0..self.rows.len()).combinations(p) {
            let a = DMatrix::from_fn(p, p, |i, k| self.rows[subset[i]][k]);
            let b = DVector::from_iterator(p, subset.iter().map(|&i| self.rhs[i]));
            let lu = a.lu();
            if lu.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(x) = lu.solve(&b) else { continue };
            let theta: Vec<f64> = x.iter().copied().collect();
            if !self.contains(&theta, FEASIBILITY_TOL) {
                continue;
            }
            let scale = 1.0 + norm(&theta);
            if vertices
                .iter()
                .any(|v| dist(v, &theta) <= DEDUP_TOL * scale)
            {
                continue;
            }
            vertices.push(theta);
        }
        Ok(vertices)
    }
}

/// An affine function `m + n^T theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub m: f64,
    pub n: Vec<f64>,
}

impl AffinePiece {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.m + dot(&self.n, theta)
    }
}

/// Indices of pieces whose epigraph row is essential for `max_i (m_i + n_i^T theta)`
/// over `domain`. Pieces are tested in order against the pieces still kept, so
/// of two identical pieces the later one survives.
pub fn prune_pieces(pieces: &[AffinePiece], domain: &Polyhedron) -> Result<Vec<usize>> {
    if pieces.is_empty() {
        return Err(Error::InvalidArgument("no pieces to prune".into()));
    }
    let p = domain.dim();
    // rows in (theta, kappa): n^T theta - kappa <= -m, then the domain rows
    let piece_row = |pc: &AffinePiece| {
        let mut r = pc.n.clone();
        r.push(-1.0);
        (r, -pc.m)
    };
    let mut alive: Vec<usize> = (0..pieces.len()).collect();
    let mut k = 0;
    while k < alive.len() {
        if alive.len() == 1 {
            break;
        }
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for &i in &alive {
            if pieces[i].n.len() != p {
                return Err(Error::Dimension(format!(
                    "piece {i} has {} coefficients in dimension {p}",
                    pieces[i].n.len()
                )));
            }
            let (r, b) = piece_row(&pieces[i]);
            rows.push(r);
            rhs.push(b);
        }
        for (r, b) in domain.rows().iter().zip(domain.rhs()) {
            let mut r = r.clone();
            r.push(0.0);
            rows.push(r);
            rhs.push(*b);
        }
        let epi = Polyhedron::new(p + 1, rows, rhs)?;
        if epi.is_redundant(k)? {
            alive.remove(k);
        } else {
            k += 1;
        }
    }
    Ok(alive)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polyhedron {
        Polyhedron::from_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        for p in &mut v {
            for x in p.iter_mut() {
                *x = (*x * 1e9).round() / 1e9 + 0.0;
            }
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn dominated_parallel_halfspace_is_redundant() {
        let p = Polyhedron::new(1, vec![vec![1.0], vec![1.0]], vec![1.0, 2.0]).unwrap();
        assert!(p.is_redundant(1).unwrap());
        assert!(!p.is_redundant(0).unwrap());
    }

    #[test]
    fn square_faces_are_essential() {
        let sq = square();
        for j in 0..4 {
            assert!(!sq.is_redundant(j).unwrap());
        }
    }

    #[test]
    fn row_index_checked() {
        assert_eq!(
            square().is_redundant(9),
            Err(Error::RowIndex { index: 9, rows: 4 })
        );
    }

    #[test]
    fn minimal_interval() {
        let p = Polyhedron::new(1, vec![vec![1.0], vec![1.0], vec![-1.0]], vec![1.0, 2.0, 0.0])
            .unwrap();
        let m = p.minimal_representation().unwrap();
        assert_eq!(m.rows(), &[vec![1.0], vec![-1.0]]);
        assert_eq!(m.rhs(), &[1.0, 0.0]);
    }

    #[test]
    fn duplicated_face_removed() {
        let mut sq = square();
        sq.push(vec![2.0, 0.0], 2.0).unwrap();
        let m = sq.minimal_representation().unwrap();
        assert_eq!(m.num_rows(), 4);
        // the earlier copy goes, the later copy stays in last position
        assert_eq!(m.rows()[3], vec![1.0, 0.0]);
    }

    #[test]
    fn empty_polyhedron_signalled() {
        let p = Polyhedron::new(1, vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0]).unwrap();
        assert!(p.is_empty().unwrap());
        assert_eq!(p.minimal_representation(), Err(Error::EmptyPolyhedron));
    }

    #[test]
    fn square_vertices() {
        let v = sorted(square().enumerate_vertices().unwrap());
        assert_eq!(
            v,
            vec![
                vec![-1.0, -1.0],
                vec![-1.0, 1.0],
                vec![1.0, -1.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn simplex_vertices() {
        let p = Polyhedron::new(
            2,
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        let v = sorted(p.enumerate_vertices().unwrap());
        assert_eq!(v, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn degenerate_vertex_kept_once() {
        // apex of a square pyramid: four facets meet at one point
        let p = Polyhedron::new(
            3,
            vec![
                vec![1.0, 0.0, 1.0],
                vec![-1.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0],
                vec![0.0, -1.0, 1.0],
                vec![0.0, 0.0, -1.0],
            ],
            vec![1.0, 1.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        assert_eq!(p.enumerate_vertices().unwrap().len(), 5);
    }

    #[test]
    fn unbounded_input_rejected() {
        let p = Polyhedron::new(2, vec![vec![-1.0, 0.0], vec![0.0, -1.0]], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            p.enumerate_vertices(),
            Err(Error::UnboundedPolyhedron(_))
        ));
    }

    #[test]
    fn dimension_guard() {
        let p = Polyhedron::from_box(&[0.0; 7], &[1.0; 7]).unwrap();
        assert_eq!(p.enumerate_vertices(), Err(Error::DimensionTooLarge(7, 6)));
    }

    #[test]
    fn zero_normal_rejected() {
        assert!(Polyhedron::new(2, vec![vec![0.0, 0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn strictly_dominated_piece_pruned() {
        let dom = Polyhedron::from_box(&[-1.0], &[1.0]).unwrap();
        let pieces = vec![
            AffinePiece { m: 0.0, n: vec![0.0] },
            AffinePiece { m: -10.0, n: vec![1.0] },
        ];
        assert_eq!(prune_pieces(&pieces, &dom).unwrap(), vec![0]);
    }

    #[test]
    fn symmetric_pieces_survive() {
        let dom = Polyhedron::from_box(&[-1.0], &[1.0]).unwrap();
        let pieces = vec![
            AffinePiece { m: 0.0, n: vec![1.0] },
            AffinePiece { m: 0.0, n: vec![-1.0] },
        ];
        assert_eq!(prune_pieces(&pieces, &dom).unwrap(), vec![0, 1]);
    }

    #[test]
    fn duplicate_pieces_keep_one() {
        let dom = Polyhedron::from_box(&[-1.0], &[1.0]).unwrap();
        let pc = AffinePiece { m: 1.0, n: vec![2.0] };
        assert_eq!(prune_pieces(&[pc.clone(), pc], &dom).unwrap(), vec![1]);
    }

    #[test]
    fn chebyshev_of_square() {
        let (c, r) = square().chebyshev_ball(1e6).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        assert!(c.iter().all(|x| x.abs() < 1e-9));
    }
}

//! Adaptive vertex generation: a piecewise-affine underestimator of the LP
//! value function built from dual vertices, refined until its error over the
//! parameter box is certified below a tolerance.
//!
//! Each dual vertex `gamma` gives the affine lower bound
//! `gamma^T t + gamma^T B theta`. The error of the maximum of these pieces on a
//! critical region is attained at a vertex of that region, because the value
//! function is convex and the piece is affine there; checking region vertices
//! with one LP each is therefore exact.

use rayon::prelude::*;

use crate::mplp::{LpPoint, MpLp};
use crate::polytope::{dot, prune_pieces, AffinePiece, Polyhedron};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-4;
/// Relative tolerance under which two pieces are the same piece.
pub const PIECE_TOL: f64 = 1e-7;
/// Regions whose inscribed ball is smaller than this are treated as boundaries.
pub const MIN_REGION_RADIUS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    /// Intercept, $.
    pub m: f64,
    /// Slope per parameter, $/kW.
    pub n: Vec<f64>,
    /// The dual vertex generating the piece.
    pub gamma: Vec<f64>,
}

impl Piece {
    pub fn from_gamma(gamma: Vec<f64>, mplp: &MpLp) -> Self {
        let (m, n) = mplp.piece_of(&gamma);
        Self { m, n, gamma }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.m + dot(&self.n, theta)
    }

    pub fn same_as(&self, other: &Piece) -> bool {
        let scale = PIECE_TOL * (1.0 + self.m.abs().max(other.m.abs()));
        (self.m - other.m).abs() <= scale
            && self
                .n
                .iter()
                .zip(&other.n)
                .all(|(a, b)| (a - b).abs() <= scale)
    }

    fn affine(&self) -> AffinePiece {
        AffinePiece {
            m: self.m,
            n: self.n.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRegion {
    /// Index of the piece attaining the maximum on this region.
    pub piece: usize,
    /// Minimal halfspace representation, including the box rows that remain.
    pub poly: Polyhedron,
}

impl CriticalRegion {
    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        self.poly.contains(theta, tol)
    }

    pub fn contains_strictly(&self, theta: &[f64], tol: f64) -> bool {
        self.poly.contains_strictly(theta, tol)
    }
}

/// The LP solved at one region vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexCheck {
    pub theta: Vec<f64>,
    pub value: f64,
    /// `v(theta) - piece(theta)`, clamped at zero.
    pub gap: f64,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionError {
    pub error: f64,
    pub worst_theta: Vec<f64>,
    pub worst_gamma: Vec<f64>,
    pub vertices: Vec<VertexCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Largest region error, $.
    pub max_error: f64,
    pub pieces: usize,
    pub regions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwaValueFunction {
    pub pieces: Vec<Piece>,
    pub regions: Vec<CriticalRegion>,
    /// Certified error of each region, same order as `regions`.
    pub region_errors: Vec<f64>,
    pub domain: Polyhedron,
    /// `max` of `region_errors`, $.
    pub error: f64,
    pub trace: Vec<IterationRecord>,
}

impl PwaValueFunction {
    /// `max_i (m_i + n_i^T theta)`.
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(theta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of regions containing `theta` up to `tol`.
    pub fn regions_containing(&self, theta: &[f64], tol: f64) -> Vec<usize> {
        (0..self.regions.len())
            .filter(|&r| self.regions[r].contains(theta, tol))
            .collect()
    }

    /// Indices of regions containing `theta` with every row slack above `tol`.
    pub fn regions_strictly_containing(&self, theta: &[f64], tol: f64) -> Vec<usize> {
        (0..self.regions.len())
            .filter(|&r| self.regions[r].contains_strictly(theta, tol))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvgOptions {
    /// Target error, $.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Starting parameters; box vertices and centre when `None`.
    pub initial_samples: Option<Vec<Vec<f64>>>,
}

impl Default for AvgOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iter: 50,
            initial_samples: None,
        }
    }
}

/// One piece per distinct `(m, n)`, first occurrence kept.
pub fn build_underestimator(gammas: &[Vec<f64>], mplp: &MpLp) -> Vec<Piece> {
    let mut pieces: Vec<Piece> = Vec::new();
    for g in gammas {
        let pc = Piece::from_gamma(g.clone(), mplp);
        if !pieces.iter().any(|q| q.same_as(&pc)) {
            pieces.push(pc);
        }
    }
    pieces
}

/// `{theta in domain | piece i is maximal}` for every piece with a
/// full-dimensional region, in minimal representation.
pub fn retrieve_regions(pieces: &[Piece], domain: &Polyhedron) -> Result<Vec<CriticalRegion>> {
    let p = domain.dim();
    let built: Vec<Result<Option<CriticalRegion>>> = (0..pieces.len())
        .into_par_iter()
        .map(|i| {
            let pi = &pieces[i];
            let mut poly = domain.clone();
            for (j, pj) in pieces.iter().enumerate() {
                if j == i {
                    continue;
                }
                let row: Vec<f64> = pj.n.iter().zip(&pi.n).map(|(a, b)| a - b).collect();
                let rhs = pi.m - pj.m;
                if row.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-12 {
                    if rhs < -PIECE_TOL * (1.0 + pi.m.abs()) {
                        return Ok(None);
                    }
                    continue;
                }
                poly.push(row, rhs)?;
            }
            let scale = 1.0 + domain.rhs().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            match poly.chebyshev_ball(scale)? {
                None => Err(Error::Internal(format!("region of piece {i} is empty"))),
                Some((_, r)) if r < -1e-6 * scale => {
                    Err(Error::Internal(format!("region of piece {i} is empty")))
                }
                Some((_, r)) if r <= MIN_REGION_RADIUS => {
                    log::debug!("piece {i} is maximal only on a set without interior");
                    Ok(None)
                }
                Some(_) => Ok(Some(CriticalRegion {
                    piece: i,
                    poly: poly.minimal_representation()?,
                })),
            }
        })
        .collect();
    let mut regions = Vec::new();
    for r in built {
        if let Some(r) = r? {
            debug_assert_eq!(r.poly.dim(), p);
            regions.push(r);
        }
    }
    Ok(regions)
}

fn check_vertex(point: LpPoint, piece: &Piece) -> VertexCheck {
    let gap = (point.value - piece.eval(&point.theta)).max(0.0);
    VertexCheck {
        theta: point.theta,
        value: point.value,
        gap,
        gamma: point.gamma,
    }
}

fn summarise(vertices: Vec<VertexCheck>) -> RegionError {
    let worst = vertices
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.gap.total_cmp(&b.1.gap).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    RegionError {
        error: vertices.get(worst).map_or(0.0, |v| v.gap),
        worst_theta: vertices.get(worst).map_or_else(Vec::new, |v| v.theta.clone()),
        worst_gamma: vertices.get(worst).map_or_else(Vec::new, |v| v.gamma.clone()),
        vertices,
    }
}

/// Largest gap between the LP value and the piece over the region's vertices.
pub fn region_error(region: &CriticalRegion, piece: &Piece, mplp: &MpLp) -> Result<RegionError> {
    let vertices = region
        .poly
        .enumerate_vertices()?
        .into_iter()
        .map(|v| mplp.evaluate_lp_at(&v).map(|pt| check_vertex(pt, piece)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarise(vertices))
}

fn box_samples(lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    let p = lower.len();
    let mut out: Vec<Vec<f64>> = (0..1usize << p)
        .map(|mask| {
            (0..p)
                .map(|j| if mask >> j & 1 == 1 { upper[j] } else { lower[j] })
                .collect()
        })
        .collect();
    out.push(lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect());
    out
}

fn close(a: &[f64], b: &[f64]) -> bool {
    let scale = 1e-9 * (1.0 + a.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= scale)
}

/// Runs the refinement loop until every region error is at most `epsilon`.
pub fn run_avg(mplp: &MpLp, opts: &AvgOptions) -> Result<PwaValueFunction> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            opts.epsilon
        )));
    }
    let domain = mplp.domain().clone();
    let samples = opts
        .initial_samples
        .clone()
        .unwrap_or_else(|| box_samples(mplp.theta_lower(), mplp.theta_upper()));
    let gammas = samples
        .par_iter()
        .map(|s| mplp.evaluate_lp_at(s).map(|pt| pt.gamma))
        .collect::<Result<Vec<_>>>()?;
    let mut pieces = build_underestimator(&gammas, mplp);
    let mut trace = Vec::new();

    for iteration in 1..=opts.max_iter {
        let affine: Vec<AffinePiece> = pieces.iter().map(Piece::affine).collect();
        let keep = prune_pieces(&affine, &domain)?;
        pieces = keep.into_iter().map(|i| pieces[i].clone()).collect();
        let regions = retrieve_regions(&pieces, &domain)?;

        // vertices are shared between neighbouring regions: solve each once
        let region_vertices = regions
            .par_iter()
            .map(|r| r.poly.enumerate_vertices())
            .collect::<Result<Vec<_>>>()?;
        let mut unique: Vec<Vec<f64>> = Vec::new();
        let index: Vec<Vec<usize>> = region_vertices
            .iter()
            .map(|vs| {
                vs.iter()
                    .map(|v| match unique.iter().position(|u| close(u, v)) {
                        Some(i) => i,
                        None => {
                            unique.push(v.clone());
                            unique.len() - 1
                        }
                    })
                    .collect()
            })
            .collect();
        let points = unique
            .par_iter()
            .map(|v| mplp.evaluate_lp_at(v))
            .collect::<Result<Vec<_>>>()?;
        let errors: Vec<RegionError> = regions
            .iter()
            .zip(&index)
            .map(|(r, idx)| {
                summarise(
                    idx.iter()
                        .map(|&i| check_vertex(points[i].clone(), &pieces[r.piece]))
                        .collect(),
                )
            })
            .collect();
        let max_error = errors.iter().map(|e| e.error).fold(0.0, f64::max);
        trace.push(IterationRecord {
            iteration,
            max_error,
            pieces: pieces.len(),
            regions: regions.len(),
        });
        log::debug!(
            "iteration {iteration}: max error {max_error:e}, {} pieces, {} regions",
            pieces.len(),
            regions.len()
        );
        if max_error <= opts.epsilon {
            return Ok(PwaValueFunction {
                region_errors: errors.iter().map(|e| e.error).collect(),
                pieces,
                regions,
                domain,
                error: max_error,
                trace,
            });
        }
        let before = pieces.len();
        for e in &errors {
            for v in e.vertices.iter().filter(|v| v.gap > opts.epsilon) {
                let pc = Piece::from_gamma(v.gamma.clone(), mplp);
                if !pieces.iter().any(|q| q.same_as(&pc)) {
                    pieces.push(pc);
                }
            }
        }
        if pieces.len() == before {
            return Err(Error::Internal(format!(
                "error {max_error:e} above tolerance but no new dual vertex found"
            )));
        }
    }
    Err(Error::NotConverged(opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(m: f64, n: f64) -> Piece {
        Piece {
            m,
            n: vec![n],
            gamma: vec![],
        }
    }

    #[test]
    fn v_shape_regions() {
        let dom = Polyhedron::from_box(&[-1.0], &[1.0]).unwrap();
        let regions = retrieve_regions(&[piece(0.0, 1.0), piece(0.0, -1.0)], &dom).unwrap();
        assert_eq!(regions.len(), 2);
        let v0 = regions[0].poly.enumerate_vertices().unwrap();
        let mut xs: Vec<f64> = v0.iter().map(|v| v[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 0.0).abs() < 1e-12 && (xs[1] - 1.0).abs() < 1e-12);
        let v1 = regions[1].poly.enumerate_vertices().unwrap();
        let mut xs: Vec<f64> = v1.iter().map(|v| v[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 1e-12 && xs[1].abs() < 1e-12);
    }

    #[test]
    fn single_piece_region_is_domain() {
        let dom = Polyhedron::from_box(&[-1.0, 0.0], &[1.0, 2.0]).unwrap();
        let pc = Piece {
            m: 3.0,
            n: vec![1.0, 1.0],
            gamma: vec![],
        };
        let regions = retrieve_regions(&[pc], &dom).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].poly, dom);
    }

    #[test]
    fn identical_pieces_merge() {
        assert!(piece(1.0, 2.0).same_as(&piece(1.0 + 1e-9, 2.0)));
        assert!(!piece(1.0, 2.0).same_as(&piece(1.0, 2.001)));
    }

    #[test]
    fn box_samples_cover_corners_and_centre() {
        let s = box_samples(&[0.0, 0.0], &[1.0, 2.0]);
        assert_eq!(s.len(), 5);
        assert!(s.contains(&vec![1.0, 2.0]));
        assert_eq!(s[4], vec![0.5, 1.0]);
    }
}

//! Test-problem catalog: convex objectives with closed-form (or
//! direct-solve) proximal maps.
//!
//! Every entry implements [`ProxProblem`]. `eval` is extended-real valued:
//! indicator functions return `f64::INFINITY` outside their domain, and
//! callers must treat an infinite value as a guard rather than feed it into
//! arithmetic. `prox(s, x)` computes `argmin_z f(z) + ||z - x||^2 / (2s)`
//! exactly (up to a linear solve for quadratics).
//!
//! Problems are deterministic: the random entries of the corpus are
//! generated from an explicit seed, and the minimum-norm minimizer stored
//! as ground truth is computed once at construction.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("prox step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("box bounds must satisfy lo <= hi componentwise")]
    BoxBounds,
    #[error("matrix factorization failed (not positive definite)")]
    Factorization,
    #[error("csv parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Known optimum of a catalog problem. `xstar` is always the
/// minimum-norm element of the solution set.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub fstar: f64,
    pub xstar: DVector<f64>,
    pub description: String,
}

/// A convex objective with an exact proximal map.
pub trait ProxProblem: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Extended-real objective value; `INFINITY` outside the domain.
    fn eval(&self, x: &DVector<f64>) -> f64;
    /// `prox_{s f}(x)`. Panics are reserved for programmer errors
    /// (dimension mismatch); step sizes must be positive.
    fn prox(&self, s: f64, x: &DVector<f64>) -> DVector<f64>;
    fn ground_truth(&self) -> Option<&GroundTruth> {
        None
    }
}

/// Soft-thresholding, the proximal map of `s * ||.||_1`.
pub fn prox_l1(s: f64, x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.signum() * (v.abs() - s).max(0.0))
}

/// Componentwise clamp, the proximal map of the box indicator.
pub fn prox_box(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| x[i].clamp(lo[i], hi[i]))
}

/// Block soft-thresholding, the proximal map of `s * ||.||_2`.
pub fn prox_l2norm(s: f64, x: &DVector<f64>) -> DVector<f64> {
    let n = x.norm();
    if n > s {
        x * (1.0 - s / n)
    } else {
        DVector::zeros(x.nrows())
    }
}

/// Minimum-norm least-squares solution `A^+ b` via SVD with singular
/// values below `1e-10 * sigma_max` treated as zero.
pub fn min_norm_minimizer(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax;
    svd.solve(b, cutoff).expect("svd solve")
}

/// `f(x) = 0.5 * ||A x - b||^2` with a cached Cholesky factorization of
/// `I + s A^T A` reused while the step size stays constant.
pub struct Quadratic {
    id: String,
    a: DMatrix<f64>,
    b: DVector<f64>,
    ata: DMatrix<f64>,
    atb: DVector<f64>,
    gt: GroundTruth,
    cache: Mutex<Option<(f64, nalgebra::Cholesky<f64, Dyn>)>>,
}

impl Quadratic {
    pub fn new(id: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, CatalogError> {
        if a.nrows() != b.nrows() {
            return Err(CatalogError::Dimension(format!(
                "A is {}x{} but b has {} rows",
                a.nrows(),
                a.ncols(),
                b.nrows()
            )));
        }
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        let xstar = min_norm_minimizer(&a, &b);
        let fstar = 0.5 * (&a * &xstar - &b).norm_squared();
        let gt = GroundTruth {
            fstar,
            xstar,
            description: "minimum-norm least-squares solution".into(),
        };
        Ok(Self { id: id.into(), a, b, ata, atb, gt, cache: Mutex::new(None) })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
}

impl ProxProblem for Quadratic {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }

    fn prox(&self, s: f64, x: &DVector<f64>) -> DVector<f64> {
        assert!(s > 0.0 && s.is_finite(), "invalid prox step {s}");
        let rhs = x + &self.atb * s;
        let mut cache = self.cache.lock().unwrap();
        let refresh = match cache.as_ref() {
            Some((cs, _)) => *cs != s,
            None => true,
        };
        if refresh {
            let n = self.ata.nrows();
            let m = &self.ata * s + DMatrix::identity(n, n);
            let chol = m.cholesky().expect("I + s A^T A is positive definite");
            *cache = Some((s, chol));
        }
        cache.as_ref().unwrap().1.solve(&rhs)
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.gt)
    }
}

/// `f(x) = ||x||_1`.
pub struct L1 {
    id: String,
    dim: usize,
    gt: GroundTruth,
}

impl L1 {
    pub fn new(dim: usize) -> Self {
        Self {
            id: format!("l1-d{dim}"),
            dim,
            gt: GroundTruth {
                fstar: 0.0,
                xstar: DVector::zeros(dim),
                description: "origin".into(),
            },
        }
    }
}

impl ProxProblem for L1 {
    fn id(&self) -> &str {
        &self.id
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &DVector<f64>) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }
    fn prox(&self, s: f64, x: &DVector<f64>) -> DVector<f64> {
        assert!(s > 0.0 && s.is_finite(), "invalid prox step {s}");
        prox_l1(s, x)
    }
    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.gt)
    }
}

/// Indicator of the box `[lo, hi]`; `eval` is `0` inside and `INFINITY`
/// outside, `prox` is the projection (independent of the step size).
pub struct BoxIndicator {
    id: String,
    lo: DVector<f64>,
    hi: DVector<f64>,
    gt: GroundTruth,
}

impl BoxIndicator {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self, CatalogError> {
        if lo.nrows() != hi.nrows() {
            return Err(CatalogError::Dimension("box bounds".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(CatalogError::BoxBounds);
        }
        let xstar = prox_box(&DVector::zeros(lo.nrows()), &lo, &hi);
        Ok(Self {
            id: format!("box-d{}", lo.nrows()),
            gt: GroundTruth {
                fstar: 0.0,
                xstar,
                description: "projection of the origin onto the box".into(),
            },
            lo,
            hi,
        })
    }
}

impl ProxProblem for BoxIndicator {
    fn id(&self) -> &str {
        &self.id
    }
    fn dim(&self) -> usize {
        self.lo.nrows()
    }
    fn eval(&self, x: &DVector<f64>) -> f64 {
        let inside = x
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (l, h))| *v >= *l && *v <= *h);
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, s: f64, x: &DVector<f64>) -> DVector<f64> {
        assert!(s > 0.0 && s.is_finite(), "invalid prox step {s}");
        prox_box(x, &self.lo, &self.hi)
    }
    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.gt)
    }
}

/// `f(x) = ||x||_2`.
pub struct L2Norm {
    id: String,
    dim: usize,
    gt: GroundTruth,
}

impl L2Norm {
    pub fn new(dim: usize) -> Self {
        Self {
            id: format!("l2norm-d{dim}"),
            dim,
            gt: GroundTruth {
                fstar: 0.0,
                xstar: DVector::zeros(dim),
                description: "origin".into(),
            },
        }
    }
}

impl ProxProblem for L2Norm {
    fn id(&self) -> &str {
        &self.id
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &DVector<f64>) -> f64 {
        x.norm()
    }
    fn prox(&self, s: f64, x: &DVector<f64>) -> DVector<f64> {
        assert!(s > 0.0 && s.is_finite(), "invalid prox step {s}");
        prox_l2norm(s, x)
    }
    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.gt)
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random square full-rank least-squares problem.
pub fn seeded_quadratic(dim: usize, seed: u64) -> Quadratic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = uniform_matrix(&mut rng, dim, dim) + DMatrix::identity(dim, dim);
    let b: DVector<f64> = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    Quadratic::new(format!("quadratic-d{dim}-s{seed}"), a, b).unwrap()
}

/// Random underdetermined (`rows < cols`) least-squares problem; the
/// normal matrix `A^T A` is rank deficient and the solution set is an
/// affine subspace.
pub fn seeded_rank_deficient_quadratic(rows: usize, cols: usize, seed: u64) -> Quadratic {
    assert!(rows < cols, "need rows < cols for a rank-deficient problem");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = uniform_matrix(&mut rng, rows, cols);
    let b: DVector<f64> = DVector::from_fn(rows, |_, _| rng.gen_range(-1.0..1.0));
    Quadratic::new(format!("quadratic-rankdef-{rows}x{cols}-s{seed}"), a, b).unwrap()
}

/// Diagonal quadratic with eigenvalues of `A^T A` log-spaced over
/// `decades` decades down from 1 (two per decade) and target all-ones.
/// The wide spectrum makes the slow Tikhonov-driven tail visible over
/// many decades of `k`.
pub fn ill_conditioned_quadratic(decades: u32) -> Quadratic {
    let n = (2 * decades + 1) as usize;
    let eigs: Vec<f64> = (0..n).map(|j| 10f64.powf(-(j as f64) / 2.0)).collect();
    let a = DMatrix::from_diagonal(&DVector::from_iterator(n, eigs.iter().map(|e| e.sqrt())));
    let xhat = DVector::from_element(n, 1.0);
    let b = &a * &xhat;
    Quadratic::new(format!("quadratic-illcond-{decades}dec"), a, b).unwrap()
}

/// One-dimensional `f(x) = 0.5 (x - 1)^2`.
pub fn shifted_quadratic_1d() -> Quadratic {
    Quadratic::new(
        "quadratic-shifted-1d",
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, 1.0),
    )
    .unwrap()
}

/// Deterministic unit vector drawn from a seeded generator.
pub fn random_unit_vector(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: DVector<f64> = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

/// Parses a plain-text CSV matrix: one row per line, comma-separated
/// decimal floats, no header. Blank lines are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>, CatalogError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| CatalogError::Csv { line: i + 1, reason: e.to_string() })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CatalogError::Csv {
                    line: i + 1,
                    reason: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CatalogError::Csv { line: 0, reason: "empty matrix".into() });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Parses a vector given either as one value per line or a single
/// comma-separated line.
pub fn parse_vector_csv(text: &str) -> Result<DVector<f64>, CatalogError> {
    let m = parse_matrix_csv(text)?;
    if m.ncols() == 1 {
        Ok(DVector::from_column_slice(m.column(0).as_slice()))
    } else if m.nrows() == 1 {
        Ok(DVector::from_row_slice(&m.row(0).iter().copied().collect::<Vec<_>>()))
    } else {
        Err(CatalogError::Csv { line: 0, reason: "expected a single row or column".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn l1_prox_soft_thresholds() {
        let x = DVector::from_vec(vec![3.0, -0.5, 0.0, -2.0]);
        let z = prox_l1(1.0, &x);
        assert_eq!(z, DVector::from_vec(vec![2.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn box_prox_clamps() {
        let lo = DVector::from_vec(vec![-1.0, 0.0]);
        let hi = DVector::from_vec(vec![1.0, 2.0]);
        let x = DVector::from_vec(vec![5.0, -3.0]);
        assert_eq!(prox_box(&x, &lo, &hi), DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn l2norm_prox_shrinks_blocks() {
        let x = DVector::from_vec(vec![3.0, 4.0]); // norm 5
        let z = prox_l2norm(1.0, &x);
        assert_abs_diff_eq!(z[0], 2.4, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 3.2, epsilon = 1e-15);
        let small = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(prox_l2norm(1.0, &small), DVector::zeros(2));
    }

    #[test]
    fn quadratic_prox_rank_one_hand_solve() {
        // A = [1 1], b = 1, s = 1, x = 0: (I + A^T A) z = A^T b gives
        // [[2,1],[1,2]] z = (1,1), so z = (1/3, 1/3).
        let q = Quadratic::new(
            "hand",
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let z = q.prox(1.0, &DVector::zeros(2));
        assert_abs_diff_eq!(z[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[1], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_prox_cache_survives_step_change() {
        let q = seeded_quadratic(4, 3);
        let x = random_unit_vector(4, 5);
        let z1 = q.prox(0.7, &x);
        let _ = q.prox(1.3, &x); // invalidates the cached factorization
        let z2 = q.prox(0.7, &x);
        assert_abs_diff_eq!((z1 - z2).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn min_norm_minimizer_solves_consistent_system() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_element(1, 2.0);
        let x = min_norm_minimizer(&a, &b);
        // minimum-norm solution of x1 + x2 = 2 is (1, 1)
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_truth_is_a_minimizer() {
        let q = seeded_rank_deficient_quadratic(3, 5, 11);
        let gt = q.ground_truth().unwrap();
        // gradient at xstar vanishes on the range of A^T
        let grad = q.matrix().transpose() * (q.matrix() * &gt.xstar - q.rhs());
        assert!(grad.norm() < 1e-10);
        assert_abs_diff_eq!(q.eval(&gt.xstar), gt.fstar, epsilon = 1e-15);
    }

    #[test]
    fn box_eval_guards_outside() {
        let b = BoxIndicator::new(DVector::from_element(2, -1.0), DVector::from_element(2, 1.0)).unwrap();
        assert_eq!(b.eval(&DVector::from_element(2, 0.5)), 0.0);
        assert!(b.eval(&DVector::from_element(2, 1.5)).is_infinite());
        assert_eq!(b.ground_truth().unwrap().xstar, DVector::zeros(2));
    }

    #[test]
    fn csv_round_trips() {
        let m = parse_matrix_csv("1.0, 2.0\n3.0, 4.0\n").unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        let v = parse_vector_csv("1.5\n-2.5\n").unwrap();
        assert_eq!(v[1], -2.5);
        assert!(parse_matrix_csv("1.0, x\n").is_err());
        assert!(parse_matrix_csv("").is_err());
    }

    #[test]
    fn ill_conditioned_spectrum() {
        let q = ill_conditioned_quadratic(8);
        assert_eq!(q.dim(), 17);
        let ata = q.matrix().transpose() * q.matrix();
        assert_abs_diff_eq!(ata[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ata[(16, 16)], 1e-8, epsilon = 1e-22);
    }
}

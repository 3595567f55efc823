//! The Tikhonov viscosity path and its structural inequalities.
//!
//! For `eps > 0` the regularized objective `f(x) + eps/2 ||x||^2` has a
//! unique minimizer `xbar(eps)`, computable as `prox_{f/eps}(0)`. Along a
//! decreasing sequence `eps_k = c / k^p` the centers form the viscosity
//! path: norms are nondecreasing, consecutive inner products nonnegative,
//! and consecutive centers drift by at most a multiple of `1/k` of the
//! current norm. [`check_viscosity_inequalities`] verifies all of these on
//! a computed path.

use std::ops::RangeInclusive;

use nalgebra::DVector;
use thiserror::Error;

use crate::params::ParamSchedule;
use crate::prox::ProxProblem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("eps must be positive and finite, got {0}")]
    Eps(f64),
    #[error("the schedule has c = 0; there is no Tikhonov path")]
    NoTikhonov,
    #[error("path range must be nonempty and start at k >= 1")]
    Range,
    #[error("path eps values must be strictly decreasing")]
    NotDecreasing,
    #[error("need at least two path points")]
    TooShort,
}

/// One point of the viscosity path.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub k: u64,
    pub eps: f64,
    pub center: DVector<f64>,
    pub center_norm: f64,
}

/// Minimizer of `f + eps/2 ||.||^2`, computed as `prox_{f/eps}(0)`.
pub fn tikhonov_center(problem: &dyn ProxProblem, eps: f64) -> Result<DVector<f64>, PathError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(PathError::Eps(eps));
    }
    Ok(problem.prox(1.0 / eps, &DVector::zeros(problem.dim())))
}

/// Path points for `eps_k = c / k^p` over the given index range.
pub fn viscosity_path(
    problem: &dyn ProxProblem,
    schedule: &ParamSchedule,
    range: RangeInclusive<u64>,
) -> Result<Vec<PathPoint>, PathError> {
    if schedule.c == 0.0 {
        return Err(PathError::NoTikhonov);
    }
    let (lo, hi) = (*range.start(), *range.end());
    if lo < 1 || hi < lo {
        return Err(PathError::Range);
    }
    let mut points = Vec::with_capacity((hi - lo + 1) as usize);
    for k in lo..=hi {
        let eps = schedule.c_k(k);
        let center = tikhonov_center(problem, eps)?;
        let center_norm = center.norm();
        points.push(PathPoint { k, eps, center, center_norm });
    }
    Ok(points)
}

/// Gap of the regularized objective, `f_eps(x) - f_eps(center)` where
/// `f_eps = f + eps/2 ||.||^2`. By strong convexity this dominates
/// `eps/2 ||x - center||^2`; the debug assertion checks it with slack.
pub fn strong_convexity_gap(
    problem: &dyn ProxProblem,
    eps: f64,
    x: &DVector<f64>,
    center: &DVector<f64>,
) -> f64 {
    let fe = |v: &DVector<f64>| problem.eval(v) + 0.5 * eps * v.norm_squared();
    let gap = fe(x) - fe(center);
    debug_assert!(
        !gap.is_finite() || gap >= 0.5 * eps * (x - center).norm_squared() - 1e-10,
        "strong-convexity lower bound violated"
    );
    gap
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityViolation {
    pub k: u64,
    pub check: &'static str,
    /// Amount by which the inequality failed (positive = violation size).
    pub excess: f64,
}

#[derive(Debug, Clone)]
pub struct ViscosityReport {
    pub pairs_checked: usize,
    pub violations: Vec<ViscosityViolation>,
    /// First index from which the drift bound
    /// `||xbar_{k+1} - xbar_k|| <= p1/k ||xbar_k||` holds through the end
    /// of the path (with `p1 = 1.1 p`); `None` if it never settles.
    pub drift_bound_index: Option<u64>,
    pub tol: f64,
}

impl ViscosityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, for every consecutive pair of path points, the norm-gap bound,
/// the inner-product bracket, the drift bounds, norm monotonicity, and
/// inner-product nonnegativity, all with absolute slack `tol`.
///
/// `p1` is the drift-bound multiplier used for `drift_bound_index`
/// detection; pass the schedule's `1.1 * p`.
pub fn check_viscosity_inequalities(
    path: &[PathPoint],
    tol: f64,
    p1: f64,
) -> Result<ViscosityReport, PathError> {
    if path.len() < 2 {
        return Err(PathError::TooShort);
    }
    if path.windows(2).any(|w| w[1].eps >= w[0].eps) {
        return Err(PathError::NotDecreasing);
    }

    let mut violations = Vec::new();
    let mut record = |k: u64, check: &'static str, excess: f64| {
        if excess > tol {
            violations.push(ViscosityViolation { k, check, excess });
        }
    };
    let mut drift_ok_from: Option<u64> = None;

    for w in path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (e0, e1) = (a.eps, b.eps);
        let d = &b.center - &a.center;
        let dn = d.norm();
        let n0sq = a.center_norm * a.center_norm;
        let n1sq = b.center_norm * b.center_norm;
        let ip = b.center.dot(&a.center);

        // norm-gap bound: ||xbar_+||^2 - ||xbar||^2 >= (e0+e1)/(e0-e1) ||d||^2
        record(a.k, "norm_gap", (e0 + e1) / (e0 - e1) * dn * dn - (n1sq - n0sq));
        // inner-product bracket
        record(a.k, "inner_lower", n0sq + e1 / (e0 - e1) * dn * dn - ip);
        record(a.k, "inner_upper", ip - (n1sq - e0 / (e0 - e1) * dn * dn));
        // drift bounds
        record(a.k, "drift_vs_prev", dn - (e0 - e1) / e1 * a.center_norm);
        record(a.k, "drift_vs_next", dn - (e0 - e1) / e0 * b.center_norm);
        // monotonicity and positivity
        record(a.k, "norm_monotone", a.center_norm - b.center_norm);
        record(a.k, "inner_nonneg", -ip);

        // 1/k drift-bound detection
        if dn <= p1 / (a.k as f64) * a.center_norm + tol {
            drift_ok_from.get_or_insert(a.k);
        } else {
            drift_ok_from = None;
        }
    }

    Ok(ViscosityReport {
        pairs_checked: path.len() - 1,
        violations,
        drift_bound_index: drift_ok_from,
        tol,
    })
}

//! The inertial proximal iteration with vanishing Tikhonov regularization,
//! plus trace recording.
//!
//! One step, for `k >= 1`:
//!
//! ```text
//! y_k     = x_k + alpha_k (x_k - x_{k-1})
//! x_{k+1} = prox_{lambda_k f}(y_k - c_k x_k)
//! ```
//!
//! Indexing starts at `k = 1` with two seed points `x_0, x_1`; the default
//! driver seeds both with the same vector. The extrapolation coefficient
//! `alpha_k = 1 - alpha / k^q` is negative for small `k` whenever
//! `alpha > 1`; this is part of the method and is not clamped.
//!
//! [`recover_subgradient`] inverts the prox step: the vector
//!
//! ```text
//! u_k = (alpha_{k-1} (x_{k-1} - x_{k-2}) + (1 - c_{k-1}) x_{k-1} - x_k) / lambda_{k-1}
//! ```
//!
//! is an exact element of the subdifferential of `f` at `x_k`.

use nalgebra::DVector;
use thiserror::Error;

use crate::params::ParamSchedule;
use crate::prox::ProxProblem;

/// Default floor below which objective-gap values are considered noise
/// when fitting log-log slopes.
pub const DEFAULT_FGAP_FLOOR: f64 = 1e-15;

/// Hard caps for dense-iterate retention.
pub const DENSE_MAX_ITERS: u64 = 100_000;
pub const DENSE_MAX_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("iters must be >= 2, got {0}")]
    Iters(u64),
    #[error("record_every must be >= 1")]
    RecordEvery,
    #[error("seed points have dimension {got}, problem has {want}")]
    Dimension { got: usize, want: usize },
    #[error("dense-iterate retention is capped at iters <= {DENSE_MAX_ITERS}, dim <= {DENSE_MAX_DIM}")]
    DenseCap,
}

/// Rolling state of the iteration: the pair `(x_{k-1}, x_k)` at index `k`.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub k: u64,
    pub x_prev: DVector<f64>,
    pub x_curr: DVector<f64>,
    pub schedule: ParamSchedule,
}

impl SolverState {
    pub fn new(schedule: ParamSchedule, x0: DVector<f64>, x1: DVector<f64>) -> Self {
        Self { k: 1, x_prev: x0, x_curr: x1, schedule }
    }
}

/// Advances the state from index `k` to `k + 1`.
pub fn step(state: &SolverState, problem: &dyn ProxProblem) -> SolverState {
    let s = &state.schedule;
    let k = state.k;
    let y = &state.x_curr + (&state.x_curr - &state.x_prev) * s.alpha_k(k);
    let x_next = problem.prox(s.lambda_k(k), &(y - &state.x_curr * s.c_k(k)));
    SolverState {
        k: k + 1,
        x_prev: state.x_curr.clone(),
        x_curr: x_next,
        schedule: *s,
    }
}

/// Exact subgradient at `x_k` recovered from three consecutive iterates,
/// valid for `k >= 2`.
pub fn recover_subgradient(
    x_k: &DVector<f64>,
    x_km1: &DVector<f64>,
    x_km2: &DVector<f64>,
    schedule: &ParamSchedule,
    k: u64,
) -> DVector<f64> {
    assert!(k >= 2, "subgradient recovery needs k >= 2");
    let km1 = k - 1;
    ((x_km1 - x_km2) * schedule.alpha_k(km1) + x_km1 * (1.0 - schedule.c_k(km1)) - x_k)
        / schedule.lambda_k(km1)
}

/// Recording cadence. `Auto` records every iterate up to `k = 1000` and
/// every tenth one beyond that; the final iterate is always recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordPolicy {
    Auto,
    Every(u64),
}

impl RecordPolicy {
    fn hit(&self, k: u64) -> bool {
        match self {
            RecordPolicy::Auto => k <= 1000 || k % 10 == 0,
            RecordPolicy::Every(n) => (k - 1) % n == 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub iters: u64,
    pub record: RecordPolicy,
    /// Retain every iterate and recovered subgradient (bounded by
    /// [`DENSE_MAX_ITERS`] and [`DENSE_MAX_DIM`]).
    pub dense: bool,
    pub fgap_floor: f64,
    /// Seed recorded in the trace for provenance; the run itself is
    /// deterministic given the seed points.
    pub seed: u64,
}

impl RunOptions {
    pub fn new(iters: u64) -> Self {
        Self { iters, record: RecordPolicy::Auto, dense: false, fgap_floor: DEFAULT_FGAP_FLOOR, seed: 0 }
    }

    pub fn dense(mut self) -> Self {
        self.dense = true;
        self
    }

    pub fn record_every(mut self, n: u64) -> Self {
        self.record = RecordPolicy::Every(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One recorded iterate. `fgap` and `dist_xstar` are present only when the
/// problem carries a ground truth; `subgrad_norm` is absent at `k = 1`
/// where no prox step has happened yet.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: u64,
    pub fgap: Option<f64>,
    pub vel: f64,
    pub subgrad_norm: Option<f64>,
    pub xnorm: f64,
    pub dist_xstar: Option<f64>,
}

/// Full per-k retention for energy diagnostics: `x[i] = x_i` for
/// `i = 0..=k_max`, `u[i]` the recovered subgradient (defined for
/// `i >= 2`), `fval[i] = f(x_i)`.
#[derive(Debug, Clone)]
pub struct DenseTrace {
    pub x: Vec<DVector<f64>>,
    pub u: Vec<Option<DVector<f64>>>,
    pub fval: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<IterateRecord>,
    pub schedule: ParamSchedule,
    pub problem_id: String,
    pub seed: u64,
    pub fgap_floor: f64,
    /// Index of the last finite iterate if the run aborted on a non-finite
    /// value; `None` for a clean run.
    pub aborted_at: Option<u64>,
    pub dense: Option<DenseTrace>,
}

impl Trace {
    /// `(k, value)` series for records where the closure yields a value.
    pub fn series<F: Fn(&IterateRecord) -> Option<f64>>(&self, f: F) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| f(r).map(|v| (r.k as f64, v)))
            .collect()
    }

    pub fn record_at(&self, k: u64) -> Option<&IterateRecord> {
        self.records.iter().find(|r| r.k == k)
    }
}

/// Runs the iteration for `opts.iters` steps from the seed pair
/// `(x0, x1)` and records a trace. A non-finite iterate aborts the run;
/// the partial trace is returned with `aborted_at` set.
pub fn run(
    problem: &dyn ProxProblem,
    schedule: &ParamSchedule,
    x0: DVector<f64>,
    x1: DVector<f64>,
    opts: &RunOptions,
) -> Result<Trace, SolverError> {
    if opts.iters < 2 {
        return Err(SolverError::Iters(opts.iters));
    }
    if let RecordPolicy::Every(0) = opts.record {
        return Err(SolverError::RecordEvery);
    }
    let dim = problem.dim();
    if x0.nrows() != dim || x1.nrows() != dim {
        return Err(SolverError::Dimension { got: x0.nrows(), want: dim });
    }
    if opts.dense && (opts.iters > DENSE_MAX_ITERS || dim > DENSE_MAX_DIM) {
        return Err(SolverError::DenseCap);
    }

    let gt = problem.ground_truth();
    let mut records = Vec::new();
    let mut dense = opts.dense.then(|| DenseTrace {
        x: Vec::with_capacity(opts.iters as usize + 1),
        u: Vec::with_capacity(opts.iters as usize + 1),
        fval: Vec::with_capacity(opts.iters as usize + 1),
    });
    if let Some(d) = dense.as_mut() {
        d.x.push(x0.clone());
        d.u.push(None);
        d.fval.push(problem.eval(&x0));
    }

    let mut state = SolverState::new(*schedule, x0, x1);
    let mut x_km2: Option<DVector<f64>> = None; // x_{k-2} once k >= 2
    let mut aborted_at = None;

    let make_record = |k: u64, x: &DVector<f64>, x_prev: &DVector<f64>, u: Option<&DVector<f64>>| {
        let fgap = gt.and_then(|g| {
            let raw = problem.eval(x) - g.fstar;
            // tolerance for rounding: tiny negative gaps are clipped to zero
            if raw.is_finite() {
                Some(raw.max(0.0))
            } else {
                None
            }
        });
        IterateRecord {
            k,
            fgap,
            vel: (x - x_prev).norm(),
            subgrad_norm: u.map(|u| u.norm()),
            xnorm: x.norm(),
            dist_xstar: gt.map(|g| (x - &g.xstar).norm()),
        }
    };

    loop {
        let k = state.k;
        let u = if k >= 2 {
            Some(recover_subgradient(
                &state.x_curr,
                &state.x_prev,
                x_km2.as_ref().unwrap(),
                schedule,
                k,
            ))
        } else {
            None
        };
        if let Some(d) = dense.as_mut() {
            d.x.push(state.x_curr.clone());
            d.u.push(u.clone());
            d.fval.push(problem.eval(&state.x_curr));
        }
        if opts.record.hit(k) || k == opts.iters {
            records.push(make_record(k, &state.x_curr, &state.x_prev, u.as_ref()));
        }
        if k == opts.iters {
            break;
        }
        let next = step(&state, problem);
        // the norm check also catches components whose squares overflow
        if next.x_curr.iter().any(|v| !v.is_finite()) || !next.x_curr.norm().is_finite() {
            aborted_at = Some(k);
            break;
        }
        x_km2 = Some(state.x_prev.clone());
        state = next;
    }

    Ok(Trace {
        records,
        schedule: *schedule,
        problem_id: problem.id().to_string(),
        seed: opts.seed,
        fgap_floor: opts.fgap_floor,
        aborted_at,
        dense,
    })
}

//! Power-law parameter schedules and their classification into
//! convergence regimes.
//!
//! The iteration studied by this crate is driven by three sequences,
//! all indexed from `k = 1`:
//!
//! * extrapolation `alpha_k = 1 - alpha / k^q` with `alpha > 0`, `0 < q <= 1`,
//! * Tikhonov weight `c_k = c / k^p` with `c >= 0`, `p > 0`,
//! * proximal step `lambda_k = lambda0 * k^delta` with `lambda0 > 0`.
//!
//! Note that `alpha_k` is *negative* for small `k` whenever `alpha > 1`;
//! this is intentional and no clamping is applied. The early iterations
//! simply use reversed extrapolation, which the convergence theory absorbs.
//!
//! [`classify_regime`] maps a schedule to one of five regimes, and
//! [`predicted_rates`] turns a regime into concrete decay exponents for the
//! objective gap, the velocity `||x_k - x_{k-1}||`, and the recovered
//! subgradient norm.

use thiserror::Error;

/// Relative tolerance deciding whether `p` sits on the critical boundary
/// `p = q + 1`.
pub const CRITICAL_REL_TOL: f64 = 1e-12;

/// Default margin used to choose the free rate parameter `s` strictly
/// inside `(1/2, (q+1)/2)` for critical-regime predictions.
pub const DEFAULT_S_MARGIN: f64 = 0.05;

/// Validation errors for [`ParamSchedule::new`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("q must lie in (0, 1], got {0}")]
    Q(f64),
    #[error("c must be nonnegative and finite, got {0}")]
    C(f64),
    #[error("p must be positive and finite, got {0}")]
    P(f64),
    #[error("lambda0 must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("delta must be finite, got {0}")]
    Delta(f64),
}

/// A validated parameter constellation.
///
/// Construct through [`ParamSchedule::new`]; the fields are public for
/// read access in formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSchedule {
    pub alpha: f64,
    pub q: f64,
    pub c: f64,
    pub p: f64,
    pub lambda0: f64,
    pub delta: f64,
}

impl ParamSchedule {
    pub fn new(
        alpha: f64,
        q: f64,
        c: f64,
        p: f64,
        lambda0: f64,
        delta: f64,
    ) -> Result<Self, ParamError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ParamError::Alpha(alpha));
        }
        if !(q.is_finite() && q > 0.0 && q <= 1.0) {
            return Err(ParamError::Q(q));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(ParamError::C(c));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(ParamError::P(p));
        }
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(ParamError::Lambda(lambda0));
        }
        if !delta.is_finite() {
            return Err(ParamError::Delta(delta));
        }
        Ok(Self { alpha, q, c, p, lambda0, delta })
    }

    /// Extrapolation coefficient `1 - alpha / k^q`. Negative for small `k`
    /// when `alpha > 1`.
    #[inline]
    pub fn alpha_k(&self, k: u64) -> f64 {
        1.0 - self.alpha / (k as f64).powf(self.q)
    }

    /// Tikhonov weight `c / k^p`.
    #[inline]
    pub fn c_k(&self, k: u64) -> f64 {
        self.c / (k as f64).powf(self.p)
    }

    /// Proximal step size `lambda0 * k^delta`.
    #[inline]
    pub fn lambda_k(&self, k: u64) -> f64 {
        self.lambda0 * (k as f64).powf(self.delta)
    }

    /// True when `p = q + 1` up to [`CRITICAL_REL_TOL`] (relative).
    pub fn on_critical_boundary(&self) -> bool {
        let q1 = self.q + 1.0;
        (self.p - q1).abs() <= CRITICAL_REL_TOL * q1
    }
}

/// Convergence regimes ordered by precedence: a schedule on the critical
/// boundary is reported as `Critical` even where fast-regime hypotheses
/// would also be satisfiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    /// `p > q + 1`: fast objective-gap decay, weak convergence of iterates.
    WeakFast,
    /// `p = q + 1` exactly (up to tolerance).
    Critical,
    /// `1 < p < q + 1`: slow Tikhonov decay, strong convergence toward the
    /// minimum-norm solution.
    StrongViscosity,
    /// `c = 0`: plain inertial proximal iteration, no Tikhonov term.
    ClassicalNoTikhonov,
    /// No supported hypothesis set covers the schedule.
    OutOfTheory,
}

impl core::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            RegimeKind::WeakFast => "weak-fast",
            RegimeKind::Critical => "critical",
            RegimeKind::StrongViscosity => "strong-viscosity",
            RegimeKind::ClassicalNoTikhonov => "classical-no-tikhonov",
            RegimeKind::OutOfTheory => "out-of-theory",
        };
        f.write_str(s)
    }
}

/// Result of [`classify_regime`]: the regime kind together with the
/// hypotheses that were checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub satisfied_hypotheses: Vec<String>,
    pub violated_hypotheses: Vec<String>,
}

/// Classifies a schedule. Total and deterministic: every valid schedule
/// maps to exactly one regime, and `OutOfTheory` always carries at least
/// one violated hypothesis.
pub fn classify_regime(s: &ParamSchedule) -> Regime {
    let q1 = s.q + 1.0;
    let tol = CRITICAL_REL_TOL * q1;
    let q_lt_1 = s.q < 1.0;
    let above_critical = s.p - q1 > tol;
    let below_critical = q1 - s.p > tol;

    // No Tikhonov term: the fast-regime conclusions hold with p unconstrained.
    if s.c == 0.0 {
        let mut sat = vec!["c = 0 (no Tikhonov term, p unconstrained)".into()];
        let mut vio = Vec::new();
        if q_lt_1 {
            sat.push("0 < q < 1".into());
            if s.delta >= 0.0 {
                sat.push("delta >= 0".into());
            } else {
                vio.push("delta >= 0 required for q < 1".into());
            }
        } else {
            sat.push("q = 1".into());
            if s.alpha > 3.0 {
                sat.push("alpha > 3".into());
            } else {
                vio.push("alpha > 3 required for q = 1".into());
            }
            if s.delta >= 0.0 && s.delta < s.alpha - 3.0 {
                sat.push("0 <= delta < alpha - 3".into());
            } else {
                vio.push("0 <= delta < alpha - 3 required for q = 1".into());
            }
        }
        let kind = if vio.is_empty() {
            RegimeKind::ClassicalNoTikhonov
        } else {
            RegimeKind::OutOfTheory
        };
        return Regime { kind, satisfied_hypotheses: sat, violated_hypotheses: vio };
    }

    if s.on_critical_boundary() {
        let mut sat = vec![format!("p = q + 1 (within rel. tol {CRITICAL_REL_TOL:e})")];
        let mut vio = Vec::new();
        if q_lt_1 {
            sat.push("0 < q < 1".into());
            if s.delta > 0.0 {
                sat.push("delta > 0".into());
            } else if s.delta < 0.0 {
                sat.push("delta < 0 (slow-step branch, log factor)".into());
            } else if s.lambda0 < 1.0 {
                sat.push("delta = 0, lambda0 in (0, 1) (slow-step branch, log factor)".into());
            } else {
                sat.push("delta = 0, lambda0 >= 1 (fast-branch hypotheses)".into());
            }
        } else {
            sat.push("q = 1, p = 2".into());
            if s.alpha > 3.0 {
                sat.push("alpha > 3".into());
            } else {
                vio.push("alpha > 3 required for q = 1".into());
            }
            if s.delta >= 0.0 && s.delta < s.alpha - 3.0 {
                sat.push("0 <= delta < alpha - 3".into());
            } else {
                vio.push("0 <= delta < alpha - 3 required for q = 1".into());
            }
        }
        let kind = if vio.is_empty() { RegimeKind::Critical } else { RegimeKind::OutOfTheory };
        return Regime { kind, satisfied_hypotheses: sat, violated_hypotheses: vio };
    }

    if above_critical {
        // Fast regime candidate.
        let mut sat = vec!["p > q + 1".into()];
        let mut vio = Vec::new();
        if q_lt_1 {
            sat.push("0 < q < 1".into());
            if s.delta >= 0.0 {
                sat.push("delta >= 0".into());
            } else {
                vio.push("delta >= 0 required for q < 1".into());
            }
            let p_at_2 = (s.p - 2.0).abs() <= 1e-12;
            if s.p < 2.0 || p_at_2 {
                sat.push("p <= 2".into());
                if p_at_2 {
                    if s.c > s.q * (1.0 - s.q) {
                        sat.push("c > q(1-q) at p = 2".into());
                    } else {
                        vio.push("c > q(1-q) required at p = 2".into());
                    }
                }
            } else {
                vio.push("p <= 2 required for q < 1".into());
            }
        } else {
            sat.push("q = 1".into());
            if s.alpha > 3.0 {
                sat.push("alpha > 3".into());
            } else {
                vio.push("alpha > 3 required for q = 1".into());
            }
            if s.delta >= 0.0 && s.delta < s.alpha - 3.0 {
                sat.push("0 <= delta < alpha - 3".into());
            } else {
                vio.push("0 <= delta < alpha - 3 required for q = 1".into());
            }
            if s.p > 2.0 {
                sat.push("p > 2".into());
            } else {
                vio.push("p > 2 required for q = 1".into());
            }
        }
        let kind = if vio.is_empty() { RegimeKind::WeakFast } else { RegimeKind::OutOfTheory };
        return Regime { kind, satisfied_hypotheses: sat, violated_hypotheses: vio };
    }

    debug_assert!(below_critical);
    // Slow regime candidate: 1 < p < q + 1.
    let mut sat = vec!["p < q + 1".into()];
    let mut vio = Vec::new();
    if q_lt_1 {
        sat.push("0 < q < 1".into());
    } else {
        vio.push("0 < q < 1 required when p < q + 1".into());
    }
    if s.p > 1.0 {
        sat.push("p > 1".into());
    } else {
        vio.push("p > 1 required when p < q + 1".into());
    }
    if s.delta < 0.0 {
        if s.delta > s.p - s.q - 1.0 {
            sat.push("p - q - 1 < delta < 0".into());
        } else {
            vio.push("delta > p - q - 1 required when delta < 0".into());
        }
    } else if s.delta == 0.0 {
        if s.lambda0 < 1.0 {
            sat.push("delta = 0, lambda0 in (0, 1)".into());
        } else if s.lambda0 == 1.0 {
            sat.push("delta = 0, lambda0 = 1".into());
        } else {
            vio.push("lambda0 <= 1 required when delta = 0 and p < q + 1".into());
        }
    } else {
        vio.push("delta <= 0 required when p < q + 1".into());
    }
    let kind = if vio.is_empty() { RegimeKind::StrongViscosity } else { RegimeKind::OutOfTheory };
    Regime { kind, satisfied_hypotheses: sat, violated_hypotheses: vio }
}

/// What kind of iterate convergence the theory claims for a regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMode {
    /// Weak convergence to some minimizer.
    WeakToMinimizer,
    /// Strong convergence to the minimum-norm minimizer.
    StrongToMinNorm,
    /// Liminf-type strong convergence toward the minimum-norm minimizer.
    LiminfToMinNorm,
    /// Rates only; no iterate convergence claimed.
    NoneClaimed,
}

/// Predicted asymptotic behavior for a classified schedule.
///
/// Exponents are for the plain (unsquared) series: the objective gap
/// `f(x_k) - f*`, the velocity `||x_k - x_{k-1}||`, and the recovered
/// subgradient norm `||u_k||`. A value of `0.0` means "bounded, no decay
/// claimed". `sum_estimates` lists pairs `(series, gamma)` for which
/// `sum_k k^gamma * series_k` is finite; series names are `fgap`,
/// `vel^2`, `subgrad^2`, and `tikhonov_gap` (the regularized gap
/// `f_k(x_k) - f_k(xbar_k)`).
#[derive(Debug, Clone, PartialEq)]
pub struct RatePrediction {
    pub fgap_exponent: f64,
    pub velocity_exponent: f64,
    pub subgrad_exponent: f64,
    pub has_log_factor: bool,
    pub sum_estimates: Vec<(String, f64)>,
    pub convergence_mode: ConvergenceMode,
}

/// Error from [`predicted_rates`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("no rates are available out of theory; violated: {0:?}")]
    OutOfTheory(Vec<String>),
    #[error("s margin must lie in (0, (q+1)/2 - 1/2), got {0}")]
    Margin(f64),
}

/// Rates with the default critical-regime margin ([`DEFAULT_S_MARGIN`]).
pub fn predicted_rates(s: &ParamSchedule, regime: &Regime) -> Result<RatePrediction, RateError> {
    predicted_rates_with_margin(s, regime, DEFAULT_S_MARGIN)
}

/// Rates with an explicit margin for the free parameter `s = (q+1)/2 - margin`
/// used by critical-regime (and slow-regime, `lambda0 < 1`) predictions.
pub fn predicted_rates_with_margin(
    s: &ParamSchedule,
    regime: &Regime,
    margin: f64,
) -> Result<RatePrediction, RateError> {
    let clamp = |e: f64| e.min(0.0);
    match regime.kind {
        RegimeKind::OutOfTheory => {
            Err(RateError::OutOfTheory(regime.violated_hypotheses.clone()))
        }
        RegimeKind::WeakFast | RegimeKind::ClassicalNoTikhonov => {
            let (q, d) = (s.q, s.delta);
            Ok(RatePrediction {
                fgap_exponent: -(q + d + 1.0),
                velocity_exponent: -(q + 1.0) / 2.0,
                subgrad_exponent: clamp(-((q + 1.0) / 2.0 + d)),
                has_log_factor: false,
                sum_estimates: vec![
                    ("fgap".into(), q + d),
                    ("vel^2".into(), 1.0),
                    ("subgrad^2".into(), q + 2.0 * d + 1.0),
                ],
                convergence_mode: ConvergenceMode::WeakToMinimizer,
            })
        }
        RegimeKind::Critical => {
            if !(margin > 0.0 && margin < (s.q + 1.0) / 2.0 - 0.5) {
                return Err(RateError::Margin(margin));
            }
            let sr = (s.q + 1.0) / 2.0 - margin;
            let d = s.delta;
            // The log factor appears on the slow-step branch only.
            let log = d < 0.0 || (d == 0.0 && s.lambda0 < 1.0);
            Ok(RatePrediction {
                fgap_exponent: -(2.0 * sr + d),
                velocity_exponent: -sr,
                subgrad_exponent: clamp(-(sr + d)),
                has_log_factor: log,
                sum_estimates: vec![
                    ("fgap".into(), 2.0 * sr + d - 1.0),
                    ("vel^2".into(), 2.0 * sr - s.q),
                    ("subgrad^2".into(), 2.0 * sr + 2.0 * d),
                ],
                convergence_mode: ConvergenceMode::NoneClaimed,
            })
        }
        RegimeKind::StrongViscosity => {
            let (q, p, d) = (s.q, s.p, s.delta);
            if d == 0.0 && s.lambda0 == 1.0 {
                // Unit step: three sub-cases by the position of p in (1, q+1).
                let mut sums = Vec::new();
                if p > 2.0 * q {
                    sums.push(("tikhonov_gap".into(), q));
                    sums.push(("subgrad^2".into(), 2.0 * q));
                    sums.push(("vel^2".into(), q));
                }
                let (fgap_e, vel_sq_e) = if p <= 2.0 * q {
                    (-p, q - p - 1.0)
                } else if p <= (3.0 * q + 1.0) / 2.0 {
                    (-p, -(q + 1.0))
                } else {
                    let e = 2.0 * p - 4.0 * q - 2.0;
                    let fg = if p < (4.0 * q + 2.0) / 3.0 { -p } else { e };
                    (fg, e)
                };
                Ok(RatePrediction {
                    fgap_exponent: clamp(fgap_e),
                    velocity_exponent: clamp(vel_sq_e / 2.0),
                    subgrad_exponent: clamp(vel_sq_e / 2.0),
                    has_log_factor: false,
                    sum_estimates: sums,
                    convergence_mode: ConvergenceMode::StrongToMinNorm,
                })
            } else {
                Ok(RatePrediction {
                    fgap_exponent: -(p + d),
                    velocity_exponent: -p / 2.0,
                    subgrad_exponent: clamp(-(p / 2.0 + d)),
                    has_log_factor: false,
                    sum_estimates: Vec::new(),
                    convergence_mode: ConvergenceMode::LiminfToMinNorm,
                })
            }
        }
    }
}

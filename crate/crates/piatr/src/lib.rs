//! Inertial proximal iteration with vanishing Tikhonov regularization.
//!
//! The crate implements the iteration
//!
//! ```text
//! y_k     = x_k + alpha_k (x_k - x_{k-1})          alpha_k = 1 - alpha / k^q
//! x_{k+1} = prox_{lambda_k f}(y_k - c_k x_k)       c_k = c / k^p,  lambda_k = lambda0 k^delta
//! ```
//!
//! together with everything needed to study it numerically:
//!
//! * [`params`]: validated power-law schedules, classification into
//!   convergence regimes, and predicted decay exponents;
//! * [`prox`]: a catalog of convex test problems with exact proximal maps
//!   and known minimum-norm minimizers;
//! * [`solver`]: the iteration itself, exact subgradient recovery, and
//!   trace recording;
//! * [`tikhonov`]: the viscosity path of Tikhonov centers and its
//!   structural inequalities;
//! * [`diagnostics`]: log-log rate fitting, summability estimates,
//!   discrete Lyapunov energies with descent ledgers, and product-sequence
//!   growth checks.
//!
//! # Example
//!
//! ```
//! use piatr::params::{classify_regime, predicted_rates, ParamSchedule, RegimeKind};
//! use piatr::prox::{random_unit_vector, seeded_quadratic};
//! use piatr::solver::{run, RunOptions};
//!
//! let sched = ParamSchedule::new(2.0, 0.5, 1.0, 1.8, 1.0, 0.0).unwrap();
//! let regime = classify_regime(&sched);
//! assert_eq!(regime.kind, RegimeKind::WeakFast);
//! let rates = predicted_rates(&sched, &regime).unwrap();
//! assert_eq!(rates.fgap_exponent, -1.5);
//!
//! let problem = seeded_quadratic(5, 42);
//! let x0 = random_unit_vector(5, 7);
//! let trace = run(&problem, &sched, x0.clone(), x0, &RunOptions::new(1000)).unwrap();
//! assert!(trace.records.last().unwrap().fgap.unwrap() < 1e-3);
//! ```

pub mod diagnostics;
pub mod params;
pub mod prox;
pub mod solver;
pub mod tikhonov;

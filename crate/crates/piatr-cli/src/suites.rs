//! Self-provisioning validation suites behind `piatr validate`. Every
//! suite builds its own fixed-seed problems, so repeated invocations are
//! deterministic.

use nalgebra::DVector;
use piatr::diagnostics::{
    energy_strong, energy_weak, pi_growth_rate, pi_sequence, pi_telescoping_holds,
    pi_weighted_sum_check, EnergyConfig,
};
use piatr::params::ParamSchedule;
use piatr::prox::{
    random_unit_vector, seeded_quadratic, seeded_rank_deficient_quadratic, shifted_quadratic_1d,
    BoxIndicator, ProxProblem, L1, L2Norm,
};
use piatr::solver::{recover_subgradient, run, RunOptions};
use piatr::tikhonov::{check_viscosity_inequalities, viscosity_path};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One check line of a suite report. Passes when `value <= bound`.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub suite: &'static str,
    pub check: String,
    pub value: f64,
    pub bound: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    /// Structural inequalities along the Tikhonov viscosity path.
    Viscosity,
    /// Growth, weighted-sum, and telescoping bounds for the product
    /// sequences used in rate proofs.
    Products,
    /// Nonexpansiveness and optimality of the catalog proximal maps.
    Prox,
    /// Descent of the minimizer-anchored energy on a fast-regime run.
    #[value(name = "energy_weak")]
    EnergyWeak,
    /// Ledger of the center-anchored energy on a slow-regime run.
    #[value(name = "energy_strong")]
    EnergyStrong,
    /// Recovered subgradients satisfy the subgradient inequality.
    Subgrad,
}

pub const ALL_SUITES: [Suite; 6] = [
    Suite::Viscosity,
    Suite::Products,
    Suite::Prox,
    Suite::EnergyWeak,
    Suite::EnergyStrong,
    Suite::Subgrad,
];

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Viscosity => "viscosity",
            Suite::Products => "products",
            Suite::Prox => "prox",
            Suite::EnergyWeak => "energy_weak",
            Suite::EnergyStrong => "energy_strong",
            Suite::Subgrad => "subgrad",
        }
    }

    pub fn execute(self) -> Vec<CheckResult> {
        match self {
            Suite::Viscosity => viscosity_suite(),
            Suite::Products => products_suite(),
            Suite::Prox => prox_suite(),
            Suite::EnergyWeak => energy_weak_suite(),
            Suite::EnergyStrong => energy_strong_suite(),
            Suite::Subgrad => subgrad_suite(),
        }
    }
}

fn fast_schedule() -> ParamSchedule {
    ParamSchedule::new(2.0, 0.5, 1.0, 1.8, 1.0, 0.0).unwrap()
}

fn slow_schedule() -> ParamSchedule {
    ParamSchedule::new(2.0, 0.5, 1.0, 1.2, 1.0, 0.0).unwrap()
}

fn viscosity_suite() -> Vec<CheckResult> {
    let sched = slow_schedule();
    let problems: [Box<dyn ProxProblem>; 2] = [
        Box::new(shifted_quadratic_1d()),
        Box::new(seeded_rank_deficient_quadratic(3, 5, 11)),
    ];
    let mut out = Vec::new();
    for p in &problems {
        let path = viscosity_path(p.as_ref(), &sched, 1..=2000).expect("path");
        let report = check_viscosity_inequalities(&path, 1e-9, 1.1 * sched.p).expect("report");
        out.push(CheckResult {
            suite: "viscosity",
            check: format!("{}: inequality violations (pairs: {})", p.id(), report.pairs_checked),
            value: report.violations.len() as f64,
            bound: 0.0,
        });
        out.push(CheckResult {
            suite: "viscosity",
            check: format!("{}: drift bound settles", p.id()),
            value: if report.drift_bound_index.is_some() { 0.0 } else { 1.0 },
            bound: 0.0,
        });
    }
    out
}

fn products_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();

    let seq1 = pi_sequence(2.0, 1.0, 3, 100_000).unwrap();
    out.push(CheckResult {
        suite: "products",
        check: "growth H=2 beta=1: |rate - 2|".into(),
        value: (pi_growth_rate(&seq1) - 2.0).abs(),
        bound: 0.05,
    });
    let monotone_violations =
        seq1.log_pi.windows(2).filter(|w| w[1] < w[0]).count() as f64;
    out.push(CheckResult {
        suite: "products",
        check: "monotonicity violations".into(),
        value: monotone_violations,
        bound: 0.0,
    });

    let seq2 = pi_sequence(1.0, 0.5, 2, 100_000).unwrap();
    out.push(CheckResult {
        suite: "products",
        check: "growth H=1 beta=0.5: |rate - 2|".into(),
        value: (pi_growth_rate(&seq2) - 2.0).abs(),
        bound: 0.1,
    });
    let sum = pi_weighted_sum_check(&seq2, 1.0).unwrap();
    out.push(CheckResult {
        suite: "products",
        check: "weighted-sum ratio: |ratio - 1/H|".into(),
        value: (sum.final_ratio - 1.0).abs(),
        bound: 0.1,
    });
    out.push(CheckResult {
        suite: "products",
        check: "weighted-sum last-decade variation".into(),
        value: sum.last_decade_variation,
        bound: 0.1,
    });

    let tele = pi_sequence(2.0, 1.0, 3, 500).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let failures = (0..50)
        .filter(|_| {
            let a: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..10.0)).collect();
            !pi_telescoping_holds(&tele, &a, 1e-9)
        })
        .count() as f64;
    out.push(CheckResult {
        suite: "products",
        check: "telescoping failures over 50 random sequences".into(),
        value: failures,
        bound: 0.0,
    });
    out
}

fn prox_suite() -> Vec<CheckResult> {
    let dim = 4;
    let problems: [Box<dyn ProxProblem>; 4] = [
        Box::new(seeded_quadratic(dim, 2)),
        Box::new(L1::new(dim)),
        Box::new(BoxIndicator::new(
            DVector::from_element(dim, -1.0),
            DVector::from_element(dim, 1.0),
        )
        .unwrap()),
        Box::new(L2Norm::new(dim)),
    ];
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for p in &problems {
        let mut nonexp = 0.0f64;
        let mut opt = 0.0f64;
        for _ in 0..200 {
            let s = 10f64.powf(rng.gen_range(-1.0..1.0));
            let x = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
            let y = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
            let (px, py) = (p.prox(s, &x), p.prox(s, &y));
            nonexp = nonexp.max((&px - &py).norm() - (&x - &y).norm());
            // prox objective at px must not exceed it at blended probes
            let obj = |z: &DVector<f64>| p.eval(z) + (z - &x).norm_squared() / (2.0 * s);
            let at_px = obj(&px);
            for i in 1..=4 {
                let t = i as f64 / 4.0;
                let z = &px * (1.0 - t) + &py * t;
                opt = opt.max(at_px - obj(&z));
            }
        }
        out.push(CheckResult {
            suite: "prox",
            check: format!("{}: nonexpansiveness excess", p.id()),
            value: nonexp,
            bound: 1e-10,
        });
        out.push(CheckResult {
            suite: "prox",
            check: format!("{}: optimality excess", p.id()),
            value: opt,
            bound: 1e-9,
        });
    }
    out
}

fn energy_weak_suite() -> Vec<CheckResult> {
    let sched = fast_schedule();
    let problem = seeded_quadratic(5, 42);
    let x0 = random_unit_vector(5, 7);
    let trace = run(&problem, &sched, x0.clone(), x0, &RunOptions::new(5000).dense()).unwrap();
    let gt = problem.ground_truth().unwrap();
    let report = energy_weak(&trace, &EnergyConfig::default_weak(&sched), &gt.xstar, gt.fstar)
        .expect("energy");
    vec![
        CheckResult {
            suite: "energy_weak",
            check: "coefficient signs settle".into(),
            value: if report.sign_index.is_some() { 0.0 } else { 1.0 },
            bound: 0.0,
        },
        CheckResult {
            suite: "energy_weak",
            check: "descent violations past sign index".into(),
            value: report.descent_violations.len() as f64,
            bound: 0.0,
        },
    ]
}

fn energy_strong_suite() -> Vec<CheckResult> {
    let sched = slow_schedule();
    let problem = seeded_rank_deficient_quadratic(3, 5, 11);
    let x0 = random_unit_vector(5, 7);
    let trace = run(&problem, &sched, x0.clone(), x0, &RunOptions::new(5000).dense()).unwrap();
    let path = viscosity_path(&problem, &sched, 1..=5000).unwrap();
    let report = energy_strong(&trace, &EnergyConfig::default_strong(&sched), &problem, &path)
        .expect("energy");
    vec![
        CheckResult {
            suite: "energy_strong",
            check: "ledger coefficient signs settle".into(),
            value: if report.sign_index.is_some() { 0.0 } else { 1.0 },
            bound: 0.0,
        },
        CheckResult {
            suite: "energy_strong",
            check: "fitted constant is finite".into(),
            value: if report.c2.is_finite() { 0.0 } else { 1.0 },
            bound: 0.0,
        },
        CheckResult {
            suite: "energy_strong",
            check: "ledger violations in verification half".into(),
            value: report.ledger_violations.len() as f64,
            bound: 0.0,
        },
    ]
}

fn subgrad_suite() -> Vec<CheckResult> {
    let sched = fast_schedule();
    let problems: [Box<dyn ProxProblem>; 2] =
        [Box::new(seeded_quadratic(4, 2)), Box::new(L1::new(4))];
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for p in &problems {
        let x0 = random_unit_vector(4, 5);
        let trace = run(p.as_ref(), &sched, x0.clone(), x0, &RunOptions::new(2000).dense()).unwrap();
        let dense = trace.dense.as_ref().unwrap();
        let mut worst = 0.0f64;
        for k in (2..=2000u64).step_by(50) {
            let u = recover_subgradient(
                &dense.x[k as usize],
                &dense.x[(k - 1) as usize],
                &dense.x[(k - 2) as usize],
                &sched,
                k,
            );
            let xk = &dense.x[k as usize];
            let fk = p.eval(xk);
            for _ in 0..20 {
                let z = DVector::from_fn(4, |_, _| rng.gen_range(-2.0..2.0));
                let fz = p.eval(&z);
                if fz.is_finite() {
                    worst = worst.max(fk + u.dot(&(&z - xk)) - fz);
                }
            }
        }
        out.push(CheckResult {
            suite: "subgrad",
            check: format!("{}: subgradient inequality excess", p.id()),
            value: worst,
            bound: 1e-9,
        });
    }
    out
}

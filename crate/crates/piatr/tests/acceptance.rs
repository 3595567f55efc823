//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (visible with `--nocapture`, and always on failure).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use piatr::diagnostics::{
    energy_strong, energy_weak, fit_rate, pi_growth_rate, pi_sequence, pi_telescoping_holds,
    pi_weighted_sum_check, sum_estimate, EnergyConfig, RateFitResult, SumVerdict,
};
use piatr::params::ParamSchedule;
use piatr::prox::{
    ill_conditioned_quadratic, min_norm_minimizer, random_unit_vector, seeded_quadratic,
    seeded_rank_deficient_quadratic, shifted_quadratic_1d, BoxIndicator, L2Norm, L1, ProxProblem,
};
use piatr::solver::{run, RunOptions, Trace};
use piatr::tikhonov::{check_viscosity_inequalities, viscosity_path};

fn finish(num: u32, desc: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("criterion {num} ({desc}): PASS");
    } else {
        println!("criterion {num} ({desc}): FAIL {failures:?}");
        panic!("criterion {num} failed: {failures:?}");
    }
}

fn check(failures: &mut Vec<String>, ok: bool, what: &str) {
    if !ok {
        failures.push(what.to_string());
    }
}

fn weak_fast_sched() -> ParamSchedule {
    ParamSchedule::new(2.0, 0.5, 1.0, 1.8, 1.0, 0.0).unwrap()
}

fn run_weak_fast(dense: bool) -> Trace {
    let p = seeded_quadratic(5, 42);
    let x0 = random_unit_vector(5, 7);
    let mut o = RunOptions::new(100_000).with_seed(7);
    if dense {
        o = o.dense();
    }
    run(&p, &weak_fast_sched(), x0.clone(), x0, &o).unwrap()
}

fn strong_sched() -> ParamSchedule {
    ParamSchedule::new(2.0, 0.5, 1.0, 1.2, 1.0, 0.0).unwrap()
}

fn run_strong(dense: bool) -> Trace {
    let p = seeded_rank_deficient_quadratic(3, 5, 11);
    let x0 = random_unit_vector(5, 7);
    let mut o = RunOptions::new(100_000).with_seed(7);
    if dense {
        o = o.dense();
    }
    run(&p, &strong_sched(), x0.clone(), x0, &o).unwrap()
}

fn slope(trace: &Trace, series: Vec<(f64, f64)>, floor: f64) -> Option<f64> {
    let _ = trace;
    match fit_rate(&series, 0.5, floor).unwrap() {
        RateFitResult::Fit(f) => Some(f.slope),
        RateFitResult::BelowNoiseFloor => None,
    }
}

#[test]
fn criterion_01_weak_fast_rates() {
    let mut f = Vec::new();
    let t0 = Instant::now();
    let tr = run_weak_fast(false);
    let elapsed = t0.elapsed();
    let fgap_slope = slope(&tr, tr.series(|r| r.fgap), tr.fgap_floor);
    let vel_slope = slope(&tr, tr.series(|r| Some(r.vel)), 0.0);
    check(&mut f, fgap_slope.map_or(false, |s| s <= -1.35), &format!("fgap slope {fgap_slope:?} must be <= -1.35"));
    check(&mut f, vel_slope.map_or(false, |s| s <= -0.6), &format!("vel slope {vel_slope:?} must be <= -0.6"));
    check(&mut f, elapsed.as_secs_f64() < 5.0, &format!("runtime {elapsed:?} must be < 5 s"));
    finish(1, "weak-fast rates on a full-rank quadratic, 1e5 iterations", &f);
}

#[test]
fn criterion_02_growing_step_rates() {
    let mut f = Vec::new();
    let s = ParamSchedule::new(2.0, 0.5, 1.0, 1.8, 1.0, 1.0).unwrap();
    let p = seeded_quadratic(5, 42);
    let x0 = random_unit_vector(5, 7);
    let t0 = Instant::now();
    let tr = run(&p, &s, x0.clone(), x0, &RunOptions::new(20_000)).unwrap();
    let elapsed = t0.elapsed();
    let last_live = tr
        .records
        .iter()
        .filter(|r| r.fgap.unwrap_or(0.0) > tr.fgap_floor)
        .map(|r| r.k)
        .max()
        .unwrap_or(0);
    let floored_early = last_live < 10_000;
    let steep = slope(&tr, tr.series(|r| r.fgap), tr.fgap_floor).map_or(false, |s| s <= -2.3);
    check(
        &mut f,
        floored_early || steep,
        &format!("need fgap slope <= -2.3 or floor before k = 1e4 (last live k = {last_live})"),
    );
    check(&mut f, elapsed.as_secs_f64() < 5.0, &format!("runtime {elapsed:?} must be < 5 s"));
    finish(2, "delta = 1 accelerates the objective gap", &f);
}

#[test]
fn criterion_03_strong_convergence_to_min_norm() {
    let mut f = Vec::new();
    let t0 = Instant::now();
    let tr = run_strong(false);
    let elapsed = t0.elapsed();
    let d100 = tr.record_at(100).unwrap().dist_xstar.unwrap();
    let dend = tr.record_at(100_000).unwrap().dist_xstar.unwrap();
    check(
        &mut f,
        dend < 0.05 * d100,
        &format!("dist to min-norm solution must shrink 20x: {dend:e} vs {d100:e}"),
    );
    let fgap_slope = slope(&tr, tr.series(|r| r.fgap), tr.fgap_floor);
    check(&mut f, fgap_slope.map_or(false, |s| s <= -1.1), &format!("fgap slope {fgap_slope:?} must be <= -1.1"));
    check(&mut f, elapsed.as_secs_f64() < 10.0, &format!("runtime {elapsed:?} must be < 10 s"));
    finish(3, "strong-viscosity run approaches the minimum-norm solution", &f);
}

#[test]
fn criterion_04_critical_normalized_tail() {
    let mut f = Vec::new();
    // Critical boundary p = q + 1 with a sub-unit step. The problem needs a
    // spectrum reaching below c / k_max^p for the k^(-p) log-corrected tail
    // to be visible; the log-spaced diagonal quadratic provides it.
    let s = ParamSchedule::new(2.0, 0.5, 1.0, 1.5, 0.9, 0.0).unwrap();
    let p = ill_conditioned_quadratic(8);
    let x0 = random_unit_vector(p.dim(), 7);
    let tr = run(&p, &s, x0.clone(), x0, &RunOptions::new(100_000)).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in tr.records.iter().filter(|r| r.k >= 1000) {
        if let Some(g) = r.fgap {
            let norm = g * (r.k as f64).powf(1.5) / (r.k as f64).ln();
            lo = lo.min(norm);
            hi = hi.max(norm);
        }
    }
    let ratio = hi / lo;
    check(
        &mut f,
        ratio.is_finite() && ratio < 10.0,
        &format!("normalized fgap * k^1.5 / ln k must stay within 10x over [1e3, 1e5], got {ratio:.2}"),
    );
    finish(4, "critical-regime gap follows k^-1.5 ln k", &f);
}

#[test]
fn criterion_05_summability() {
    let mut f = Vec::new();
    let tr = run_weak_fast(false);
    let (q, d) = (tr.schedule.q, tr.schedule.delta);
    let fgap: Vec<(u64, f64)> = tr.records.iter().filter_map(|r| r.fgap.map(|v| (r.k, v))).collect();
    let vel2: Vec<(u64, f64)> = tr.records.iter().map(|r| (r.k, r.vel * r.vel)).collect();
    let sub2: Vec<(u64, f64)> =
        tr.records.iter().filter_map(|r| r.subgrad_norm.map(|v| (r.k, v * v))).collect();
    for (name, series, gamma) in [
        ("k^(q+delta) fgap", &fgap, q + d),
        ("k vel^2", &vel2, 1.0),
        ("k^(q+2delta+1) subgrad^2", &sub2, q + 2.0 * d + 1.0),
    ] {
        let rep = sum_estimate(series, gamma).unwrap();
        check(
            &mut f,
            rep.verdict == SumVerdict::SummableConsistent,
            &format!("{name}: last-decade fraction {:.4} must be < 0.05", rep.last_decade_fraction),
        );
    }
    finish(5, "weighted sums of the weak-fast run are summable-consistent", &f);
}

#[test]
fn criterion_06_subgradient_validity() {
    let mut f = Vec::new();
    let sched = weak_fast_sched();
    let problems: Vec<Box<dyn ProxProblem>> =
        vec![Box::new(seeded_quadratic(5, 42)), Box::new(L1::new(5))];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let probes: Vec<DVector<f64>> = (0..100)
        .map(|_| {
            let scale = 10f64.powf(rng.gen_range(-1.0..0.7));
            DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0)) * scale
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for p in &problems {
        let x0 = random_unit_vector(5, 7);
        let tr = run(p.as_ref(), &sched, x0.clone(), x0, &RunOptions::new(10_000).dense()).unwrap();
        let dense = tr.dense.as_ref().unwrap();
        for k in (2..=10_000usize).step_by(10) {
            // 1000 sampled iterates
            let x = &dense.x[k];
            let u = dense.u[k].as_ref().unwrap();
            let fx = dense.fval[k];
            for z in &probes {
                let viol = fx + u.dot(&(z - x)) - p.eval(z);
                worst = worst.max(viol);
            }
        }
    }
    check(&mut f, worst < 1e-9, &format!("max subgradient-inequality violation {worst:e} must be < 1e-9"));
    finish(6, "recovered subgradients satisfy the subgradient inequality", &f);
}

#[test]
fn criterion_07_path_inequalities() {
    let mut f = Vec::new();
    let s = strong_sched();
    let t0 = Instant::now();
    for prob in [shifted_quadratic_1d(), seeded_rank_deficient_quadratic(3, 5, 11)] {
        let path = viscosity_path(&prob, &s, 1..=10_000).unwrap();
        let rep = check_viscosity_inequalities(&path, 1e-9, 1.1 * s.p).unwrap();
        check(
            &mut f,
            rep.passed(),
            &format!("{}: {} path-inequality violations", prob.id(), rep.violations.len()),
        );
    }
    let elapsed = t0.elapsed();
    check(&mut f, elapsed.as_secs_f64() < 5.0, &format!("runtime {elapsed:?} must be < 5 s"));
    finish(7, "viscosity-path inequalities hold to k = 1e4", &f);
}

#[test]
fn criterion_08_product_sequences() {
    let mut f = Vec::new();
    let t0 = Instant::now();
    let seq1 = pi_sequence(2.0, 1.0, 3, 1_000_000).unwrap();
    let rate1 = pi_growth_rate(&seq1);
    check(&mut f, (1.96..=2.04).contains(&rate1), &format!("H=2, beta=1 growth rate {rate1:.4} must be in [1.96, 2.04]"));
    let seq2 = pi_sequence(1.0, 0.5, 2, 1_000_000).unwrap();
    let ratio2 = seq2.log_pi_at(1_000_000) / 1_000_000f64.sqrt();
    check(&mut f, (1.9..=2.1).contains(&ratio2), &format!("H=1, beta=0.5 log pi / sqrt(n) {ratio2:.4} must be in [1.9, 2.1]"));
    let sum = pi_weighted_sum_check(&seq2, 1.0).unwrap();
    check(
        &mut f,
        sum.converged && (sum.final_ratio - 1.0).abs() < 0.1,
        &format!("weighted-sum ratio {:.4} must approach 1/H within 10%", sum.final_ratio),
    );
    let seq3 = pi_sequence(2.0, 1.0, 3, 600).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut telescoping_ok = true;
    for _ in 0..100 {
        let len = rng.gen_range(10..500usize);
        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..10.0f64)).collect();
        telescoping_ok &= pi_telescoping_holds(&seq3, &a, 1e-9);
    }
    check(&mut f, telescoping_ok, "telescoping bound failed on a random nonnegative sequence");
    let elapsed = t0.elapsed();
    check(&mut f, elapsed.as_secs_f64() < 5.0, &format!("runtime {elapsed:?} must be < 5 s"));
    finish(8, "product-sequence growth, weighted sums, and telescoping", &f);
}

#[test]
fn criterion_09_energy_descent() {
    let mut f = Vec::new();
    // weak variant on the fast run
    let tr = run_weak_fast(true);
    let p = seeded_quadratic(5, 42);
    let gt = p.ground_truth().unwrap();
    let rep = energy_weak(&tr, &EnergyConfig::default_weak(&tr.schedule), &gt.xstar, gt.fstar).unwrap();
    check(&mut f, rep.sign_index.is_some(), "weak energy coefficients never settle nonnegative");
    check(
        &mut f,
        rep.descent_violations.is_empty(),
        &format!("weak descent violations at {:?}", &rep.descent_violations[..rep.descent_violations.len().min(5)]),
    );
    // strong variant on the slow run
    let tr2 = run_strong(true);
    let p2 = seeded_rank_deficient_quadratic(3, 5, 11);
    let path = viscosity_path(&p2, &tr2.schedule, 1..=100_000).unwrap();
    let rep2 = energy_strong(&tr2, &EnergyConfig::default_strong(&tr2.schedule), &p2, &path).unwrap();
    check(&mut f, rep2.sign_index.is_some(), "strong energy coefficients never settle nonnegative");
    check(&mut f, rep2.c2.is_finite(), "strong ledger constant must be finite");
    check(
        &mut f,
        rep2.ledger_violations.is_empty(),
        &format!("strong ledger violations at {:?}", &rep2.ledger_violations[..rep2.ledger_violations.len().min(5)]),
    );
    finish(9, "discrete energies descend past their detected indices", &f);
}

/// Minimum-norm solution of `A^T A x = A^T b` through the KKT system of
/// `min ||x||^2 / 2 s.t. A^T A x = A^T b`, solved independently by SVD.
fn kkt_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let c = a.transpose() * a;
    let d = a.transpose() * b;
    let mut kkt = DMatrix::zeros(2 * n, 2 * n);
    kkt.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    kkt.view_mut((0, n), (n, n)).copy_from(&c);
    kkt.view_mut((n, 0), (n, n)).copy_from(&c);
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(n, n).copy_from(&d);
    let svd = kkt.svd(true, true);
    let smax = svd.singular_values.max();
    let sol = svd.solve(&rhs, 1e-12 * smax).unwrap();
    sol.rows(0, n).into_owned()
}

#[test]
fn criterion_10_prox_properties() {
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let problems: Vec<Box<dyn ProxProblem>> = vec![
        Box::new(seeded_quadratic(5, 42)),
        Box::new(L1::new(5)),
        Box::new(
            BoxIndicator::new(DVector::from_element(4, -1.0), DVector::from_element(4, 1.5)).unwrap(),
        ),
        Box::new(L2Norm::new(4)),
    ];
    let mut worst_nonexp = f64::NEG_INFINITY;
    let mut worst_opt = f64::NEG_INFINITY;
    for p in &problems {
        let dim = p.dim();
        for _ in 0..1000 {
            let s = 10f64.powf(rng.gen_range(-1.3..1.3));
            let x = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
            let y = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
            let px = p.prox(s, &x);
            let py = p.prox(s, &y);
            worst_nonexp = worst_nonexp.max((&px - &py).norm() - (&x - &y).norm());
            // prox optimality: (x - px)/s is a subgradient of f at px
            let u = (&x - &px) / s;
            let fz = p.eval(&px);
            for _ in 0..8 {
                // probe inside a region where f is finite: blend toward py
                let t: f64 = rng.gen_range(0.0..1.0);
                let w = &px * (1.0 - t) + &py * t;
                let viol = fz + u.dot(&(&w - &px)) - p.eval(&w);
                worst_opt = worst_opt.max(viol);
            }
        }
    }
    check(&mut f, worst_nonexp < 1e-10, &format!("nonexpansiveness excess {worst_nonexp:e} must be < 1e-10"));
    check(&mut f, worst_opt < 1e-9, &format!("prox-optimality violation {worst_opt:e} must be < 1e-9"));

    let mut worst_mn = 0.0f64;
    for _ in 0..20 {
        let m = rng.gen_range(2..=5usize);
        let n = rng.gen_range(m + 1..=8usize);
        let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let got = min_norm_minimizer(&a, &b);
        let want = kkt_min_norm(&a, &b);
        worst_mn = worst_mn.max((got - want).norm());
    }
    check(&mut f, worst_mn < 1e-8, &format!("min-norm minimizer deviates {worst_mn:e} from the KKT oracle"));
    finish(10, "prox maps are nonexpansive, optimal, and min-norm consistent", &f);
}

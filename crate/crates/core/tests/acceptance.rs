//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits nonzero if any fails.

use std::f64::consts::{E, LN_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mginf::busy_cycle::{bc_bounds, cycle_peak_formula, BusyCycleLaw, RenewalMode};
use mginf::busy_period::{bp_lower_bound, peak_formula, BusyPeriodLaw};
use mginf::numerics::{integrate_semi_infinite_scaled, GridFunction};
use mginf::service::cross_ratio;
use mginf::simulator::{
    dkw_bound, mean_and_se, run_busy_cycles, run_renewal_counts, EmpiricalCdf, SimConfig,
    StartMode,
};
use mginf::validation::{validate, Budget};
use mginf::{BetaSpec, BetaTable, MomentMethod, QueueParams, ServiceLaw, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn eta_upper(lambda: f64, rho: f64) -> f64 {
    lambda / rho.exp_m1()
}

/// 18 constant laws over ρ ∈ [0.2, 3] and the drift band, plus two tabulated ones.
fn sweep() -> Vec<QueueParams> {
    let mut sets = Vec::new();
    let lambdas = [1.0, 2.0, 0.5];
    for (i, &rho) in [0.2, 0.5, 0.69, 1.0, 2.0, 3.0].iter().enumerate() {
        for (j, &f) in [0.02, 0.5, 1.0].iter().enumerate() {
            let lambda = lambdas[(i + j) % 3];
            let eta = -lambda + f * (eta_upper(lambda, rho) + lambda);
            sets.push(QueueParams::with_eta(lambda, rho, eta));
        }
    }
    for (lambda, rho, knots) in [
        (1.0, 1.0, vec![(0.0, 0.1), (2.0, -0.3), (5.0, 0.2)]),
        (2.0, 0.5, vec![(0.0, 1.0), (1.0, -0.5), (3.0, 2.0)]),
    ] {
        let table = BetaTable::new(knots).expect("valid knots");
        sets.push(QueueParams::new(lambda, rho, 0.0, BetaSpec::Tabulated(table)));
    }
    sets
}

fn laws() -> Vec<ServiceLaw> {
    sweep()
        .into_iter()
        .map(|p| ServiceLaw::new(p).expect("sweep laws are admissible"))
        .collect()
}

fn canonical() -> ServiceLaw {
    ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 0.0)).unwrap()
}

fn grid_transform(f: &GridFunction, s: f64) -> f64 {
    let dt = f.dt();
    let v = f.values();
    let n = v.len() - 1;
    let w = |k: usize| (-s * k as f64 * dt).exp() * v[k];
    s * dt * ((1..n).map(w).sum::<f64>() + 0.5 * (w(0) + w(n))) + w(n)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for law in laws() {
        let expect = law.rho().exp_m1() / law.lambda();
        let got = BusyPeriodLaw::new(law).moments(1, &Tolerance::default()).unwrap().values[0];
        worst = worst.max((got - expect).abs() / expect);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(10),
        format!("20 laws, max rel err {worst:.2e} (tol 1e-8), {elapsed:.2?} (limit 10 s)"),
    )
}

fn criterion_2() -> Outcome {
    let (mut analytic, mut numeric, mut invariance): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for law in laws() {
        let bp = BusyPeriodLaw::new(law.clone());
        let peaks = bp.peaks().unwrap();
        match law.eta() {
            Some(eta) => {
                let closed = bp.transform_closed(1.0 / law.alpha()).unwrap();
                let formula = peaks.pi_formula.unwrap();
                analytic = analytic.max((formula - closed).abs());
                numeric = numeric
                    .max((peaks.pi_numeric - closed).abs())
                    .max((peaks.pi_numeric - formula).abs());
                let (lambda, rho) = (law.lambda(), law.rho());
                for p in [0.0, 0.3, 0.7] {
                    let params = QueueParams::with_eta_and_p(lambda, rho, eta, p);
                    let BetaSpec::Constant(beta) = params.beta else { unreachable!() };
                    let moved = BusyPeriodLaw::new(ServiceLaw::new(params).unwrap());
                    let pi_p = moved.transform_closed(1.0 / law.alpha()).unwrap();
                    invariance = invariance
                        .max((pi_p - closed).abs())
                        .max((peak_formula(lambda, rho, p, beta) - formula).abs())
                        .max(
                            (cycle_peak_formula(lambda, rho, p, beta)
                                - cycle_peak_formula(lambda, rho, 0.0, eta))
                            .abs(),
                        );
                }
            }
            None => {
                let grid = bp
                    .cdf_general(40.0 / law.lambda(), bp.default_dt(), &Tolerance::grid())
                    .unwrap();
                let from_grid = grid_transform(&grid.cdf, 1.0 / law.alpha());
                numeric = numeric.max((peaks.pi_numeric - from_grid).abs());
            }
        }
    }
    outcome(
        analytic <= 1e-8 && numeric <= 1e-4 && invariance <= 1e-10,
        format!(
            "formula vs transform {analytic:.1e} (tol 1e-8), numeric {numeric:.1e} (tol 1e-4), p-invariance {invariance:.1e} (tol 1e-10)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for (lambda, rho, eta) in [
        (1.0, 1.0, 0.0),
        (2.0, 3.0, 0.05),
        (0.5, 0.2, 2.0),
        (1.0, 1.0, -0.9),
        (1.5, 0.69, 0.5),
    ] {
        let bc = BusyCycleLaw::new(ServiceLaw::new(QueueParams::with_eta(lambda, rho, eta)).unwrap());
        let bp = bc.busy_period();
        let (t_max, dt, tol) = (10.0 / lambda, bp.default_dt(), Tolerance::grid());
        let b = bp.cdf_general(t_max, dt, &tol).unwrap();
        let z = bc.cdf_general(t_max, dt, &tol).unwrap();
        for (t, v) in b.cdf.iter() {
            worst.0 = worst.0.max((v - bp.cdf_closed(t).unwrap()).abs());
        }
        for (t, v) in z.cdf.iter() {
            worst.1 = worst.1.max((v - bc.cdf_closed(t).unwrap()).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst.0 < 1e-3 && worst.1 < 1e-3 && elapsed < Duration::from_secs(30),
        format!(
            "5 laws, sup|B| {:.1e}, sup|Z| {:.1e} (tol 1e-3), {elapsed:.2?} (limit 30 s)",
            worst.0, worst.1
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let law = canonical();
    let bc = BusyCycleLaw::new(law.clone());
    let mut cfg = SimConfig::new(law, 42);
    cfg.n_cycles = 200_000;
    let sim = run_busy_cycles(&cfg).unwrap();
    let n = sim.busy_samples.len() as f64;
    let bound = dkw_bound(200_000, 0.01);
    let ks_b = EmpiricalCdf::new(&sim.busy_samples)
        .unwrap()
        .ks_distance(|t| bc.busy_period().cdf_closed(t).unwrap());
    let ks_z = EmpiricalCdf::new(&sim.cycle_samples)
        .unwrap()
        .ks_distance(|t| bc.cdf_closed(t).unwrap());
    let g0 = (-1.0f64).exp();
    let atom = sim.busy_samples.iter().filter(|&&b| b == 0.0).count() as f64 / n;
    let z_sigma = (atom - g0).abs() / (g0 * (1.0 - g0) / n).sqrt();
    let zero_cycles = sim.cycle_samples.iter().filter(|&&z| z == 0.0).count();
    let elapsed = start.elapsed();
    outcome(
        ks_b < bound && ks_z < bound && z_sigma < 3.0 && zero_cycles == 0 && elapsed < Duration::from_secs(60),
        format!(
            "KS(B) {ks_b:.5}, KS(Z) {ks_z:.5} (DKW {bound:.5}), atom {atom:.5} at {z_sigma:.2}σ, {zero_cycles} zero cycles, {elapsed:.2?} (limit 60 s)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst_numeric: f64 = 0.0;
    let mut origin_exact = true;
    for (lambda, rho, eta) in [(1.0, 1.0, 0.0), (2.0, 0.5, 1.0), (0.5, 2.0, -0.4), (1.0, 1.0, -1.0)] {
        let bc = BusyCycleLaw::new(ServiceLaw::new(QueueParams::with_eta(lambda, rho, eta)).unwrap());
        let numeric = bc.renewal(10.0, 0.05, RenewalMode::Numeric).unwrap().grid;
        origin_exact &= numeric.values()[0] == 1.0 && bc.renewal_closed(0.0).unwrap() == 1.0;
        for (t, r) in numeric.iter() {
            worst_numeric = worst_numeric.max((r - bc.renewal_closed(t).unwrap()).abs());
        }
    }

    let law = canonical();
    let bc = BusyCycleLaw::new(law.clone());
    let mut cfg = SimConfig::new(law, 42);
    cfg.start_mode = StartMode::ArrivalAtZero;
    cfg.n_replications = 200;
    cfg.renewal_horizon = 10.0;
    cfg.renewal_times = vec![1.0, 2.0, 5.0, 10.0];
    let counts = run_renewal_counts(&cfg).unwrap();
    let mut worst_sigma: f64 = 0.0;
    for (j, &t) in counts.renewal_times.iter().enumerate() {
        let xs: Vec<f64> = counts.renewal_counts.iter().map(|c| c[j] as f64).collect();
        let (mean, se) = mean_and_se(&xs);
        worst_sigma = worst_sigma.max((mean - bc.renewal_closed(t).unwrap()).abs() / se);
    }

    let report = validate(&QueueParams::with_eta(1.0, 1.0, 0.0), Budget::Quick, 42).unwrap();
    let flagged = report.paper_flags.iter().any(|f| {
        f.equation.starts_with("renewal function") && (f.printed_value - f.computed_value).abs() > 0.1
    });
    outcome(
        worst_numeric <= 1e-6 && worst_sigma < 3.0 && origin_exact && flagged,
        format!(
            "numeric vs closed {worst_numeric:.1e} (tol 1e-6), simulated counts within {worst_sigma:.2}σ (limit 3), R(0) exact: {origin_exact}, printed form flagged: {flagged}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut riccati: f64 = 0.0;
    let mut mean: f64 = 0.0;
    let mut bracket = true;
    for law in laws() {
        let reach = 10.0 / law.decay_rate();
        for k in 1..=100 {
            riccati = riccati.max(law.riccati_residual(k as f64 * reach / 100.0).unwrap().abs());
        }
        let m = integrate_semi_infinite_scaled(|t| law.survival(t), 1.0 / law.decay_rate(), &Tolerance::fine())
            .unwrap();
        mean = mean.max((m - law.alpha()).abs());
        if law.is_constant() {
            for n in 2..=4 {
                let q = law.moment(n, MomentMethod::Quadrature).unwrap().value;
                let (lo, hi) = law.moment_bounds(n).unwrap();
                bracket &= lo <= q && q <= hi;
            }
        }
    }
    pass &= riccati < 1e-6 && mean <= 1e-6 && bracket;
    notes.push(format!("Riccati {riccati:.1e}, mean-is-α {mean:.1e}, bounds bracket: {bracket}"));

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cross: f64 = 0.0;
    for _ in 0..10 {
        let lambda = rng.random_range(0.5..2.0);
        let mut rhos = [0.0; 4];
        for r in &mut rhos {
            *r = rng.random_range(0.1..3.0);
        }
        let cap = rhos.iter().map(|&r| eta_upper(lambda, r)).fold(f64::INFINITY, f64::min);
        let eta = rng.random_range(-0.95 * lambda..cap);
        let t = rng.random_range(0.1..3.0);
        let (lhs, rhs) = cross_ratio(lambda, eta, rhos, t).unwrap();
        cross = cross.max((lhs - rhs).abs());
    }
    pass &= cross <= 1e-10;
    notes.push(format!("cross-ratio {cross:.1e}"));

    let mut series: f64 = 0.0;
    for rho in [0.3, 0.5, 0.69] {
        for f in [0.1, 0.5, 1.0] {
            let eta = -1.0 + f * (eta_upper(1.0, rho) + 1.0);
            let law = ServiceLaw::new(QueueParams::with_eta(1.0, rho, eta)).unwrap();
            for n in 1..=4 {
                let s = law.moment(n, MomentMethod::Series).unwrap().value;
                let q = law.moment(n, MomentMethod::Quadrature).unwrap().value;
                series = series.max((s - q).abs());
            }
        }
    }
    pass &= series <= 1e-6;
    notes.push(format!("series vs quadrature {series:.1e}"));

    let law = canonical();
    let mut lattice_ok = true;
    let mut diffs = Vec::new();
    for n in 1..=4 {
        let q = law.moment(n, MomentMethod::Quadrature).unwrap().value;
        let d = law.moment(n, MomentMethod::Discretized { m: 2048 }).unwrap().value;
        lattice_ok &= (d - q).abs() <= 1e-3 * q.abs().max(1.0);
        diffs.push(format!("{:.1e}", d - q));
    }
    pass &= lattice_ok;
    notes.push(format!("lattice m=2048 diffs [{}] (tol 1e-3·max(1, E[Tⁿ]))", diffs.join(", ")));
    outcome(pass, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let mut violating = 0;
    let mut worst_b: (f64, f64) = (0.0, 0.0);
    let mut worst_z: (f64, f64) = (0.0, 0.0);
    let mut upper_ok = true;
    let mut sets = laws();
    sets.push(ServiceLaw::new(QueueParams::with_eta(1.0, LN_2, 0.3)).unwrap());
    let n_laws = sets.len();
    for law in &sets {
        let (lambda, rho) = (law.lambda(), law.rho());
        let bc = BusyCycleLaw::new(law.clone());
        let t_max = 10.0 / lambda;
        let (b, z): (Vec<(f64, f64)>, Vec<(f64, f64)>) = if law.is_constant() {
            let ts: Vec<f64> = (0..=1000).map(|k| k as f64 * t_max / 1000.0).collect();
            (
                ts.iter().map(|&t| (t, bc.busy_period().cdf_closed(t).unwrap())).collect(),
                ts.iter().map(|&t| (t, bc.cdf_closed(t).unwrap())).collect(),
            )
        } else {
            let dt = bc.busy_period().default_dt();
            let tol = Tolerance::grid();
            (
                bc.busy_period().cdf_general(t_max, dt, &tol).unwrap().cdf.iter().collect(),
                bc.cdf_general(t_max, dt, &tol).unwrap().cdf.iter().collect(),
            )
        };
        let mut bad = false;
        for &(t, v) in &b {
            let gap = bp_lower_bound(lambda, rho, t) - v;
            if gap > 1e-9 {
                bad = true;
                if gap > worst_b.0 {
                    worst_b = (gap, t);
                }
            }
        }
        for &(t, v) in &z {
            let (lo, hi) = bc_bounds(lambda, rho, t);
            if lo - v > 1e-9 {
                bad = true;
                if lo - v > worst_z.0 {
                    worst_z = (lo - v, t);
                }
            }
            upper_ok &= v <= hi + 1e-9;
        }
        violating += usize::from(bad);
    }
    let limit = bc_bounds(1.0, LN_2, 1.0).0;
    let limit_ok = (limit - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-9;
    outcome(
        violating == 0 && upper_ok && limit_ok,
        format!(
            "{violating}/{n_laws} laws break a lower bound (worst B gap {:.3} at t={:.2}, worst Z gap {:.3} at t={:.2}); upper bound holds: {upper_ok}; ln 2 limit value: {limit_ok}",
            worst_b.0, worst_b.1, worst_z.0, worst_z.1
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for (lambda, rho, p) in [(1.0, 1.0, 0.0), (2.0, 0.5, 0.4), (0.5, 3.0, 0.0)] {
        let law = ServiceLaw::new(QueueParams::new(lambda, rho, p, BetaSpec::Constant(-lambda))).unwrap();
        let bc = BusyCycleLaw::new(law.clone());
        for k in 0..=200 {
            let t = k as f64 * 0.05 / lambda;
            worst = worst
                .max((law.cdf(t) - 1.0).abs())
                .max((bc.busy_period().cdf_closed(t).unwrap() - 1.0).abs())
                .max((bc.cdf_closed(t).unwrap() + (-lambda * t).exp_m1()).abs())
                .max((bc.renewal_closed(t).unwrap() - (1.0 + lambda * t)).abs() / (1.0 + lambda * t));
        }
    }
    let degenerate_ok = worst <= 1e-14;

    let mut exp_worst: f64 = 0.0;
    for (lambda, rho) in [(1.0, 1.0), (2.0, 0.3), (0.5, 2.5)] {
        let bp = BusyPeriodLaw::new(ServiceLaw::new(QueueParams::with_eta(lambda, rho, eta_upper(lambda, rho))).unwrap());
        let rate = lambda / rho.exp_m1();
        for k in 0..=200 {
            let t = k as f64 * 0.05 / lambda;
            exp_worst = exp_worst.max((bp.cdf_closed(t).unwrap() + (-rate * t).exp_m1()).abs());
        }
    }
    let bp = BusyPeriodLaw::new(ServiceLaw::new(QueueParams::with_eta(1.0, 1.0, 1.0 / E.ln().exp_m1())).unwrap());
    let pi = bp.peaks().unwrap().pi;
    let pi_ok = (pi - (-1.0f64).exp()).abs() < 1e-12;
    outcome(
        degenerate_ok && exp_worst < 1e-12 && pi_ok,
        format!(
            "β=−λ: max deviation {worst:.1e}; upper band: B vs exponential {exp_worst:.1e}, pi − 1/e = {:.1e}",
            pi - (-1.0f64).exp()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("mean busy period", criterion_1),
        ("peak triple agreement", criterion_2),
        ("general vs closed CDFs", criterion_3),
        ("Monte Carlo law match", criterion_4),
        ("renewal function", criterion_5),
        ("service-law structure", criterion_6),
        ("bounds", criterion_7),
        ("degenerate endpoints", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let r = run();
        failed += usize::from(!r.pass);
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

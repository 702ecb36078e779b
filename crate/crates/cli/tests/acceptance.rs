//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are
//! printed even when every criterion passes.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ctmdp_core::benchmarks::{
    build_example, example2_closed_form, example2_coefficients, example3_closed_form, gaussian_generator_moment,
    state_action_grid, BasisCombination, ClosedFormKind, ExampleParams,
};
use ctmdp_core::instances::{random_instance, InstanceSpec};
use ctmdp_core::lp::{solve_unconstrained, ENUMERATION_CAP};
use ctmdp_core::lyapunov::{check_drift, check_drift_finite};
use ctmdp_core::occupation::{
    balance_residual, extract_policy_default, transient_distribution, value_of_measure, Criterion,
};
use ctmdp_core::simulate::{
    check_moment_bound, discounted_value_mc, empirical_occupation, stream_rng, Start, StationaryRule,
};
use ctmdp_core::structure::{
    decompose_mixture, enumerate_deterministic, is_extreme, mixture_policy, OccupationPolytope,
};
use ctmdp_core::{occupation_of_stationary, solve_constrained, FiniteCtmdp, OccupationMeasure, StationaryPolicy};
use rand::Rng;

type Check = (u32, &'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn two_state() -> FiniteCtmdp {
    ctmdp::files::load_model(&fixtures().join("two_state.json")).unwrap()
}

fn enumeration_best(m: &FiniteCtmdp) -> f64 {
    enumerate_deterministic(m, ENUMERATION_CAP)
        .unwrap()
        .iter()
        .map(|d| value_of_measure(m, &d.eta, Criterion::Reward).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn within_budget(elapsed: Duration, secs: u64) -> bool {
    elapsed < Duration::from_secs(secs)
}

fn c1_lp_matches_enumeration() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let m = random_instance(&InstanceSpec::default(), 1001, i).unwrap();
        let sol = solve_unconstrained(&m, ENUMERATION_CAP).unwrap();
        worst = worst.max((sol.value - enumeration_best(&m)).abs());
    }
    let t = start.elapsed();
    verdict(
        worst <= 1e-8 && within_budget(t, 30),
        format!(
            "200 instances, max |LP - enumeration| = {worst:.2e}, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn c2_balance_residual() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut measures = 0;
    for i in 0..200 {
        let m = random_instance(&InstanceSpec::default(), 1001, i).unwrap();
        for d in enumerate_deterministic(&m, ENUMERATION_CAP).unwrap() {
            worst = worst.max(balance_residual(&m, &d.eta).unwrap());
            measures += 1;
        }
        let sol = solve_constrained(&m).unwrap();
        worst = worst.max(balance_residual(&m, &sol.eta).unwrap());
        measures += 1;
    }
    verdict(
        worst <= 1e-8,
        format!("{measures} measures, max residual = {worst:.2e}"),
    )
}

fn c3_randomizations() -> Verdict {
    let start = Instant::now();
    let mut violations = 0;
    let mut randomized = 0;
    for i in 0..100u64 {
        let n = 1 + (i % 2) as usize;
        let m = random_instance(&InstanceSpec::constrained(n), 1003, i).unwrap();
        let sol = solve_constrained(&m).unwrap();
        if sol.randomizations > n {
            violations += 1;
        }
        if sol.randomizations > 0 {
            randomized += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        violations == 0 && within_budget(t, 30),
        format!(
            "100 instances (N = 1, 2), {violations} exceed N, {randomized} randomize, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn c4_round_trip() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut rng = stream_rng(1004, u64::MAX);
    for i in 0..100 {
        let m = random_instance(&InstanceSpec::default(), 1004, i).unwrap();
        let probs: Vec<Vec<f64>> = (0..m.num_states())
            .map(|x| {
                let row: Vec<f64> = (0..m.num_actions(x)).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|p| p / s).collect()
            })
            .collect();
        let phi = StationaryPolicy::new(probs).unwrap();
        let eta = occupation_of_stationary(&m, &phi).unwrap();
        assert!(eta.marginal().iter().all(|p| *p > 0.0), "marginal support is not full");
        worst = worst.max(extract_policy_default(&eta).max_abs_diff(&phi));
    }
    verdict(worst <= 1e-9, format!("100 pairs, max |phi' - phi| = {worst:.2e}"))
}

fn c5_extreme_points() -> Verdict {
    let spec = InstanceSpec {
        max_states: 3,
        max_actions: 2,
        ..InstanceSpec::default()
    };
    let (mut vertices, mut vertex_fail, mut midpoints, mut midpoint_fail) = (0, 0, 0, 0);
    for i in 0..50 {
        let m = random_instance(&spec, 1005, i).unwrap();
        let poly = OccupationPolytope::from_model(&m);
        let dets = enumerate_deterministic(&m, ENUMERATION_CAP).unwrap();
        for d in &dets {
            vertices += 1;
            if !is_extreme(&d.eta, &poly, 1e-9).unwrap() {
                vertex_fail += 1;
            }
        }
        for (a, da) in dets.iter().enumerate() {
            for db in &dets[a + 1..] {
                if da.eta.max_abs_diff(&db.eta) <= 1e-9 {
                    continue;
                }
                let mid = OccupationMeasure::mixture(&[0.5, 0.5], &[&da.eta, &db.eta]).unwrap();
                midpoints += 1;
                if is_extreme(&mid, &poly, 1e-9).unwrap() {
                    midpoint_fail += 1;
                }
            }
        }
    }
    verdict(
        vertex_fail == 0 && midpoint_fail == 0,
        format!(
            "{vertices} deterministic measures ({vertex_fail} not extreme), \
             {midpoints} midpoints ({midpoint_fail} extreme)"
        ),
    )
}

fn c6_mixtures() -> Verdict {
    let mut worst_residual: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    let mut worst_policy: f64 = 0.0;
    let mut too_many = 0;
    for i in 0..50 {
        let m = random_instance(&InstanceSpec::constrained(1), 1006, i).unwrap();
        let sol = solve_constrained(&m).unwrap();
        let dec = decompose_mixture(&sol.eta, &m, 1, ENUMERATION_CAP).unwrap();
        if dec.len() > 2 {
            too_many += 1;
        }
        worst_residual = worst_residual.max(dec.residual);
        // values of the mixture are the weighted values of its deterministic parts
        let mixed = |which: Criterion| -> f64 {
            dec.weights
                .iter()
                .zip(&dec.measures)
                .map(|(w, eta)| w * value_of_measure(&m, eta, which).unwrap())
                .sum()
        };
        worst_value = worst_value
            .max((mixed(Criterion::Reward) - sol.value).abs())
            .max((mixed(Criterion::Cost(0)) - sol.cost_values[0]).abs());
        // and the stationary policy of the mixture reproduces the optimum
        let eta_phi = occupation_of_stationary(&m, &mixture_policy(&dec)).unwrap();
        worst_policy = worst_policy.max(eta_phi.max_abs_diff(&sol.eta));
        worst_value = worst_value
            .max((value_of_measure(&m, &eta_phi, Criterion::Reward).unwrap() - sol.value).abs())
            .max((value_of_measure(&m, &eta_phi, Criterion::Cost(0)).unwrap() - sol.cost_values[0]).abs());
    }
    verdict(
        too_many == 0 && worst_residual <= 1e-8 && worst_value <= 1e-8 && worst_policy <= 1e-8,
        format!(
            "50 instances, {too_many} need > 2 policies, max residual = {worst_residual:.2e}, \
             max value gap = {worst_value:.2e}, mixture policy gap = {worst_policy:.2e}"
        ),
    )
}

fn c7_monte_carlo() -> Verdict {
    let start = Instant::now();
    let m = two_state();
    let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
    // truncation at T = 40 leaves 2 e^{-40}, far below the standard error
    let est = discounted_value_mc(&m, &phi, &Start::Initial, |x, k| m.reward(*x, *k), 100_000, 40.0, 0).unwrap();
    let n = 100_000;
    let eta = empirical_occupation(&m, &phi, n, 0).unwrap();
    let marg = eta.marginal();
    let mut z_occ: f64 = 0.0;
    for (p_hat, p) in marg.iter().zip([0.75, 0.25]) {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        z_occ = z_occ.max((p_hat - p).abs() / se);
    }
    let z_val = (est.mean - 1.5).abs() / est.std_error;
    let t = start.elapsed();
    verdict(
        est.covers(1.5) && z_occ <= 3.0 && within_budget(t, 60),
        format!(
            "value {:.5} +- {:.5} (z = {z_val:.2}), occupation ({:.5}, {:.5}) (max z = {z_occ:.2}), {:.2}s",
            est.mean,
            est.std_error,
            marg[0],
            marg[1],
            t.as_secs_f64()
        ),
    )
}

fn c8_moment_bounds() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();

    let m = two_state();
    let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
    let w = [1.0, 2.0];
    let drift = check_drift_finite(&m, &w, 0.0).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let mc = check_moment_bound(&m, &phi, |x: &usize| w[*x], 0.0, drift.b_min, 0, t, 10_000, 8).unwrap();
        let law = transient_distribution(&m, &phi, &[1.0, 0.0], t).unwrap();
        let exact = law[0] * w[0] + law[1] * w[1];
        let pass = mc.passed && exact <= mc.bound && mc.estimate.covers(exact);
        ok &= pass;
        notes.push(format!(
            "2-state t={t}: {:.4} vs exact {exact:.4} <= {:.4}",
            mc.estimate.mean, mc.bound
        ));
    }

    let params = ExampleParams::default();
    let model = build_example(1, &params).unwrap();
    let f = example2_closed_form(params.p, params.delta, params.alpha).unwrap();
    let rule = StationaryRule(|x: f64| f.policy(x));
    let quartic = BasisCombination {
        one: 1.0,
        fourth: 1.0,
        ..Default::default()
    };
    let rho = 6.0 * params.beta + 0.1;
    let grid = state_action_grid(&model, 50.0, 2001, 21);
    let d = check_drift(
        |x: &f64| quartic.eval(*x),
        rho,
        &grid,
        |x, a| Some(gaussian_generator_moment(&model, *x, *a, &quartic)),
    );
    for t in [0.5, 1.0, 2.0] {
        let mc = check_moment_bound(
            &model,
            &rule,
            |x: &f64| quartic.eval(*x),
            rho,
            d.b_min,
            params.x0,
            t,
            10_000,
            9,
        )
        .unwrap();
        ok &= mc.passed;
        notes.push(format!("example 1 t={t}: {:.4} <= {:.4}", mc.estimate.mean, mc.bound));
    }
    verdict(ok, notes.join("; "))
}

fn c9_closed_forms() -> Verdict {
    let start = Instant::now();
    let mut rng = stream_rng(1009, 0);
    let mut worst_identity: f64 = 0.0;
    let mut worst_policy: f64 = 0.0;
    for _ in 0..100 {
        let alpha = rng.random_range(0.5..3.0);
        let delta = rng.random_range(0.5..2.0);
        // real roots need p/δ <= α²
        let p = delta * alpha * alpha * rng.random_range(0.01..1.0);
        let c = example2_coefficients(p, delta, alpha).unwrap();
        for r in c.identity_residuals(p, delta, alpha) {
            worst_identity = worst_identity.max(r.abs());
        }
        let f = example2_closed_form(p, delta, alpha).unwrap();
        for x in [-5.0, -1.0, 0.0, 0.5, 3.0] {
            let expected = c.l2 * (f64::abs(x) + 1.0) / (2.0 * delta);
            worst_policy = worst_policy.max((f.policy(x) - expected).abs());
        }
    }
    let e3 = example3_closed_form(1.0, 1.0, 1.0, 2.0).unwrap();
    let (kappa, slope) = match e3.kind {
        ClosedFormKind::Example3 { kappa, slope, .. } => (kappa, slope),
        _ => (f64::NAN, f64::NAN),
    };
    let e3_ok = (kappa - 1.0).abs() <= 1e-12 && (slope - (2f64.sqrt() - 1.0)).abs() <= 1e-12;
    let t = start.elapsed();
    verdict(
        worst_identity <= 1e-12 && worst_policy <= 1e-12 && e3_ok && within_budget(t, 5),
        format!(
            "100-point sweep: identities {worst_identity:.2e}, policy {worst_policy:.2e}; \
             example 3 kappa = {kappa}, slope = {slope:.15}; {:.3}s",
            t.as_secs_f64()
        ),
    )
}

fn c10_drift_check() -> Verdict {
    let params = ExampleParams::default();
    let model = build_example(1, &params).unwrap();
    let quartic = BasisCombination {
        one: 1.0,
        fourth: 1.0,
        ..Default::default()
    };
    let rho = 6.0 * params.beta + 0.1;
    let grid = state_action_grid(&model, 50.0, 2001, 21);
    let d = check_drift(
        |x: &f64| quartic.eval(*x),
        rho,
        &grid,
        |x, a| Some(gaussian_generator_moment(&model, *x, *a, &quartic)),
    );
    let mut rng = stream_rng(1010, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: f64 = rng.random_range(-50.0..50.0);
        let a = rng.random_range(params.beta0..=params.beta * (x.abs() + 1.0));
        let formula = (x.abs() + 1.0) * (6.0 * x * x * a + 3.0 * a * a);
        let got = gaussian_generator_moment(&model, x, a, &quartic);
        // relative: the moment reaches 1e7 on this range, where 1e-10 absolute is below one ulp
        worst = worst.max((got - formula).abs() / formula.abs().max(1.0));
    }
    verdict(
        d.feasible && d.b_min.is_finite() && worst <= 1e-10,
        format!(
            "rho = {rho}, b_min = {:.4}, worst point {:?}; 1000 moments, max relative gap = {worst:.2e}",
            d.b_min, d.worst_point
        ),
    )
}

fn c11_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_ctmdp");
    let fx = fixtures();
    let two = fx.join("two_state.json");
    let constrained = fx.join("two_state_constrained.json");
    let policy = fx.join("policy_mixed.json");
    let s = |p: &PathBuf| p.display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["validate".into(), "--model".into(), s(&two)],
        vec![
            "drift-check".into(),
            "--model".into(),
            s(&two),
            "--w".into(),
            "1,2".into(),
        ],
        vec!["solve".into(), "--model".into(), s(&constrained)],
        vec![
            "eval-policy".into(),
            "--model".into(),
            s(&two),
            "--policy".into(),
            s(&policy),
        ],
        vec![
            "simulate".into(),
            "--model".into(),
            s(&two),
            "--n".into(),
            "2000".into(),
            "--seed".into(),
            "7".into(),
        ],
        vec![
            "occupation".into(),
            "--model".into(),
            s(&two),
            "--mc".into(),
            "--n".into(),
            "5000".into(),
        ],
        vec![
            "occupation".into(),
            "--model".into(),
            s(&two),
            "--format".into(),
            "csv".into(),
        ],
        vec!["decompose".into(), "--model".into(), s(&constrained)],
        vec!["bench".into(), "--example".into(), "2".into()],
        vec![
            "bench".into(),
            "--example".into(),
            "3".into(),
            "--format".into(),
            "csv".into(),
        ],
        vec![
            "simulate".into(),
            "--example".into(),
            "2".into(),
            "--n".into(),
            "300".into(),
            "--seed".into(),
            "3".into(),
        ],
    ];
    let mut differing = Vec::new();
    for args in &runs {
        let a = Command::new(bin).args(args).output().unwrap();
        let b = Command::new(bin).args(args).output().unwrap();
        if a.stdout != b.stdout || a.status.code() != b.status.code() || a.stdout.is_empty() {
            differing.push(args[0].clone());
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} commands run twice, differing: {differing:?}", runs.len()),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<Check> = vec![
        (
            1,
            "LP optimum equals deterministic enumeration",
            c1_lp_matches_enumeration,
        ),
        (2, "balance equation residual", c2_balance_residual),
        (3, "randomizations at most N", c3_randomizations),
        (4, "policy / occupation round trip", c4_round_trip),
        (5, "deterministic measures are the extreme points", c5_extreme_points),
        (
            6,
            "optimum is a mixture of at most N+1 deterministic measures",
            c6_mixtures,
        ),
        (7, "simulator matches exact value and occupation", c7_monte_carlo),
        (8, "moment bound holds empirically", c8_moment_bounds),
        (9, "closed forms", c9_closed_forms),
        (10, "drift check and Gaussian moment oracle", c10_drift_check),
        (11, "byte-identical CLI reports", c11_determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name} ({})",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

//! Commands on finite models loaded from JSON.

use ctmdp_core::lp::{solve_unconstrained, ENUMERATION_CAP};
use ctmdp_core::lyapunov::{check_drift_finite, finite_moment, min_rho_for_offset};
use ctmdp_core::model::{validate_finite, ValidationReport};
use ctmdp_core::occupation::{balance_residual, randomization_count, value_of_measure, Criterion, SUPPORT_TOL};
use ctmdp_core::simulate::{discounted_value_mc, empirical_occupation, McEstimate, Start};
use ctmdp_core::structure::{decompose_mixture, mixture_policy};
use ctmdp_core::{occupation_of_stationary, solve_constrained, FiniteCtmdp, OccupationMeasure, StationaryPolicy};
use serde_json::{json, Value};

use crate::files::{load_model, load_policy};
use crate::report::{quantity, Check, Report, Table};
use crate::{CliError, RunConfig};

/// Tolerance on the balance-equation residual of any reported measure.
pub const BALANCE_TOL: f64 = 1e-8;
/// Slack allowed on `cost <= bound`.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Tolerance on reconstruction and value agreement of mixtures.
pub const MIXTURE_TOL: f64 = 1e-8;
/// Default truncation target for simulation horizons.
pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_TRAJECTORIES: usize = 10_000;
pub const DEFAULT_OCCUPATION_TRAJECTORIES: usize = 100_000;

const REWARD_UNITS: &str = "discounted reward (reward units x time)";
const COST_UNITS: &str = "discounted cost (cost units x time)";
const MASS_UNITS: &str = "probability";

fn model(config: &RunConfig) -> Result<FiniteCtmdp, CliError> {
    let path = config.model.as_ref().expect("dispatch checked --model");
    let m = load_model(path)?;
    match &config.constraints {
        Some(d) => Ok(m.with_bounds(d.clone())?),
        None => Ok(m),
    }
}

/// Policy from `--policy`, or the LP optimum when absent.
fn policy(config: &RunConfig, m: &FiniteCtmdp) -> Result<(StationaryPolicy, &'static str), CliError> {
    match &config.policy {
        Some(path) => Ok((load_policy(path, m)?, "file")),
        None => Ok((solve_constrained(m)?.policy, "lp-optimum")),
    }
}

fn violations_json(report: &ValidationReport) -> Value {
    Value::Array(
        report
            .violations()
            .iter()
            .map(|v| json!({ "check": v.check, "location": v.location, "magnitude": v.magnitude }))
            .collect(),
    )
}

fn policy_json(m: &FiniteCtmdp, phi: &StationaryPolicy) -> Value {
    Value::Array(
        (0..m.num_states())
            .map(|x| {
                let actions: Vec<Value> = (0..m.num_actions(x))
                    .map(|k| json!({ "action": m.action_label(x, k), "prob": phi.prob(x, k) }))
                    .collect();
                json!({ "state": x, "actions": actions })
            })
            .collect(),
    )
}

fn measure_json(m: &FiniteCtmdp, eta: &OccupationMeasure) -> Value {
    Value::Array(
        m.pairs()
            .map(|(x, k)| json!({ "state": x, "action": m.action_label(x, k), "mass": eta.get(x, k) }))
            .collect(),
    )
}

fn measure_table(m: &FiniteCtmdp, eta: &OccupationMeasure) -> Table {
    Table {
        header: vec!["x", "a", "mass"],
        rows: m
            .pairs()
            .map(|(x, k)| vec![x as f64, m.action_label(x, k) as f64, eta.get(x, k)])
            .collect(),
    }
}

fn estimate_json(e: &McEstimate, units: &str) -> Value {
    json!({
        "mean": e.mean,
        "std_error": e.std_error,
        "n_trajectories": e.n_trajectories,
        "z": e.z,
        "confidence": e.confidence(),
        "units": units,
    })
}

/// Values of every criterion under `eta`, with cost checks against the bounds.
fn criteria(m: &FiniteCtmdp, eta: &OccupationMeasure) -> Result<(f64, Value, Vec<Check>), CliError> {
    let value = value_of_measure(m, eta, Criterion::Reward)?;
    let mut costs = Vec::new();
    let mut checks = Vec::new();
    for n in 0..m.num_costs() {
        let c = value_of_measure(m, eta, Criterion::Cost(n))?;
        let d = m.bounds()[n];
        costs.push(json!({
            "index": n,
            "value": quantity(c, COST_UNITS, Some(CONSTRAINT_TOL)),
            "bound": d,
        }));
        checks.push(Check::at_most(
            &format!("cost_{n}_within_bound"),
            c - d,
            CONSTRAINT_TOL,
            COST_UNITS,
        ));
    }
    Ok((value, Value::Array(costs), checks))
}

fn measure_checks(m: &FiniteCtmdp, eta: &OccupationMeasure) -> Result<(f64, Vec<Check>), CliError> {
    let residual = balance_residual(m, eta)?;
    Ok((
        residual,
        vec![
            Check::at_most("balance_residual", residual, BALANCE_TOL, MASS_UNITS),
            Check::at_most("total_mass", (eta.total_mass() - 1.0).abs(), 1e-10, MASS_UNITS),
        ],
    ))
}

pub fn validate(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let v = validate_finite(&m);
    let results = json!({
        "states": m.num_states(),
        "pairs": m.num_pairs(),
        "constraints": m.num_costs(),
        "alpha": m.alpha(),
        "violations": violations_json(&v),
    });
    let checks = vec![Check::at_most("axioms", v.violations().len() as f64, 0.0, "violations")];
    Ok(Report::new(config, results, checks, None))
}

pub fn drift_check(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let w = config
        .w
        .clone()
        .ok_or_else(|| CliError::Usage("drift-check on a finite model needs --w w_0,...,w_{S-1}".into()))?;
    let rho = config.rho.unwrap_or(0.0);
    let report = check_drift_finite(&m, &w, rho)?;
    let grid: Vec<(usize, usize)> = m.pairs().collect();
    let rho_at_zero_offset = min_rho_for_offset(
        |x: &usize| w[*x],
        0.0,
        &grid,
        |x, k| Some(finite_moment(&m, &w, *x, *k)),
    );
    let worst = report
        .worst_point
        .map(|(x, k)| json!({ "state": x, "action": m.action_label(x, k) }));
    let results = json!({
        "rho": rho,
        "b_min": report.b_min,
        "feasible": report.feasible,
        "worst_point": worst,
        "rho_for_zero_offset": rho_at_zero_offset,
        "w_min": w.iter().copied().fold(f64::INFINITY, f64::min),
    });
    let mut checks = vec![Check {
        name: "drift_feasible".into(),
        passed: report.feasible,
        value: report.b_min,
        tolerance: f64::INFINITY,
        units: "w units per time".into(),
    }];
    checks.push(Check {
        name: "w_at_least_one".into(),
        passed: w.iter().all(|v| *v >= 1.0),
        value: w.iter().copied().fold(f64::INFINITY, f64::min),
        tolerance: 1.0,
        units: "w units".into(),
    });
    Ok(Report::new(config, results, checks, None))
}

pub fn solve(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let sol = solve_constrained(&m)?;
    let (residual, mut checks) = measure_checks(&m, &sol.eta)?;
    let (_, costs, cost_checks) = criteria(&m, &sol.eta)?;
    checks.extend(cost_checks);
    checks.push(Check::at_most(
        "randomizations_at_most_constraints",
        sol.randomizations as f64,
        m.num_costs() as f64,
        "states",
    ));
    let enumeration = if m.num_costs() == 0 {
        let unc = solve_unconstrained(&m, ENUMERATION_CAP)?;
        checks.push(Check::at_most(
            "lp_matches_enumeration",
            (unc.check.best_checked_value - sol.value).max(0.0),
            1e-8 * (1.0 + sol.value.abs()),
            REWARD_UNITS,
        ));
        json!({
            "policies_checked": unc.check.policies_checked,
            "exhaustive": unc.check.exhaustive,
            "best_checked_value": unc.check.best_checked_value,
        })
    } else {
        Value::Null
    };
    let results = json!({
        "value": quantity(sol.value, REWARD_UNITS, Some(1e-8)),
        "policy": policy_json(&m, &sol.policy),
        "deterministic": sol.policy.is_deterministic(),
        "randomizations": sol.randomizations,
        "costs": costs,
        "occupation": measure_json(&m, &sol.eta),
        "balance_residual": quantity(residual, MASS_UNITS, Some(BALANCE_TOL)),
        "lp": {
            "iterations": sol.lp.iterations,
            "dropped_rows": sol.lp.dropped_rows,
            "support_size": sol.lp.support_size(SUPPORT_TOL),
        },
        "enumeration": enumeration,
    });
    Ok(Report::new(config, results, checks, Some(measure_table(&m, &sol.eta))))
}

pub fn eval_policy(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let path = config
        .policy
        .as_ref()
        .ok_or_else(|| CliError::Usage("eval-policy needs --policy PATH".into()))?;
    let phi = load_policy(path, &m)?;
    let eta = occupation_of_stationary(&m, &phi)?;
    let (residual, mut checks) = measure_checks(&m, &eta)?;
    let (value, costs, cost_checks) = criteria(&m, &eta)?;
    checks.extend(cost_checks);
    let results = json!({
        "value": quantity(value, REWARD_UNITS, None),
        "policy": policy_json(&m, &phi),
        "randomizations": randomization_count(&phi, SUPPORT_TOL),
        "costs": costs,
        "occupation": measure_json(&m, &eta),
        "balance_residual": quantity(residual, MASS_UNITS, Some(BALANCE_TOL)),
    });
    Ok(Report::new(config, results, checks, Some(measure_table(&m, &eta))))
}

/// Largest absolute reward or cost rate.
fn rate_magnitude(m: &FiniteCtmdp) -> f64 {
    let mut bound = m.pairs().map(|(x, k)| m.reward(x, k).abs()).fold(0.0, f64::max);
    for n in 0..m.num_costs() {
        for (x, k) in m.pairs() {
            bound = bound.max(m.cost(n, x, k).abs());
        }
    }
    bound
}

/// Discounted mass beyond `horizon` of any criterion of the model.
fn exact_tail(m: &FiniteCtmdp, horizon: f64) -> f64 {
    rate_magnitude(m) * (-m.alpha() * horizon).exp() / m.alpha()
}

/// Horizon whose truncation error is at most `eps`.
fn finite_horizon(m: &FiniteCtmdp, eps: f64) -> f64 {
    let bound = rate_magnitude(m);
    if bound == 0.0 {
        return 0.0;
    }
    ((bound / (m.alpha() * eps)).ln() / m.alpha()).max(0.0)
}

pub fn simulate(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let (phi, source) = policy(config, &m)?;
    let eps = config.eps.unwrap_or(DEFAULT_EPS);
    let horizon = config.horizon.unwrap_or_else(|| finite_horizon(&m, eps));
    let n = config.n.unwrap_or(DEFAULT_TRAJECTORIES);
    let eta = occupation_of_stationary(&m, &phi)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut criteria_list = vec![(String::from("reward"), Criterion::Reward)];
    criteria_list.extend((0..m.num_costs()).map(|i| (format!("cost_{i}"), Criterion::Cost(i))));
    for (name, which) in criteria_list {
        let est = discounted_value_mc(
            &m,
            &phi,
            &Start::Initial,
            |x, k| which.rate(&m, *x, *k),
            n,
            horizon,
            config.seed,
        )?;
        let exact = value_of_measure(&m, &eta, which)?;
        // the estimate cannot see the tail beyond the horizon
        let gap = ((est.mean - exact).abs() - exact_tail(&m, horizon)).max(0.0);
        checks.push(Check::at_most(
            &format!("{name}_within_3se"),
            gap,
            est.z * est.std_error,
            if name == "reward" { REWARD_UNITS } else { COST_UNITS },
        ));
        rows.push(json!({
            "criterion": name,
            "estimate": estimate_json(&est, if name == "reward" { REWARD_UNITS } else { COST_UNITS }),
            "exact": exact,
        }));
    }
    let results = json!({
        "policy_source": source,
        "policy": policy_json(&m, &phi),
        "horizon": quantity(horizon, "time", None),
        "truncation_bound": quantity(exact_tail(&m, horizon), REWARD_UNITS, config.horizon.is_none().then_some(eps)),
        "criteria": rows,
    });
    Ok(Report::new(config, results, checks, None))
}

pub fn occupation(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let (phi, source) = policy(config, &m)?;
    let eta = occupation_of_stationary(&m, &phi)?;
    let (residual, mut checks) = measure_checks(&m, &eta)?;
    let mut table = measure_table(&m, &eta);
    let mc = if config.mc {
        let n = config.n.unwrap_or(DEFAULT_OCCUPATION_TRAJECTORIES);
        let emp = empirical_occupation(&m, &phi, n, config.seed)?;
        table.header.push("mc_mass");
        let mut worst: f64 = 0.0;
        let mut pairs = Vec::new();
        for ((x, k), row) in m.pairs().zip(table.rows.iter_mut()) {
            let p = eta.get(x, k);
            let e = emp.get(x, k);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let z = if se > 0.0 {
                (e - p).abs() / se
            } else if e == p {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
            row.push(e);
            pairs.push(json!({
                "state": x,
                "action": m.action_label(x, k),
                "mass": e,
                "std_error": se,
            }));
        }
        checks.push(Check::at_most("mc_within_3se", worst, 3.0, "standard errors"));
        json!({ "n_trajectories": n, "pairs": pairs, "max_z": worst })
    } else {
        Value::Null
    };
    let results = json!({
        "policy_source": source,
        "occupation": measure_json(&m, &eta),
        "marginal": eta.marginal(),
        "balance_residual": quantity(residual, MASS_UNITS, Some(BALANCE_TOL)),
        "monte_carlo": mc,
    });
    Ok(Report::new(config, results, checks, Some(table)))
}

pub fn decompose(config: &RunConfig) -> Result<Report, CliError> {
    let m = model(config)?;
    let sol = solve_constrained(&m)?;
    let n = m.num_costs();
    let dec = decompose_mixture(&sol.eta, &m, n, ENUMERATION_CAP)?;
    let (mix_value, mix_costs, _) = criteria(&m, &dec.reconstructed)?;
    let mut checks = vec![
        Check::at_most("reconstruction_residual", dec.residual, MIXTURE_TOL, MASS_UNITS),
        Check::at_most(
            "policies_at_most_constraints_plus_one",
            dec.len() as f64,
            (n + 1) as f64,
            "policies",
        ),
        Check::at_most(
            "mixture_value_matches_lp",
            (mix_value - sol.value).abs(),
            MIXTURE_TOL,
            REWARD_UNITS,
        ),
    ];
    for (i, lp_cost) in sol.cost_values.iter().enumerate() {
        let c = value_of_measure(&m, &dec.reconstructed, Criterion::Cost(i))?;
        checks.push(Check::at_most(
            &format!("mixture_cost_{i}_matches_lp"),
            (c - lp_cost).abs(),
            MIXTURE_TOL,
            COST_UNITS,
        ));
    }
    let components: Vec<Value> = dec
        .weights
        .iter()
        .zip(&dec.policies)
        .map(|(w, f)| {
            let labels: Vec<usize> = f.iter().enumerate().map(|(x, k)| m.action_label(x, *k)).collect();
            json!({ "weight": w, "choice": labels })
        })
        .collect();
    let results = json!({
        "lp_value": quantity(sol.value, REWARD_UNITS, Some(MIXTURE_TOL)),
        "mixture_value": quantity(mix_value, REWARD_UNITS, Some(MIXTURE_TOL)),
        "mixture_costs": mix_costs,
        "components": components,
        "residual": quantity(dec.residual, MASS_UNITS, Some(MIXTURE_TOL)),
        "mixture_policy": policy_json(&m, &mixture_policy(&dec)),
    });
    Ok(Report::new(config, results, checks, None))
}

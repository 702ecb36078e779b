//! Commands on the real-line benchmark models.

use ctmdp_core::benchmarks::{
    bellman_residual, build_example, check_example2_admissible, closed_form, example2_closed_form,
    gaussian_generator_moment, slack_constraint_level, state_action_grid, BasisCombination, ClosedFormKind,
    ClosedFormSolution, ExampleParams, ACTION_GRID,
};
use ctmdp_core::lyapunov::{check_drift, truncation_horizon, DriftReport};
use ctmdp_core::model::validate_continuous;
use ctmdp_core::simulate::{check_moment_bound, discounted_value_mc, Start, StationaryRule};
use ctmdp_core::{ContinuousCtmdp1D, Error};
use serde_json::{json, Value};

use crate::report::{quantity, Check, Report, Table};
use crate::{CliError, RunConfig};

/// Grid half-width and size for drift checks.
const DRIFT_X_MAX: f64 = 50.0;
const DRIFT_NX: usize = 2001;
/// Actions per grid state for drift checks and validation.
const ACTIONS_PER_STATE: usize = 21;
/// Grid half-width and size for residual profiles.
const RESIDUAL_X_MAX: f64 = 20.0;
const RESIDUAL_NX: usize = 41;
/// Tolerance of the closed-form coefficient identities, relative to their scale.
const IDENTITY_TOL: f64 = 1e-12;
/// Relative residual allowed on the outer half of the residual grid. Near
/// `x = 0` the closed forms are not exact solutions and only the profile is
/// reported.
const FAR_FIELD_TOL: f64 = 1e-3;
/// Times at which simulated moments are compared with the drift bound.
const MOMENT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
const DEFAULT_EPS: f64 = 1e-3;
const DEFAULT_TRAJECTORIES: usize = 10_000;

struct Setup {
    id: u8,
    params: ExampleParams,
    model: ContinuousCtmdp1D,
    /// Lyapunov function as a Gaussian-moment basis combination.
    w: BasisCombination,
    rho: f64,
}

fn parse_params(id: u8, text: Option<&str>) -> Result<ExampleParams, CliError> {
    let mut p = if id == 3 {
        ExampleParams::example3_default()
    } else {
        ExampleParams::default()
    };
    for item in text.unwrap_or("").split(',').filter(|s| !s.trim().is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("parameter `{item}` is not key=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("parameter `{key}` has non-numeric value `{value}`")))?;
        match key.trim() {
            "beta0" => p.beta0 = v,
            "beta" => p.beta = v,
            "p" => p.p = v,
            "delta" => p.delta = v,
            "alpha" => p.alpha = v,
            "x0" => p.x0 = v,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown parameter `{other}` (expected beta0, beta, p, delta, alpha, x0)"
                )))
            }
        }
    }
    Ok(p)
}

fn setup(config: &RunConfig) -> Result<Setup, CliError> {
    let id = config
        .example
        .ok_or_else(|| CliError::Usage("this command needs --example 1|2|3".into()))?;
    let params = parse_params(id, config.params.as_deref())?;
    let model = build_example(id, &params)?;
    let (w, default_rho) = if id == 3 {
        // w = x² + 1; its drift grows like β² x², and α > β² is required
        (
            BasisCombination {
                one: 1.0,
                square: 1.0,
                ..Default::default()
            },
            0.5 * (params.beta * params.beta + params.alpha),
        )
    } else {
        (
            BasisCombination {
                one: 1.0,
                fourth: 1.0,
                ..Default::default()
            },
            6.0 * params.beta + 0.1,
        )
    };
    Ok(Setup {
        id,
        params,
        model,
        w,
        rho: config.rho.unwrap_or(default_rho),
    })
}

fn params_json(p: &ExampleParams) -> Value {
    json!({
        "beta0": p.beta0,
        "beta": p.beta,
        "p": p.p,
        "delta": p.delta,
        "alpha": p.alpha,
        "x0": p.x0,
    })
}

fn drift(s: &Setup, config: &RunConfig) -> DriftReport<f64, f64> {
    let x_max = config.x_max.unwrap_or(DRIFT_X_MAX);
    let nx = config.nx.unwrap_or(DRIFT_NX);
    let grid = state_action_grid(&s.model, x_max, nx, ACTIONS_PER_STATE);
    check_drift(
        |x: &f64| s.w.eval(*x),
        s.rho,
        &grid,
        |x, a| Some(gaussian_generator_moment(&s.model, *x, *a, &s.w)),
    )
}

fn drift_json(s: &Setup, config: &RunConfig, d: &DriftReport<f64, f64>) -> Value {
    json!({
        "w": if s.id == 3 { "x^2 + 1" } else { "x^4 + 1" },
        "rho": d.rho_used,
        "b_min": d.b_min,
        "feasible": d.feasible,
        "worst_point": d.worst_point.map(|(x, a)| json!({ "x": x, "a": a })),
        "grid": {
            "x_max": config.x_max.unwrap_or(DRIFT_X_MAX),
            "states": config.nx.unwrap_or(DRIFT_NX),
            "actions_per_state": ACTIONS_PER_STATE,
        },
    })
}

fn drift_check_of(d: &DriftReport<f64, f64>) -> Check {
    Check {
        name: "drift_feasible".into(),
        passed: d.feasible,
        value: d.b_min,
        tolerance: f64::INFINITY,
        units: "w units per time".into(),
    }
}

fn states(x_max: f64, nx: usize) -> Vec<f64> {
    let nx = nx.max(2);
    (0..nx)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / (nx - 1) as f64)
        .collect()
}

pub fn validate(config: &RunConfig) -> Result<Report, CliError> {
    let s = setup(config)?;
    let grid = states(config.x_max.unwrap_or(DRIFT_X_MAX), config.nx.unwrap_or(201));
    let v = validate_continuous(&s.model, &grid, ACTIONS_PER_STATE);
    let violations: Vec<Value> = v
        .violations()
        .iter()
        .map(|v| json!({ "check": v.check, "location": v.location, "magnitude": v.magnitude }))
        .collect();
    let results = json!({
        "example": s.id,
        "params": params_json(&s.params),
        "states_checked": grid.len(),
        "actions_per_state": ACTIONS_PER_STATE,
        "violations": violations,
    });
    let checks = vec![Check::at_most("axioms", v.violations().len() as f64, 0.0, "violations")];
    Ok(Report::new(config, results, checks, None))
}

pub fn drift_check(config: &RunConfig) -> Result<Report, CliError> {
    let s = setup(config)?;
    let d = drift(&s, config);
    let results = json!({
        "example": s.id,
        "params": params_json(&s.params),
        "drift": drift_json(&s, config, &d),
    });
    Ok(Report::new(config, results, vec![drift_check_of(&d)], None))
}

/// Stationary rule simulated on a benchmark: its closed-form optimum, or for
/// the reward-free Example 1 the Example 2 optimum on the same dynamics.
fn simulation_rule(s: &Setup) -> Result<ClosedFormSolution, CliError> {
    Ok(match s.id {
        1 => example2_closed_form(s.params.p, s.params.delta, s.params.alpha)?,
        id => closed_form(id, &s.params)?,
    })
}

pub fn simulate(config: &RunConfig) -> Result<Report, CliError> {
    let s = setup(config)?;
    let f = simulation_rule(&s)?;
    let rule = StationaryRule(|x: f64| f.policy(x));
    let d = drift(&s, config);
    if !d.feasible {
        return Err(Error::Domain("drift inequality fails on the grid; no horizon can be chosen".into()).into());
    }
    let x0 = s.params.x0;
    let w0 = s.w.eval(x0);
    let eps = config.eps.unwrap_or(DEFAULT_EPS);
    // |r| <= M w, with M estimated on the drift grid
    let grid = state_action_grid(
        &s.model,
        config.x_max.unwrap_or(DRIFT_X_MAX),
        config.nx.unwrap_or(DRIFT_NX),
        ACTIONS_PER_STATE,
    );
    let m_bound = grid
        .iter()
        .map(|(x, a)| (s.model.reward)(*x, *a).abs() / s.w.eval(*x))
        .fold(0.0, f64::max);
    let horizon = match config.horizon {
        Some(t) => t,
        None => truncation_horizon(m_bound, w0, d.b_min, s.params.alpha, s.rho, eps)?,
    };
    let n = config.n.unwrap_or(DEFAULT_TRAJECTORIES);
    let reward = |x: &f64, a: &f64| (s.model.reward)(*x, *a);
    let est = discounted_value_mc(&s.model, &rule, &Start::Fixed(x0), reward, n, horizon, config.seed)?;

    let mut checks = vec![drift_check_of(&d)];
    let mut moments = Vec::new();
    for (i, t) in MOMENT_TIMES.iter().enumerate() {
        let w = |x: &f64| s.w.eval(*x);
        // separate stream family per time point
        let seed = config.seed.wrapping_add(1 + i as u64);
        let mc = check_moment_bound(&s.model, &rule, w, s.rho, d.b_min, x0, *t, n, seed)?;
        checks.push(Check {
            name: format!("moment_bound_t{t}"),
            passed: mc.passed,
            value: mc.estimate.mean - mc.bound,
            tolerance: 3.0 * mc.estimate.std_error,
            units: "w units".into(),
        });
        moments.push(json!({
            "t": t,
            "mean": mc.estimate.mean,
            "std_error": mc.estimate.std_error,
            "bound": mc.bound,
        }));
    }
    let closed = if s.id == 1 { None } else { Some(f.value(x0)) };
    let results = json!({
        "example": s.id,
        "params": params_json(&s.params),
        "policy": { "slope": f.policy_slope, "intercept": f.policy_intercept, "form": "slope |x| + intercept" },
        "horizon": quantity(horizon, "time", config.horizon.is_none().then_some(eps)),
        "reward_bound_factor": m_bound,
        "estimate": {
            "mean": est.mean,
            "std_error": est.std_error,
            "n_trajectories": est.n_trajectories,
            "z": est.z,
            "confidence": est.confidence(),
            "units": "discounted reward (reward units x time)",
        },
        // diagnostic only: the closed form is checked through residuals
        "closed_form_value_at_x0": closed,
        "moments": moments,
        "drift": drift_json(&s, config, &d),
    });
    Ok(Report::new(config, results, checks, None))
}

/// Constraint level making costs dominated by `x⁴ + 1` non-binding (Examples 1 and 2).
fn slack_level(s: &Setup) -> Value {
    if s.id == 3 {
        return Value::Null;
    }
    let p = &s.params;
    match slack_constraint_level(1.0, p.x0.powi(4), p.alpha, p.beta, s.rho) {
        Ok(d) => json!({ "value": d, "l_prime": 1.0, "rho": s.rho, "units": "cost units" }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn bench(config: &RunConfig) -> Result<Report, CliError> {
    if config.model.is_some() {
        return Err(CliError::Usage("bench runs on --example 1|2|3".into()));
    }
    let s = setup(config)?;
    let d = drift(&s, config);
    let mut checks = vec![drift_check_of(&d)];
    let x_max = config.x_max.unwrap_or(RESIDUAL_X_MAX);
    let nx = config.nx.unwrap_or(RESIDUAL_NX);
    let mut table = Table {
        header: vec!["x", "residual"],
        rows: Vec::new(),
    };

    let closed = if s.id == 1 {
        Value::Null
    } else {
        let f = closed_form(s.id, &s.params)?;
        let coefficients = match f.kind {
            ClosedFormKind::Example2(c) => {
                let scale = 1.0 + s.params.p + c.l2 * s.params.alpha;
                let worst = c
                    .identity_residuals(s.params.p, s.params.delta, s.params.alpha)
                    .iter()
                    .fold(0.0f64, |acc, r| acc.max(r.abs()));
                checks.push(Check::at_most(
                    "coefficient_identities",
                    worst / scale,
                    IDENTITY_TOL,
                    "relative",
                ));
                let admissible = check_example2_admissible(&s.params);
                checks.push(Check {
                    name: "parameter_conditions".into(),
                    passed: admissible.is_ok(),
                    value: s.params.p / s.params.delta,
                    tolerance: 0.0,
                    units: "p/delta".into(),
                });
                json!({
                    "l0": c.l0,
                    "l1_plus": c.l1_plus,
                    "l1_minus": c.l1_minus,
                    "l2": c.l2,
                    "identity_residual_max": worst,
                    "parameter_conditions": admissible.err().map(|e| e.to_string()),
                })
            }
            ClosedFormKind::Example3 {
                kappa,
                quadratic,
                linear_abs,
                constant,
                slope,
                intercept,
            } => json!({
                "kappa": kappa,
                "quadratic": quadratic,
                "linear_abs": linear_abs,
                "constant": constant,
                "slope": slope,
                "intercept": intercept,
            }),
        };
        let grid = states(x_max, nx);
        let inadmissible = grid
            .iter()
            .filter(|x| {
                let a = f.policy(**x);
                a < (s.model.action_lo)(**x) || a > (s.model.action_hi)(**x)
            })
            .count();
        checks.push(Check::at_most(
            "policy_admissible",
            inadmissible as f64,
            0.0,
            "grid states",
        ));
        let hint = |x: f64| f.policy(x);
        let profile = bellman_residual(&s.model, &f.value_basis(), Some(&hint), &grid, ACTION_GRID);
        table.rows = profile.iter().map(|p| vec![p.x, p.residual]).collect();
        let far_field = profile
            .iter()
            .filter(|p| p.x.abs() >= 0.5 * x_max)
            .map(|p| (p.residual / (s.params.alpha * f.value(p.x))).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(
            "far_field_relative_residual",
            far_field,
            FAR_FIELD_TOL,
            "relative",
        ));
        let rel: Vec<Value> = profile
            .iter()
            .map(|p| {
                json!({
                    "x": p.x,
                    "residual": p.residual,
                    "relative": p.residual / (s.params.alpha * f.value(p.x)),
                    "best_action": p.best_action,
                    "policy_action": f.policy(p.x),
                })
            })
            .collect();
        json!({
            "coefficients": coefficients,
            "policy": { "slope": f.policy_slope, "intercept": f.policy_intercept, "form": "slope |x| + intercept" },
            "residual_profile": rel,
            "residual_grid": { "x_max": x_max, "states": grid.len(), "action_points": ACTION_GRID },
        })
    };
    let results = json!({
        "example": s.id,
        "params": params_json(&s.params),
        "closed_form": closed,
        "drift": drift_json(&s, config, &d),
        "slack_constraint_level": slack_level(&s),
    });
    Ok(Report::new(config, results, checks, Some(table)))
}

mod common;

use ctmdp_core::benchmarks::{
    build_example, example2_closed_form, gaussian_generator_moment, state_action_grid, BasisCombination, ExampleParams,
};
use ctmdp_core::lyapunov::check_drift;
use ctmdp_core::occupation::{transient_distribution, StationaryPolicy};
use ctmdp_core::simulate::{
    check_moment_bound, discounted_value_mc, empirical_occupation, sample_trajectory, stream_rng, FnPolicy, Start,
    StationaryRule,
};

fn kolmogorov_smirnov_exp(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let cdf = 1.0 - (-rate * s).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn first_sojourn_is_exponential() {
    let m = common::two_state();
    let phi = StationaryPolicy::deterministic(&m, &[1, 0]).unwrap();
    let n = 4000;
    let mut first: Vec<f64> = (0..n)
        .map(|i| {
            let traj = sample_trajectory(&m, &phi, 0, 100.0, 1000, &mut stream_rng(21, i)).unwrap();
            traj.records[1].time
        })
        .collect();
    // 0.1% critical value of the KS statistic
    assert!(kolmogorov_smirnov_exp(&mut first, 3.0) < 1.95 / (n as f64).sqrt());
}

#[test]
fn thinned_sojourn_is_exponential() {
    let m = common::two_state();
    // rate 1 from state 0 generated by thinning the q* = 3 stream
    let thin = FnPolicy(|_: &[(f64, usize)], _| vec![(0usize, 1.0)]);
    let n = 4000;
    let mut first: Vec<f64> = (0..n)
        .map(|i| {
            let traj = sample_trajectory(&m, &thin, 0, 100.0, 1000, &mut stream_rng(22, i)).unwrap();
            traj.records[1].time
        })
        .collect();
    assert!(kolmogorov_smirnov_exp(&mut first, 1.0) < 1.95 / (n as f64).sqrt());
}

#[test]
fn switching_within_a_sojourn() {
    // a0 (rate 1) before time 0.5 into the sojourn, a1 (rate 3) after:
    // P(T_1 > t) = e^{-t} for t < 0.5 and e^{-0.5 - 3(t - 0.5)} afterwards
    let m = common::two_state();
    let switch = FnPolicy(|_: &[(f64, usize)], s: f64| vec![(if s < 0.5 { 0usize } else { 1 }, 1.0)]);
    let n = 20_000;
    let survived = (0..n)
        .filter(|&i| {
            let traj = sample_trajectory(&m, &switch, 0, 100.0, 1000, &mut stream_rng(23, i)).unwrap();
            traj.records[1].time > 1.0
        })
        .count() as f64
        / n as f64;
    let exact = (-0.5f64 - 1.5).exp();
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((survived - exact).abs() < 4.0 * se, "{survived} vs {exact}");
}

#[test]
fn value_and_occupation_within_three_standard_errors() {
    let m = common::two_state();
    let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
    let est = discounted_value_mc(&m, &phi, &Start::Initial, |x, k| m.reward(*x, *k), 20_000, 40.0, 0).unwrap();
    assert!(est.covers(1.5), "{est:?}");
    let eta = empirical_occupation(&m, &phi, 20_000, 0).unwrap();
    let se = (0.75f64 * 0.25 / 20_000.0).sqrt();
    assert!((eta.marginal()[0] - 0.75).abs() <= 3.0 * se);
}

#[test]
fn two_state_moment_bound() {
    // w = (1, 2) satisfies the drift inequality with ρ = 0, b = 1 under
    // every action; under (a0, a0), E w(ξ_t) = 1 + (1 - e^{-3t})/3
    let m = common::two_state();
    let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
    let w = [1.0, 2.0];
    for t in [0.5, 1.0, 2.0] {
        let check = check_moment_bound(&m, &phi, |x: &usize| w[*x], 0.0, 1.0, 0, t, 10_000, 3).unwrap();
        assert!(check.passed);
        let exact = 1.0 + (1.0 - (-3.0 * t).exp()) / 3.0;
        let law = transient_distribution(&m, &phi, &[1.0, 0.0], t).unwrap();
        assert!((law[0] * w[0] + law[1] * w[1] - exact).abs() < 1e-12);
        assert!(check.estimate.covers(exact), "{check:?} vs {exact}");
    }
}

#[test]
fn example_one_moment_bound_under_optimal_rule() {
    let params = ExampleParams::default();
    let model = build_example(1, &params).unwrap();
    let f = example2_closed_form(params.p, params.delta, params.alpha).unwrap();
    let rule = StationaryRule(|x: f64| f.policy(x));
    let w = |x: &f64| x.powi(4) + 1.0;
    let rho = 6.0 * params.beta + 0.1;
    let grid = state_action_grid(&model, 50.0, 2001, 11);
    let quartic = BasisCombination {
        one: 1.0,
        fourth: 1.0,
        ..Default::default()
    };
    let drift = check_drift(w, rho, &grid, |x, a| {
        Some(gaussian_generator_moment(&model, *x, *a, &quartic))
    });
    assert!(drift.feasible);
    for t in [0.5, 1.0, 2.0] {
        let check = check_moment_bound(&model, &rule, w, rho, drift.b_min, 0.0, t, 10_000, 4).unwrap();
        assert!(check.passed, "{check:?}");
    }
}

//! Random finite models for property tests and sweeps.
//!
//! Instances are drawn from a seeded ChaCha stream so a sweep is reproducible
//! from `(seed, index)`. Constrained instances get bounds that are strictly
//! feasible by construction: each bound sits above the cost of a random
//! stationary policy.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Result;
use crate::model::FiniteCtmdp;
use crate::occupation::{occupation_of_stationary, value_of_measure, Criterion, StationaryPolicy};
use crate::simulate::stream_rng;

/// Ranges for [`random_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_rate: f64,
    pub alpha_range: (f64, f64),
    pub num_costs: usize,
    /// Bounds are set to `cost(φ) + slack · |cost(φ)| + slack` for a random
    /// randomized policy `φ`.
    pub bound_slack: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            max_states: 4,
            max_actions: 3,
            max_rate: 5.0,
            alpha_range: (0.5, 3.0),
            num_costs: 0,
            bound_slack: 0.05,
        }
    }
}

impl InstanceSpec {
    pub fn constrained(num_costs: usize) -> Self {
        Self {
            num_costs,
            ..Self::default()
        }
    }
}

/// Draws instance `index` of the sweep keyed by `seed`.
pub fn random_instance(spec: &InstanceSpec, seed: u64, index: u64) -> Result<FiniteCtmdp> {
    let mut rng = stream_rng(seed, index);
    let ns = rng.random_range(1..=spec.max_states);
    let actions: Vec<Vec<usize>> = (0..ns)
        .map(|_| (0..rng.random_range(1..=spec.max_actions)).collect())
        .collect();
    let rates: Vec<Vec<Vec<f64>>> = actions
        .iter()
        .enumerate()
        .map(|(x, acts)| {
            acts.iter()
                .map(|_| {
                    let mut row: Vec<f64> = (0..ns)
                        .map(|y| {
                            // some zero rates keep sparse and absorbing structure in play
                            if y == x || rng.random::<f64>() < 0.2 {
                                0.0
                            } else {
                                rng.random::<f64>() * spec.max_rate
                            }
                        })
                        .collect();
                    row[x] = -row.iter().sum::<f64>();
                    row
                })
                .collect()
        })
        .collect();
    let table = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        actions
            .iter()
            .map(|acts| acts.iter().map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let reward = table(&mut rng);
    let costs: Vec<Vec<Vec<f64>>> = (0..spec.num_costs).map(|_| table(&mut rng)).collect();
    let alpha = rng.random_range(spec.alpha_range.0..=spec.alpha_range.1);
    let mut gamma: Vec<f64> = (0..ns).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = gamma.iter().sum();
    gamma.iter_mut().for_each(|g| *g /= total);

    let base = FiniteCtmdp::new(
        actions.clone(),
        rates,
        reward,
        costs,
        vec![0.0; spec.num_costs],
        alpha,
        gamma,
    )?;
    if spec.num_costs == 0 {
        return Ok(base);
    }
    // anchor the bounds on a random fully randomized policy
    let probs: Vec<Vec<f64>> = actions
        .iter()
        .map(|acts| {
            let mut row: Vec<f64> = acts.iter().map(|_| rng.random::<f64>() + 0.1).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
            row
        })
        .collect();
    let phi = StationaryPolicy::new(probs)?;
    let eta = occupation_of_stationary(&base, &phi)?;
    let bounds = (0..spec.num_costs)
        .map(|n| {
            let v = value_of_measure(&base, &eta, Criterion::Cost(n))?;
            Ok(v + spec.bound_slack * (v.abs() + 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    base.with_bounds(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_finite;

    #[test]
    fn instances_are_valid_and_reproducible() {
        for i in 0..50 {
            let spec = InstanceSpec::constrained((i % 3) as usize);
            let m = random_instance(&spec, 42, i).unwrap();
            assert!(validate_finite(&m).passed());
            assert!(m.num_states() <= 4);
            assert!((0..m.num_states()).all(|x| m.num_actions(x) <= 3));
            let again = random_instance(&spec, 42, i).unwrap();
            assert_eq!(m.rates(), again.rates());
            assert_eq!(m.bounds(), again.bounds());
        }
    }
}

#![allow(dead_code)]

use ctmdp_core::FiniteCtmdp;

/// Two states, two actions each, `α = 1`, start in state 0.
///
/// State 0 earns 2 per unit time under either action; action 0 leaves at
/// rate 1, action 1 at rate 3. State 1 earns nothing; action 0 returns at
/// rate 2, action 1 at rate 1. The optimum keeps action 0 in both states:
/// `η̂ = (3/4, 1/4)` and value `3/2`.
pub fn two_state() -> FiniteCtmdp {
    FiniteCtmdp::new(
        vec![vec![0, 1], vec![0, 1]],
        vec![
            vec![vec![-1.0, 1.0], vec![-3.0, 3.0]],
            vec![vec![2.0, -2.0], vec![1.0, -1.0]],
        ],
        vec![vec![2.0, 2.0], vec![0.0, 0.0]],
        vec![],
        vec![],
        1.0,
        vec![1.0, 0.0],
    )
    .unwrap()
}

/// [`two_state`] with cost 1 on `(0, a0)` bounded by `d`.
pub fn two_state_constrained(d: f64) -> FiniteCtmdp {
    let m = two_state();
    FiniteCtmdp::new(
        m.actions().to_vec(),
        m.rates().to_vec(),
        m.reward_table().to_vec(),
        vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]],
        vec![d],
        1.0,
        vec![1.0, 0.0],
    )
    .unwrap()
}

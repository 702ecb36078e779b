//! Controlled jump-process models.
//!
//! [`FiniteCtmdp`] is the finite state/action form used by the occupation LP.
//! [`ContinuousCtmdp1D`] describes models on the real line whose post-jump law
//! is Gaussian and whose admissible actions form an interval.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};

/// Absolute tolerance on the row sums of a conservative rate kernel.
pub const CONSERVATIVE_TOL: f64 = 1e-12;
/// Absolute tolerance on the total mass of the initial distribution.
pub const INITIAL_MASS_TOL: f64 = 1e-12;

/// Finite-state, finite-action controlled Markov jump model with `N` cost
/// constraints and a discounted criterion.
///
/// Actions are addressed by their position `k` in the admissible list `A(x)`;
/// `rates[x][k][y]` is the transition rate from `x` to `y` under the `k`-th
/// admissible action of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteCtmdp {
    actions: Vec<Vec<usize>>,
    rates: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    costs: Vec<Vec<Vec<f64>>>,
    bounds: Vec<f64>,
    alpha: f64,
    gamma: Vec<f64>,
    offsets: Vec<usize>,
}

fn expect_len(field: impl Into<String>, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            field: field.into(),
            expected,
            found,
        })
    }
}

impl FiniteCtmdp {
    /// Builds a model after checking that every array is shaped consistently.
    ///
    /// Only structure is checked here; the rate axioms are checked by
    /// [`validate_finite`].
    pub fn new(
        actions: Vec<Vec<usize>>,
        rates: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        costs: Vec<Vec<Vec<f64>>>,
        bounds: Vec<f64>,
        alpha: f64,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let s = actions.len();
        if s == 0 {
            return Err(Error::Parameter("model has no states".into()));
        }
        for (x, a) in actions.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::Parameter(format!("state {x} has no admissible action")));
            }
        }
        expect_len("rates", s, rates.len())?;
        expect_len("reward", s, reward.len())?;
        expect_len("gamma", s, gamma.len())?;
        for x in 0..s {
            let na = actions[x].len();
            expect_len(format!("rates[{x}]"), na, rates[x].len())?;
            expect_len(format!("reward[{x}]"), na, reward[x].len())?;
            for (k, row) in rates[x].iter().enumerate() {
                expect_len(format!("rates[{x}][{k}]"), s, row.len())?;
            }
        }
        expect_len("bounds", costs.len(), bounds.len())?;
        for (n, c) in costs.iter().enumerate() {
            expect_len(format!("costs[{n}]"), s, c.len())?;
            for x in 0..s {
                expect_len(format!("costs[{n}][{x}]"), actions[x].len(), c[x].len())?;
            }
        }
        let mut offsets = Vec::with_capacity(s + 1);
        let mut acc = 0;
        offsets.push(0);
        for a in &actions {
            acc += a.len();
            offsets.push(acc);
        }
        Ok(Self {
            actions,
            rates,
            reward,
            costs,
            bounds,
            alpha,
            gamma,
            offsets,
        })
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn num_actions(&self, x: usize) -> usize {
        self.actions[x].len()
    }

    /// Label of the `k`-th admissible action at `x`.
    pub fn action_label(&self, x: usize, k: usize) -> usize {
        self.actions[x][k]
    }

    pub fn actions(&self) -> &[Vec<usize>] {
        &self.actions
    }

    /// Number of state-action pairs in `K`.
    pub fn num_pairs(&self) -> usize {
        self.offsets[self.num_states()]
    }

    /// Flat index of the pair `(x, k)`.
    pub fn pair_index(&self, x: usize, k: usize) -> usize {
        self.offsets[x] + k
    }

    /// Start offset of each state in the flat pair layout, with a trailing total.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// All pairs `(x, k)` in flat order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_states()).flat_map(move |x| (0..self.num_actions(x)).map(move |k| (x, k)))
    }

    /// Rate `q(y | x, a_k)`.
    pub fn rate(&self, x: usize, k: usize, y: usize) -> f64 {
        self.rates[x][k][y]
    }

    pub fn rate_row(&self, x: usize, k: usize) -> &[f64] {
        &self.rates[x][k]
    }

    /// Exit rate `-q(x | x, a_k)`.
    pub fn exit_rate(&self, x: usize, k: usize) -> f64 {
        -self.rates[x][k][x]
    }

    pub fn reward(&self, x: usize, k: usize) -> f64 {
        self.reward[x][k]
    }

    pub fn reward_table(&self) -> &[Vec<f64>] {
        &self.reward
    }

    pub fn num_costs(&self) -> usize {
        self.costs.len()
    }

    /// Cost `c_n(x, a_k)` for the zero-based cost index `n`.
    pub fn cost(&self, n: usize, x: usize, k: usize) -> f64 {
        self.costs[n][x][k]
    }

    pub fn cost_tables(&self) -> &[Vec<Vec<f64>>] {
        &self.costs
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn rates(&self) -> &[Vec<Vec<f64>>] {
        &self.rates
    }

    /// Same model with the constraint bounds replaced.
    pub fn with_bounds(&self, bounds: Vec<f64>) -> Result<Self> {
        expect_len("bounds", self.costs.len(), bounds.len())?;
        Ok(Self { bounds, ..self.clone() })
    }

    /// Same model with every cost constraint removed.
    pub fn without_constraints(&self) -> Self {
        Self {
            costs: Vec::new(),
            bounds: Vec::new(),
            ..self.clone()
        }
    }

    /// Same model started from `gamma`.
    pub fn with_gamma(&self, gamma: Vec<f64>) -> Result<Self> {
        expect_len("gamma", self.num_states(), gamma.len())?;
        Ok(Self { gamma, ..self.clone() })
    }

    /// Same model with the reward replaced.
    pub fn with_reward(&self, reward: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.actions.clone(),
            self.rates.clone(),
            reward,
            self.costs.clone(),
            self.bounds.clone(),
            self.alpha,
            self.gamma.clone(),
        )
    }

    /// Stability constant `q*(x) = max_a |q(x | x, a)|`.
    pub fn q_star(&self, x: usize) -> f64 {
        self.rates[x].iter().map(|row| libm::fabs(row[x])).fold(0.0, f64::max)
    }
}

/// One failed model check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub location: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    passed: bool,
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn passed(&self) -> bool {
        self.passed
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    /// Largest magnitude among violations of `check`, if any.
    pub fn worst(&self, check: &str) -> Option<f64> {
        self.violations
            .iter()
            .filter(|v| v.check == check)
            .map(|v| v.magnitude)
            .reduce(f64::max)
    }
}

pub const CHECK_CONSERVATIVITY: &str = "conservativity";
pub const CHECK_OFF_DIAGONAL: &str = "off-diagonal negative";
pub const CHECK_NON_FINITE: &str = "non-finite value";
pub const CHECK_DISCOUNT: &str = "discount rate";
pub const CHECK_GAMMA_NEGATIVE: &str = "initial distribution negative";
pub const CHECK_GAMMA_MASS: &str = "initial distribution mass";
pub const CHECK_JUMP_VARIANCE: &str = "jump variance";
pub const CHECK_RATE_BOUND: &str = "rate bound";
pub const CHECK_ACTION_INTERVAL: &str = "action interval";
pub const CHECK_EXIT_RATE: &str = "negative exit rate";

/// Checks the rate-kernel axioms, the discount rate and the initial law.
///
/// Every offending row is listed with its own magnitude; for the off-diagonal
/// check the magnitude is the most negative entry of the row.
pub fn validate_finite(model: &FiniteCtmdp) -> ValidationReport {
    let mut violations = Vec::new();
    let s = model.num_states();

    if !(model.alpha.is_finite() && model.alpha > 0.0) {
        violations.push(Violation {
            check: CHECK_DISCOUNT,
            location: String::from("alpha"),
            magnitude: model.alpha,
        });
    }

    for (x, k) in model.pairs() {
        let row = model.rate_row(x, k);
        if row.iter().any(|v| !v.is_finite())
            || !model.reward(x, k).is_finite()
            || (0..model.num_costs()).any(|n| !model.cost(n, x, k).is_finite())
        {
            violations.push(Violation {
                check: CHECK_NON_FINITE,
                location: format!("x={x}, a={}", model.action_label(x, k)),
                magnitude: f64::NAN,
            });
            continue;
        }
        let worst_negative = row
            .iter()
            .enumerate()
            .filter(|&(y, &v)| y != x && v < 0.0)
            .map(|(_, &v)| -v)
            .fold(0.0, f64::max);
        if worst_negative > 0.0 {
            violations.push(Violation {
                check: CHECK_OFF_DIAGONAL,
                location: format!("x={x}, a={}", model.action_label(x, k)),
                magnitude: worst_negative,
            });
        }
        let sum: f64 = row.iter().sum();
        if libm::fabs(sum) > CONSERVATIVE_TOL {
            violations.push(Violation {
                check: CHECK_CONSERVATIVITY,
                location: format!("x={x}, a={}", model.action_label(x, k)),
                magnitude: libm::fabs(sum),
            });
        }
    }

    let mut mass = 0.0;
    for y in 0..s {
        let g = model.gamma[y];
        if !g.is_finite() || g < 0.0 {
            violations.push(Violation {
                check: CHECK_GAMMA_NEGATIVE,
                location: format!("gamma[{y}]"),
                magnitude: -g,
            });
        }
        mass += g;
    }
    if !(libm::fabs(mass - 1.0) <= INITIAL_MASS_TOL) {
        violations.push(Violation {
            check: CHECK_GAMMA_MASS,
            location: String::from("gamma"),
            magnitude: libm::fabs(mass - 1.0),
        });
    }
    for (n, &d) in model.bounds.iter().enumerate() {
        if !d.is_finite() {
            violations.push(Violation {
                check: CHECK_NON_FINITE,
                location: format!("bounds[{n}]"),
                magnitude: f64::NAN,
            });
        }
    }

    ValidationReport::from_violations(violations)
}

/// Validates and returns an error describing the first violation, for callers
/// that need a usable model rather than a report.
pub fn require_valid(model: &FiniteCtmdp) -> Result<()> {
    let report = validate_finite(model);
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(Error::Axiom(format!(
            "{} violated at {} (magnitude {:e})",
            v.check, v.location, v.magnitude
        ))),
    }
}

/// Scalar function of a state-action pair.
pub type PairFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Scalar function of a state.
pub type StateFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
/// Draws an initial state.
pub type InitialSampler = Box<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;

/// Initial law of a real-line model.
pub enum InitialLaw1D {
    Point(f64),
    Sampler(InitialSampler),
}

impl InitialLaw1D {
    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            Self::Point(x) => *x,
            Self::Sampler(f) => f(rng),
        }
    }
}

impl core::fmt::Debug for InitialLaw1D {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Point(x) => write!(f, "Point({x})"),
            Self::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

/// Controlled jump model on the real line.
///
/// From `(x, a)` the process leaves at rate `exit_rate(x, a)` and lands at a
/// draw from `N(jump_mean(x, a), jump_var(x, a))`. Admissible actions at `x`
/// are the interval `[action_lo(x), action_hi(x)]`, and `rate_bound(x)` must
/// dominate the exit rate over that interval.
pub struct ContinuousCtmdp1D {
    pub exit_rate: PairFn,
    pub jump_mean: PairFn,
    pub jump_var: PairFn,
    pub action_lo: StateFn,
    pub action_hi: StateFn,
    pub reward: PairFn,
    pub costs: Vec<PairFn>,
    pub bounds: Vec<f64>,
    pub alpha: f64,
    pub initial: InitialLaw1D,
    pub rate_bound: StateFn,
    /// Lyapunov function `w >= 1`, when the model ships one.
    pub w: Option<StateFn>,
    /// Companion `w' >= 1`, when the model ships one.
    pub w_prime: Option<StateFn>,
}

impl core::fmt::Debug for ContinuousCtmdp1D {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ContinuousCtmdp1D")
            .field("alpha", &self.alpha)
            .field("bounds", &self.bounds)
            .field("initial", &self.initial)
            .finish_non_exhaustive()
    }
}

impl ContinuousCtmdp1D {
    /// Clamps `a` into the admissible interval at `x`.
    pub fn clamp_action(&self, x: f64, a: f64) -> f64 {
        a.max((self.action_lo)(x)).min((self.action_hi)(x))
    }
}

/// Checks the real-line model invariants on sampled states, using
/// `actions_per_state` evenly spaced actions across each admissible interval.
pub fn validate_continuous(model: &ContinuousCtmdp1D, states: &[f64], actions_per_state: usize) -> ValidationReport {
    let mut violations = Vec::new();
    if !(model.alpha.is_finite() && model.alpha > 0.0) {
        violations.push(Violation {
            check: CHECK_DISCOUNT,
            location: String::from("alpha"),
            magnitude: model.alpha,
        });
    }
    let m = actions_per_state.max(1);
    for &x in states {
        let lo = (model.action_lo)(x);
        let hi = (model.action_hi)(x);
        if !(lo <= hi) {
            violations.push(Violation {
                check: CHECK_ACTION_INTERVAL,
                location: format!("x={x}"),
                magnitude: lo - hi,
            });
            continue;
        }
        let bound = (model.rate_bound)(x);
        for i in 0..m {
            let a = if m == 1 {
                lo
            } else {
                lo + (hi - lo) * (i as f64) / ((m - 1) as f64)
            };
            let rate = (model.exit_rate)(x, a);
            if rate < 0.0 {
                violations.push(Violation {
                    check: CHECK_EXIT_RATE,
                    location: format!("x={x}, a={a}"),
                    magnitude: -rate,
                });
            }
            if rate > bound {
                violations.push(Violation {
                    check: CHECK_RATE_BOUND,
                    location: format!("x={x}, a={a}"),
                    magnitude: rate - bound,
                });
            }
            let var = (model.jump_var)(x, a);
            if !(var > 0.0) {
                violations.push(Violation {
                    check: CHECK_JUMP_VARIANCE,
                    location: format!("x={x}, a={a}"),
                    magnitude: -var,
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

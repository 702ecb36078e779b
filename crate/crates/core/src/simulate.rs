//! Monte Carlo simulation of controlled jump processes.
//!
//! From state `x_k` at jump time `T_k`, the policy fixes an action law that may
//! depend on the jump history and on the time elapsed since `T_k`. The jump
//! intensity is the law-weighted exit rate. When the law is constant over a
//! sojourn the holding time is exponential; otherwise jumps are generated by
//! thinning a Poisson stream at the model's rate bound `λ̄(x_k)`.
//!
//! Every trajectory draws from its own ChaCha stream, selected by the
//! trajectory index under a master seed, so estimates do not depend on the
//! order or the parallelism in which trajectories run.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::lyapunov::moment_bound;
use crate::model::{ContinuousCtmdp1D, FiniteCtmdp};
use crate::occupation::{OccupationMeasure, StationaryPolicy};

/// Jump-count guard per unit of simulated time.
pub const JUMPS_PER_UNIT_TIME: f64 = 1e6;
/// Relative slack allowed when comparing an intensity to the rate bound.
const RATE_BOUND_SLACK: f64 = 1e-12;
/// Simpson panels per unit of `α·t` when integrating a time-varying reward
/// rate over a sojourn; at least this many panels are used per sojourn.
const SIMPSON_PANELS: usize = 64;

/// Weighted actions; weights sum to one.
pub type ActionLaw<A> = Vec<(A, f64)>;

/// Controlled jump model that can be simulated.
pub trait JumpModel: Sync {
    type State: Clone + core::fmt::Debug + Send + Sync;
    type Action: Clone + core::fmt::Debug + Send + Sync;

    fn alpha(&self) -> f64;
    /// Exit rate `-q({x}|x,a)`.
    fn exit_rate(&self, x: &Self::State, a: &Self::Action) -> f64;
    /// Upper bound on the exit rate over every admissible action at `x`.
    fn rate_bound(&self, x: &Self::State) -> f64;
    /// Post-jump state drawn from `q(·|x,a) / exit_rate`.
    fn sample_jump(&self, x: &Self::State, a: &Self::Action, rng: &mut dyn RngCore) -> Self::State;
    fn sample_initial(&self, rng: &mut dyn RngCore) -> Self::State;
}

fn sample_categorical(weights: impl Iterator<Item = f64> + Clone, rng: &mut dyn RngCore) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

impl JumpModel for FiniteCtmdp {
    type State = usize;
    type Action = usize;

    fn alpha(&self) -> f64 {
        FiniteCtmdp::alpha(self)
    }

    fn exit_rate(&self, x: &usize, k: &usize) -> f64 {
        FiniteCtmdp::exit_rate(self, *x, *k)
    }

    fn rate_bound(&self, x: &usize) -> f64 {
        self.q_star(*x)
    }

    fn sample_jump(&self, x: &usize, k: &usize, rng: &mut dyn RngCore) -> usize {
        let x = *x;
        let row = self.rate_row(x, *k);
        sample_categorical(
            row.iter()
                .enumerate()
                .map(move |(y, q)| if y == x { 0.0 } else { q.max(0.0) }),
            rng,
        )
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> usize {
        sample_categorical(self.gamma().iter().copied(), rng)
    }
}

impl JumpModel for ContinuousCtmdp1D {
    type State = f64;
    type Action = f64;

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn exit_rate(&self, x: &f64, a: &f64) -> f64 {
        (self.exit_rate)(*x, *a)
    }

    fn rate_bound(&self, x: &f64) -> f64 {
        (self.rate_bound)(*x)
    }

    fn sample_jump(&self, x: &f64, a: &f64, rng: &mut dyn RngCore) -> f64 {
        let mean = (self.jump_mean)(*x, *a);
        let sd = libm::sqrt((self.jump_var)(*x, *a));
        Normal::new(mean, sd).map(|d| d.sample(rng)).unwrap_or(mean)
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> f64 {
        self.initial.sample(rng)
    }
}

/// Action rule over the jump history `(T_0, x_0), ..., (T_k, x_k)` and the time
/// elapsed since `T_k`. Past actions are not part of the history.
pub trait HistoryPolicy<X, A>: Sync {
    fn law(&self, history: &[(f64, X)], elapsed: f64) -> ActionLaw<A>;

    /// True when the law never changes within a sojourn, which allows exact
    /// exponential holding times instead of thinning.
    fn sojourn_constant(&self) -> bool {
        false
    }
}

impl HistoryPolicy<usize, usize> for StationaryPolicy {
    fn law(&self, history: &[(f64, usize)], _elapsed: f64) -> ActionLaw<usize> {
        let x = history.last().map(|h| h.1).unwrap_or(0);
        self.row(x)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| (k, *p))
            .collect()
    }

    fn sojourn_constant(&self) -> bool {
        true
    }
}

/// Deterministic stationary rule `x -> f(x)` on a real-line model.
pub struct StationaryRule<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> HistoryPolicy<f64, f64> for StationaryRule<F> {
    fn law(&self, history: &[(f64, f64)], _elapsed: f64) -> ActionLaw<f64> {
        let x = history.last().map(|h| h.1).unwrap_or(0.0);
        vec![((self.0)(x), 1.0)]
    }

    fn sojourn_constant(&self) -> bool {
        true
    }
}

/// Policy given directly by a closure over history and elapsed time.
pub struct FnPolicy<F>(pub F);

impl<X, A, F> HistoryPolicy<X, A> for FnPolicy<F>
where
    F: Fn(&[(f64, X)], f64) -> ActionLaw<A> + Sync,
{
    fn law(&self, history: &[(f64, X)], elapsed: f64) -> ActionLaw<A> {
        (self.0)(history, elapsed)
    }
}

/// One jump epoch: time, state entered, and the action law at the start of
/// the sojourn.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord<X, A> {
    pub time: f64,
    pub state: X,
    pub law: ActionLaw<A>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<X, A> {
    pub records: Vec<JumpRecord<X, A>>,
    pub horizon: f64,
    /// The jump-count guard tripped before the horizon.
    pub exploded: bool,
}

impl<X: Clone, A> Trajectory<X, A> {
    pub fn num_jumps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Index of the record in force at time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.records.partition_point(|r| r.time <= t).saturating_sub(1)
    }

    pub fn state_at(&self, t: f64) -> &X {
        &self.records[self.index_at(t)].state
    }

    /// Jump history `(T_j, x_j)` for `j <= k`.
    pub fn history(&self, k: usize) -> Vec<(f64, X)> {
        self.records[..=k].iter().map(|r| (r.time, r.state.clone())).collect()
    }
}

/// Random stream for trajectory `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Default jump-count guard for a run up to `horizon`.
pub fn default_jump_guard(horizon: f64) -> usize {
    let scale = if horizon.is_finite() { horizon.max(1.0) } else { 1.0 };
    (JUMPS_PER_UNIT_TIME * scale) as usize
}

fn mixed_rate<M: JumpModel>(model: &M, x: &M::State, law: &ActionLaw<M::Action>) -> f64 {
    law.iter().map(|(a, w)| w * model.exit_rate(x, a)).sum()
}

fn check_bound<M: JumpModel>(_model: &M, x: &M::State, rate: f64, bound: f64) -> Result<()> {
    if rate > bound * (1.0 + RATE_BOUND_SLACK) || rate < 0.0 {
        return Err(Error::RateBound {
            location: format!("{x:?}"),
            rate,
            bound,
        });
    }
    Ok(())
}

fn jump_from<M: JumpModel>(model: &M, x: &M::State, law: &ActionLaw<M::Action>, rng: &mut dyn RngCore) -> M::State {
    let idx = sample_categorical(law.iter().map(|(a, w)| w * model.exit_rate(x, a)), rng);
    model.sample_jump(x, &law[idx].0, rng)
}

/// Simulates one trajectory from `x0` on `[0, horizon)`.
pub fn sample_trajectory<M, P>(
    model: &M,
    policy: &P,
    x0: M::State,
    horizon: f64,
    jump_guard: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory<M::State, M::Action>>
where
    M: JumpModel,
    P: HistoryPolicy<M::State, M::Action> + ?Sized,
{
    let mut history: Vec<(f64, M::State)> = vec![(0.0, x0.clone())];
    let mut records = vec![JumpRecord {
        time: 0.0,
        state: x0,
        law: policy.law(&history, 0.0),
    }];
    let constant = policy.sojourn_constant();
    loop {
        let current = records.last().expect("nonempty");
        let (t, x) = (current.time, current.state.clone());
        let bound = model.rate_bound(&x);
        let next = if constant {
            let rate = mixed_rate(model, &x, &current.law);
            check_bound(model, &x, rate, bound)?;
            if rate <= 0.0 {
                None
            } else {
                let hold = Exp::new(rate).expect("positive rate").sample(rng);
                (t + hold < horizon).then(|| (t + hold, jump_from(model, &x, &current.law, rng)))
            }
        } else if bound <= 0.0 {
            None
        } else {
            let proposals = Exp::new(bound).expect("positive bound");
            let mut elapsed = 0.0;
            loop {
                elapsed += proposals.sample(rng);
                if t + elapsed >= horizon {
                    break None;
                }
                let law = policy.law(&history, elapsed);
                let rate = mixed_rate(model, &x, &law);
                check_bound(model, &x, rate, bound)?;
                let accept = rate / bound;
                debug_assert!((0.0..=1.0 + RATE_BOUND_SLACK).contains(&accept));
                if rng.random::<f64>() < accept {
                    break Some((t + elapsed, jump_from(model, &x, &law, rng)));
                }
            }
        };
        let Some((time, state)) = next else {
            return Ok(Trajectory {
                records,
                horizon,
                exploded: false,
            });
        };
        if records.len() > jump_guard {
            return Ok(Trajectory {
                records,
                horizon,
                exploded: true,
            });
        }
        history.push((time, state.clone()));
        let law = policy.law(&history, 0.0);
        records.push(JumpRecord { time, state, law });
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trajectories: usize,
    /// Half-width multiplier of the reported interval (3 standard errors).
    pub z: f64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: libm::sqrt(var / n.max(1) as f64),
            n_trajectories: n,
            z: 3.0,
        }
    }

    /// Two-sided confidence level of `mean ± z·std_error` under normality.
    pub fn confidence(&self) -> f64 {
        libm::erf(self.z / core::f64::consts::SQRT_2)
    }

    /// Whether `value` lies within `z` standard errors of the mean.
    pub fn covers(&self, value: f64) -> bool {
        libm::fabs(self.mean - value) <= self.z * self.std_error
    }
}

/// Runs `f(i)` for `i in 0..n` and returns the results in index order.
fn run_indexed<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n as u64).map(f).collect()
    }
}

/// Start of each simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Start<X> {
    /// Draw from the model's initial law.
    Initial,
    Fixed(X),
}

fn start_state<M: JumpModel>(model: &M, start: &Start<M::State>, rng: &mut dyn RngCore) -> M::State {
    match start {
        Start::Initial => model.sample_initial(rng),
        Start::Fixed(x) => x.clone(),
    }
}

/// `∫_{t0}^{t1} e^{-αt} dt`.
fn discount_integral(alpha: f64, t0: f64, t1: f64) -> f64 {
    // e^{-α t0} (1 - e^{-α (t1 - t0)}) / α
    -libm::exp(-alpha * t0) * libm::expm1(-alpha * (t1 - t0)) / alpha
}

/// Discounted integral of the running rate `u` along one trajectory up to its horizon.
pub fn discounted_integral<M, P>(
    model: &M,
    policy: &P,
    traj: &Trajectory<M::State, M::Action>,
    u: &(impl Fn(&M::State, &M::Action) -> f64 + ?Sized),
) -> f64
where
    M: JumpModel,
    P: HistoryPolicy<M::State, M::Action> + ?Sized,
{
    let alpha = model.alpha();
    let rate_of = |x: &M::State, law: &ActionLaw<M::Action>| -> f64 { law.iter().map(|(a, w)| w * u(x, a)).sum() };
    let mut total = 0.0;
    for (k, rec) in traj.records.iter().enumerate() {
        let end = traj
            .records
            .get(k + 1)
            .map(|r| r.time)
            .unwrap_or(traj.horizon)
            .min(traj.horizon);
        if end <= rec.time {
            continue;
        }
        if policy.sojourn_constant() {
            total += rate_of(&rec.state, &rec.law) * discount_integral(alpha, rec.time, end);
        } else {
            let history = traj.history(k);
            let scaled = libm::ceil(alpha * (end - rec.time) * SIMPSON_PANELS as f64) as usize;
            let n = 2 * scaled.max(SIMPSON_PANELS).div_ceil(2);
            let h = (end - rec.time) / n as f64;
            let g = |s: f64| libm::exp(-alpha * (rec.time + s)) * rate_of(&rec.state, &policy.law(&history, s));
            let mut acc = g(0.0) + g(end - rec.time);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(h * i as f64);
            }
            total += acc * h / 3.0;
        }
    }
    total
}

/// Monte Carlo estimate of the discounted criterion `E ∫_0^T e^{-αt} u(ξ_t, π_t) dt`.
pub fn discounted_value_mc<M, P, U>(
    model: &M,
    policy: &P,
    start: &Start<M::State>,
    u: U,
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<McEstimate>
where
    M: JumpModel,
    P: HistoryPolicy<M::State, M::Action>,
    U: Fn(&M::State, &M::Action) -> f64 + Sync + Send,
{
    let guard = default_jump_guard(horizon);
    let samples = run_indexed(n, |i| {
        let mut rng = stream_rng(seed, i);
        let x0 = start_state(model, start, &mut rng);
        let traj = sample_trajectory(model, policy, x0, horizon, guard, &mut rng)?;
        if traj.exploded {
            return Err(Error::Explosion {
                jumps: guard,
                time: horizon,
            });
        }
        Ok(discounted_integral(model, policy, &traj, &u))
    })?;
    Ok(McEstimate::from_samples(&samples))
}

/// Estimates the occupation measure by sampling `τ ~ Exp(α)` per trajectory
/// and recording `(ξ_τ, a)` with `a` drawn from the action law in force at `τ`.
pub fn empirical_occupation<P>(model: &FiniteCtmdp, policy: &P, n: usize, seed: u64) -> Result<OccupationMeasure>
where
    P: HistoryPolicy<usize, usize>,
{
    let exp = Exp::new(model.alpha()).map_err(|_| Error::Parameter("alpha must be positive".into()))?;
    let hits = run_indexed(n, |i| {
        let mut rng = stream_rng(seed, i);
        let tau = exp.sample(&mut rng);
        let x0 = model.sample_initial(&mut rng);
        let guard = default_jump_guard(tau);
        let traj = sample_trajectory(model, policy, x0, tau, guard, &mut rng)?;
        if traj.exploded {
            return Err(Error::Explosion {
                jumps: guard,
                time: tau,
            });
        }
        let k = traj.index_at(tau);
        let rec = &traj.records[k];
        let law = if policy.sojourn_constant() {
            rec.law.clone()
        } else {
            policy.law(&traj.history(k), tau - rec.time)
        };
        let idx = sample_categorical(law.iter().map(|(_, w)| *w), &mut rng);
        Ok(model.pair_index(rec.state, law[idx].0))
    })?;
    let mut mass = vec![0.0; model.num_pairs()];
    for j in hits {
        mass[j] += 1.0;
    }
    for m in mass.iter_mut() {
        *m /= n as f64;
    }
    OccupationMeasure::for_model(model, mass)
}

/// Empirical check of the moment bound at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub t: f64,
    pub estimate: McEstimate,
    pub bound: f64,
    /// `mean <= bound + 3 std_error`.
    pub passed: bool,
}

/// Compares the empirical `E[w(ξ_t)]` from `x0` with the drift bound.
#[allow(clippy::too_many_arguments)]
pub fn check_moment_bound<M, P>(
    model: &M,
    policy: &P,
    w: impl Fn(&M::State) -> f64 + Sync + Send,
    rho: f64,
    b: f64,
    x0: M::State,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<MomentCheck>
where
    M: JumpModel,
    P: HistoryPolicy<M::State, M::Action>,
{
    let guard = default_jump_guard(t);
    let samples = run_indexed(n, |i| {
        let mut rng = stream_rng(seed, i);
        let traj = sample_trajectory(model, policy, x0.clone(), t, guard, &mut rng)?;
        if traj.exploded {
            return Err(Error::Explosion { jumps: guard, time: t });
        }
        Ok(w(traj.state_at(t)))
    })?;
    let estimate = McEstimate::from_samples(&samples);
    let bound = moment_bound(w(&x0), rho, b, t);
    Ok(MomentCheck {
        t,
        estimate,
        bound,
        passed: estimate.mean <= bound + 3.0 * estimate.std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupation::{occupation_of_stationary, StationaryPolicy};

    fn two_state() -> FiniteCtmdp {
        FiniteCtmdp::new(
            vec![vec![0], vec![0]],
            vec![vec![vec![-1.0, 1.0]], vec![vec![2.0, -2.0]]],
            vec![vec![2.0], vec![0.0]],
            vec![],
            vec![],
            1.0,
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn absorbing_state_never_jumps() {
        let m = FiniteCtmdp::new(
            vec![vec![0]],
            vec![vec![vec![0.0]]],
            vec![vec![1.0]],
            vec![],
            vec![],
            1.0,
            vec![1.0],
        )
        .unwrap();
        let phi = StationaryPolicy::deterministic(&m, &[0]).unwrap();
        let mut rng = stream_rng(0, 0);
        let traj = sample_trajectory(&m, &phi, 0, 1e6, 10, &mut rng).unwrap();
        assert_eq!(traj.num_jumps(), 0);
        let eta = empirical_occupation(&m, &phi, 100, 1).unwrap();
        assert_eq!(eta.mass(), &[1.0]);
    }

    #[test]
    fn times_increase_and_states_alternate() {
        let m = two_state();
        let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
        let mut rng = stream_rng(3, 7);
        let traj = sample_trajectory(&m, &phi, 0, 50.0, 10_000, &mut rng).unwrap();
        assert!(traj.num_jumps() > 10);
        for w in traj.records.windows(2) {
            assert!(w[0].time < w[1].time);
            assert_ne!(w[0].state, w[1].state);
        }
        assert!(!traj.exploded);
    }

    #[test]
    fn constant_rate_integrates_exactly() {
        let m = two_state();
        let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
        let est = discounted_value_mc(&m, &phi, &Start::Initial, |_, _| 3.0, 50, 40.0, 5).unwrap();
        assert!((est.mean - 3.0 * (1.0 - (-40.0f64).exp())).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
        let zero = discounted_value_mc(&m, &phi, &Start::Initial, |_, _| 0.0, 50, 10.0, 5).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn seeds_reproduce() {
        let m = two_state();
        let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
        let u = |x: &usize, k: &usize| m.reward(*x, *k);
        let a = discounted_value_mc(&m, &phi, &Start::Initial, u, 200, 30.0, 11).unwrap();
        let b = discounted_value_mc(&m, &phi, &Start::Initial, u, 200, 30.0, 11).unwrap();
        assert_eq!(a, b);
        let c = discounted_value_mc(&m, &phi, &Start::Initial, u, 200, 30.0, 12).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn guard_trips() {
        let m = two_state();
        let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
        let mut rng = stream_rng(0, 0);
        let traj = sample_trajectory(&m, &phi, 0, 1e9, 5, &mut rng).unwrap();
        assert!(traj.exploded);
    }

    #[test]
    fn rate_bound_violation_is_an_error() {
        let m = two_state();
        // action law with weight 2 doubles the intensity beyond q*
        let bad = FnPolicy(|_: &[(f64, usize)], _| vec![(0usize, 2.0)]);
        let mut rng = stream_rng(0, 0);
        let err = sample_trajectory(&m, &bad, 0, 10.0, 100, &mut rng).unwrap_err();
        assert!(matches!(err, Error::RateBound { .. }));
    }

    #[test]
    fn thinning_matches_exact_path_statistically() {
        // a time-varying rule that happens to be constant must agree with the
        // exact sampler in distribution
        let m = two_state();
        let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
        let thin = FnPolicy(|_: &[(f64, usize)], _| vec![(0usize, 1.0)]);
        let eta = occupation_of_stationary(&m, &phi).unwrap();
        let est = empirical_occupation(&m, &thin, 20_000, 9).unwrap();
        let p = eta.mass()[0];
        let se = (p * (1.0 - p) / 20_000.0).sqrt();
        assert!((est.mass()[0] - p).abs() <= 4.0 * se);
    }

    #[test]
    fn thinning_value_integrates_time_varying_rate() {
        let m = two_state();
        let thin = FnPolicy(|_: &[(f64, usize)], _| vec![(0usize, 1.0)]);
        let est = discounted_value_mc(&m, &thin, &Start::Initial, |_, _| 2.0, 20, 40.0, 1).unwrap();
        let exact = 2.0 * (1.0 - (-40.0f64).exp());
        assert!((est.mean - exact).abs() < 1e-9, "{} vs {exact}", est.mean);
    }

    #[test]
    fn occupation_estimate_normalized() {
        let m = two_state();
        let phi = StationaryPolicy::deterministic(&m, &[0, 0]).unwrap();
        for n in [1, 7, 100] {
            let est = empirical_occupation(&m, &phi, n, 2).unwrap();
            assert!((est.total_mass() - 1.0).abs() < 1e-12);
        }
    }
}

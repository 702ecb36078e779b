//! Occupation measures of stationary policies on finite models.
//!
//! The occupation measure of a policy is the α-discounted expected
//! state-action distribution `η(x,a) = α ∫ e^{-αt} P(ξ_t = x, action a) dt`.
//! For a randomized stationary policy `φ` its state marginal `η̂` solves the
//! balance equation `α η̂ = α γ + Q_φᵀ η̂`, and `η(x,a) = η̂(x) φ(a|x)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::FiniteCtmdp;

/// Tolerance on the total mass of an occupation measure.
pub const MASS_TOL: f64 = 1e-10;
/// Tolerance on the row sums of a stationary policy.
pub const POLICY_ROW_TOL: f64 = 1e-12;
/// Default support threshold when counting randomizations.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Probability table over the pairs of a finite model, stored in the model's
/// flat pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    offsets: Vec<usize>,
    mass: Vec<f64>,
}

impl OccupationMeasure {
    /// Wraps `mass` laid out by `offsets` (start of each state, plus the total).
    pub fn from_parts(offsets: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        let total = offsets.last().copied().unwrap_or(0);
        if mass.len() != total {
            return Err(Error::Dimension {
                field: "occupation mass".into(),
                expected: total,
                found: mass.len(),
            });
        }
        Ok(Self { offsets, mass })
    }

    /// Measure shaped for `model`, from a flat table.
    pub fn for_model(model: &FiniteCtmdp, mass: Vec<f64>) -> Result<Self> {
        Self::from_parts(model.offsets().to_vec(), mass)
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_actions(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn get(&self, x: usize, k: usize) -> f64 {
        self.mass[self.offsets[x] + k]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.mass[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Marginal `η̂(x) = Σ_a η(x,a)`.
    pub fn marginal(&self) -> Vec<f64> {
        (0..self.num_states()).map(|x| self.row(x).iter().sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// Convex combination `Σ w_i η_i` of measures sharing a layout.
    pub fn mixture(weights: &[f64], measures: &[&Self]) -> Result<Self> {
        let first = measures
            .first()
            .ok_or_else(|| Error::Parameter("empty mixture".into()))?;
        let mut mass = vec![0.0; first.mass.len()];
        for (w, m) in weights.iter().zip(measures) {
            if m.offsets != first.offsets {
                return Err(Error::Parameter("mixture of differently shaped measures".into()));
            }
            for (acc, v) in mass.iter_mut().zip(&m.mass) {
                *acc += w * v;
            }
        }
        Self::from_parts(first.offsets.clone(), mass)
    }

    fn check_shape(&self, model: &FiniteCtmdp) -> Result<()> {
        if self.offsets != model.offsets() {
            return Err(Error::Dimension {
                field: "occupation measure".into(),
                expected: model.num_pairs(),
                found: self.mass.len(),
            });
        }
        Ok(())
    }
}

/// Randomized stationary policy `φ(a|x)`, indexed by admissible action position.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy {
    probs: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    /// Checks that every row is a probability vector within [`POLICY_ROW_TOL`].
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (x, row) in probs.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Parameter(format!("policy row {x} is empty")));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Parameter(format!("policy row {x} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if libm::fabs(s - 1.0) > POLICY_ROW_TOL {
                return Err(Error::Parameter(format!("policy row {x} sums to {s}")));
            }
        }
        Ok(Self { probs })
    }

    /// Deterministic policy choosing action position `choice[x]` at `x`.
    pub fn deterministic(model: &FiniteCtmdp, choice: &[usize]) -> Result<Self> {
        if choice.len() != model.num_states() {
            return Err(Error::Dimension {
                field: "policy".into(),
                expected: model.num_states(),
                found: choice.len(),
            });
        }
        let mut probs = Vec::with_capacity(choice.len());
        for (x, &k) in choice.iter().enumerate() {
            if k >= model.num_actions(x) {
                return Err(Error::InadmissibleAction { state: x, action: k });
            }
            let mut row = vec![0.0; model.num_actions(x)];
            row[k] = 1.0;
            probs.push(row);
        }
        Ok(Self { probs })
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, x: usize, k: usize) -> f64 {
        self.probs[x][k]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.probs
            .iter()
            .all(|row| row.iter().filter(|&&p| p > 0.0).count() == 1)
    }

    /// Action position with the largest probability at each state.
    pub fn argmax(&self) -> Vec<usize> {
        self.probs
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |(bi, bp), (i, &p)| {
                            if p > bp {
                                (i, p)
                            } else {
                                (bi, bp)
                            }
                        },
                    )
                    .0
            })
            .collect()
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    fn check_shape(&self, model: &FiniteCtmdp) -> Result<()> {
        if self.probs.len() != model.num_states() {
            return Err(Error::Dimension {
                field: "policy".into(),
                expected: model.num_states(),
                found: self.probs.len(),
            });
        }
        for x in 0..model.num_states() {
            if self.probs[x].len() != model.num_actions(x) {
                return Err(Error::Dimension {
                    field: format!("policy[{x}]"),
                    expected: model.num_actions(x),
                    found: self.probs[x].len(),
                });
            }
        }
        Ok(())
    }
}

/// Generator `Q_φ[y][x] = Σ_a q(x|y,a) φ(a|y)` of the chain run under `φ`.
pub fn policy_generator(model: &FiniteCtmdp, phi: &StationaryPolicy) -> Result<DMatrix<f64>> {
    phi.check_shape(model)?;
    let s = model.num_states();
    let mut q = DMatrix::zeros(s, s);
    for y in 0..s {
        for k in 0..model.num_actions(y) {
            let p = phi.prob(y, k);
            if p == 0.0 {
                continue;
            }
            for (x, rate) in model.rate_row(y, k).iter().enumerate() {
                q[(y, x)] += p * rate;
            }
        }
    }
    Ok(q)
}

/// Law of `ξ_t` under `φ` from the initial law `p0`: `p0ᵀ e^{Q_φ t}`.
pub fn transient_distribution(model: &FiniteCtmdp, phi: &StationaryPolicy, p0: &[f64], t: f64) -> Result<Vec<f64>> {
    if p0.len() != model.num_states() {
        return Err(Error::Dimension {
            field: "initial law".into(),
            expected: model.num_states(),
            found: p0.len(),
        });
    }
    let q = policy_generator(model, phi)? * t;
    let pt = expm(&q).transpose() * DVector::from_column_slice(p0);
    Ok(pt.iter().copied().collect())
}

/// Matrix exponential by scaling and squaring a degree-18 Taylor polynomial.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a
        .row_iter()
        .map(|r| r.iter().map(|v| libm::fabs(*v)).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Exact occupation measure of a randomized stationary policy.
///
/// Solves `(αI - Q_φᵀ) η̂ = α γ` by LU and spreads `η̂(x)` over actions by `φ`.
pub fn occupation_of_stationary(model: &FiniteCtmdp, phi: &StationaryPolicy) -> Result<OccupationMeasure> {
    let q = policy_generator(model, phi)?;
    let s = model.num_states();
    let alpha = model.alpha();
    let system = DMatrix::identity(s, s) * alpha - q.transpose();
    let rhs = DVector::from_iterator(s, model.gamma().iter().map(|g| alpha * g));
    let marginal = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("αI - Q_φᵀ".into()))?;
    let mut mass = Vec::with_capacity(model.num_pairs());
    for x in 0..s {
        // round-off can leave unreachable states at -1e-17
        let m = if marginal[x] < 0.0 && marginal[x] > -1e-12 {
            0.0
        } else {
            marginal[x]
        };
        for k in 0..model.num_actions(x) {
            mass.push(m * phi.prob(x, k));
        }
    }
    OccupationMeasure::for_model(model, mass)
}

/// Balance residual `max_x |α η̂(x) - α γ(x) - Σ_{y,a} q(x|y,a) η(y,a)|`.
pub fn balance_residual(model: &FiniteCtmdp, eta: &OccupationMeasure) -> Result<f64> {
    eta.check_shape(model)?;
    let s = model.num_states();
    let alpha = model.alpha();
    let marginal = eta.marginal();
    let mut inflow = vec![0.0; s];
    for (y, k) in model.pairs() {
        let m = eta.get(y, k);
        if m == 0.0 {
            continue;
        }
        for (x, rate) in model.rate_row(y, k).iter().enumerate() {
            inflow[x] += rate * m;
        }
    }
    Ok((0..s)
        .map(|x| libm::fabs(alpha * marginal[x] - alpha * model.gamma()[x] - inflow[x]))
        .fold(0.0, f64::max))
}

/// Which running reward or cost to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Reward,
    /// Zero-based cost index.
    Cost(usize),
}

impl Criterion {
    /// Rate `u(x, a_k)` of the criterion.
    pub fn rate(self, model: &FiniteCtmdp, x: usize, k: usize) -> f64 {
        match self {
            Self::Reward => model.reward(x, k),
            Self::Cost(n) => model.cost(n, x, k),
        }
    }

    pub fn check(self, model: &FiniteCtmdp) -> Result<()> {
        match self {
            Self::Cost(n) if n >= model.num_costs() => Err(Error::CostIndex {
                index: n,
                count: model.num_costs(),
            }),
            _ => Ok(()),
        }
    }
}

/// Discounted value `(1/α) Σ u(x,a) η(x,a)` of a measure.
pub fn value_of_measure(model: &FiniteCtmdp, eta: &OccupationMeasure, which: Criterion) -> Result<f64> {
    which.check(model)?;
    eta.check_shape(model)?;
    let total: f64 = model
        .pairs()
        .map(|(x, k)| which.rate(model, x, k) * eta.get(x, k))
        .sum();
    Ok(total / model.alpha())
}

/// Policy induced by a measure: `φ(a|x) = η(x,a)/η̂(x)` where `η̂(x) > 0`,
/// otherwise a point mass at `fallback(x)`.
pub fn extract_policy(eta: &OccupationMeasure, fallback: impl Fn(usize) -> usize) -> Result<StationaryPolicy> {
    let mut probs = Vec::with_capacity(eta.num_states());
    for x in 0..eta.num_states() {
        let row = eta.row(x);
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            probs.push(row.iter().map(|m| m / total).collect());
        } else {
            let k = fallback(x);
            if k >= row.len() {
                return Err(Error::InadmissibleAction { state: x, action: k });
            }
            let mut r = vec![0.0; row.len()];
            r[k] = 1.0;
            probs.push(r);
        }
    }
    Ok(StationaryPolicy { probs })
}

/// [`extract_policy`] with the first admissible action as fallback.
pub fn extract_policy_default(eta: &OccupationMeasure) -> StationaryPolicy {
    extract_policy(eta, |_| 0).expect("first action is always admissible")
}

/// Number of randomizations `Σ_x (|{a : φ(a|x) > tol}| - 1)`.
pub fn randomization_count(phi: &StationaryPolicy, tol: f64) -> usize {
    phi.probs
        .iter()
        .map(|row| row.iter().filter(|&&p| p > tol).count().saturating_sub(1))
        .sum()
}

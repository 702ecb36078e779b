//! Drift condition checks and the moment and value bounds it implies.
//!
//! A Lyapunov function `w >= 1` satisfies the drift condition with constants
//! `(rho, b)` when `∫ w(y) q(dy|x,a) <= rho w(x) + b` for every admissible pair.
//! Under that condition `E[w(ξ_t)]` is bounded by [`moment_bound`], and with
//! costs dominated by `M w` every discounted value is bounded by
//! [`value_bound`].

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::FiniteCtmdp;

/// Below this magnitude `rho` is treated as zero.
pub const RHO_ZERO: f64 = 1e-14;

/// Lyapunov function pair with its drift and domination constants.
pub struct LyapunovPair<X: ?Sized> {
    pub w: Box<dyn Fn(&X) -> f64 + Send + Sync>,
    pub w_prime: Box<dyn Fn(&X) -> f64 + Send + Sync>,
    pub rho: f64,
    pub b: f64,
    /// Cost domination constant: `|c_n(x,a)| <= M w(x)`.
    pub m: f64,
}

impl<X: ?Sized> core::fmt::Debug for LyapunovPair<X> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LyapunovPair")
            .field("rho", &self.rho)
            .field("b", &self.b)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl LyapunovPair<usize> {
    /// Pair on a finite state space given by tabulated `w` and `w'`.
    pub fn tabulated(w: Vec<f64>, w_prime: Vec<f64>, rho: f64, b: f64, m: f64) -> Self {
        Self {
            w: Box::new(move |x: &usize| w[*x]),
            w_prime: Box::new(move |x: &usize| w_prime[*x]),
            rho,
            b,
            m,
        }
    }

    /// Checks `alpha > rho`, as required for the discounted bounds.
    pub fn check_against(&self, model: &FiniteCtmdp) -> Result<()> {
        check_discount(model.alpha(), self.rho)
    }
}

fn check_discount(alpha: f64, rho: f64) -> Result<()> {
    if alpha > rho {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "discount rate {alpha} must exceed drift rate {rho}"
        )))
    }
}

/// Outcome of a drift check over a finite grid of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport<X, A> {
    pub feasible: bool,
    pub rho_used: f64,
    /// Smallest `b >= 0` for which the drift inequality holds on the grid.
    pub b_min: f64,
    /// Grid point attaining `max (∫ w dq - rho w)`.
    pub worst_point: Option<(X, A)>,
    /// First grid point where the moment oracle failed, if any.
    pub failure: Option<(X, A)>,
}

/// Evaluates the drift inequality on `grid`.
///
/// `moment` returns `∫ w(y) q(dy|x,a)`; a `None` or non-finite value marks the
/// check infeasible at that point.
pub fn check_drift<X: Clone, A: Clone>(
    w: impl Fn(&X) -> f64,
    rho: f64,
    grid: &[(X, A)],
    moment: impl Fn(&X, &A) -> Option<f64>,
) -> DriftReport<X, A> {
    let mut best = f64::NEG_INFINITY;
    let mut worst_point = None;
    for (x, a) in grid {
        let value = match moment(x, a) {
            Some(v) if v.is_finite() => v - rho * w(x),
            _ => {
                return DriftReport {
                    feasible: false,
                    rho_used: rho,
                    b_min: f64::INFINITY,
                    worst_point: None,
                    failure: Some((x.clone(), a.clone())),
                }
            }
        };
        if value > best || worst_point.is_none() {
            best = value;
            worst_point = Some((x.clone(), a.clone()));
        }
    }
    let b_min = if worst_point.is_some() {
        best.max(0.0)
    } else {
        f64::INFINITY
    };
    DriftReport {
        feasible: b_min.is_finite(),
        rho_used: rho,
        b_min,
        worst_point,
        failure: None,
    }
}

/// Smallest `rho` for which the drift inequality holds on `grid` with offset `b`.
pub fn min_rho_for_offset<X, A>(
    w: impl Fn(&X) -> f64,
    b: f64,
    grid: &[(X, A)],
    moment: impl Fn(&X, &A) -> Option<f64>,
) -> Option<f64> {
    let mut rho = f64::NEG_INFINITY;
    for (x, a) in grid {
        let v = moment(x, a)?;
        rho = rho.max((v - b) / w(x));
    }
    rho.is_finite().then_some(rho)
}

/// Exact `∫ w(y) q(dy|x,a_k)` on a finite model.
pub fn finite_moment(model: &FiniteCtmdp, w: &[f64], x: usize, k: usize) -> f64 {
    model.rate_row(x, k).iter().zip(w).map(|(q, wy)| q * wy).sum()
}

/// Drift check of a tabulated `w` over every pair of a finite model.
pub fn check_drift_finite(model: &FiniteCtmdp, w: &[f64], rho: f64) -> Result<DriftReport<usize, usize>> {
    if w.len() != model.num_states() {
        return Err(Error::Dimension {
            field: "w".into(),
            expected: model.num_states(),
            found: w.len(),
        });
    }
    let grid: Vec<(usize, usize)> = model.pairs().collect();
    Ok(check_drift(
        |x: &usize| w[*x],
        rho,
        &grid,
        |x, k| Some(finite_moment(model, w, *x, *k)),
    ))
}

/// Bound on `E[w(ξ_t)]` started from a state with `w = w0`:
/// `e^{ρt} w0 + (b/ρ)(e^{ρt} - 1)`, or `w0 + b t` when `ρ = 0`.
pub fn moment_bound(w0: f64, rho: f64, b: f64, t: f64) -> f64 {
    if libm::fabs(rho) < RHO_ZERO {
        w0 + b * t
    } else {
        let g = libm::exp(rho * t);
        g * w0 + (b / rho) * libm::expm1(rho * t)
    }
}

/// Bound `M (α w0 + b) / (α (α - ρ))` on every discounted value.
pub fn value_bound(m: f64, w0: f64, b: f64, alpha: f64, rho: f64) -> Result<f64> {
    check_discount(alpha, rho)?;
    Ok(m * (alpha * w0 + b) / (alpha * (alpha - rho)))
}

/// Discounted tail mass beyond `t` of the moment bound:
/// `∫_t^∞ e^{-αs} M moment_bound(w0, ρ, b, s) ds`.
///
/// For `ρ ≠ 0` this is `M [ (w0 + b/ρ) e^{-(α-ρ)t} / (α-ρ) - (b/ρ) e^{-αt} / α ]`;
/// for `ρ = 0` it is `M e^{-αt} [ w0/α + b (t/α + 1/α²) ]`. At `t = 0` both equal
/// [`value_bound`].
pub fn discounted_tail(m: f64, w0: f64, b: f64, alpha: f64, rho: f64, t: f64) -> f64 {
    if libm::fabs(rho) < RHO_ZERO {
        m * libm::exp(-alpha * t) * (w0 / alpha + b * (t / alpha + 1.0 / (alpha * alpha)))
    } else {
        let gap = alpha - rho;
        // (b/ρ)[e^{-gap t}/gap - e^{-αt}/α] = b e^{-αt} [expm1(ρt)/(ρ gap) + 1/(gap α)]
        let lead = w0 * libm::exp(-gap * t) / gap;
        let offset = b * libm::exp(-alpha * t) * (libm::expm1(rho * t) / (rho * gap) + 1.0 / (gap * alpha));
        m * (lead + offset)
    }
}

/// Horizon `T` after which the discounted contribution of any criterion with
/// costs dominated by `M w` is at most `eps`.
///
/// With `b = 0` the tail is `M w0 e^{-(α-ρ)T} / (α-ρ)` and `T` is solved in
/// closed form; otherwise the tail from [`discounted_tail`], which is strictly
/// decreasing in `T`, is inverted by bisection.
pub fn truncation_horizon(m: f64, w0: f64, b: f64, alpha: f64, rho: f64, eps: f64) -> Result<f64> {
    check_discount(alpha, rho)?;
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let total = value_bound(m, w0, b, alpha, rho)?;
    if eps >= total {
        return Ok(0.0);
    }
    if b == 0.0 {
        let gap = alpha - rho;
        return Ok(libm::log(m * w0 / (eps * gap)) / gap);
    }
    let tail = |t: f64| discounted_tail(m, w0, b, alpha, rho, t);
    let mut lo = 0.0;
    let mut hi = 1.0 / (alpha - rho).min(alpha);
    while tail(hi) > eps {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

//! The occupation-measure linear program and a dense two-phase simplex.
//!
//! For a finite model the constrained problem is the LP
//!
//! ```text
//! minimize   Σ (1/α) c0(x,a) η(x,a)                  with c0 = -r
//! subject to Σ c_n(x,a) η(x,a) <= α d_n             n = 1..N
//!            α Σ_a η(x,a) = α γ(x) + Σ_{y,a} q(x|y,a) η(y,a)   for every x
//!            η >= 0
//! ```
//!
//! The normalization `Σ η = 1` is implied by the balance rows and is not added.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{require_valid, FiniteCtmdp};
use crate::occupation::{
    extract_policy_default, occupation_of_stationary, randomization_count, value_of_measure, Criterion,
    OccupationMeasure, StationaryPolicy, SUPPORT_TOL,
};

/// Primal feasibility tolerance, relative to `1 + |rhs|`.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted.
pub const PIVOT_TOL: f64 = 1e-10;
/// Reduced-cost tolerance, relative to `1 + max |c|`.
pub const OPTIMALITY_TOL: f64 = 1e-10;
/// Basic values below this (times the rhs scale) are reported as zero.
const ZERO_CLEAN: f64 = 1e-12;

/// What a structural column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    /// Occupation mass of the pair `(state, k-th admissible action)`.
    Pair { state: usize, action: usize },
    /// Anonymous variable of a general LP.
    Variable(usize),
}

/// `minimize cᵀx  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0`.
///
/// Each inequality row receives its own slack column when solved; solution
/// vectors list the structural columns first and the slacks after them.
#[derive(Debug, Clone, PartialEq)]
pub struct LpStandardForm {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub columns: Vec<Column>,
}

impl LpStandardForm {
    /// General LP over anonymous variables.
    pub fn new(
        objective: Vec<f64>,
        eq_matrix: Vec<Vec<f64>>,
        eq_rhs: Vec<f64>,
        ineq_matrix: Vec<Vec<f64>>,
        ineq_rhs: Vec<f64>,
    ) -> Result<Self> {
        let n = objective.len();
        let columns = (0..n).map(Column::Variable).collect();
        let lp = Self {
            objective,
            eq_matrix,
            eq_rhs,
            ineq_matrix,
            ineq_rhs,
            columns,
        };
        lp.check()?;
        Ok(lp)
    }

    fn check(&self) -> Result<()> {
        let n = self.objective.len();
        let dim = |field: &str, expected: usize, found: usize| -> Result<()> {
            if expected == found {
                Ok(())
            } else {
                Err(Error::Dimension {
                    field: field.into(),
                    expected,
                    found,
                })
            }
        };
        dim("columns", n, self.columns.len())?;
        dim("eq_rhs", self.eq_matrix.len(), self.eq_rhs.len())?;
        dim("ineq_rhs", self.ineq_matrix.len(), self.ineq_rhs.len())?;
        for row in self.eq_matrix.iter().chain(&self.ineq_matrix) {
            dim("constraint row", n, row.len())?;
        }
        let finite = self
            .objective
            .iter()
            .chain(self.eq_rhs.iter())
            .chain(self.ineq_rhs.iter())
            .chain(self.eq_matrix.iter().flatten())
            .chain(self.ineq_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("LP data must be finite".into()));
        }
        Ok(())
    }

    pub fn num_structural(&self) -> usize {
        self.objective.len()
    }

    pub fn num_slacks(&self) -> usize {
        self.ineq_matrix.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap hit or the final point failed the feasibility re-check.
    NumericalBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values followed by slack values; empty unless optimal.
    pub solution: Vec<f64>,
    pub objective_value: f64,
    /// Basic columns (structural or slack indices) of the final basis.
    pub basis: Vec<usize>,
    /// Constraint rows found linearly dependent in phase one (equality rows
    /// first, then inequality rows, in input order).
    pub dropped_rows: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            solution: Vec::new(),
            objective_value: f64::NAN,
            basis: Vec::new(),
            dropped_rows: Vec::new(),
            iterations,
        }
    }

    /// Number of nonzero solution entries.
    pub fn support_size(&self, tol: f64) -> usize {
        self.solution.iter().filter(|v| libm::fabs(**v) > tol).count()
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// reduced costs, last entry is minus the objective value
    cost_row: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let piv = self.rows[p][q];
        for v in self.rows[p].iter_mut() {
            *v /= piv;
        }
        self.rows[p][q] = 1.0;
        let prow = self.rows[p].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == p {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.cost_row[q];
        if f != 0.0 {
            for (v, pv) in self.cost_row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.cost_row[q] = 0.0;
        }
        self.basis[p] = q;
    }

    fn price(&mut self, costs: &[f64]) {
        let mut r = vec![0.0; self.width + 1];
        r[..costs.len()].copy_from_slice(costs);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = costs.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (v, a) in r.iter_mut().zip(row) {
                    *v -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            r[b] = 0.0;
        }
        self.cost_row = r;
    }

    /// Runs Bland's rule over columns `< allowed`. Returns `Some(status)` on
    /// unboundedness or iteration cap, `None` at optimality.
    fn iterate(&mut self, allowed: usize, opt_tol: f64, cap: usize, iters: &mut usize) -> Option<LpStatus> {
        loop {
            // Bland: lowest-index improving column; none left means optimal
            let q = (0..allowed).find(|&j| self.cost_row[j] < -opt_tol)?;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][q];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = libm::fabs(ratio - lr) <= 1e-12 * (1.0 + lr);
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((p, _)) = leave else {
                return Some(LpStatus::Unbounded);
            };
            self.pivot(p, q);
            *iters += 1;
            if *iters > cap {
                return Some(LpStatus::NumericalBreakdown);
            }
        }
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule.
///
/// Phase one minimizes the sum of artificial variables; artificials left in
/// the basis at zero are pivoted out, and rows where that is impossible are
/// dropped as linearly dependent. The returned optimum is a basic feasible
/// solution and is re-checked against the original constraints.
pub fn simplex_solve(lp: &LpStandardForm) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.num_structural();
    let m_eq = lp.eq_matrix.len();
    let m_ub = lp.ineq_matrix.len();
    let m = m_eq + m_ub;
    let real = n + m_ub;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut needs_artificial = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; real];
        let rhs;
        if i < m_eq {
            row[..n].copy_from_slice(&lp.eq_matrix[i]);
            rhs = lp.eq_rhs[i];
        } else {
            let j = i - m_eq;
            row[..n].copy_from_slice(&lp.ineq_matrix[j]);
            row[n + j] = 1.0;
            rhs = lp.ineq_rhs[j];
        }
        let flip = rhs < 0.0;
        if flip {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        row.push(if flip { -rhs } else { rhs });
        if i >= m_eq && !flip {
            basis.push(n + (i - m_eq));
        } else {
            basis.push(usize::MAX);
            needs_artificial.push(i);
        }
        rows.push(row);
    }

    let n_art = needs_artificial.len();
    let width = real + n_art;
    for row in rows.iter_mut() {
        let rhs = row.pop().unwrap_or(0.0);
        row.resize(width, 0.0);
        row.push(rhs);
    }
    for (a, &i) in needs_artificial.iter().enumerate() {
        rows[i][real + a] = 1.0;
        basis[i] = real + a;
    }

    let rhs_scale = 1.0 + rows.iter().map(|r| libm::fabs(r[width])).fold(0.0, f64::max);
    let cap = 50_000 + 200 * (m + width);
    let mut iterations = 0;
    let mut tab = Tableau {
        rows,
        cost_row: Vec::new(),
        basis,
        width,
    };

    // phase one
    let mut dropped = Vec::new();
    if n_art > 0 {
        let mut phase_one = vec![0.0; width];
        for c in phase_one.iter_mut().skip(real) {
            *c = 1.0;
        }
        tab.price(&phase_one);
        if let Some(status) = tab.iterate(width, OPTIMALITY_TOL, cap, &mut iterations) {
            // phase one is bounded below by zero
            let status = if status == LpStatus::Unbounded {
                LpStatus::NumericalBreakdown
            } else {
                status
            };
            return Ok(LpSolution::failed(status, iterations));
        }
        let infeasibility = -tab.cost_row[width];
        if infeasibility > FEASIBILITY_TOL * rhs_scale {
            return Ok(LpSolution::failed(LpStatus::Infeasible, iterations));
        }
        // drive artificials out of the basis
        let mut i = 0;
        let mut original_row: Vec<usize> = (0..m).collect();
        while i < tab.rows.len() {
            if tab.basis[i] >= real {
                let best = (0..real)
                    .filter(|j| !tab.basis.contains(j))
                    .map(|j| (j, libm::fabs(tab.rows[i][j])))
                    .fold(None, |acc: Option<(usize, f64)>, (j, a)| match acc {
                        Some((_, ba)) if ba >= a => acc,
                        _ => Some((j, a)),
                    });
                match best {
                    Some((j, a)) if a > PIVOT_TOL => {
                        tab.pivot(i, j);
                        iterations += 1;
                    }
                    _ => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        dropped.push(original_row.remove(i));
                        continue;
                    }
                }
            }
            i += 1;
        }
        // discard artificial columns
        for row in tab.rows.iter_mut() {
            let rhs = row[width];
            row.truncate(real);
            row.push(rhs);
        }
        tab.width = real;
    }

    // phase two
    let mut costs = vec![0.0; real];
    costs[..n].copy_from_slice(&lp.objective);
    let cmax = lp.objective.iter().map(|c| libm::fabs(*c)).fold(0.0, f64::max);
    tab.price(&costs);
    if let Some(status) = tab.iterate(real, OPTIMALITY_TOL * (1.0 + cmax), cap, &mut iterations) {
        return Ok(LpSolution::failed(status, iterations));
    }

    let mut x = vec![0.0; real];
    for (i, &b) in tab.basis.iter().enumerate() {
        let v = tab.rhs(i);
        x[b] = if libm::fabs(v) <= ZERO_CLEAN * rhs_scale {
            0.0
        } else {
            v
        };
    }
    if !primal_feasible(lp, &x) {
        return Ok(LpSolution::failed(LpStatus::NumericalBreakdown, iterations));
    }
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        solution: x,
        objective_value,
        basis: tab.basis,
        dropped_rows: dropped,
        iterations,
    })
}

fn primal_feasible(lp: &LpStandardForm, x: &[f64]) -> bool {
    let n = lp.num_structural();
    let dot = |row: &[f64]| -> f64 { row.iter().zip(x).map(|(a, v)| a * v).sum() };
    if x.iter().any(|v| *v < -FEASIBILITY_TOL) {
        return false;
    }
    for (row, b) in lp.eq_matrix.iter().zip(&lp.eq_rhs) {
        if libm::fabs(dot(row) - b) > FEASIBILITY_TOL * (1.0 + libm::fabs(*b)) {
            return false;
        }
    }
    for (j, (row, b)) in lp.ineq_matrix.iter().zip(&lp.ineq_rhs).enumerate() {
        let lhs = dot(row);
        if lhs > b + FEASIBILITY_TOL * (1.0 + libm::fabs(*b))
            || libm::fabs(lhs + x[n + j] - b) > FEASIBILITY_TOL * (1.0 + libm::fabs(*b))
        {
            return false;
        }
    }
    true
}

/// Occupation LP of a finite model.
pub fn build_lp(model: &FiniteCtmdp) -> LpStandardForm {
    let alpha = model.alpha();
    let s = model.num_states();
    let columns: Vec<Column> = model
        .pairs()
        .map(|(state, action)| Column::Pair { state, action })
        .collect();
    let objective = model.pairs().map(|(x, k)| -model.reward(x, k) / alpha).collect();
    let mut eq_matrix = vec![vec![0.0; columns.len()]; s];
    for (j, (y, k)) in model.pairs().enumerate() {
        for (x, row) in eq_matrix.iter_mut().enumerate() {
            let diag = if x == y { alpha } else { 0.0 };
            row[j] = diag - model.rate(y, k, x);
        }
    }
    let eq_rhs = model.gamma().iter().map(|g| alpha * g).collect();
    let ineq_matrix = (0..model.num_costs())
        .map(|n| model.pairs().map(|(x, k)| model.cost(n, x, k)).collect())
        .collect();
    let ineq_rhs = model.bounds().iter().map(|d| alpha * d).collect();
    LpStandardForm {
        objective,
        eq_matrix,
        eq_rhs,
        ineq_matrix,
        ineq_rhs,
        columns,
    }
}

/// Constrained optimum of a finite model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution {
    pub eta: OccupationMeasure,
    pub policy: StationaryPolicy,
    /// Optimal discounted reward `V_r(U)`.
    pub value: f64,
    /// Discounted cost of each constraint at the optimum.
    pub cost_values: Vec<f64>,
    pub randomizations: usize,
    pub lp: LpSolution,
}

fn lp_status_error(status: LpStatus) -> Error {
    match status {
        LpStatus::Infeasible => Error::Infeasible,
        LpStatus::Unbounded => Error::Unbounded,
        _ => Error::Numerical("simplex did not reach a verified optimum".into()),
    }
}

/// Solves the constrained problem through the occupation LP and extracts the
/// randomized stationary policy of the optimal basic solution.
pub fn solve_constrained(model: &FiniteCtmdp) -> Result<ConstrainedSolution> {
    require_valid(model)?;
    let lp = build_lp(model);
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(lp_status_error(sol.status));
    }
    let eta = OccupationMeasure::for_model(model, sol.solution[..model.num_pairs()].to_vec())?;
    let policy = extract_policy_default(&eta);
    let cost_values = (0..model.num_costs())
        .map(|n| value_of_measure(model, &eta, Criterion::Cost(n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstrainedSolution {
        randomizations: randomization_count(&policy, SUPPORT_TOL),
        value: -sol.objective_value,
        eta,
        policy,
        cost_values,
        lp: sol,
    })
}

/// Default cap on the number of deterministic policies enumerated as a check.
pub const ENUMERATION_CAP: usize = 4096;

/// How the unconstrained optimum was cross-checked against deterministic policies.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationCheck {
    pub policies_checked: usize,
    pub exhaustive: bool,
    pub best_checked_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedSolution {
    /// Chosen action position per state.
    pub choice: Vec<usize>,
    pub policy: StationaryPolicy,
    pub value: f64,
    pub check: EnumerationCheck,
}

/// Unconstrained optimum: the LP without cost rows, returned as a
/// deterministic policy and compared against deterministic policies (all of
/// them when at most `cap`, an evenly strided sample of `cap` otherwise).
pub fn solve_unconstrained(model: &FiniteCtmdp, cap: usize) -> Result<UnconstrainedSolution> {
    let free = model.without_constraints();
    let sol = solve_constrained(&free)?;
    let choice = sol.policy.argmax();
    let policy = StationaryPolicy::deterministic(&free, &choice)?;
    let own = value_of_measure(&free, &occupation_of_stationary(&free, &policy)?, Criterion::Reward)?;

    let radices: Vec<usize> = (0..free.num_states()).map(|x| free.num_actions(x)).collect();
    let total: u128 = radices.iter().map(|&r| r as u128).product();
    let exhaustive = total <= cap as u128;
    let count = if exhaustive { total as usize } else { cap.max(1) };
    let stride = if exhaustive { 1 } else { total / count as u128 };
    let mut best = f64::NEG_INFINITY;
    for i in 0..count {
        let f = crate::structure::decode_policy_index(&radices, i as u128 * stride);
        let phi = StationaryPolicy::deterministic(&free, &f)?;
        let v = value_of_measure(&free, &occupation_of_stationary(&free, &phi)?, Criterion::Reward)?;
        best = best.max(v);
    }
    let tol = 1e-8 * (1.0 + libm::fabs(best));
    if best > sol.value + tol || libm::fabs(own - sol.value) > tol {
        return Err(Error::Numerical(format!(
            "LP value {} disagrees with deterministic policies (best {best}, extracted {own})",
            sol.value
        )));
    }
    Ok(UnconstrainedSolution {
        choice,
        policy,
        value: sol.value,
        check: EnumerationCheck {
            policies_checked: count,
            exhaustive,
            best_checked_value: best,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimize_x_at_least_one() {
        let lp = LpStandardForm::new(vec![1.0], vec![], vec![], vec![vec![-1.0]], vec![-1.0]).unwrap();
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_pair() {
        let lp = LpStandardForm::new(vec![0.0], vec![], vec![], vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0]).unwrap();
        assert_eq!(simplex_solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let lp = LpStandardForm::new(vec![-1.0, 0.0], vec![vec![1.0, -1.0]], vec![0.0], vec![], vec![]).unwrap();
        assert_eq!(simplex_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        // x + y = 1 twice, minimize x
        let lp = LpStandardForm::new(
            vec![1.0, 0.0],
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
            vec![],
            vec![],
        )
        .unwrap();
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.dropped_rows.len(), 1);
        assert_eq!(s.basis.len(), 1);
        assert_abs_diff_eq!(s.solution[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling LP; Bland's rule must terminate at -1/20.
        let lp = LpStandardForm::new(
            vec![-0.75, 150.0, -0.02, 6.0],
            vec![],
            vec![],
            vec![
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, -0.05, epsilon = 1e-12);
    }

    #[test]
    fn lp_shape_counts() {
        let m = FiniteCtmdp::new(
            vec![vec![0, 1], vec![0, 1]],
            vec![
                vec![vec![-1.0, 1.0], vec![-3.0, 3.0]],
                vec![vec![2.0, -2.0], vec![1.0, -1.0]],
            ],
            vec![vec![2.0, 2.0], vec![0.0, 0.0]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]],
            vec![0.5],
            1.0,
            vec![1.0, 0.0],
        )
        .unwrap();
        let lp = build_lp(&m);
        assert_eq!(lp.num_structural(), 4);
        assert_eq!(lp.num_slacks(), 1);
        assert_eq!(lp.eq_matrix.len(), 2);
        assert_eq!(lp.ineq_matrix.len(), 1);
        assert!(build_lp(&m.without_constraints()).ineq_matrix.is_empty());
        // column sums of the balance block equal α: summing rows gives α Σ η = α
        for j in 0..4 {
            let col: f64 = lp.eq_matrix.iter().map(|r| r[j]).sum();
            assert_abs_diff_eq!(col, m.alpha(), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(lp.eq_rhs.iter().sum::<f64>(), m.alpha(), epsilon = 1e-15);
    }
}

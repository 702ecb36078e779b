//! Extreme points of the occupation polytope and mixture decompositions.
//!
//! On a finite model the occupation measures of stationary policies form the
//! polytope `{η >= 0 : α η̂ = α γ + Qᵀ η}`. Its vertices are exactly the measures
//! of deterministic policies, and an optimal basic solution of the constrained
//! LP with `N` cost rows is a mixture of at most `N + 1` of them.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp::{simplex_solve, LpStandardForm, LpStatus};
use crate::model::FiniteCtmdp;
use crate::occupation::{extract_policy_default, occupation_of_stationary, OccupationMeasure, StationaryPolicy};

/// Relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-9;
/// Entrywise tolerance for reconstructing a measure from a mixture.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Balance equalities plus nonnegativity, with optional extra equality rows
/// (typically cost constraints active at a point).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationPolytope {
    offsets: Vec<usize>,
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl OccupationPolytope {
    pub fn from_model(model: &FiniteCtmdp) -> Self {
        let lp = crate::lp::build_lp(model);
        Self {
            offsets: model.offsets().to_vec(),
            matrix: lp.eq_matrix,
            rhs: lp.eq_rhs,
        }
    }

    /// Adds the equality `Σ coeffs · η = rhs`, e.g. a binding cost constraint.
    pub fn with_equality(mut self, coeffs: Vec<f64>, rhs: f64) -> Result<Self> {
        if coeffs.len() != self.num_columns() {
            return Err(Error::Dimension {
                field: "polytope row".into(),
                expected: self.num_columns(),
                found: coeffs.len(),
            });
        }
        self.matrix.push(coeffs);
        self.rhs.push(rhs);
        Ok(self)
    }

    /// Adds cost constraint `n` of `model` as a binding row `Σ c_n η = α d_n`.
    pub fn with_active_cost(self, model: &FiniteCtmdp, n: usize) -> Result<Self> {
        if n >= model.num_costs() {
            return Err(Error::CostIndex {
                index: n,
                count: model.num_costs(),
            });
        }
        let coeffs = model.pairs().map(|(x, k)| model.cost(n, x, k)).collect();
        self.with_equality(coeffs, model.alpha() * model.bounds()[n])
    }

    pub fn num_columns(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0)
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.len()
    }

    /// Worst violation of the equalities and of nonnegativity at `eta`.
    pub fn residual(&self, eta: &OccupationMeasure) -> f64 {
        let mass = eta.mass();
        let eq = self
            .matrix
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| libm::fabs(row.iter().zip(mass).map(|(a, v)| a * v).sum::<f64>() - b))
            .fold(0.0, f64::max);
        let neg = mass.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        eq.max(neg)
    }

    fn submatrix(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.num_rows(), cols.len(), |i, j| self.matrix[i][cols[j]])
    }
}

/// Numerical rank with singular values below `tol · σ_max` treated as zero.
fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.rank(tol * smax)
}

/// Whether `eta` is a vertex of `polytope`: the constraint columns on the
/// support of `eta` must be linearly independent.
///
/// `tol` bounds both the feasibility residual and the support threshold.
pub fn is_extreme(eta: &OccupationMeasure, polytope: &OccupationPolytope, tol: f64) -> Result<bool> {
    if eta.offsets() != polytope.offsets.as_slice() {
        return Err(Error::Dimension {
            field: "occupation measure".into(),
            expected: polytope.num_columns(),
            found: eta.mass().len(),
        });
    }
    let residual = polytope.residual(eta);
    if residual > tol {
        return Err(Error::InfeasibleMeasure { residual });
    }
    let support: Vec<usize> = eta
        .mass()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > tol)
        .map(|(j, _)| j)
        .collect();
    Ok(rank(&polytope.submatrix(&support), RANK_TOL) == support.len())
}

/// Deterministic policy (one action position per state) with its exact
/// occupation measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicMeasure {
    pub choice: Vec<usize>,
    pub eta: OccupationMeasure,
}

/// Mixed-radix decoding of a policy index; state 0 is the most significant digit.
pub fn decode_policy_index(radices: &[usize], mut index: u128) -> Vec<usize> {
    let mut choice = vec![0; radices.len()];
    for (x, &r) in radices.iter().enumerate().rev() {
        choice[x] = (index % r as u128) as usize;
        index /= r as u128;
    }
    choice
}

/// Every deterministic policy of `model` with its occupation measure, in
/// lexicographic order of the action positions.
pub fn enumerate_deterministic(model: &FiniteCtmdp, cap: usize) -> Result<Vec<DeterministicMeasure>> {
    let radices: Vec<usize> = (0..model.num_states()).map(|x| model.num_actions(x)).collect();
    let total = radices
        .iter()
        .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
        .unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::EnumerationCap { needed: total, cap });
    }
    let one = |i: usize| -> Result<DeterministicMeasure> {
        let choice = decode_policy_index(&radices, i as u128);
        let phi = StationaryPolicy::deterministic(model, &choice)?;
        let eta = occupation_of_stationary(model, &phi)?;
        Ok(DeterministicMeasure { choice, eta })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..total as usize).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..total as usize).map(one).collect()
    }
}

/// All vertices of the polytope by brute force over column bases.
///
/// Intended for small instances; `max_subsets` bounds the number of column
/// subsets examined.
pub fn enumerate_vertices(polytope: &OccupationPolytope, max_subsets: usize) -> Result<Vec<Vec<f64>>> {
    let n = polytope.num_columns();
    let full = polytope.submatrix(&(0..n).collect::<Vec<_>>());
    let r = rank(&full, RANK_TOL);
    let mut subset: Vec<usize> = (0..r).collect();
    let mut seen = 0usize;
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let b = DVector::from_column_slice(&polytope.rhs);
    loop {
        seen += 1;
        if seen > max_subsets {
            return Err(Error::EnumerationCap {
                needed: seen as u128,
                cap: max_subsets,
            });
        }
        let sub = polytope.submatrix(&subset);
        if rank(&sub, RANK_TOL) == r {
            // least squares through the normal equations of a full-column-rank block
            let normal = sub.transpose() * &sub;
            if let Some(xb) = normal.lu().solve(&(sub.transpose() * &b)) {
                let consistent = (&sub * &xb - &b).amax() <= 1e-9;
                if consistent && xb.iter().all(|v| *v >= -1e-12) {
                    let mut x = vec![0.0; n];
                    for (j, &c) in subset.iter().enumerate() {
                        x[c] = xb[j].max(0.0);
                    }
                    let dup = vertices
                        .iter()
                        .any(|v| v.iter().zip(&x).all(|(a, c)| libm::fabs(a - c) <= 1e-9));
                    if !dup {
                        vertices.push(x);
                    }
                }
            }
        }
        // next r-subset in lexicographic order
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(vertices);
            }
            i -= 1;
            if subset[i] < n - r + i {
                subset[i] += 1;
                for j in i + 1..r {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
        if r == 0 {
            return Ok(vertices);
        }
    }
}

/// `η* = Σ p_k η^{f_k}` over deterministic policies `f_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDecomposition {
    pub weights: Vec<f64>,
    pub policies: Vec<Vec<usize>>,
    pub measures: Vec<OccupationMeasure>,
    pub reconstructed: OccupationMeasure,
    /// Entrywise distance between the reconstruction and the target.
    pub residual: f64,
}

impl MixtureDecomposition {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Writes `eta_star` as a convex combination of deterministic occupation
/// measures.
///
/// Candidates are the deterministic measures supported inside the support of
/// `eta_star`; the weights are a basic feasible solution of
/// `Σ p_k η^{f_k} = η*, Σ p_k = 1, p >= 0` found by the simplex, so at most
/// `rank` of them are nonzero. For the optimum of an LP with `n_constraints`
/// cost rows that rank is at most `n_constraints + 1`.
pub fn decompose_mixture(
    eta_star: &OccupationMeasure,
    model: &FiniteCtmdp,
    n_constraints: usize,
    cap: usize,
) -> Result<MixtureDecomposition> {
    let tol = RECONSTRUCTION_TOL;
    let candidates: Vec<DeterministicMeasure> = enumerate_deterministic(model, cap)?
        .into_iter()
        .filter(|d| {
            d.eta
                .mass()
                .iter()
                .zip(eta_star.mass())
                .all(|(m, t)| *m <= tol || *t > tol)
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoDecomposition {
            residual: f64::INFINITY,
        });
    }
    let support: Vec<usize> = (0..eta_star.mass().len())
        .filter(|&j| eta_star.mass()[j] > tol || candidates.iter().any(|d| d.eta.mass()[j] > tol))
        .collect();
    let k = candidates.len();
    let mut eq_matrix: Vec<Vec<f64>> = support
        .iter()
        .map(|&j| candidates.iter().map(|d| d.eta.mass()[j]).collect())
        .collect();
    let mut eq_rhs: Vec<f64> = support.iter().map(|&j| eta_star.mass()[j]).collect();
    eq_matrix.push(vec![1.0; k]);
    eq_rhs.push(1.0);
    let lp = LpStandardForm::new(vec![0.0; k], eq_matrix, eq_rhs, vec![], vec![])?;
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        let residual = best_single_residual(eta_star, &candidates);
        return Err(Error::NoDecomposition { residual });
    }

    let mut weights = Vec::new();
    let mut policies = Vec::new();
    let mut measures = Vec::new();
    for (p, d) in sol.solution.iter().zip(&candidates) {
        if *p > 0.0 {
            weights.push(*p);
            policies.push(d.choice.clone());
            measures.push(d.eta.clone());
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let refs: Vec<&OccupationMeasure> = measures.iter().collect();
    let reconstructed = OccupationMeasure::mixture(&weights, &refs)?;
    let residual = reconstructed.max_abs_diff(eta_star);
    if residual > tol {
        return Err(Error::NoDecomposition { residual });
    }
    if weights.len() > n_constraints + 1 {
        return Err(Error::Numerical(alloc::format!(
            "basic mixture uses {} policies, more than {} allowed by {} constraints",
            weights.len(),
            n_constraints + 1,
            n_constraints
        )));
    }
    Ok(MixtureDecomposition {
        weights,
        policies,
        measures,
        reconstructed,
        residual,
    })
}

fn best_single_residual(target: &OccupationMeasure, candidates: &[DeterministicMeasure]) -> f64 {
    candidates
        .iter()
        .map(|d| d.eta.max_abs_diff(target))
        .fold(f64::INFINITY, f64::min)
}

/// Stationary policy induced by the mixed measure `Σ p_k η^{f_k}`.
pub fn mixture_policy(decomp: &MixtureDecomposition) -> StationaryPolicy {
    extract_policy_default(&decomp.reconstructed)
}

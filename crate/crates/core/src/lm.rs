//! Pairwise LM statistics comparing the second moments of estimated loadings
//! across known groups, and their max/min aggregates.
//!
//! For groups `j < k` with `N_j`, `N_k` members:
//!
//! ```text
//! A(j,k) = vech( √N (N_j⁻¹ Σ_{i∈j} λ̂ᵢλ̂ᵢᵀ − N_k⁻¹ Σ_{i∈k} λ̂ᵢλ̂ᵢᵀ) )
//! S(j,k) = (N/N_j + N/N_k) · N⁻¹ Σ_{i=1}^{N} vech(λ̂ᵢλ̂ᵢᵀ − I) vech(λ̂ᵢλ̂ᵢᵀ − I)ᵀ
//! LM(j,k) = A(j,k)ᵀ S(j,k)⁻¹ A(j,k)
//! ```
//!
//! `LM1` is the maximum over pairs, `LM2` the minimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::LoadingMatrix;
use crate::linalg::{Cholesky, Matrix};
use crate::panel::{vech_len, vech_outer, GroupStructure, SymVec};
use crate::scalar::Real;

/// Relative pivot threshold below which a variance matrix is declared
/// singular.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Statistic for one pair of groups (zero-based, `j < k`).
#[derive(Debug, Clone)]
pub struct PairStatistic<T> {
    pub j: usize,
    pub k: usize,
    pub a_vec: SymVec<T>,
    pub s_mat: Matrix<T>,
    pub lm: T,
}

/// All pairwise statistics plus `LM1 = max` and `LM2 = min`.
#[derive(Debug, Clone)]
pub struct HeterogeneityStatistics<T> {
    pub pairs: Vec<PairStatistic<T>>,
    pub lm1: T,
    pub lm2: T,
    pub argmax_pair: (usize, usize),
    pub argmin_pair: (usize, usize),
}

/// Compact summary without the per-pair vectors and matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub lm1: f64,
    pub lm2: f64,
    pub argmax_pair: (usize, usize),
    pub argmin_pair: (usize, usize),
}

fn check_inputs<T: Real>(loadings: &LoadingMatrix<T>, groups: &GroupStructure) -> Result<()> {
    if loadings.n() != groups.n() {
        return Err(Error::Shape(format!(
            "{} loading rows but the group structure covers {} variables",
            loadings.n(),
            groups.n()
        )));
    }
    Ok(())
}

fn check_pair(j: usize, k: usize, groups: &GroupStructure) -> Result<()> {
    let s = groups.num_groups();
    if j >= k || k >= s {
        return Err(Error::Index { j, k, groups: s });
    }
    Ok(())
}

/// `vech(N_j⁻¹ Σ_{i∈j} λ̂ᵢλ̂ᵢᵀ)`.
fn group_second_moment<T: Real>(loadings: &LoadingMatrix<T>, groups: &GroupStructure, j: usize) -> Vec<T> {
    let d = vech_len(loadings.r());
    let mut acc = vec![T::zero(); d];
    let mut buf = vec![T::zero(); d];
    let range = groups.range(j);
    let size = T::from_usize_lossy(range.len());
    for i in range {
        vech_outer(loadings.row(i), &mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, &b)| *a += b);
    }
    acc.iter_mut().for_each(|a| *a /= size);
    acc
}

/// `√N` times the difference of group second moments, for any ordered pair.
pub(crate) fn scaled_difference<T: Real>(
    j: usize,
    k: usize,
    loadings: &LoadingMatrix<T>,
    groups: &GroupStructure,
) -> Vec<T> {
    let root_n = T::from_usize_lossy(loadings.n()).sqrt();
    let mj = group_second_moment(loadings, groups, j);
    let mk = group_second_moment(loadings, groups, k);
    mj.iter().zip(&mk).map(|(&a, &b)| root_n * (a - b)).collect()
}

/// `A(j, k, Λ̂)`.
pub fn stat_a<T: Real>(
    j: usize,
    k: usize,
    loadings: &LoadingMatrix<T>,
    groups: &GroupStructure,
) -> Result<SymVec<T>> {
    check_inputs(loadings, groups)?;
    check_pair(j, k, groups)?;
    SymVec::from_entries(scaled_difference(j, k, loadings, groups))
}

/// `N⁻¹ Σᵢ vech(λ̂ᵢλ̂ᵢᵀ − I) vech(λ̂ᵢλ̂ᵢᵀ − I)ᵀ`, shared by every pair.
pub fn centered_moment_covariance<T: Real>(loadings: &LoadingMatrix<T>) -> Matrix<T> {
    let r = loadings.r();
    let d = vech_len(r);
    let diag_pos = diagonal_positions(r);
    let mut cov = Matrix::zeros(d, d);
    let mut v = vec![T::zero(); d];
    for i in 0..loadings.n() {
        vech_outer(loadings.row(i), &mut v);
        for &p in &diag_pos {
            v[p] -= T::one();
        }
        for a in 0..d {
            let va = v[a];
            for b in 0..=a {
                cov[(a, b)] += va * v[b];
            }
        }
    }
    let inv_n = T::one() / T::from_usize_lossy(loadings.n());
    for a in 0..d {
        for b in 0..=a {
            let x = cov[(a, b)] * inv_n;
            cov[(a, b)] = x;
            cov[(b, a)] = x;
        }
    }
    cov
}

/// Positions of the diagonal entries inside a length-`r(r+1)/2` vech.
fn diagonal_positions(r: usize) -> Vec<usize> {
    // column j of the lower triangle starts after Σ_{l<j} (r - l) entries
    let mut out = Vec::with_capacity(r);
    let mut start = 0;
    for j in 0..r {
        out.push(start);
        start += r - j;
    }
    out
}

fn pair_scale<T: Real>(groups: &GroupStructure, j: usize, k: usize) -> T {
    let n = groups.n() as f64;
    T::lit(n / groups.size(j) as f64 + n / groups.size(k) as f64)
}

/// `S(j, k, Λ̂)`.
pub fn stat_s<T: Real>(
    j: usize,
    k: usize,
    loadings: &LoadingMatrix<T>,
    groups: &GroupStructure,
) -> Result<Matrix<T>> {
    check_inputs(loadings, groups)?;
    check_pair(j, k, groups)?;
    Ok(centered_moment_covariance(loadings).scale(pair_scale(groups, j, k)))
}

fn pair_from_parts<T: Real>(
    j: usize,
    k: usize,
    a: Vec<T>,
    s: Matrix<T>,
) -> Result<PairStatistic<T>> {
    let chol = Cholesky::new(&s, T::lit(PIVOT_REL_TOL)).map_err(|_| Error::SingularVariance {
        pair: (j, k),
        permutation: None,
    })?;
    let lm = chol.quadratic_form_inverse(&a);
    Ok(PairStatistic {
        j,
        k,
        a_vec: SymVec::from_entries(a)?,
        s_mat: s,
        lm,
    })
}

/// `LM(j, k) = Aᵀ S⁻¹ A`, solved through a Cholesky factorization of `S`.
pub fn lm_pair<T: Real>(
    j: usize,
    k: usize,
    loadings: &LoadingMatrix<T>,
    groups: &GroupStructure,
) -> Result<PairStatistic<T>> {
    let a = stat_a(j, k, loadings, groups)?.into_entries();
    let s = stat_s(j, k, loadings, groups)?;
    pair_from_parts(j, k, a, s)
}

/// Every pairwise statistic with `LM1 = max` and `LM2 = min`; ties go to the
/// lexicographically smallest pair.
pub fn lm_aggregate<T: Real>(
    loadings: &LoadingMatrix<T>,
    groups: &GroupStructure,
) -> Result<HeterogeneityStatistics<T>> {
    check_inputs(loadings, groups)?;
    let base = centered_moment_covariance(loadings);
    let pairs = groups
        .pairs()
        .into_iter()
        .map(|(j, k)| {
            let a = scaled_difference(j, k, loadings, groups);
            pair_from_parts(j, k, a, base.scale(pair_scale(groups, j, k)))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<T> = pairs.iter().map(|p| p.lm).collect();
    let (imax, imin) = extreme_indices(&values);
    Ok(HeterogeneityStatistics {
        lm1: pairs[imax].lm,
        lm2: pairs[imin].lm,
        argmax_pair: (pairs[imax].j, pairs[imax].k),
        argmin_pair: (pairs[imin].j, pairs[imin].k),
        pairs,
    })
}

fn extreme_indices<T: Real>(values: &[T]) -> (usize, usize) {
    let (mut imax, mut imin) = (0, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > values[imax] {
            imax = i;
        }
        if v < values[imin] {
            imin = i;
        }
    }
    (imax, imin)
}

/// Evaluates `LM1`/`LM2` repeatedly for row permutations of one loading
/// matrix.
///
/// The variance matrix is invariant to row permutations, so it is factorized
/// once as `L Lᵀ` and each row is pre-whitened to `wᵢ = L⁻¹ vech(λ̂ᵢλ̂ᵢᵀ)`.
/// Then `LM(j,k) = N ‖w̄_j − w̄_k‖² / (N/N_j + N/N_k)`, algebraically equal to
/// [`lm_pair`].
#[derive(Debug, Clone)]
pub struct LmEvaluator<T> {
    whitened: Matrix<T>,
    groups: GroupStructure,
    pairs: Vec<(usize, usize)>,
    pair_weights: Vec<T>,
}

/// Scratch space for [`LmEvaluator::evaluate_into`].
#[derive(Debug, Clone)]
pub struct EvalScratch<T> {
    means: Vec<T>,
    values: Vec<T>,
}

impl<T> Default for EvalScratch<T> {
    fn default() -> Self {
        Self {
            means: Vec::new(),
            values: Vec::new(),
        }
    }
}

impl<T: Real> LmEvaluator<T> {
    pub fn new(loadings: &LoadingMatrix<T>, groups: &GroupStructure) -> Result<Self> {
        check_inputs(loadings, groups)?;
        let base = centered_moment_covariance(loadings);
        let pairs = groups.pairs();
        let chol = Cholesky::new(&base, T::lit(PIVOT_REL_TOL)).map_err(|_| {
            Error::SingularVariance {
                pair: pairs[0],
                permutation: None,
            }
        })?;
        let d = base.rows();
        let mut whitened = Matrix::zeros(loadings.n(), d);
        let mut v = vec![T::zero(); d];
        for i in 0..loadings.n() {
            vech_outer(loadings.row(i), &mut v);
            whitened.row_mut(i).copy_from_slice(&chol.whiten(&v));
        }
        let n = T::from_usize_lossy(groups.n());
        let pair_weights = pairs
            .iter()
            .map(|&(j, k)| n / pair_scale::<T>(groups, j, k))
            .collect();
        Ok(Self {
            whitened,
            groups: groups.clone(),
            pairs,
            pair_weights,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.whitened.rows()
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    /// Pairwise statistics for the loading matrix whose row `i` is row
    /// `order[i]` of the original (identity when `order` is `None`).
    pub fn evaluate_into(&self, order: Option<&[usize]>, scratch: &mut EvalScratch<T>) -> Extremes {
        let d = self.whitened.cols();
        let s = self.groups.num_groups();
        scratch.means.clear();
        scratch.means.resize(s * d, T::zero());
        for j in 0..s {
            let range = self.groups.range(j);
            let size = T::from_usize_lossy(range.len());
            let mean = &mut scratch.means[j * d..(j + 1) * d];
            for pos in range {
                let src = order.map_or(pos, |o| o[pos]);
                mean.iter_mut()
                    .zip(self.whitened.row(src))
                    .for_each(|(m, &w)| *m += w);
            }
            mean.iter_mut().for_each(|m| *m /= size);
        }
        scratch.values.clear();
        for (&(j, k), &weight) in self.pairs.iter().zip(&self.pair_weights) {
            let mj = &scratch.means[j * d..(j + 1) * d];
            let mk = &scratch.means[k * d..(k + 1) * d];
            let dist: T = mj.iter().zip(mk).map(|(&a, &b)| (a - b) * (a - b)).sum();
            scratch.values.push(weight * dist);
        }
        let (imax, imin) = extreme_indices(&scratch.values);
        Extremes {
            lm1: scratch.values[imax].as_f64(),
            lm2: scratch.values[imin].as_f64(),
            argmax_pair: self.pairs[imax],
            argmin_pair: self.pairs[imin],
        }
    }

    pub fn evaluate(&self, order: Option<&[usize]>) -> Extremes {
        self.evaluate_into(order, &mut EvalScratch::default())
    }

    /// Pair values from the last [`evaluate_into`](Self::evaluate_into) call.
    pub fn last_pair_values<'a>(&self, scratch: &'a EvalScratch<T>) -> &'a [T] {
        &scratch.values
    }
}

//! Permutation approximation of the null distributions of `LM1` and `LM2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::LoadingMatrix;
use crate::lm::{EvalScratch, LmEvaluator};
use crate::panel::GroupStructure;
use crate::rng::RngStream;
use crate::scalar::Real;

pub const DEFAULT_PERMUTATIONS: usize = 999;

/// Relative tolerance (on the scale `max(1, observed)`) under which a
/// permuted statistic counts as tied with the observed one.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub b: usize,
    pub observed_lm1: f64,
    pub observed_lm2: f64,
    pub permuted_lm1: Vec<f64>,
    pub permuted_lm2: Vec<f64>,
    pub p1: f64,
    pub p2: f64,
}

/// Row `i` of the result is row `perm[i]` of `loadings`.
pub fn permute_loadings<T: Real>(loadings: &LoadingMatrix<T>, perm: &[usize]) -> Result<LoadingMatrix<T>> {
    loadings.permuted(perm)
}

/// `(1 + #{b : observed ≤ permuted_b}) / (B + 1)`, with ties detected up to
/// [`TIE_TOL`] so that rounding cannot break exact ties.
pub fn permutation_pvalue(observed: f64, permuted: &[f64]) -> f64 {
    let threshold = observed - TIE_TOL * observed.abs().max(1.0);
    let exceed = permuted.iter().filter(|&&x| x >= threshold).count();
    (1 + exceed) as f64 / (permuted.len() + 1) as f64
}

/// Permutation test with `b` uniform permutations; replica `i` draws its
/// permutation from `RngStream::new(seed).substream(i)`.
pub fn permutation_test<T: Real>(
    loadings: &LoadingMatrix<T>,
    groups: &GroupStructure,
    b: usize,
    seed: u64,
) -> Result<PermutationResult> {
    let evaluator = LmEvaluator::new(loadings, groups)?;
    permutation_test_with(&evaluator, b, &RngStream::new(seed))
}

/// As [`permutation_test`] with a prepared evaluator and a parent stream.
pub fn permutation_test_with<T: Real>(
    evaluator: &LmEvaluator<T>,
    b: usize,
    stream: &RngStream,
) -> Result<PermutationResult> {
    if b == 0 {
        return Err(Error::Input("number of permutations must be at least 1".into()));
    }
    let n = evaluator.n();
    let observed = evaluator.evaluate(None);
    let draws: Vec<(f64, f64)> = (0..b)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), EvalScratch::default()),
            |(perm, scratch), i| {
                stream.substream(i as u64).permutation_into(n, perm);
                let e = evaluator.evaluate_into(Some(perm), scratch);
                (e.lm1, e.lm2)
            },
        )
        .collect();
    let (permuted_lm1, permuted_lm2): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    Ok(PermutationResult {
        b,
        observed_lm1: observed.lm1,
        observed_lm2: observed.lm2,
        p1: permutation_pvalue(observed.lm1, &permuted_lm1),
        p2: permutation_pvalue(observed.lm2, &permuted_lm2),
        permuted_lm1,
        permuted_lm2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn pvalue_formula() {
        assert_eq!(permutation_pvalue(5.0, &[1.0, 2.0, 3.0]), 0.25);
        assert_eq!(permutation_pvalue(2.0, &[1.0, 2.0, 3.0]), 0.75);
        assert_eq!(permutation_pvalue(0.0, &[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(permutation_pvalue(1e-30, &[3e-31, 0.0]), 1.0);
        assert_eq!(permutation_pvalue(10.0, &[10.0 - 1e-12, 9.0]), 2.0 / 3.0);
    }

    #[test]
    fn identical_outer_products_give_unit_pvalue() {
        let groups = GroupStructure::from_sizes(&[3, 3]).unwrap();
        let l = LoadingMatrix::new(Matrix::from_vec(6, 1, vec![2.0; 6]).unwrap()).unwrap();
        // every λλᵀ equals 4: A vanishes, S = (4 - 1)² c > 0
        let res = permutation_test(&l, &groups, 49, 1).unwrap();
        assert_eq!(res.observed_lm1, 0.0);
        assert_eq!(res.p1, 1.0);
        assert_eq!(res.p2, 1.0);
    }

    #[test]
    fn deterministic_and_on_grid() {
        let groups = GroupStructure::from_sizes(&[4, 5, 3]).unwrap();
        let vals: Vec<f64> = (0..24).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let l = LoadingMatrix::new(Matrix::from_vec(12, 2, vals).unwrap()).unwrap();
        let a = permutation_test(&l, &groups, 99, 8).unwrap();
        let b = permutation_test(&l, &groups, 99, 8).unwrap();
        assert_eq!(a, b);
        for p in [a.p1, a.p2] {
            let m = p * 100.0;
            assert!((m - m.round()).abs() < 1e-9 && (1.0..=100.0).contains(&m.round()));
        }
        assert!(permutation_test(&l, &groups, 0, 8).is_err());
    }
}

//! Principal-components estimation of the approximate factor model and
//! selection of the number of factors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::{check_permutation, DataPanel};
use crate::scalar::Real;
use crate::spectra::{canonicalize_sign, sym_eig};

/// Estimated loadings `Λ̂` (`N x r`), one row per variable.
///
/// Estimates produced by [`estimate_pca`] satisfy `Λ̂ᵀΛ̂/N = I`; arbitrary
/// finite matrices are accepted too so the statistics can be evaluated on
/// hand-built inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingMatrix<T> {
    values: Matrix<T>,
}

impl<T: Real> LoadingMatrix<T> {
    pub fn new(values: Matrix<T>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Shape("loading matrix must be non-empty".into()));
        }
        if !values.all_finite() {
            return Err(Error::Input("loading matrix has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn r(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.values
    }

    /// Loadings of variable `i`.
    pub fn row(&self, i: usize) -> &[T] {
        self.values.row(i)
    }

    /// `‖Λ̂ᵀΛ̂/N − I‖_max`.
    pub fn normalization_error(&self) -> T {
        let n = T::from_usize_lossy(self.n());
        let gram = self.values.inner_gram().scale(T::one() / n);
        gram.max_abs_diff(&Matrix::identity(self.r()))
    }

    /// Row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        Ok(Self {
            values: self.values.select_rows(perm),
        })
    }
}

/// Estimated factors `F̂ = XᵀΛ̂/N` (`T x r`).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix<T> {
    values: Matrix<T>,
}

impl<T: Real> FactorMatrix<T> {
    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.values
    }
}

/// Which Gram matrix is decomposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GramSide {
    /// `XXᵀ` when `N <= T`, otherwise `XᵀX`.
    #[default]
    Auto,
    /// `XXᵀ` (`N x N`).
    Variables,
    /// `XᵀX` (`T x T`), mapped back to the variable side.
    Periods,
}

/// Outcome of the information-criterion search over `k = 1..=rmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCountSelection {
    pub r_selected: usize,
    pub rmax: usize,
    /// `IC(k)` for `k = 1..=rmax`.
    pub criterion_values: Vec<f64>,
    /// `V(k)`, the mean squared residual of the `k`-factor fit.
    pub residual_variances: Vec<f64>,
}

/// Eigen-structure of a (possibly demeaned) panel, reusable for factor-count
/// selection and loading estimation at several `r`.
#[derive(Debug, Clone)]
pub struct PrincipalComponents<T> {
    x: Matrix<T>,
    side: GramSide,
    /// Eigenvalues of `XXᵀ`, non-increasing, length `min(N, T)`.
    eigenvalues: Vec<T>,
    /// Eigenvectors of the decomposed Gram matrix, as columns.
    vectors: Matrix<T>,
    total: T,
}

impl<T: Real> PrincipalComponents<T> {
    pub fn fit(panel: &DataPanel<T>, demean: bool, side: GramSide) -> Result<Self> {
        let x = if demean {
            panel.demeaned()
        } else {
            panel.values().clone()
        };
        Self::from_matrix(x, side)
    }

    fn from_matrix(x: Matrix<T>, side: GramSide) -> Result<Self> {
        let (n, t) = (x.rows(), x.cols());
        let side = match side {
            GramSide::Auto if t < n => GramSide::Periods,
            GramSide::Auto => GramSide::Variables,
            s => s,
        };
        let gram = match side {
            GramSide::Periods => x.inner_gram(),
            _ => x.outer_gram(),
        };
        let total = gram.trace();
        if !(total > T::zero()) {
            return Err(Error::DegenerateInput(
                "panel has zero variation after preprocessing".into(),
            ));
        }
        let eig = sym_eig(&gram)?;
        let eigenvalues = eig.eigenvalues[..n.min(t)]
            .iter()
            .map(|&w| w.max(T::zero()))
            .collect();
        Ok(Self {
            x,
            side,
            eigenvalues,
            vectors: eig.eigenvectors,
            total,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn t(&self) -> usize {
        self.x.cols()
    }

    /// The Gram side actually used.
    pub fn side(&self) -> GramSide {
        self.side
    }

    /// Non-zero-spectrum eigenvalues of `XXᵀ`, largest first.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Preprocessed data the decomposition was computed from.
    pub fn data(&self) -> &Matrix<T> {
        &self.x
    }

    /// Mean squared residual `V(k)` of the `k`-factor fit.
    pub fn residual_variance(&self, k: usize) -> T {
        let explained: T = self.eigenvalues[..k.min(self.eigenvalues.len())]
            .iter()
            .copied()
            .sum();
        let floor = self.total * T::epsilon();
        let nt = T::from_usize_lossy(self.n() * self.t());
        (self.total - explained).max(floor) / nt
    }

    /// Minimizes `IC(k) = ln V(k) + k ((N+T)/(NT)) ln min(N,T)` over
    /// `k = 1..=rmax`, lowest `k` on ties.
    pub fn select(&self, rmax: usize) -> Result<FactorCountSelection> {
        let (n, t) = (self.n(), self.t());
        let limit = n.min(t) - 1;
        if rmax < 1 || rmax > limit {
            return Err(Error::Rank(format!(
                "rmax must lie in 1..={limit} for a {n}x{t} panel, got {rmax}"
            )));
        }
        let (nf, tf) = (n as f64, t as f64);
        let penalty = (nf + tf) / (nf * tf) * (nf.min(tf)).ln();
        let residual_variances: Vec<f64> =
            (1..=rmax).map(|k| self.residual_variance(k).as_f64()).collect();
        let criterion_values: Vec<f64> = residual_variances
            .iter()
            .enumerate()
            .map(|(i, v)| v.ln() + (i + 1) as f64 * penalty)
            .collect();
        let mut best = 0;
        for (i, &c) in criterion_values.iter().enumerate() {
            if c < criterion_values[best] {
                best = i;
            }
        }
        Ok(FactorCountSelection {
            r_selected: best + 1,
            rmax,
            criterion_values,
            residual_variances,
        })
    }

    /// Loadings `√N ×` the top-`r` eigenvectors of `XXᵀ` (sign-canonical)
    /// and factors `XᵀΛ̂/N`.
    pub fn loadings(&self, r: usize) -> Result<(LoadingMatrix<T>, FactorMatrix<T>)> {
        let (n, t) = (self.n(), self.t());
        if r < 1 || r > n.min(t) {
            return Err(Error::Rank(format!(
                "r must lie in 1..={} for a {n}x{t} panel, got {r}",
                n.min(t)
            )));
        }
        let root_n = T::from_usize_lossy(n).sqrt();
        let mut lambda = Matrix::zeros(n, r);
        match self.side {
            GramSide::Periods => {
                let top = self.eigenvalues[0];
                let cutoff = top * T::epsilon() * T::from_usize_lossy(t.max(n));
                if self.eigenvalues[r - 1] <= cutoff {
                    // Directions with no variance cannot be mapped back.
                    return Self::from_matrix(self.x.clone(), GramSide::Variables)?.loadings(r);
                }
                for k in 0..r {
                    let u = self.vectors.column(k);
                    let scale = root_n / self.eigenvalues[k].sqrt();
                    let mut col: Vec<T> = (0..n)
                        .map(|i| crate::linalg::dot(self.x.row(i), &u) * scale)
                        .collect();
                    canonicalize_sign(&mut col);
                    for (i, v) in col.into_iter().enumerate() {
                        lambda[(i, k)] = v;
                    }
                }
            }
            _ => {
                for i in 0..n {
                    for k in 0..r {
                        lambda[(i, k)] = self.vectors[(i, k)] * root_n;
                    }
                }
            }
        }
        let inv_n = T::one() / T::from_usize_lossy(n);
        let factors = self.x.transpose().matmul(&lambda)?.scale(inv_n);
        Ok((
            LoadingMatrix { values: lambda },
            FactorMatrix { values: factors },
        ))
    }
}

/// Principal-components estimates with `r` factors.
pub fn estimate_pca<T: Real>(
    panel: &DataPanel<T>,
    r: usize,
    demean: bool,
) -> Result<(LoadingMatrix<T>, FactorMatrix<T>)> {
    let (n, t) = (panel.n(), panel.t());
    if r < 1 || r > n.min(t) {
        return Err(Error::Rank(format!(
            "r must lie in 1..={} for a {n}x{t} panel, got {r}",
            n.min(t)
        )));
    }
    PrincipalComponents::fit(panel, demean, GramSide::Auto)?.loadings(r)
}

/// Number of factors by the `IC_p2` information criterion.
pub fn select_num_factors<T: Real>(
    panel: &DataPanel<T>,
    rmax: usize,
    demean: bool,
) -> Result<FactorCountSelection> {
    let limit = panel.n().min(panel.t()) - 1;
    if rmax < 1 || rmax > limit {
        return Err(Error::Rank(format!(
            "rmax must lie in 1..={limit}, got {rmax}"
        )));
    }
    PrincipalComponents::fit(panel, demean, GramSide::Auto)?.select(rmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(rows: &[&[f64]]) -> DataPanel<f64> {
        DataPanel::from_matrix(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn exact_rank_one_equal_loadings() {
        let f = [1.0, 2.0, -1.0];
        let p = panel(&[&f, &f, &f, &f]);
        let (lam, fac) = estimate_pca(&p, 1, false).unwrap();
        for i in 0..4 {
            assert!((lam.row(i)[0] - 1.0).abs() < 1e-12);
        }
        // F̂ = XᵀΛ̂/N recovers f
        for (t, &ft) in f.iter().enumerate() {
            assert!((fac.values()[(t, 0)] - ft).abs() < 1e-12);
        }
        assert!(lam.normalization_error() < 1e-12);
    }

    #[test]
    fn full_rank_reconstructs() {
        let p = panel(&[
            &[1.0, 0.5, -2.0, 3.0],
            &[0.3, -1.0, 2.5, 0.0],
            &[2.0, 2.0, 1.0, -1.0],
        ]);
        for demean in [false, true] {
            let pcs = PrincipalComponents::fit(&p, demean, GramSide::Auto).unwrap();
            let (lam, fac) = pcs.loadings(3).unwrap();
            let fit = lam.values().matmul(&fac.values().transpose()).unwrap();
            assert!(fit.max_abs_diff(pcs.data()) < 1e-10);
        }
    }

    #[test]
    fn rank_and_degeneracy_errors() {
        let p = panel(&[&[1.0, 2.0, 3.0], &[2.0, 0.0, 1.0]]);
        assert!(matches!(estimate_pca(&p, 3, false), Err(Error::Rank(_))));
        assert!(matches!(estimate_pca(&p, 0, false), Err(Error::Rank(_))));
        assert!(matches!(select_num_factors(&p, 2, false), Err(Error::Rank(_))));
        let z = panel(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(
            estimate_pca(&z, 1, false),
            Err(Error::DegenerateInput(_))
        ));
        let c = panel(&[&[5.0, 5.0, 5.0], &[1.0, 1.0, 1.0]]);
        assert!(matches!(
            estimate_pca(&c, 1, true),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn permuted_rows() {
        let lam = LoadingMatrix::new(Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap()).unwrap();
        let p = lam.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.values().column(0), vec![3.0, 1.0, 2.0]);
        assert!(lam.permuted(&[0, 1]).is_err());
        assert!(lam.permuted(&[0, 1, 1]).is_err());
    }

    #[test]
    fn periods_side_falls_back_when_rank_deficient() {
        // rank one, T < N, asking for two factors
        let f = [1.0, -1.0, 2.0];
        let rows: Vec<Vec<f64>> = (1..=5).map(|i| f.iter().map(|v| v * i as f64).collect()).collect();
        let p = DataPanel::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap();
        let (lam, _) = estimate_pca(&p, 2, false).unwrap();
        assert!(lam.normalization_error() < 1e-10);
    }
}

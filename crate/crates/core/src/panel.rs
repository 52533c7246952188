//! Panel data, known group membership, and half-vectorization.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Observed `N x T` panel: one row per variable, one column per period.
#[derive(Debug, Clone)]
pub struct DataPanel<T> {
    values: Matrix<T>,
    series_ids: Vec<String>,
}

impl<T: Real> DataPanel<T> {
    pub fn new(values: Matrix<T>, series_ids: Vec<String>) -> Result<Self> {
        let (n, t) = (values.rows(), values.cols());
        if n < 2 || t < 2 {
            return Err(Error::Shape(format!(
                "panel must have N >= 2 and T >= 2, got {n}x{t}"
            )));
        }
        if series_ids.len() != n {
            return Err(Error::Shape(format!(
                "{} series ids for {n} variables",
                series_ids.len()
            )));
        }
        if let Some(pos) = values.as_slice().iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value for series '{}' at period {}",
                series_ids[pos / t],
                pos % t
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &series_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Input(format!("duplicate series id '{id}'")));
            }
        }
        Ok(Self { values, series_ids })
    }

    /// Panel with generated ids `s1..sN`.
    pub fn from_matrix(values: Matrix<T>) -> Result<Self> {
        let ids = (1..=values.rows()).map(|i| format!("s{i}")).collect();
        Self::new(values, ids)
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    /// Number of time periods.
    pub fn t(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    /// Copy of the data with each series centered at its time average.
    pub fn demeaned(&self) -> Matrix<T> {
        let mut x = self.values.clone();
        let t = T::from_usize_lossy(self.t());
        for i in 0..x.rows() {
            let row = x.row_mut(i);
            let mean = row.iter().copied().sum::<T>() / t;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        x
    }

    /// Panel whose row `i` is row `order[i]` of this one.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.n())?;
        Ok(Self {
            values: self.values.select_rows(order),
            series_ids: order.iter().map(|&i| self.series_ids[i].clone()).collect(),
        })
    }
}

/// Known partition of the (reordered) variables into `S` contiguous groups.
///
/// Group indices are zero-based; group `j` occupies rows
/// `boundaries[j-1]..boundaries[j]` (with an implicit leading zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    labels: Vec<usize>,
    sizes: Vec<usize>,
    boundaries: Vec<usize>,
    shares: Vec<f64>,
    tags: Vec<String>,
}

impl GroupStructure {
    /// Contiguous groups with the given sizes, tagged `1..S`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let tags = (1..=sizes.len()).map(|j| j.to_string()).collect();
        Self::with_tags(sizes, tags)
    }

    pub fn with_tags(sizes: &[usize], tags: Vec<String>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InsufficientGroups { found: sizes.len() });
        }
        if tags.len() != sizes.len() {
            return Err(Error::Shape(format!(
                "{} tags for {} groups",
                tags.len(),
                sizes.len()
            )));
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Input(format!("group {j} is empty")));
        }
        let n: usize = sizes.iter().sum();
        let mut boundaries = Vec::with_capacity(sizes.len());
        let mut labels = Vec::with_capacity(n);
        let mut acc = 0;
        for (j, &s) in sizes.iter().enumerate() {
            acc += s;
            boundaries.push(acc);
            labels.extend(std::iter::repeat_n(j, s));
        }
        let shares = sizes.iter().map(|&s| s as f64 / n as f64).collect();
        Ok(Self {
            labels,
            sizes: sizes.to_vec(),
            boundaries,
            shares,
            tags,
        })
    }

    /// Total number of variables `N`.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of groups `S`.
    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    /// Group of each variable, in storage order (non-decreasing).
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, j: usize) -> usize {
        self.sizes[j]
    }

    /// Cumulative sizes `M_1, ..., M_S`; the last entry is `N`.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Empirical shares `N_j / N`.
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Rows belonging to group `j`.
    pub fn range(&self, j: usize) -> Range<usize> {
        let start = if j == 0 { 0 } else { self.boundaries[j - 1] };
        start..self.boundaries[j]
    }

    /// All pairs `(j, k)` with `j < k`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let s = self.num_groups();
        (0..s)
            .flat_map(|j| (j + 1..s).map(move |k| (j, k)))
            .collect()
    }
}

/// Builds the group structure from one raw tag per variable.
///
/// Groups are numbered by first appearance. The returned vector `order`
/// lists original variable indices so that variable `order[i]` is stored
/// at row `i`; within a group the original order is kept.
pub fn group_structure<S: AsRef<str>>(tags: &[S]) -> Result<(GroupStructure, Vec<usize>)> {
    let mut index_of: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref().trim();
        if tag.is_empty() {
            return Err(Error::Input(format!("variable {i} has an empty group tag")));
        }
        let g = *index_of.entry(tag).or_insert_with(|| {
            names.push(tag.to_string());
            members.push(Vec::new());
            names.len() - 1
        });
        members[g].push(i);
    }
    if members.len() < 2 {
        return Err(Error::InsufficientGroups {
            found: members.len(),
        });
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let order = members.into_iter().flatten().collect();
    Ok((GroupStructure::with_tags(&sizes, names)?, order))
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Input(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Input(format!(
                "not a permutation of 0..{n}: index {p} out of range or repeated"
            )));
        }
    }
    Ok(())
}

/// Lower triangle of a symmetric `r x r` matrix stacked column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec<T> {
    entries: Vec<T>,
    dim: usize,
}

/// Length of the half-vectorization of an `r x r` matrix.
#[inline]
pub const fn vech_len(r: usize) -> usize {
    r * (r + 1) / 2
}

impl<T: Real> SymVec<T> {
    pub fn from_entries(entries: Vec<T>) -> Result<Self> {
        let len = entries.len();
        let mut dim = 0;
        while vech_len(dim) < len {
            dim += 1;
        }
        if vech_len(dim) != len || len == 0 {
            return Err(Error::Shape(format!(
                "length {len} is not a triangular number r(r+1)/2"
            )));
        }
        Ok(Self { entries, dim })
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Half-vectorization: `(m11, m21, ..., mr1, m22, ..., mrr)`.
pub fn vech<T: Real>(m: &Matrix<T>) -> Result<SymVec<T>> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::Shape(format!(
            "vech needs a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let asym = m.max_asymmetry();
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0) * m.max_abs());
    if !(asym <= tol) {
        return Err(Error::Symmetry {
            asymmetry: asym.as_f64(),
        });
    }
    let r = m.rows();
    let mut entries = Vec::with_capacity(vech_len(r));
    for j in 0..r {
        for i in j..r {
            entries.push(m[(i, j)]);
        }
    }
    Ok(SymVec { entries, dim: r })
}

/// Inverse of [`vech`].
pub fn unvech<T: Real>(v: &SymVec<T>) -> Matrix<T> {
    let r = v.dim;
    let mut m = Matrix::zeros(r, r);
    let mut it = v.entries.iter();
    for j in 0..r {
        for i in j..r {
            let x = *it.next().expect("length checked at construction");
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// `vech(a aᵀ)` written into `out` without forming the outer product.
#[inline]
pub(crate) fn vech_outer<T: Real>(a: &[T], out: &mut [T]) {
    let r = a.len();
    let mut idx = 0;
    for j in 0..r {
        for i in j..r {
            out[idx] = a[i] * a[j];
            idx += 1;
        }
    }
}

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use grouphet::{Matrix64, RngStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix64) -> Dense {
    m.to_rows()
}

/// Cyclic Jacobi eigensolver; eigenvalues descending, eigenvectors as
/// columns of the returned matrix.
pub fn jacobi_eigen(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let values = idx.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| idx.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

/// Determinant by cofactor expansion along the first row.
pub fn det(a: &Dense) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => (0..n)
            .map(|c| {
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][c] * det(&minor(a, 0, c))
            })
            .sum(),
    }
}

fn minor(a: &Dense, row: usize, col: usize) -> Dense {
    a.iter()
        .enumerate()
        .filter(|&(i, _)| i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|&(j, _)| j != col)
                .map(|(_, &x)| x)
                .collect()
        })
        .collect()
}

/// Inverse via the adjugate.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let d = det(a);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * det(&minor(a, j, i)) / d
                })
                .collect()
        })
        .collect()
}

/// Column-stacked lower triangle.
pub fn naive_vech(m: &Dense) -> Vec<f64> {
    let r = m.len();
    let mut out = Vec::new();
    for c in 0..r {
        for row in c..r {
            out.push(m[row][c]);
        }
    }
    out
}

fn outer(a: &[f64]) -> Dense {
    a.iter().map(|x| a.iter().map(|y| x * y).collect()).collect()
}

/// Pairwise LM statistics straight from the definitions, for contiguous
/// groups of the given sizes; pairs in lexicographic order.
pub fn naive_lm(rows: &[Vec<f64>], sizes: &[usize]) -> Vec<((usize, usize), f64)> {
    let n = rows.len();
    let r = rows[0].len();
    let mut starts = vec![0];
    for s in sizes {
        starts.push(starts.last().unwrap() + s);
    }
    let group_mean = |g: usize| -> Vec<f64> {
        let members = &rows[starts[g]..starts[g + 1]];
        let mut acc = vec![0.0; r * (r + 1) / 2];
        for l in members {
            for (a, v) in acc.iter_mut().zip(naive_vech(&outer(l))) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / members.len() as f64).collect()
    };
    let d = r * (r + 1) / 2;
    let mut base = vec![vec![0.0; d]; d];
    for l in rows {
        let mut m = outer(l);
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        let v = naive_vech(&m);
        for a in 0..d {
            for b in 0..d {
                base[a][b] += v[a] * v[b] / n as f64;
            }
        }
    }
    let mut out = Vec::new();
    for j in 0..sizes.len() {
        for k in j + 1..sizes.len() {
            let (mj, mk) = (group_mean(j), group_mean(k));
            let a: Vec<f64> = mj.iter().zip(&mk).map(|(x, y)| (n as f64).sqrt() * (x - y)).collect();
            let scale = n as f64 / sizes[j] as f64 + n as f64 / sizes[k] as f64;
            let s: Dense = base.iter().map(|row| row.iter().map(|x| x * scale).collect()).collect();
            let inv = inverse(&s);
            let mut lm = 0.0;
            for p in 0..d {
                for q in 0..d {
                    lm += a[p] * inv[p][q] * a[q];
                }
            }
            out.push(((j, k), lm));
        }
    }
    out
}

/// Random symmetric matrix with standard normal entries.
pub fn random_symmetric(n: usize, rng: &mut RngStream) -> Matrix64 {
    let mut m = Matrix64::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x = rng.std_normal();
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// Random orthogonal matrix by Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(r: usize, rng: &mut RngStream) -> Matrix64 {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    while cols.len() < r {
        let mut v: Vec<f64> = (0..r).map(|_| rng.std_normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix64::from_fn(r, r, |i, j| cols[j][i])
}

pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).unwrap().cdf(x)
}

pub fn chi2_quantile(p: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).unwrap().inverse_cdf(p)
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

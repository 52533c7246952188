//! Simulated limit laws of `LM1` and `LM2` under the null of no
//! group-specific heterogeneity.
//!
//! Each draw samples independent `Z_j ~ N(0, I_d)` for every group and forms
//! `Q_{j,k} = ‖π_j^{-1/2} Z_j − π_k^{-1/2} Z_k‖² / (π_j⁻¹ + π_k⁻¹)`, keeping
//! the max and min over pairs. The `Z_j` are shared by all pairs within a
//! draw, so the pairwise chi-square variables stay dependent.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{vech_len, GroupStructure};
use crate::rng::RngStream;

pub const DEFAULT_NULL_DRAWS: usize = 500_000;
pub const MIN_NULL_DRAWS: usize = 1000;

/// Draws per RNG substream; fixed so results do not depend on threading.
const CHUNK_DRAWS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSimulationConfig {
    pub shares: Vec<f64>,
    /// Dimension of each `Z_j`, `r(r+1)/2`.
    pub d: usize,
    pub n_draws: usize,
    pub seed: u64,
}

impl NullSimulationConfig {
    pub fn new(shares: Vec<f64>, d: usize, n_draws: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            shares,
            d,
            n_draws,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Shares `N_j/N` from `groups` and `d = r(r+1)/2`.
    pub fn for_groups(groups: &GroupStructure, r: usize, n_draws: usize, seed: u64) -> Result<Self> {
        Self::new(groups.shares().to_vec(), vech_len(r), n_draws, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shares.len() < 2 {
            return Err(Error::InsufficientGroups {
                found: self.shares.len(),
            });
        }
        if self.shares.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::Input("group shares must be positive".into()));
        }
        let total: f64 = self.shares.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("group shares sum to {total}, not 1")));
        }
        if self.d < 1 {
            return Err(Error::Input("dimension d must be at least 1".into()));
        }
        if self.n_draws < MIN_NULL_DRAWS {
            return Err(Error::Input(format!(
                "at least {MIN_NULL_DRAWS} null draws are required, got {}",
                self.n_draws
            )));
        }
        Ok(())
    }
}

/// Simulated draws of `max_{j<k} Q_{j,k}` and `min_{j<k} Q_{j,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSample {
    pub max_draws: Vec<f64>,
    pub min_draws: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "LM1")]
    Lm1,
    #[serde(rename = "LM2")]
    Lm2,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Lm1 => "LM1",
            Statistic::Lm2 => "LM2",
        })
    }
}

/// Simulates the null laws; deterministic in `config.seed` regardless of the
/// number of worker threads.
pub fn simulate_null(config: &NullSimulationConfig) -> Result<NullSample> {
    config.validate()?;
    let s = config.shares.len();
    let d = config.d;
    let root = RngStream::new(config.seed);
    let inv_root_share: Vec<f64> = config.shares.iter().map(|p| 1.0 / p.sqrt()).collect();
    let mut pairs = Vec::with_capacity(s * (s - 1) / 2);
    for j in 0..s {
        for k in j + 1..s {
            let w = 1.0 / (1.0 / config.shares[j] + 1.0 / config.shares[k]);
            pairs.push((j, k, w));
        }
    }

    let n_chunks = config.n_draws.div_ceil(CHUNK_DRAWS);
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = root.substream(c as u64);
            let len = CHUNK_DRAWS.min(config.n_draws - c * CHUNK_DRAWS);
            let mut maxes = Vec::with_capacity(len);
            let mut mins = Vec::with_capacity(len);
            let mut y = vec![0.0; s * d];
            for _ in 0..len {
                for (j, block) in y.chunks_exact_mut(d).enumerate() {
                    for v in block.iter_mut() {
                        *v = rng.std_normal() * inv_root_share[j];
                    }
                }
                let mut hi = f64::NEG_INFINITY;
                let mut lo = f64::INFINITY;
                for &(j, k, w) in &pairs {
                    let yj = &y[j * d..(j + 1) * d];
                    let yk = &y[k * d..(k + 1) * d];
                    let q = w * yj
                        .iter()
                        .zip(yk)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    hi = hi.max(q);
                    lo = lo.min(q);
                }
                maxes.push(hi);
                mins.push(lo);
            }
            (maxes, mins)
        })
        .collect();

    let mut sample = NullSample {
        max_draws: Vec::with_capacity(config.n_draws),
        min_draws: Vec::with_capacity(config.n_draws),
    };
    for (maxes, mins) in chunks {
        sample.max_draws.extend(maxes);
        sample.min_draws.extend(mins);
    }
    Ok(sample)
}

fn order_statistic_rank(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::Input("empty sample".into()));
    }
    // guard against (1 - alpha) * n landing a hair above an integer
    let k = ((1.0 - alpha) * n as f64 - 1e-9).ceil();
    Ok((k.max(1.0) as usize).min(n))
}

/// Empirical `(1 − alpha)` quantile: the `ceil((1 − alpha) n)`-th order
/// statistic.
pub fn critical_value(sample: &[f64], alpha: f64) -> Result<f64> {
    let k = order_statistic_rank(sample.len(), alpha)?;
    let mut buf = sample.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Fraction of draws at or above `observed`.
pub fn asymptotic_pvalue(sample: &[f64], observed: f64) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let count = sample.iter().filter(|&&x| x >= observed).count();
    count as f64 / sample.len() as f64
}

/// Sorted null draws for repeated quantile and p-value queries.
#[derive(Debug, Clone)]
pub struct NullDistribution {
    config: NullSimulationConfig,
    max_sorted: Vec<f64>,
    min_sorted: Vec<f64>,
}

impl NullDistribution {
    pub fn simulate(config: &NullSimulationConfig) -> Result<Self> {
        let sample = simulate_null(config)?;
        Ok(Self::from_sample(config.clone(), sample))
    }

    pub fn from_sample(config: NullSimulationConfig, sample: NullSample) -> Self {
        let mut max_sorted = sample.max_draws;
        let mut min_sorted = sample.min_draws;
        max_sorted.par_sort_unstable_by(f64::total_cmp);
        min_sorted.par_sort_unstable_by(f64::total_cmp);
        Self {
            config,
            max_sorted,
            min_sorted,
        }
    }

    pub fn config(&self) -> &NullSimulationConfig {
        &self.config
    }

    pub fn sorted(&self, stat: Statistic) -> &[f64] {
        match stat {
            Statistic::Lm1 => &self.max_sorted,
            Statistic::Lm2 => &self.min_sorted,
        }
    }

    pub fn critical_value(&self, stat: Statistic, alpha: f64) -> Result<f64> {
        let sorted = self.sorted(stat);
        let k = order_statistic_rank(sorted.len(), alpha)?;
        Ok(sorted[k - 1])
    }

    pub fn p_value(&self, stat: Statistic, observed: f64) -> f64 {
        let sorted = self.sorted(stat);
        let below = sorted.partition_point(|&x| x < observed);
        (sorted.len() - below) as f64 / sorted.len() as f64
    }

    /// Rows of a critical-value table for every statistic and alpha.
    pub fn table(&self, alphas: &[f64]) -> Result<Vec<CriticalValueRow>> {
        let mut rows = Vec::with_capacity(2 * alphas.len());
        for stat in [Statistic::Lm1, Statistic::Lm2] {
            for &alpha in alphas {
                rows.push(CriticalValueRow {
                    statistic: stat,
                    alpha,
                    value: self.critical_value(stat, alpha)?,
                    n_draws: self.config.n_draws,
                    seed: self.config.seed,
                });
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueRow {
    pub statistic: Statistic,
    pub alpha: f64,
    pub value: f64,
    pub n_draws: usize,
    pub seed: u64,
}

/// CSV with columns `statistic,alpha,value,n_draws,seed`.
pub fn write_critical_values_csv<W: Write>(rows: &[CriticalValueRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

//! Rejection-frequency experiments over grids of `(N, T)` cells.
//!
//! Replication `m` of cell `c` draws its data from
//! `RngStream::new(seed).descend(&[c, m, 0])` and its permutations from
//! `descend(&[c, m, 1])`. Asymptotic critical values come from null samples
//! seeded with `null_seed(seed)` and cached per `(shares, d)`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{simulate, DgpConfig, DgpKind};
use crate::error::{Error, Result};
use crate::factors::{GramSide, PrincipalComponents};
use crate::lm::LmEvaluator;
use crate::null_dist::{NullDistribution, NullSimulationConfig, Statistic, DEFAULT_NULL_DRAWS};
use crate::panel::vech_len;
use crate::permutation::{permutation_test_with, DEFAULT_PERMUTATIONS};
use crate::rng::{null_seed, RngStream};

pub const MIN_REPLICATIONS: usize = 50;
/// Largest tolerated share of replications lost to singular variance matrices.
pub const MAX_EXCLUDED_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    Asymptotic,
    Permutation,
    Both,
}

impl InferenceMode {
    pub fn asymptotic(self) -> bool {
        matches!(self, InferenceMode::Asymptotic | InferenceMode::Both)
    }

    pub fn permutation(self) -> bool {
        matches!(self, InferenceMode::Permutation | InferenceMode::Both)
    }
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferenceMode::Asymptotic => "asymptotic",
            InferenceMode::Permutation => "permutation",
            InferenceMode::Both => "both",
        })
    }
}

impl FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asymptotic" => Ok(InferenceMode::Asymptotic),
            "permutation" => Ok(InferenceMode::Permutation),
            "both" => Ok(InferenceMode::Both),
            _ => Err(Error::Input(format!(
                "unknown inference mode '{s}' (expected asymptotic, permutation or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: DgpKind,
    /// `(N, T)` cells.
    pub grid: Vec<(usize, usize)>,
    pub replications: usize,
    pub alpha: f64,
    pub inference: InferenceMode,
    pub rmax: usize,
    /// Permutations per replication.
    pub permutations: usize,
    /// Draws per simulated null distribution.
    pub null_draws: usize,
    pub seed: u64,
    pub b: f64,
    pub theta: f64,
    pub p: usize,
    pub rho: f64,
}

impl ExperimentConfig {
    /// Defaults: `alpha = 0.05`, both inference modes, `rmax = 10`,
    /// 999 permutations, 500 000 null draws, seed 0 and the default DGP
    /// parameters.
    pub fn new(kind: DgpKind, grid: Vec<(usize, usize)>, replications: usize) -> Self {
        let d = DgpConfig::new(kind, 0, 0);
        Self {
            kind,
            grid,
            replications,
            alpha: 0.05,
            inference: InferenceMode::Both,
            rmax: 10,
            permutations: DEFAULT_PERMUTATIONS,
            null_draws: DEFAULT_NULL_DRAWS,
            seed: 0,
            b: d.b,
            theta: d.theta,
            p: d.p,
            rho: d.rho,
        }
    }

    pub fn dgp(&self, n: usize, t: usize) -> DgpConfig {
        DgpConfig {
            kind: self.kind,
            n,
            t,
            b: self.b,
            theta: self.theta,
            p: self.p,
            rho: self.rho,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Input(format!(
                "at least {MIN_REPLICATIONS} replications are required, got {}",
                self.replications
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::Input("experiment grid is empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Input(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.inference.permutation() && self.permutations < 1 {
            return Err(Error::Input("number of permutations must be at least 1".into()));
        }
        for &(n, t) in &self.grid {
            self.dgp(n, t).validate()?;
            if self.rmax < 1 || self.rmax >= n.min(t) {
                return Err(Error::Rank(format!(
                    "rmax must lie in 1..={} for N={n}, T={t}, got {}",
                    n.min(t) - 1,
                    self.rmax
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub rejections: usize,
    /// Percent of used replications.
    pub frequency: f64,
    /// `100 √(p̂(1 − p̂)/M)`.
    pub mc_standard_error: f64,
}

impl RejectionRate {
    fn new(rejections: usize, used: usize) -> Self {
        let p = if used == 0 { 0.0 } else { rejections as f64 / used as f64 };
        Self {
            rejections,
            frequency: 100.0 * p,
            mc_standard_error: if used == 0 {
                0.0
            } else {
                100.0 * (p * (1.0 - p) / used as f64).sqrt()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub t: usize,
    pub replications: usize,
    pub excluded: usize,
    /// Frequency of each selected factor count, index `r - 1`.
    pub r_selected_counts: Vec<usize>,
    pub asymptotic_lm1: Option<RejectionRate>,
    pub asymptotic_lm2: Option<RejectionRate>,
    pub permutation_lm1: Option<RejectionRate>,
    pub permutation_lm2: Option<RejectionRate>,
}

impl CellResult {
    pub fn used(&self) -> usize {
        self.replications - self.excluded
    }

    pub fn rate(&self, stat: Statistic, mode: InferenceMode) -> Option<RejectionRate> {
        match (stat, mode) {
            (Statistic::Lm1, InferenceMode::Asymptotic) => self.asymptotic_lm1,
            (Statistic::Lm2, InferenceMode::Asymptotic) => self.asymptotic_lm2,
            (Statistic::Lm1, InferenceMode::Permutation) => self.permutation_lm1,
            (Statistic::Lm2, InferenceMode::Permutation) => self.permutation_lm2,
            (_, InferenceMode::Both) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub null_seed: u64,
    pub cells: Vec<CellResult>,
}

/// Per-replication statistics, before any critical value is applied.
#[derive(Debug, Clone, Copy)]
struct Replication {
    r: usize,
    lm1: f64,
    lm2: f64,
    perm_p: Option<(f64, f64)>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let root = RngStream::new(config.seed);
    let null_seed = null_seed(config.seed);
    let mut cells = Vec::with_capacity(config.grid.len());
    let mut nulls: HashMap<(Vec<u64>, usize), NullDistribution> = HashMap::new();

    for (c, &(n, t)) in config.grid.iter().enumerate() {
        let dgp = config.dgp(n, t);
        let groups = dgp.groups()?;
        let outcomes: Vec<Result<Option<Replication>>> = (0..config.replications)
            .into_par_iter()
            .map(|m| {
                let stream = root.descend(&[c as u64, m as u64]);
                replicate(config, &dgp, &stream)
            })
            .collect();

        let mut reps = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            if let Some(rep) = o? {
                reps.push(rep);
            }
        }
        let excluded = config.replications - reps.len();
        if excluded as f64 >= MAX_EXCLUDED_SHARE * config.replications as f64 {
            return Err(Error::DegenerateInput(format!(
                "{excluded} of {} replications at N={n}, T={t} had singular variance matrices",
                config.replications
            )));
        }

        let mut r_selected_counts = vec![0; config.rmax];
        for rep in &reps {
            r_selected_counts[rep.r - 1] += 1;
        }

        let (mut asymptotic_lm1, mut asymptotic_lm2) = (None, None);
        if config.inference.asymptotic() {
            let shares = groups.shares().to_vec();
            let share_key: Vec<u64> = shares.iter().map(|s| s.to_bits()).collect();
            let (mut rej1, mut rej2) = (0, 0);
            for rep in &reps {
                let d = vech_len(rep.r);
                let key = (share_key.clone(), d);
                if !nulls.contains_key(&key) {
                    let cfg = NullSimulationConfig::new(shares.clone(), d, config.null_draws, null_seed)?;
                    nulls.insert(key.clone(), NullDistribution::simulate(&cfg)?);
                }
                let null = &nulls[&key];
                rej1 += usize::from(rep.lm1 > null.critical_value(Statistic::Lm1, config.alpha)?);
                rej2 += usize::from(rep.lm2 > null.critical_value(Statistic::Lm2, config.alpha)?);
            }
            asymptotic_lm1 = Some(RejectionRate::new(rej1, reps.len()));
            asymptotic_lm2 = Some(RejectionRate::new(rej2, reps.len()));
        }

        let (mut permutation_lm1, mut permutation_lm2) = (None, None);
        if config.inference.permutation() {
            let (mut rej1, mut rej2) = (0, 0);
            for (p1, p2) in reps.iter().filter_map(|r| r.perm_p) {
                rej1 += usize::from(p1 <= config.alpha);
                rej2 += usize::from(p2 <= config.alpha);
            }
            permutation_lm1 = Some(RejectionRate::new(rej1, reps.len()));
            permutation_lm2 = Some(RejectionRate::new(rej2, reps.len()));
        }

        cells.push(CellResult {
            n,
            t,
            replications: config.replications,
            excluded,
            r_selected_counts,
            asymptotic_lm1,
            asymptotic_lm2,
            permutation_lm1,
            permutation_lm2,
        });
    }

    Ok(ExperimentResult {
        config: config.clone(),
        null_seed,
        cells,
    })
}

/// One replication; `None` when the variance matrix is singular.
fn replicate(config: &ExperimentConfig, dgp: &DgpConfig, stream: &RngStream) -> Result<Option<Replication>> {
    let sample = simulate(dgp, &stream.substream(0))?;
    let pcs = PrincipalComponents::fit(&sample.panel, true, GramSide::Auto)?;
    let r = pcs.select(config.rmax)?.r_selected;
    let (loadings, _) = pcs.loadings(r)?;
    let evaluator = match LmEvaluator::new(&loadings, &sample.groups) {
        Ok(e) => e,
        Err(Error::SingularVariance { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let observed = evaluator.evaluate(None);
    let perm_p = if config.inference.permutation() {
        let res = permutation_test_with(&evaluator, config.permutations, &stream.substream(1))?;
        Some((res.p1, res.p2))
    } else {
        None
    };
    Ok(Some(Replication {
        r,
        lm1: observed.lm1,
        lm2: observed.lm2,
        perm_p,
    }))
}

const CSV_RATE_COLUMNS: [(Statistic, InferenceMode, &str); 4] = [
    (Statistic::Lm1, InferenceMode::Asymptotic, "asym_lm1"),
    (Statistic::Lm2, InferenceMode::Asymptotic, "asym_lm2"),
    (Statistic::Lm1, InferenceMode::Permutation, "perm_lm1"),
    (Statistic::Lm2, InferenceMode::Permutation, "perm_lm2"),
];

impl ExperimentResult {
    pub fn cell(&self, n: usize, t: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.n == n && c.t == t)
    }

    /// One row per cell: rejection frequencies (%) and their Monte Carlo
    /// standard errors for each statistic and inference mode; empty fields
    /// for modes that were not run.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["kind", "n", "t", "replications", "excluded", "alpha"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for (_, _, name) in CSV_RATE_COLUMNS {
            header.push(name.to_string());
            header.push(format!("{name}_se"));
        }
        w.write_record(&header)?;
        for cell in &self.cells {
            let mut row = vec![
                self.config.kind.to_string(),
                cell.n.to_string(),
                cell.t.to_string(),
                cell.replications.to_string(),
                cell.excluded.to_string(),
                self.config.alpha.to_string(),
            ];
            for (stat, mode, _) in CSV_RATE_COLUMNS {
                match cell.rate(stat, mode) {
                    Some(r) => {
                        row.push(format!("{:.2}", r.frequency));
                        row.push(format!("{:.2}", r.mc_standard_error));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Blocks per statistic and inference mode, `T` down and `N` across.
    pub fn render_table(&self) -> String {
        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        let mut ts: Vec<usize> = self.cells.iter().map(|c| c.t).collect();
        ns.sort_unstable();
        ns.dedup();
        ts.sort_unstable();
        ts.dedup();

        let mut out = String::new();
        let _ = writeln!(
            out,
            "Rejection frequencies (%) for DGP {}, alpha = {}, M = {}",
            self.config.kind, self.config.alpha, self.config.replications
        );
        for (stat, mode, _) in CSV_RATE_COLUMNS {
            if self.cells.iter().all(|c| c.rate(stat, mode).is_none()) {
                continue;
            }
            let title = match mode {
                InferenceMode::Permutation => format!("{stat} Permutation Test"),
                _ => format!("{stat} Asymptotic Test"),
            };
            let _ = writeln!(out);
            let _ = write!(out, "{title:<26}");
            for n in &ns {
                let _ = write!(out, "{:>10}", format!("N={n}"));
            }
            let _ = writeln!(out);
            for t in &ts {
                let _ = write!(out, "{:<26}", format!("T={t}"));
                for n in &ns {
                    let cell = self.cell(*n, *t).and_then(|c| c.rate(stat, mode));
                    match cell {
                        Some(r) => {
                            let _ = write!(out, "{:>10.2}", r.frequency);
                        }
                        None => {
                            let _ = write!(out, "{:>10}", "-");
                        }
                    }
                }
                let _ = writeln!(out);
            }
        }
        out
    }
}

//! End-to-end heterogeneity test on an ingested panel and its report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::InferenceMode;
use crate::factors::{FactorCountSelection, GramSide, PrincipalComponents};
use crate::lm::{lm_aggregate, LmEvaluator};
use crate::null_dist::{NullDistribution, NullSimulationConfig, Statistic, DEFAULT_NULL_DRAWS};
use crate::panel::{vech_len, DataPanel, GroupStructure};
use crate::permutation::{permutation_test_with, DEFAULT_PERMUTATIONS};
use crate::rng::{null_seed, RngStream};

pub const DEFAULT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];
pub const DEFAULT_RMAX: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    /// Fixed number of factors; selected by the information criterion when
    /// `None`.
    pub r: Option<usize>,
    pub rmax: usize,
    pub alphas: Vec<f64>,
    pub null_draws: usize,
    pub permutations: usize,
    pub seed: u64,
    pub demean: bool,
    /// Recorded in the report; the transform itself happens at ingestion.
    pub log_returns: bool,
    pub inference: InferenceMode,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            r: None,
            rmax: DEFAULT_RMAX,
            alphas: DEFAULT_ALPHAS.to_vec(),
            null_draws: DEFAULT_NULL_DRAWS,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
            demean: true,
            log_returns: false,
            inference: InferenceMode::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub n: usize,
    pub t: usize,
    pub s: usize,
    pub group_tags: Vec<String>,
    pub group_sizes: Vec<usize>,
    pub r: usize,
    /// Present when `r` was selected rather than fixed.
    pub factor_selection: Option<FactorCountSelection>,
    pub demean: bool,
    pub log_returns: bool,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub j: usize,
    pub k: usize,
    pub group_j: String,
    pub group_k: String,
    pub lm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsBlock {
    pub pairs: Vec<PairEntry>,
    pub lm1: f64,
    pub lm2: f64,
    pub argmax_pair: (usize, usize),
    pub argmin_pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub alpha: f64,
    pub lm1: f64,
    pub lm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticBlock {
    pub d: usize,
    pub shares: Vec<f64>,
    pub n_draws: usize,
    pub seed: u64,
    pub critical_values: Vec<CriticalValues>,
    pub p_value_lm1: f64,
    pub p_value_lm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationBlock {
    pub b: usize,
    pub seed: u64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub rmax: usize,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub inputs: InputSummary,
    pub statistics: StatisticsBlock,
    pub asymptotic: Option<AsymptoticBlock>,
    pub permutation: Option<PermutationBlock>,
    pub provenance: Provenance,
}

/// Estimates loadings, computes the pairwise statistics and runs the
/// requested inference. The null sample is seeded with `null_seed(seed)`, the
/// permutations with `seed`.
pub fn run_test(panel: &DataPanel<f64>, groups: &GroupStructure, options: &TestOptions) -> Result<TestReport> {
    if panel.n() != groups.n() {
        return Err(Error::Shape(format!(
            "panel has {} variables but the groups cover {}",
            panel.n(),
            groups.n()
        )));
    }
    if options.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::Input("every alpha must lie in (0, 1)".into()));
    }
    let pcs = PrincipalComponents::fit(panel, options.demean, GramSide::Auto)?;
    let (r, factor_selection) = match options.r {
        Some(r) => (r, None),
        None => {
            let sel = pcs.select(options.rmax)?;
            (sel.r_selected, Some(sel))
        }
    };
    let (loadings, _) = pcs.loadings(r)?;
    let stats = lm_aggregate(&loadings, groups)?;
    let tags = groups.tags();
    let pairs = stats
        .pairs
        .iter()
        .map(|p| PairEntry {
            j: p.j,
            k: p.k,
            group_j: tags[p.j].clone(),
            group_k: tags[p.k].clone(),
            lm: p.lm,
        })
        .collect();
    let statistics = StatisticsBlock {
        pairs,
        lm1: stats.lm1,
        lm2: stats.lm2,
        argmax_pair: stats.argmax_pair,
        argmin_pair: stats.argmin_pair,
    };

    let asymptotic = if options.inference.asymptotic() {
        let cfg = NullSimulationConfig::for_groups(groups, r, options.null_draws, null_seed(options.seed))?;
        let null = NullDistribution::simulate(&cfg)?;
        let critical_values = options
            .alphas
            .iter()
            .map(|&alpha| {
                Ok(CriticalValues {
                    alpha,
                    lm1: null.critical_value(Statistic::Lm1, alpha)?,
                    lm2: null.critical_value(Statistic::Lm2, alpha)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(AsymptoticBlock {
            d: vech_len(r),
            shares: cfg.shares.clone(),
            n_draws: cfg.n_draws,
            seed: cfg.seed,
            critical_values,
            p_value_lm1: null.p_value(Statistic::Lm1, stats.lm1),
            p_value_lm2: null.p_value(Statistic::Lm2, stats.lm2),
        })
    } else {
        None
    };

    let permutation = if options.inference.permutation() {
        let evaluator = LmEvaluator::new(&loadings, groups)?;
        let res = permutation_test_with(&evaluator, options.permutations, &RngStream::new(options.seed))?;
        Some(PermutationBlock {
            b: res.b,
            seed: options.seed,
            p1: res.p1,
            p2: res.p2,
        })
    } else {
        None
    };

    Ok(TestReport {
        inputs: InputSummary {
            n: panel.n(),
            t: panel.t(),
            s: groups.num_groups(),
            group_tags: tags.to_vec(),
            group_sizes: groups.sizes().to_vec(),
            r,
            factor_selection,
            demean: options.demean,
            log_returns: options.log_returns,
            alphas: options.alphas.clone(),
        },
        statistics,
        asymptotic,
        permutation,
        provenance: Provenance {
            seed: options.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            rmax: options.rmax,
            timestamp: None,
        },
    })
}

impl TestReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Human-readable summary with decisions at each alpha.
    pub fn render_text(&self) -> String {
        let inp = &self.inputs;
        let st = &self.statistics;
        let tag = |j: usize| inp.group_tags[j].as_str();
        let mut out = String::new();
        let _ = writeln!(out, "Group-specific heterogeneity test");
        let _ = writeln!(out, "N = {}, T = {}, S = {}", inp.n, inp.t, inp.s);
        let groups: Vec<String> = inp
            .group_tags
            .iter()
            .zip(&inp.group_sizes)
            .map(|(t, s)| format!("{t} ({s})"))
            .collect();
        let _ = writeln!(out, "groups: {}", groups.join(", "));
        match &inp.factor_selection {
            Some(sel) => {
                let _ = writeln!(out, "r = {} (information criterion, rmax = {})", inp.r, sel.rmax);
            }
            None => {
                let _ = writeln!(out, "r = {} (fixed)", inp.r);
            }
        }
        let _ = writeln!(
            out,
            "preprocessing: demean = {}, log returns = {}",
            inp.demean, inp.log_returns
        );

        let _ = writeln!(out);
        let _ = writeln!(out, "{:<28}{:>14}{:>14}", "", "LM1N", "LM2N");
        let _ = writeln!(out, "{:<28}{:>14.2}{:>14.2}", "statistic", st.lm1, st.lm2);
        let _ = writeln!(
            out,
            "{:<28}{:>14}{:>14}",
            "pair",
            format!("{}/{}", tag(st.argmax_pair.0), tag(st.argmax_pair.1)),
            format!("{}/{}", tag(st.argmin_pair.0), tag(st.argmin_pair.1)),
        );
        if let Some(a) = &self.asymptotic {
            for cv in &a.critical_values {
                let label = format!("critical value {}%", cv.alpha * 100.0);
                let _ = writeln!(out, "{:<28}{:>14.2}{:>14.2}", label, cv.lm1, cv.lm2);
            }
            let _ = writeln!(out, "{:<28}{:>14.4}{:>14.4}", "asymptotic p-value", a.p_value_lm1, a.p_value_lm2);
        }
        if let Some(p) = &self.permutation {
            let label = format!("permutation p-value (B={})", p.b);
            let _ = writeln!(out, "{:<28}{:>14.4}{:>14.4}", label, p.p1, p.p2);
        }

        let _ = writeln!(out);
        let _ = writeln!(out, "decisions (reject H0?)");
        if let Some(a) = &self.asymptotic {
            for cv in &a.critical_values {
                let _ = writeln!(
                    out,
                    "  asymptotic, alpha = {:<6} LM1N: {:<4} LM2N: {}",
                    cv.alpha,
                    yes_no(st.lm1 > cv.lm1),
                    yes_no(st.lm2 > cv.lm2)
                );
            }
        }
        if let Some(p) = &self.permutation {
            for &alpha in &inp.alphas {
                let _ = writeln!(
                    out,
                    "  permutation, alpha = {:<5} LM1N: {:<4} LM2N: {}",
                    alpha,
                    yes_no(p.p1 <= alpha),
                    yes_no(p.p2 <= alpha)
                );
            }
        }

        let _ = writeln!(out);
        let _ = writeln!(out, "pairwise statistics");
        for p in &st.pairs {
            let _ = writeln!(out, "  {:<24}{:>14.4}", format!("{} vs {}", p.group_j, p.group_k), p.lm);
        }
        let _ = writeln!(out);
        let _ = write!(out, "seed {}, version {}", self.provenance.seed, self.provenance.version);
        if let Some(ts) = &self.provenance.timestamp {
            let _ = write!(out, ", {ts}");
        }
        let _ = writeln!(out);
        out
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

//! Simulation designs for size and power experiments.
//!
//! All kinds share `X_it = λ_{c,i} f_{c,t} [+ λ_{g,i} f_{g,t}] + κ e_it` with
//! four contiguous groups of `N/4` variables.
//!
//! | kind | group factors | errors |
//! |------|---------------|--------|
//! | 1-a  | none | i.i.d. N(0,1) |
//! | 2-a  | none | `σ_i (u_it + θ Σ_{1≤|j|≤P} u_{i−j,t})`, circular in `i` |
//! | 1-b  | four, equicorrelated | i.i.d. |
//! | 2-b  | four, equicorrelated | cross-sectional MA |
//! | 1-c  | as 1-b with `f_1 = f_2 = f_3` | i.i.d. |
//! | 2-c  | as 2-b with `f_1 = f_2 = f_3` | cross-sectional MA |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::panel::{DataPanel, GroupStructure};
use crate::rng::RngStream;

pub const NUM_DGP_GROUPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpKind {
    #[serde(rename = "1-a")]
    OneA,
    #[serde(rename = "2-a")]
    TwoA,
    #[serde(rename = "1-b")]
    OneB,
    #[serde(rename = "2-b")]
    TwoB,
    #[serde(rename = "1-c")]
    OneC,
    #[serde(rename = "2-c")]
    TwoC,
}

impl DgpKind {
    pub const ALL: [DgpKind; 6] = [
        DgpKind::OneA,
        DgpKind::TwoA,
        DgpKind::OneB,
        DgpKind::TwoB,
        DgpKind::OneC,
        DgpKind::TwoC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DgpKind::OneA => "1-a",
            DgpKind::TwoA => "2-a",
            DgpKind::OneB => "1-b",
            DgpKind::TwoB => "2-b",
            DgpKind::OneC => "1-c",
            DgpKind::TwoC => "2-c",
        }
    }

    /// Cross-sectionally dependent, heteroskedastic errors.
    pub fn dependent_errors(self) -> bool {
        matches!(self, DgpKind::TwoA | DgpKind::TwoB | DgpKind::TwoC)
    }

    pub fn has_group_factors(self) -> bool {
        !matches!(self, DgpKind::OneA | DgpKind::TwoA)
    }

    /// Groups 1-3 share a single specific factor.
    pub fn shared_specific_factor(self) -> bool {
        matches!(self, DgpKind::OneC | DgpKind::TwoC)
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown DGP kind '{s}' (expected 1-a, 2-a, 1-b, 2-b, 1-c or 2-c)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub n: usize,
    pub t: usize,
    /// Mean of the loadings.
    pub b: f64,
    /// MA coefficient of the dependent errors.
    pub theta: f64,
    /// MA order of the dependent errors.
    pub p: usize,
    /// Correlation between any two group-specific factors.
    pub rho: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// Defaults `b = 1`, `θ = 0.1`, `P = 4`, `ρ = 0.3`, seed 0.
    pub fn new(kind: DgpKind, n: usize, t: usize) -> Self {
        Self {
            kind,
            n,
            t,
            b: 1.0,
            theta: 0.1,
            p: 4,
            rho: 0.3,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < NUM_DGP_GROUPS || !self.n.is_multiple_of(NUM_DGP_GROUPS) {
            return Err(Error::Input(format!(
                "N must be a positive multiple of {NUM_DGP_GROUPS}, got {}",
                self.n
            )));
        }
        if self.t < 2 {
            return Err(Error::Input(format!("T must be at least 2, got {}", self.t)));
        }
        if !self.b.is_finite() {
            return Err(Error::Input("loading mean b must be finite".into()));
        }
        if !(self.theta > -1.0 && self.theta < 1.0) {
            return Err(Error::Input(format!("theta must lie in (-1, 1), got {}", self.theta)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Input(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if self.p < 1 {
            return Err(Error::Input("MA order P must be at least 1".into()));
        }
        if self.kind.dependent_errors() && 2 * self.p >= self.n {
            return Err(Error::Input(format!(
                "MA order P = {} needs N > 2P, got N = {}",
                self.p, self.n
            )));
        }
        Ok(())
    }

    /// Error scale: `√(1+b²)` for independent errors,
    /// `√(12(1+b²) / (13(1+2Pθ²)))` for dependent ones.
    pub fn kappa(&self) -> f64 {
        let signal = 1.0 + self.b * self.b;
        if self.kind.dependent_errors() {
            let p = self.p as f64;
            (12.0 * signal / (13.0 * (1.0 + 2.0 * p * self.theta * self.theta))).sqrt()
        } else {
            signal.sqrt()
        }
    }

    /// Four contiguous groups `g1..g4` of `N/4` variables.
    pub fn groups(&self) -> Result<GroupStructure> {
        self.validate()?;
        let size = self.n / NUM_DGP_GROUPS;
        GroupStructure::with_tags(
            &[size; NUM_DGP_GROUPS],
            (1..=NUM_DGP_GROUPS).map(|g| format!("g{g}")).collect(),
        )
    }
}

/// All simulated components of one draw.
#[derive(Debug, Clone)]
pub struct DgpSample {
    pub panel: DataPanel<f64>,
    pub groups: GroupStructure,
    pub common_loadings: Vec<f64>,
    /// Length `T`.
    pub common_factor: Vec<f64>,
    /// `N` entries; each variable's loading on its own group factor.
    pub specific_loadings: Option<Vec<f64>>,
    /// `T x 4`, column `g` is the factor of group `g`.
    pub specific_factors: Option<Matrix<f64>>,
    /// `N x T`, before scaling by `κ`.
    pub errors: Matrix<f64>,
    /// Per-variable error scales `σ_i` (dependent errors only).
    pub sigmas: Option<Vec<f64>>,
}

// substream indices of the components
const COMMON_LOADINGS: u64 = 0;
const COMMON_FACTOR: u64 = 1;
const SPECIFIC_LOADINGS: u64 = 2;
const SPECIFIC_FACTORS: u64 = 3;
const INNOVATIONS: u64 = 4;
const SIGMAS: u64 = 5;

/// Simulated panel and its group structure, driven by `RngStream::new(config.seed)`.
pub fn generate_dgp(config: &DgpConfig) -> Result<(DataPanel<f64>, GroupStructure)> {
    let s = simulate(config, &RngStream::new(config.seed))?;
    Ok((s.panel, s.groups))
}

/// As [`generate_dgp`] with an explicit stream, keeping every component.
pub fn simulate(config: &DgpConfig, rng: &RngStream) -> Result<DgpSample> {
    config.validate()?;
    let (n, t) = (config.n, config.t);
    let groups = config.groups()?;

    let normals = |index: u64, len: usize, mean: f64| -> Vec<f64> {
        let mut s = rng.substream(index);
        (0..len).map(|_| mean + s.std_normal()).collect()
    };

    let common_loadings = normals(COMMON_LOADINGS, n, config.b);
    let common_factor = normals(COMMON_FACTOR, t, 0.0);

    let (specific_loadings, specific_factors) = if config.kind.has_group_factors() {
        let loadings = normals(SPECIFIC_LOADINGS, n, config.b);
        let factors = specific_factors(config, &mut rng.substream(SPECIFIC_FACTORS), t)?;
        (Some(loadings), Some(factors))
    } else {
        (None, None)
    };

    let (errors, sigmas) = if config.kind.dependent_errors() {
        let mut s = rng.substream(SIGMAS);
        let sigmas = (0..n)
            .map(|_| s.uniform(0.5, 1.5))
            .collect::<Result<Vec<_>>>()?;
        let u = Matrix::from_vec(n, t, normals(INNOVATIONS, n * t, 0.0))?;
        (moving_average_errors(&u, &sigmas, config.theta, config.p), Some(sigmas))
    } else {
        (Matrix::from_vec(n, t, normals(INNOVATIONS, n * t, 0.0))?, None)
    };

    let kappa = config.kappa();
    let mut x = Matrix::zeros(n, t);
    for i in 0..n {
        let g = groups.labels()[i];
        let row = x.row_mut(i);
        for (tt, v) in row.iter_mut().enumerate() {
            let mut val = common_loadings[i] * common_factor[tt] + kappa * errors[(i, tt)];
            if let (Some(l), Some(f)) = (&specific_loadings, &specific_factors) {
                val += l[i] * f[(tt, g)];
            }
            *v = val;
        }
    }

    Ok(DgpSample {
        panel: DataPanel::from_matrix(x)?,
        groups,
        common_loadings,
        common_factor,
        specific_loadings,
        specific_factors,
        errors,
        sigmas,
    })
}

/// Equicorrelated group factors `f_t = L z_t` with `L Lᵀ` the 4x4
/// equicorrelation matrix.
fn specific_factors(config: &DgpConfig, rng: &mut RngStream, t: usize) -> Result<Matrix<f64>> {
    let corr = Matrix::from_fn(NUM_DGP_GROUPS, NUM_DGP_GROUPS, |a, b| {
        if a == b {
            1.0
        } else {
            config.rho
        }
    });
    let chol = Cholesky::new(&corr, 1e-12).map_err(|_| {
        Error::Input(format!(
            "rho = {} gives a non-positive-definite factor correlation",
            config.rho
        ))
    })?;
    let l = chol.lower();
    let mut f = Matrix::zeros(t, NUM_DGP_GROUPS);
    let mut z = [0.0; NUM_DGP_GROUPS];
    for tt in 0..t {
        rng.fill_std_normal(&mut z);
        for a in 0..NUM_DGP_GROUPS {
            f[(tt, a)] = (0..=a).map(|c| l[(a, c)] * z[c]).sum();
        }
        if config.kind.shared_specific_factor() {
            f[(tt, 1)] = f[(tt, 0)];
            f[(tt, 2)] = f[(tt, 0)];
        }
    }
    Ok(f)
}

/// `e_it = σ_i (u_it + θ Σ_{1≤|j|≤P} u_{(i−j) mod N, t})`.
fn moving_average_errors(u: &Matrix<f64>, sigmas: &[f64], theta: f64, p: usize) -> Matrix<f64> {
    let (n, t) = (u.rows(), u.cols());
    let mut e = Matrix::zeros(n, t);
    for i in 0..n {
        let row = e.row_mut(i);
        row.copy_from_slice(u.row(i));
        for j in 1..=p {
            let (back, fwd) = ((i + n - j) % n, (i + j) % n);
            for (tt, v) in row.iter_mut().enumerate() {
                *v += theta * (u[(back, tt)] + u[(fwd, tt)]);
            }
        }
        row.iter_mut().for_each(|v| *v *= sigmas[i]);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_values() {
        let c = DgpConfig::new(DgpKind::OneA, 80, 50);
        assert!((c.kappa() - 2f64.sqrt()).abs() < 1e-15);
        let c = DgpConfig::new(DgpKind::TwoA, 80, 50);
        assert!((c.kappa() - (24.0f64 / (13.0 * 1.08)).sqrt()).abs() < 1e-15);
        assert!((c.kappa() - 1.30744).abs() < 1e-5);
        let var = c.kappa().powi(2) * 13.0 / 12.0 * (1.0 + 2.0 * 4.0 * 0.01);
        assert!((var - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kind_parsing() {
        for k in DgpKind::ALL {
            assert_eq!(k.as_str().parse::<DgpKind>().unwrap(), k);
        }
        assert!("3-a".parse::<DgpKind>().is_err());
    }

    #[test]
    fn validation() {
        assert!(DgpConfig::new(DgpKind::OneB, 82, 50).validate().is_err());
        assert!(DgpConfig::new(DgpKind::OneA, 0, 50).validate().is_err());
        let mut c = DgpConfig::new(DgpKind::OneB, 80, 50);
        c.rho = 1.0;
        assert!(c.validate().is_err());
        c.rho = 0.3;
        c.theta = -1.0;
        assert!(c.validate().is_err());
        assert!(DgpConfig::new(DgpKind::TwoA, 8, 50).validate().is_err());
    }

    #[test]
    fn circular_ma_wraps() {
        // a single unit shock at variable 0 spreads to the P neighbours on
        // each side, wrapping around the end
        let mut u = Matrix::zeros(10, 1);
        u[(0, 0)] = 1.0;
        let e = moving_average_errors(&u, &[1.0; 10], 0.5, 2);
        let col: Vec<f64> = (0..10).map(|i| e[(i, 0)]).collect();
        assert_eq!(col, vec![1.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn shared_factor_and_determinism() {
        let c = DgpConfig::new(DgpKind::OneC, 40, 30).with_seed(4);
        let a = simulate(&c, &RngStream::new(4)).unwrap();
        let f = a.specific_factors.as_ref().unwrap();
        for tt in 0..30 {
            assert_eq!(f[(tt, 0)], f[(tt, 1)]);
            assert_eq!(f[(tt, 0)], f[(tt, 2)]);
            assert_ne!(f[(tt, 0)], f[(tt, 3)]);
        }
        let (p, g) = generate_dgp(&c).unwrap();
        assert_eq!(p.values(), a.panel.values());
        assert_eq!(g.sizes(), &[10, 10, 10, 10]);
    }
}

//! Tests for group-specific heterogeneity in approximate factor models.
//!
//! Loadings are estimated by principal components, compared across known
//! groups of variables through pairwise LM statistics, and the max (`LM1`)
//! and min (`LM2`) over pairs are judged against either a simulated limit
//! law or a permutation distribution.
//!
//! The estimation core is generic over the scalar type ([`Real`], i.e.
//! `f32` or `f64`); the aliases below fix the common choices. Simulation,
//! inference and reporting work in `f64`.
//!
//! ```
//! use grouphet::{estimate_pca, lm_aggregate, DataPanel64, GroupStructure, Matrix64};
//!
//! let x = Matrix64::from_fn(8, 30, |i, t| ((i * 7 + t * 3) % 11) as f64 + (i as f64) * 0.1 * t as f64);
//! let panel = DataPanel64::from_matrix(x).unwrap();
//! let groups = GroupStructure::from_sizes(&[4, 4]).unwrap();
//! let (loadings, _factors) = estimate_pca(&panel, 1, true).unwrap();
//! let stats = lm_aggregate(&loadings, &groups).unwrap();
//! assert!(stats.lm1 >= stats.lm2);
//! ```

pub mod dgp;
pub mod error;
pub mod experiment;
pub mod factors;
pub mod ingest;
pub mod linalg;
pub mod lm;
pub mod null_dist;
pub mod panel;
pub mod permutation;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod spectra;

pub use dgp::{generate_dgp, DgpConfig, DgpKind, DgpSample};
pub use error::{Error, Result};
pub use experiment::{run_experiment, CellResult, ExperimentConfig, ExperimentResult, InferenceMode, RejectionRate};
pub use factors::{
    estimate_pca, select_num_factors, FactorCountSelection, FactorMatrix, GramSide, LoadingMatrix,
    PrincipalComponents,
};
pub use ingest::{ingest_panel, IngestOptions};
pub use linalg::{Cholesky, Matrix};
pub use lm::{lm_aggregate, lm_pair, stat_a, stat_s, HeterogeneityStatistics, LmEvaluator, PairStatistic};
pub use null_dist::{
    asymptotic_pvalue, critical_value, simulate_null, NullDistribution, NullSample, NullSimulationConfig,
    Statistic,
};
pub use panel::{group_structure, unvech, vech, vech_len, DataPanel, GroupStructure, SymVec};
pub use permutation::{permutation_test, permute_loadings, PermutationResult};
pub use report::{run_test, TestOptions, TestReport};
pub use rng::RngStream;
pub use scalar::Real;
pub use spectra::{sym_eig, EigenDecomposition};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type DataPanel64 = DataPanel<f64>;
pub type DataPanel32 = DataPanel<f32>;
pub type LoadingMatrix64 = LoadingMatrix<f64>;
pub type LoadingMatrix32 = LoadingMatrix<f32>;
pub type FactorMatrix64 = FactorMatrix<f64>;
pub type FactorMatrix32 = FactorMatrix<f32>;
pub type SymVec64 = SymVec<f64>;
pub type SymVec32 = SymVec<f32>;
pub type EigenDecomposition64 = EigenDecomposition<f64>;
pub type EigenDecomposition32 = EigenDecomposition<f32>;
pub type HeterogeneityStatistics64 = HeterogeneityStatistics<f64>;
pub type HeterogeneityStatistics32 = HeterogeneityStatistics<f32>;

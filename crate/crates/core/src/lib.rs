//! Geographically weighted canonical correlation analysis.
//!
//! Local covariance blocks are formed with kernel weights around each
//! location and solved as ordinary CCA, giving a field of canonical
//! correlations and weights over space.

pub mod cca;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod moments;
pub mod pipeline;
pub mod scalar;
pub mod selection;
pub mod synth;

pub use cca::{
    align_signs_to_neighbors, canonical_scores, global_cca, jacobi_svd, local_cca, solve_cca,
    solve_cca_blocks, CcaSolution, LocalCcaResult, LocalFitter, Regularization,
};
pub use dataset::SpatialDataset;
pub use error::{ErrorKind, GwccaError, Result};
pub use eval::{compare_models, compare_rho, mae, rmse, EvalReport, VariateErrors};
pub use kernels::{
    adaptive_bandwidth, distances_from, kernel_weight, pairwise_distances, weight_vector, Bandwidth, Coord,
    KernelFamily, KernelSpec, WeightVector,
};
pub use moments::{gw_corr, gw_cov, gw_cov_matrices, gw_mean, gw_std, JointRows, LocalCovariances};
pub use pipeline::{Config, FitResult, SummaryTable};
pub use scalar::Real;
pub use selection::{
    candidate_grid, early_stop_rule, early_stop_scan, loading_threshold, rgof, rgof_curve, screen_variates,
    select_reportable, support_ratio, EarlyStopper, ScanOutcome, ScanRecord, SelectionConfig, StopReason,
};
pub use synth::{
    cross_cov, generate_dataset1, generate_dataset2, make_directions, sample_grf, sample_location,
    SynthParams1, SynthParams2, SyntheticTruth,
};

pub type Dataset = SpatialDataset<f64>;
pub type Solution = CcaSolution<f64>;
pub type LocalResult = LocalCcaResult<f64>;
pub type Spec = KernelSpec<f64>;

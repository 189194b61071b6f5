//! End-to-end runs: CSV in, preprocessing, fitting with bandwidth selection,
//! summaries and result files out.

pub mod config;
pub mod export;
pub mod fit;
pub mod io;
pub mod preprocess;
pub mod summary;

use std::path::Path;

use crate::error::{GwccaError, Result};
use crate::eval::{compare_rho, table_rows, EvalReport, TABLE_HEADER};

pub use config::{BandwidthChoice, Config};
pub use export::{export, prefixed};
pub use fit::{fit, scan, with_threads, FitResult};
pub use io::{load_csv, write_dataset_csv, write_truth_csv, Loaded};
pub use preprocess::{collinearity_filter, preprocess, zscore, PreprocessLog};
pub use summary::{summarize, summarize_results_file, SummaryTable};

/// Scores a fit's local correlations against a truth file. Locations are
/// matched by id; the fit file needs `rho_<j>` columns for every true field.
pub fn evaluate_files(fit: &Path, truth: &Path, baseline: &Path) -> Result<EvalReport<f64>> {
    let truth_table = io::read_id_table(truth, io::truth_column)?;
    let fit_table = io::read_id_table(fit, io::rho_column)?;
    let global = io::read_global(baseline)?;
    let m = truth_table.columns.len();
    if fit_table.columns.len() < m {
        return Err(GwccaError::Input(format!(
            "{} has {} correlation columns but the truth has {m} fields",
            fit.display(),
            fit_table.columns.len()
        )));
    }
    let local = fit_table.aligned_to(&truth_table.ids, fit)?;
    compare_rho(&local, &global, &truth_table.values, None)
}

/// Writes an evaluation as `dataset, variate, metric, gwcca, cca` rows.
pub fn write_eval(path: &Path, report: &EvalReport<f64>, dataset: &str) -> Result<()> {
    let header: Vec<String> = TABLE_HEADER.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = table_rows(report, dataset).into_iter().map(Vec::from).collect();
    io::write_table(path, &header, &rows)
}

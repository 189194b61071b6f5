//! Accuracy of recovered correlation fields against known truth.

use nalgebra::DMatrix;

use crate::cca::CcaSolution;
use crate::error::{GwccaError, Result};
use crate::scalar::Real;

fn check_pair<T: Real>(est: &[T], truth: &[T]) -> Result<()> {
    if est.len() != truth.len() {
        return Err(GwccaError::Input(format!(
            "{} estimates against {} true values",
            est.len(),
            truth.len()
        )));
    }
    if est.is_empty() {
        return Err(GwccaError::Input("no values to compare".into()));
    }
    if est.iter().chain(truth).any(|v| !v.finite()) {
        return Err(GwccaError::Input("non-finite value in error computation".into()));
    }
    Ok(())
}

pub fn mae<T: Real>(est: &[T], truth: &[T]) -> Result<T> {
    check_pair(est, truth)?;
    let s = est
        .iter()
        .zip(truth)
        .fold(T::zero(), |a, (&e, &t)| a + (e - t).abs());
    Ok(s / T::from_count(est.len()))
}

pub fn rmse<T: Real>(est: &[T], truth: &[T]) -> Result<T> {
    check_pair(est, truth)?;
    let s = est
        .iter()
        .zip(truth)
        .fold(T::zero(), |a, (&e, &t)| a + (e - t) * (e - t));
    Ok((s / T::from_count(est.len())).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariateErrors<T> {
    /// One-based variate number.
    pub variate: usize,
    pub mae_gwcca: T,
    pub rmse_gwcca: T,
    pub mae_cca: T,
    pub rmse_cca: T,
}

impl<T: Real> VariateErrors<T> {
    pub fn mae_ratio(&self) -> T {
        self.mae_gwcca / self.mae_cca
    }

    pub fn rmse_ratio(&self) -> T {
        self.rmse_gwcca / self.rmse_cca
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport<T> {
    pub variates: Vec<VariateErrors<T>>,
    pub chosen_k: Option<usize>,
    pub n: usize,
}

fn sorted_desc<T: Real>(row: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = row.collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Errors of local estimates and of the constant global correlations against
/// the true fields. Rows are locations; both estimates and truth are sorted
/// descending within each location before pairing.
pub fn compare_models<T: Real>(
    local_rho: &DMatrix<T>,
    baseline: &CcaSolution<T>,
    truth: &DMatrix<T>,
    chosen_k: Option<usize>,
) -> Result<EvalReport<T>> {
    compare_rho(local_rho, baseline.rho.as_slice(), truth, chosen_k)
}

/// As [`compare_models`], with the global correlations given directly.
pub fn compare_rho<T: Real>(
    local_rho: &DMatrix<T>,
    baseline: &[T],
    truth: &DMatrix<T>,
    chosen_k: Option<usize>,
) -> Result<EvalReport<T>> {
    let n = local_rho.nrows();
    if truth.nrows() != n {
        return Err(GwccaError::Input(format!(
            "{n} fitted locations against {} true locations",
            truth.nrows()
        )));
    }
    let m = truth.ncols();
    if m < 1 || local_rho.ncols() < m || baseline.len() < m {
        return Err(GwccaError::Input(format!(
            "{m} true fields cannot be matched with {} local and {} global variates",
            local_rho.ncols(),
            baseline.len()
        )));
    }
    let est: Vec<Vec<T>> = local_rho
        .row_iter()
        .map(|r| sorted_desc(r.iter().copied()))
        .collect();
    let tru: Vec<Vec<T>> = truth.row_iter().map(|r| sorted_desc(r.iter().copied())).collect();
    let mut variates = Vec::with_capacity(m);
    for j in 0..m {
        let e: Vec<T> = est.iter().map(|r| r[j]).collect();
        let t: Vec<T> = tru.iter().map(|r| r[j]).collect();
        let g = vec![baseline[j]; n];
        variates.push(VariateErrors {
            variate: j + 1,
            mae_gwcca: mae(&e, &t)?,
            rmse_gwcca: rmse(&e, &t)?,
            mae_cca: mae(&g, &t)?,
            rmse_cca: rmse(&g, &t)?,
        });
    }
    Ok(EvalReport {
        variates,
        chosen_k,
        n,
    })
}

/// Rows of `dataset,variate,metric,gwcca,cca`.
pub fn table_rows<T: Real>(report: &EvalReport<T>, dataset: &str) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    for v in &report.variates {
        for (metric, g, c) in [
            ("MAE", v.mae_gwcca, v.mae_cca),
            ("RMSE", v.rmse_gwcca, v.rmse_cca),
        ] {
            rows.push([
                dataset.to_string(),
                v.variate.to_string(),
                metric.to_string(),
                format!("{:.16e}", g),
                format!("{:.16e}", c),
            ]);
        }
    }
    rows
}

pub const TABLE_HEADER: [&str; 5] = ["dataset", "variate", "metric", "gwcca", "cca"];

/// Errors of one bandwidth choice, used to compare selection schemes.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeErrors<T> {
    pub scheme: String,
    pub k: usize,
    pub mae: Vec<T>,
    pub rmse: Vec<T>,
}

/// MAE and RMSE per variate of local fits at a given bandwidth.
pub fn scheme_errors<T: Real>(
    scheme: &str,
    k: usize,
    local_rho: &DMatrix<T>,
    truth: &DMatrix<T>,
) -> Result<SchemeErrors<T>> {
    if local_rho.nrows() != truth.nrows() || local_rho.ncols() < truth.ncols() {
        return Err(GwccaError::Input("fit and truth do not conform".into()));
    }
    let est: Vec<Vec<T>> = local_rho
        .row_iter()
        .map(|r| sorted_desc(r.iter().copied()))
        .collect();
    let tru: Vec<Vec<T>> = truth.row_iter().map(|r| sorted_desc(r.iter().copied())).collect();
    let mut out = SchemeErrors {
        scheme: scheme.to_string(),
        k,
        mae: Vec::new(),
        rmse: Vec::new(),
    };
    for j in 0..truth.ncols() {
        let e: Vec<T> = est.iter().map(|r| r[j]).collect();
        let t: Vec<T> = tru.iter().map(|r| r[j]).collect();
        out.mae.push(mae(&e, &t)?);
        out.rmse.push(rmse(&e, &t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::Regularization;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn global(rho: &[f64]) -> CcaSolution<f64> {
        CcaSolution {
            rho: DVector::from_column_slice(rho),
            a_weights: DMatrix::identity(rho.len(), rho.len()),
            b_weights: DMatrix::identity(rho.len(), rho.len()),
            regularization: Regularization {
                ridge_x: 0.0,
                ridge_y: 0.0,
                escalated: false,
            },
            psi: rho.len(),
        }
    }

    #[test]
    fn metric_examples() {
        let t = [0.4, 0.4];
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        assert_abs_diff_eq!(mae(&[0.5, 0.5], &t).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rmse(&[0.5, 0.5], &t).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(mae(&[0.2, 0.8], &t).unwrap(), 0.3, epsilon = 1e-15);
        let z = [0.0, 0.0];
        assert_abs_diff_eq!(rmse(&[0.0, 0.4], &z).unwrap(), 0.08f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(mae(&[0.0, 0.4], &z).unwrap(), 0.2, epsilon = 1e-15);
        assert!(mae(&[0.1], &t).is_err());
    }

    #[test]
    fn perfect_recovery_and_stationary_truth() {
        let truth = DMatrix::from_row_slice(3, 2, &[0.9, 0.3, 0.7, 0.5, 0.6, 0.4]);
        let r = compare_models(&truth, &global(&[0.7, 0.4]), &truth, Some(5)).unwrap();
        assert!(r
            .variates
            .iter()
            .all(|v| v.mae_gwcca == 0.0 && v.rmse_gwcca == 0.0));
        let flat = DMatrix::from_row_slice(2, 2, &[0.7, 0.4, 0.7, 0.4]);
        let r = compare_models(&flat, &global(&[0.7, 0.4]), &flat, None).unwrap();
        assert!(r.variates.iter().all(|v| v.mae_cca == 0.0));
    }

    #[test]
    fn crossing_fields_are_matched_by_rank() {
        let truth = DMatrix::from_row_slice(2, 2, &[0.3, 0.6, 0.8, 0.2]);
        let est = DMatrix::from_row_slice(2, 3, &[0.6, 0.3, 0.1, 0.8, 0.2, 0.0]);
        let r = compare_models(&est, &global(&[0.7, 0.4, 0.1]), &truth, None).unwrap();
        assert_eq!(r.variates[0].mae_gwcca, 0.0);
        assert_eq!(r.variates[1].mae_gwcca, 0.0);
        assert_eq!(r.variates.len(), 2);
    }

    #[test]
    fn shape_errors() {
        let t = DMatrix::from_element(3, 2, 0.5);
        assert!(compare_models(&DMatrix::from_element(2, 2, 0.5), &global(&[0.5, 0.5]), &t, None).is_err());
        assert!(compare_models(&DMatrix::from_element(3, 1, 0.5), &global(&[0.5]), &t, None).is_err());
    }

    #[test]
    fn table_layout() {
        let t = DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 0.7, 0.5]);
        let r = compare_models(&t, &global(&[0.8, 0.4]), &t, None).unwrap();
        let rows = table_rows(&r, "I");
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0][..3], ["I".to_string(), "1".into(), "MAE".into()]);
        assert_eq!(rows[3][2], "RMSE");
        assert_eq!(rows[0][3], "0.0000000000000000e0");
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..50)) {
            let (e, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(rmse(&e, &t).unwrap() + 1e-15 >= mae(&e, &t).unwrap());
        }

        #[test]
        fn comparison_is_permutation_invariant(vals in proptest::collection::vec(0.0f64..1.0, 24), shift in 1usize..6) {
            let est = DMatrix::from_row_slice(6, 2, &vals[..12]);
            let tru = DMatrix::from_row_slice(6, 2, &vals[12..]);
            let g = global(&[0.6, 0.3]);
            let a = compare_models(&est, &g, &tru, None).unwrap();
            let roll = |m: &DMatrix<f64>| DMatrix::from_fn(6, 2, |i, j| m[((i + shift) % 6, j)]);
            let b = compare_models(&roll(&est), &g, &roll(&tru), None).unwrap();
            for (x, y) in a.variates.iter().zip(&b.variates) {
                prop_assert!((x.mae_gwcca - y.mae_gwcca).abs() < 1e-14);
                prop_assert!((x.rmse_cca - y.rmse_cca).abs() < 1e-14);
            }
        }
    }
}

//! Quantile tables of local correlations and loadings.

use std::path::Path;

use crate::error::{GwccaError, Result};
use crate::pipeline::fit::FitResult;
use crate::pipeline::io::read_id_table;
use crate::scalar::Real;
use crate::selection::quantile;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(Quantiles {
            min: quantile(values, 0.0)?,
            q25: quantile(values, 0.25)?,
            median: quantile(values, 0.5)?,
            q75: quantile(values, 0.75)?,
            max: quantile(values, 1.0)?,
        })
    }

    fn cells(&self) -> [f64; 5] {
        [self.min, self.q25, self.median, self.q75, self.max]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoSummary {
    /// One-based.
    pub variate: usize,
    pub quantiles: Quantiles,
    pub mean: f64,
    pub global: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadingSummary {
    pub variate: usize,
    /// `"a"` for the X set, `"b"` for the Y set.
    pub set: &'static str,
    pub variable: String,
    pub quantiles: Quantiles,
    pub abs_mean: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SummaryTable {
    pub rho: Vec<RhoSummary>,
    pub loadings: Vec<LoadingSummary>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn rho_summary(variate: usize, values: &[f64], global: Option<f64>) -> Result<RhoSummary> {
    Ok(RhoSummary {
        variate,
        quantiles: Quantiles::of(values)?,
        mean: mean(values),
        global,
    })
}

pub fn loading_summary(
    variate: usize,
    set: &'static str,
    variable: &str,
    values: &[f64],
) -> Result<LoadingSummary> {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    Ok(LoadingSummary {
        variate,
        set,
        variable: variable.to_string(),
        quantiles: Quantiles::of(values)?,
        abs_mean: mean(&abs),
    })
}

/// Correlation quantiles for every variate and loading quantiles for the reported ones.
pub fn summarize<T: Real>(fit: &FitResult<T>) -> Result<SummaryTable> {
    let rhos = fit.local_rho();
    let mut table = SummaryTable::default();
    for c in 0..rhos.ncols() {
        let v: Vec<f64> = rhos.column(c).iter().map(|r| r.as_f64()).collect();
        table
            .rho
            .push(rho_summary(c + 1, &v, Some(fit.global.rho[c].as_f64()))?);
    }
    for &c in &fit.screening.reported {
        for (j, name) in fit.dataset.x_names.iter().enumerate() {
            let v: Vec<f64> = fit
                .results
                .iter()
                .map(|r| r.solution.a_weights[(j, c)].as_f64())
                .collect();
            table.loadings.push(loading_summary(c + 1, "a", name, &v)?);
        }
        for (j, name) in fit.dataset.y_names.iter().enumerate() {
            let v: Vec<f64> = fit
                .results
                .iter()
                .map(|r| r.solution.b_weights[(j, c)].as_f64())
                .collect();
            table.loadings.push(loading_summary(c + 1, "b", name, &v)?);
        }
    }
    Ok(table)
}

enum Column {
    Rho(usize),
    Loading(usize, &'static str, String),
}

fn classify(name: &str) -> Option<Column> {
    if let Some(v) = name.strip_prefix("rho_") {
        return v.parse().ok().map(Column::Rho);
    }
    let (set, rest) = match name.split_at_checked(2)? {
        ("a_", r) => ("a", r),
        ("b_", r) => ("b", r),
        _ => return None,
    };
    let (v, var) = rest.split_once('_')?;
    Some(Column::Loading(v.parse().ok()?, set, var.to_string()))
}

/// Summary tables from a per-location results file written by the exporter.
pub fn summarize_results_file(path: &Path) -> Result<SummaryTable> {
    let table = read_id_table(path, |h| classify(h).map(|_| 0))?;
    let mut out = SummaryTable::default();
    let mut loadings = Vec::new();
    for (j, name) in table.columns.iter().enumerate() {
        let v: Vec<f64> = table.values.column(j).iter().copied().collect();
        match classify(name) {
            Some(Column::Rho(c)) => out.rho.push(rho_summary(c, &v, None)?),
            Some(Column::Loading(c, set, var)) => loadings.push(loading_summary(c, set, &var, &v)?),
            None => {}
        }
    }
    if out.rho.is_empty() {
        return Err(GwccaError::Input(format!(
            "{}: no rho_<j> columns",
            path.display()
        )));
    }
    out.rho.sort_by_key(|r| r.variate);
    // stable: keeps file order of variables within a variate and set
    loadings.sort_by_key(|l| (l.variate, l.set));
    out.loadings = loadings;
    Ok(out)
}

pub const RHO_HEADER: [&str; 9] = [
    "variate", "min", "q25", "median", "q75", "max", "mean", "global", "n",
];
pub const LOADING_HEADER: [&str; 9] = [
    "variate", "set", "variable", "min", "q25", "median", "q75", "max", "abs_mean",
];

impl SummaryTable {
    /// Rows matching `RHO_HEADER`; `n` is the number of locations summarised.
    pub fn rho_rows(&self, n: usize, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        self.rho
            .iter()
            .map(|r| {
                let mut row = vec![r.variate.to_string()];
                row.extend(r.quantiles.cells().iter().map(|&v| fmt(v)));
                row.push(fmt(r.mean));
                row.push(r.global.map(&fmt).unwrap_or_default());
                row.push(n.to_string());
                row
            })
            .collect()
    }

    pub fn loading_rows(&self, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        self.loadings
            .iter()
            .map(|l| {
                let mut row = vec![l.variate.to_string(), l.set.to_string(), l.variable.clone()];
                row.extend(l.quantiles.cells().iter().map(|&v| fmt(v)));
                row.push(fmt(l.abs_mean));
                row
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_field() {
        let l = loading_summary(1, "a", "v", &[-0.3; 7]).unwrap();
        assert_eq!(l.quantiles.cells(), [-0.3; 5]);
        assert_eq!(l.abs_mean, 0.3);
    }

    #[test]
    fn abs_mean_differs_from_mean() {
        let l = loading_summary(1, "b", "v", &[-1.0, 1.0]).unwrap();
        assert_eq!(l.abs_mean, 1.0);
        let r = rho_summary(1, &[-1.0, 1.0], None).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.quantiles.median, 0.0);
    }

    #[test]
    fn column_names() {
        assert!(matches!(classify("rho_3"), Some(Column::Rho(3))));
        match classify("a_2_pct_poverty") {
            Some(Column::Loading(2, "a", v)) => assert_eq!(v, "pct_poverty"),
            _ => panic!(),
        }
        assert!(classify("bandwidth").is_none());
        assert!(classify("b_x_y").is_none());
    }

    proptest! {
        #[test]
        fn quantiles_are_ordered(v in proptest::collection::vec(-5.0f64..5.0, 1..60)) {
            let l = loading_summary(1, "a", "v", &v).unwrap();
            let c = l.quantiles.cells();
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(l.abs_mean >= 0.0);
        }
    }
}

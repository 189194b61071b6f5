//! Result files written under an output prefix.

use std::path::PathBuf;

use serde::Serialize;

use crate::error::{GwccaError, Result};
use crate::kernels::Bandwidth;
use crate::pipeline::config::Config;
use crate::pipeline::fit::FitResult;
use crate::pipeline::io::{fmt_num, write_table};
use crate::pipeline::preprocess::PreprocessLog;
use crate::pipeline::summary::{SummaryTable, LOADING_HEADER, RHO_HEADER};
use crate::scalar::Real;
use crate::selection::ScanOutcome;

/// `PREFIX_<suffix>` as a path.
pub fn prefixed(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn strings<const N: usize>(h: [&str; N]) -> Vec<String> {
    h.iter().map(|s| s.to_string()).collect()
}

fn location_cells<T: Real>(fit: &FitResult<T>, i: usize) -> Vec<String> {
    let c = fit.dataset.coords[i];
    vec![
        fit.dataset.ids[i].clone(),
        fmt_num(c[0].as_f64()),
        fmt_num(c[1].as_f64()),
    ]
}

/// Per-location table: id, x, y, bandwidth, then `rho_v`, `a_v_<var>` and
/// `b_v_<var>` for each reported variate `v`.
pub fn local_table<T: Real>(fit: &FitResult<T>) -> (Vec<String>, Vec<Vec<String>>) {
    let rep = &fit.screening.reported;
    let ds = &fit.dataset;
    let mut header = strings(["id", "x", "y", "bandwidth"]);
    header.extend(rep.iter().map(|c| format!("rho_{}", c + 1)));
    for &c in rep {
        header.extend(ds.x_names.iter().map(|n| format!("a_{}_{n}", c + 1)));
    }
    for &c in rep {
        header.extend(ds.y_names.iter().map(|n| format!("b_{}_{n}", c + 1)));
    }
    let rows = fit
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = &r.solution;
            let mut row = location_cells(fit, i);
            row.push(fmt_num(r.bandwidth_used.as_f64()));
            row.extend(rep.iter().map(|&c| fmt_num(s.rho[c].as_f64())));
            for &c in rep {
                row.extend(s.a_weights.column(c).iter().map(|v| fmt_num(v.as_f64())));
            }
            for &c in rep {
                row.extend(s.b_weights.column(c).iter().map(|v| fmt_num(v.as_f64())));
            }
            row
        })
        .collect();
    (header, rows)
}

/// Every local correlation, reported or not: id, x, y, rho_1..rho_psi.
pub fn rho_table<T: Real>(fit: &FitResult<T>) -> (Vec<String>, Vec<Vec<String>>) {
    let psi = fit.global.psi;
    let mut header = strings(["id", "x", "y"]);
    header.extend((1..=psi).map(|c| format!("rho_{c}")));
    let rows = fit
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = location_cells(fit, i);
            row.extend(r.solution.rho.iter().map(|v| fmt_num(v.as_f64())));
            row
        })
        .collect();
    (header, rows)
}

/// Long format: one row per location, reported variate and quantity.
pub fn long_table<T: Real>(fit: &FitResult<T>) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(["id", "x", "y", "quantity", "variate", "value"]);
    let ds = &fit.dataset;
    let mut rows = Vec::new();
    for (i, r) in fit.results.iter().enumerate() {
        let s = &r.solution;
        let loc = location_cells(fit, i);
        for &c in &fit.screening.reported {
            let mut push = |quantity: String, v: T| {
                let mut row = loc.clone();
                row.extend([quantity, (c + 1).to_string(), fmt_num(v.as_f64())]);
                rows.push(row);
            };
            push("rho".into(), s.rho[c]);
            for (j, n) in ds.x_names.iter().enumerate() {
                push(format!("a_{n}"), s.a_weights[(j, c)]);
            }
            for (j, n) in ds.y_names.iter().enumerate() {
                push(format!("b_{n}"), s.b_weights[(j, c)]);
            }
        }
    }
    (header, rows)
}

pub fn global_table<T: Real>(fit: &FitResult<T>) -> (Vec<String>, Vec<Vec<String>>) {
    let rows = fit
        .global
        .rho
        .iter()
        .enumerate()
        .map(|(c, r)| vec![(c + 1).to_string(), fmt_num(r.as_f64())])
        .collect();
    (strings(["variate", "rho"]), rows)
}

/// Scan diagnostics: one row per candidate, skipped ones included.
pub fn scan_table<T: Real>(scan: &ScanOutcome<T>, psi: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(["k", "status", "criterion"]);
    header.extend((1..=psi).map(|c| format!("rgof_{c}")));
    header.push("retained".into());
    header.extend((1..=psi).map(|c| format!("mean_rho_{c}")));
    header.push("chosen".into());
    let width = header.len();
    let mut rows: Vec<(usize, Vec<String>)> = scan
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.candidate_k.to_string(),
                "fitted".into(),
                fmt_num(r.criterion.as_f64()),
            ];
            row.extend(r.rgof_by_c.iter().map(|v| fmt_num(v.as_f64())));
            let retained: Vec<String> = r
                .retained_after_screening
                .iter()
                .map(|c| (c + 1).to_string())
                .collect();
            row.push(retained.join(";"));
            row.extend(r.mean_rho_by_variate.iter().map(|v| fmt_num(v.as_f64())));
            row.push((r.candidate_k == scan.chosen_k).to_string());
            (r.candidate_k, row)
        })
        .collect();
    for (k, _) in &scan.skipped {
        let mut row = vec![k.to_string(), "skipped".into()];
        row.resize(width - 1, String::new());
        row.push("false".into());
        rows.push((*k, row));
    }
    rows.sort_by_key(|r| r.0);
    (header, rows.into_iter().map(|r| r.1).collect())
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    kernel: String,
    bandwidth: String,
    chosen_k: Option<usize>,
    stop_reason: Option<String>,
    n: usize,
    p: usize,
    q: usize,
    retained: Vec<usize>,
    reported: Vec<usize>,
    ridge_escalations: usize,
    preprocess: &'a PreprocessLog,
    config: Config,
}

/// Run manifest. Worker count and output location are left out so that the
/// file depends only on the inputs.
pub fn manifest_text<T: Real>(fit: &FitResult<T>, config: &Config) -> String {
    let mut config = config.clone();
    config.run.threads = 0;
    config.run.out = None;
    let bandwidth = match fit.spec.bandwidth {
        Bandwidth::Adaptive(k) => format!("adaptive k={k}"),
        Bandwidth::Fixed(r) => format!("fixed r={}", fmt_num(r.as_f64())),
    };
    let m = Manifest {
        tool: "gwcca",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.run.seed,
        kernel: fit.spec.family.to_string(),
        bandwidth,
        chosen_k: fit.chosen_k,
        stop_reason: fit.scan.as_ref().map(|s| s.stop_reason.to_string()),
        n: fit.dataset.n(),
        p: fit.dataset.p(),
        q: fit.dataset.q(),
        retained: fit.screening.retained.iter().map(|c| c + 1).collect(),
        reported: fit.reported(),
        ridge_escalations: fit
            .results
            .iter()
            .filter(|r| r.solution.regularization.escalated)
            .count(),
        preprocess: &fit.preprocess,
        config,
    };
    toml::to_string(&m).expect("manifest serialises")
}

pub fn write_summary(prefix: &str, summary: &SummaryTable, n: usize) -> Result<Vec<PathBuf>> {
    let rho = prefixed(prefix, "summary_rho.csv");
    write_table(&rho, &strings(RHO_HEADER), &summary.rho_rows(n, fmt_num))?;
    let load = prefixed(prefix, "summary_loadings.csv");
    write_table(&load, &strings(LOADING_HEADER), &summary.loading_rows(fmt_num))?;
    Ok(vec![rho, load])
}

pub fn write_scan(prefix: &str, scan: &ScanOutcome<impl Real>, psi: usize) -> Result<PathBuf> {
    let path = prefixed(prefix, "scan.csv");
    let (h, r) = scan_table(scan, psi);
    write_table(&path, &h, &r)?;
    Ok(path)
}

/// Writes every result file of a fit and returns their paths.
pub fn export<T: Real>(
    fit: &FitResult<T>,
    summary: &SummaryTable,
    config: &Config,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (suffix, (h, r)) in [
        ("local.csv", local_table(fit)),
        ("rho.csv", rho_table(fit)),
        ("long.csv", long_table(fit)),
        ("global.csv", global_table(fit)),
    ] {
        let path = prefixed(prefix, suffix);
        write_table(&path, &h, &r)?;
        written.push(path);
    }
    written.extend(write_summary(prefix, summary, fit.dataset.n())?);
    if let Some(scan) = &fit.scan {
        written.push(write_scan(prefix, scan, fit.global.psi)?);
    }
    let path = prefixed(prefix, "manifest.toml");
    std::fs::write(&path, manifest_text(fit, config)).map_err(|e| GwccaError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

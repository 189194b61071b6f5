//! Bandwidth selection and variate screening.
//!
//! RGOF(c) is the share of squared local correlation left outside the first
//! `c` variates. The bandwidth scan walks an ascending list of neighbour
//! counts and stops once RGOF at the screened dimension stops improving.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cca::{LocalCcaResult, LocalFitter};
use crate::dataset::SpatialDataset;
use crate::error::{ErrorKind, GwccaError, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Quantile level for the loading threshold.
    pub phi: f64,
    /// Fraction of a location's coefficients that must exceed the threshold.
    pub alpha: f64,
    /// Fraction of mean support a variate needs to survive screening.
    pub beta: f64,
    /// Minimum mean local correlation for a variate to be reported.
    pub report_threshold: f64,
    pub patience: usize,
    /// Relative RGOF improvement below which a scan step counts as stale.
    pub improvement_tol: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            phi: 0.95,
            alpha: 0.5,
            beta: 0.8,
            report_threshold: 0.40,
            patience: 2,
            improvement_tol: 0.01,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("phi", self.phi), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(GwccaError::Parameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.report_threshold) {
            return Err(GwccaError::Parameter(format!(
                "report_threshold must lie in [0, 1], got {}",
                self.report_threshold
            )));
        }
        if self.patience < 1 {
            return Err(GwccaError::Parameter("patience must be at least 1".into()));
        }
        if !(self.improvement_tol >= 0.0) {
            return Err(GwccaError::Parameter(format!(
                "improvement_tol must be >= 0, got {}",
                self.improvement_tol
            )));
        }
        Ok(())
    }
}

fn row_prefix_sums<T: Real>(local_rhos: &DMatrix<T>) -> Vec<Vec<T>> {
    local_rhos
        .row_iter()
        .map(|row| {
            let mut acc = T::zero();
            row.iter()
                .map(|&r| {
                    acc += r * r;
                    acc
                })
                .collect()
        })
        .collect()
}

fn rgof_from_prefix<T: Real>(prefix: &[Vec<T>], c: usize, psi: usize) -> Result<T> {
    let mut num = T::zero();
    let mut den = T::zero();
    for row in prefix {
        num += row[c - 1];
        den += row[psi - 1];
    }
    if !(den > T::zero()) {
        return Err(GwccaError::DegenerateFit(
            "every local canonical correlation is zero".into(),
        ));
    }
    Ok((T::one() - num / den).clamp(T::zero(), T::one()))
}

/// RGOF of the first `c` variates for an n x psi matrix of local correlations.
pub fn rgof<T: Real>(local_rhos: &DMatrix<T>, c: usize) -> Result<T> {
    let psi = local_rhos.ncols();
    if c < 1 || c > psi {
        return Err(GwccaError::Parameter(format!("c must lie in 1..={psi}, got {c}")));
    }
    rgof_from_prefix(&row_prefix_sums(local_rhos), c, psi)
}

/// RGOF for every c in 1..=psi.
pub fn rgof_curve<T: Real>(local_rhos: &DMatrix<T>) -> Result<Vec<T>> {
    let psi = local_rhos.ncols();
    if psi == 0 {
        return Err(GwccaError::Input("no canonical variates".into()));
    }
    let prefix = row_prefix_sums(local_rhos);
    (1..=psi).map(|c| rgof_from_prefix(&prefix, c, psi)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    /// `patience` consecutive steps improved by less than the tolerance.
    Stalled,
    /// The candidate list ran out first.
    Exhausted,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Stalled => "stalled",
            StopReason::Exhausted => "exhausted",
        })
    }
}

/// Relative improvement from `prev` to `cur`; a zero `prev` cannot improve.
pub fn relative_improvement<T: Real>(prev: T, cur: T) -> T {
    if prev > T::zero() {
        (prev - cur) / prev
    } else {
        T::zero()
    }
}

/// Incremental form of the stopping rule, fed one RGOF value at a time.
#[derive(Clone, Debug)]
pub struct EarlyStopper<T> {
    patience: usize,
    tol: T,
    values: Vec<T>,
    stale: usize,
    decision: Option<usize>,
}

impl<T: Real> EarlyStopper<T> {
    pub fn new(patience: usize, tol: T) -> Result<Self> {
        if patience < 1 {
            return Err(GwccaError::Parameter("patience must be at least 1".into()));
        }
        Ok(EarlyStopper {
            patience,
            tol,
            values: Vec::new(),
            stale: 0,
            decision: None,
        })
    }

    /// Records the next value. Returns the chosen position once the rule fires.
    pub fn push(&mut self, value: T) -> Option<usize> {
        if self.decision.is_some() {
            return self.decision;
        }
        if let Some(&prev) = self.values.last() {
            if relative_improvement(prev, value) < self.tol {
                self.stale += 1;
            } else {
                self.stale = 0;
            }
        }
        self.values.push(value);
        if self.stale >= self.patience {
            self.decision = Some(self.values.len() - 1 - self.patience);
        }
        self.decision
    }

    pub fn stopped(&self) -> bool {
        self.decision.is_some()
    }

    /// Final choice: the stop position, or the first minimiser when exhausted.
    pub fn finish(&self) -> Option<(usize, StopReason)> {
        if let Some(i) = self.decision {
            return Some((i, StopReason::Stalled));
        }
        argmin(&self.values).map(|i| (i, StopReason::Exhausted))
    }
}

fn argmin<T: Real>(values: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// The stopping rule applied to a complete RGOF trace.
pub fn early_stop_rule<T: Real>(trace: &[T], patience: usize, tol: T) -> Result<(usize, StopReason)> {
    let mut stopper = EarlyStopper::new(patience, tol)?;
    for &v in trace {
        if stopper.push(v).is_some() {
            break;
        }
    }
    stopper
        .finish()
        .ok_or_else(|| GwccaError::Configuration("empty RGOF trace".into()))
}

/// Position of the plain RGOF minimum over the whole trace, ignoring early stopping.
pub fn rgof_argmin<T: Real>(trace: &[T]) -> Option<usize> {
    argmin(trace)
}

/// Empirical `phi`-quantile with linear interpolation between order statistics.
pub fn quantile<T: Real>(values: &[T], phi: f64) -> Result<T> {
    if values.is_empty() {
        return Err(GwccaError::Input("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(GwccaError::Parameter(format!(
            "quantile level must lie in [0, 1], got {phi}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let h = (sorted.len() - 1) as f64 * phi;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Loading magnitude threshold: the `phi`-quantile of pooled absolute loadings.
pub fn loading_threshold<T: Real>(all_loadings: &[T], phi: f64) -> Result<T> {
    if all_loadings.is_empty() {
        return Err(GwccaError::Input("empty loading pool".into()));
    }
    let abs: Vec<T> = all_loadings.iter().map(|v| v.abs()).collect();
    quantile(&abs, phi)
}

/// Fraction of locations (rows) where at least `alpha` of the coefficients exceed `tau` in magnitude.
pub fn support_ratio<T: Real>(loadings: &DMatrix<T>, tau: T, alpha: f64) -> Result<T> {
    let (n, k) = loadings.shape();
    if n == 0 || k == 0 {
        return Err(GwccaError::Input(format!(
            "support of an empty {n}x{k} loading table"
        )));
    }
    let kf = T::from_count(k);
    let alpha = T::lit(alpha);
    let hits = loadings
        .row_iter()
        .filter(|row| T::from_count(row.iter().filter(|v| v.abs() > tau).count()) / kf >= alpha)
        .count();
    Ok(T::from_count(hits) / T::from_count(n))
}

/// Zero-based indices of variates with support at least `beta` times the mean; variate 0 always stays.
pub fn screen_variates<T: Real>(support: &[T], beta: f64) -> Vec<usize> {
    if support.is_empty() {
        return Vec::new();
    }
    let mean = support.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(support.len());
    let cut = T::lit(beta) * mean;
    (0..support.len())
        .filter(|&c| c == 0 || support[c] >= cut)
        .collect()
}

/// Zero-based indices whose mean local correlation reaches the threshold.
pub fn select_reportable<T: Real>(mean_rho: &[T], report_threshold: f64) -> Vec<usize> {
    let cut = T::lit(report_threshold);
    let chosen: Vec<usize> = (0..mean_rho.len()).filter(|&c| mean_rho[c] >= cut).collect();
    if chosen.is_empty() {
        log::warn!("no canonical variate reaches a mean local correlation of {report_threshold}");
    }
    chosen
}

/// n x psi matrix of local correlations.
pub fn local_rho_matrix<T: Real>(results: &[LocalCcaResult<T>]) -> DMatrix<T> {
    let psi = results.first().map_or(0, |r| r.solution.psi);
    DMatrix::from_fn(results.len(), psi, |i, j| results[i].solution.rho[j])
}

/// n x (p+q) table of the concatenated `(a_c, b_c)` at every location.
pub fn variate_loadings<T: Real>(results: &[LocalCcaResult<T>], c: usize) -> DMatrix<T> {
    let (p, q) = results.first().map_or((0, 0), |r| {
        (r.solution.a_weights.nrows(), r.solution.b_weights.nrows())
    });
    DMatrix::from_fn(results.len(), p + q, |i, m| {
        let s = &results[i].solution;
        if m < p {
            s.a_weights[(m, c)]
        } else {
            s.b_weights[(m - p, c)]
        }
    })
}

/// Outcome of the two-step variate screening for one bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct Screening<T> {
    pub tau: T,
    pub support: Vec<T>,
    /// Zero-based variates kept by the relative-support filter.
    pub retained: Vec<usize>,
    pub mean_rho: Vec<T>,
    /// Zero-based retained variates whose mean correlation passes the report threshold.
    pub reported: Vec<usize>,
}

impl<T: Real> Screening<T> {
    /// Dimension at which RGOF is evaluated: the leading run of variates that
    /// survive filtering with nonzero support. Variate 1 always counts.
    pub fn dimension(&self) -> usize {
        let mut c = 1;
        while c < self.support.len() && self.retained.contains(&c) && self.support[c] > T::zero() {
            c += 1;
        }
        c
    }
}

pub fn screen_results<T: Real>(
    results: &[LocalCcaResult<T>],
    config: &SelectionConfig,
) -> Result<Screening<T>> {
    if results.is_empty() {
        return Err(GwccaError::Input("no local fits to screen".into()));
    }
    let psi = results[0].solution.psi;
    let mut pool = Vec::with_capacity(results.len() * psi * 8);
    for r in results {
        pool.extend(r.solution.a_weights.iter().copied());
        pool.extend(r.solution.b_weights.iter().copied());
    }
    let tau = loading_threshold(&pool, config.phi)?;
    let support = (0..psi)
        .map(|c| support_ratio(&variate_loadings(results, c), tau, config.alpha))
        .collect::<Result<Vec<_>>>()?;
    let retained = screen_variates(&support, config.beta);
    let rhos = local_rho_matrix(results);
    let nf = T::from_count(results.len());
    let mean_rho: Vec<T> = (0..psi)
        .map(|c| rhos.column(c).iter().fold(T::zero(), |a, &b| a + b) / nf)
        .collect();
    let passing = select_reportable(&mean_rho, config.report_threshold);
    let reported = passing.into_iter().filter(|c| retained.contains(c)).collect();
    Ok(Screening {
        tau,
        support,
        retained,
        mean_rho,
        reported,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord<T> {
    pub candidate_k: usize,
    pub rgof_by_c: Vec<T>,
    /// Zero-based variates retained after screening.
    pub retained_after_screening: Vec<usize>,
    pub mean_rho_by_variate: Vec<T>,
    /// RGOF at the screened dimension, the value the stopping rule sees.
    pub criterion: T,
}

#[derive(Clone, Debug)]
pub struct ScanOutcome<T: Real> {
    pub chosen_k: usize,
    pub stop_reason: StopReason,
    pub records: Vec<ScanRecord<T>>,
    /// Candidates skipped because some neighbourhood could not be fitted.
    pub skipped: Vec<(usize, String)>,
    /// Fits at the chosen candidate.
    pub fits: Vec<LocalCcaResult<T>>,
}

impl<T: Real> ScanOutcome<T> {
    pub fn criterion_trace(&self) -> Vec<T> {
        self.records.iter().map(|r| r.criterion).collect()
    }
}

/// Ascending neighbour counts from `max(p+q+2, 20)` to `n`, spaced geometrically.
pub fn candidate_grid(n: usize, p: usize, q: usize, count: usize) -> Result<Vec<usize>> {
    let lo = (p + q + 2).max(20);
    if n < lo {
        return Err(GwccaError::Configuration(format!(
            "{n} locations cannot support the smallest candidate neighbourhood of {lo}"
        )));
    }
    if count == 0 {
        return Err(GwccaError::Parameter("candidate count must be positive".into()));
    }
    if count == 1 || lo == n {
        return Ok(vec![n]);
    }
    let ratio = (n as f64 / lo as f64).powf(1.0 / (count - 1) as f64);
    let mut ks: Vec<usize> = (0..count)
        .map(|i| ((lo as f64) * ratio.powi(i as i32)).round() as usize)
        .map(|k| k.clamp(lo, n))
        .collect();
    ks[count - 1] = n;
    ks.dedup();
    Ok(ks)
}

fn fits_for<T: Real>(
    fitter: &LocalFitter<'_, T>,
    family: KernelFamily,
    k: usize,
) -> Result<Vec<LocalCcaResult<T>>> {
    fitter.fit_all(&KernelSpec::adaptive(family, k)?)
}

/// Scans adaptive bandwidths in order and applies the stopping rule to RGOF
/// at each candidate's screened dimension.
pub fn early_stop_scan<T: Real>(
    dataset: &SpatialDataset<T>,
    family: KernelFamily,
    candidate_ks: &[usize],
    config: &SelectionConfig,
    ridge: T,
) -> Result<ScanOutcome<T>> {
    config.validate()?;
    if candidate_ks.is_empty() {
        return Err(GwccaError::Configuration("empty bandwidth candidate list".into()));
    }
    if candidate_ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GwccaError::Configuration(
            "bandwidth candidates must be strictly ascending".into(),
        ));
    }
    let fitter = LocalFitter::new(dataset, ridge)?;
    let mut stopper = EarlyStopper::new(config.patience, T::lit(config.improvement_tol))?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut kept: Vec<Vec<LocalCcaResult<T>>> = Vec::new();

    for &k in candidate_ks {
        let fits = match fits_for(&fitter, family, k) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::Numerical => {
                log::info!("bandwidth k={k} skipped: {e}");
                skipped.push((k, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let rhos = local_rho_matrix(&fits);
        let curve = match rgof_curve(&rhos) {
            Ok(c) => c,
            Err(e) => {
                log::info!("bandwidth k={k} skipped: {e}");
                skipped.push((k, e.to_string()));
                continue;
            }
        };
        let screening = screen_results(&fits, config)?;
        let criterion = curve[screening.dimension() - 1];
        log::debug!(
            "k={k} rgof={criterion:.6} retained={:?} support={:?}",
            screening.retained,
            screening.support.iter().map(|s| s.as_f64()).collect::<Vec<_>>()
        );
        records.push(ScanRecord {
            candidate_k: k,
            rgof_by_c: curve,
            retained_after_screening: screening.retained,
            mean_rho_by_variate: screening.mean_rho,
            criterion,
        });
        stopper.push(criterion);
        kept.push(fits);
        if stopper.stopped() {
            break;
        }
    }

    let (chosen, stop_reason) = stopper.finish().ok_or_else(|| {
        GwccaError::Configuration(format!(
            "every bandwidth candidate was degenerate ({} tried)",
            candidate_ks.len()
        ))
    })?;
    let chosen_k = records[chosen].candidate_k;
    let fits = kept.swap_remove(chosen);
    Ok(ScanOutcome {
        chosen_k,
        stop_reason,
        records,
        skipped,
        fits,
    })
}

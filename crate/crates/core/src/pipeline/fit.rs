use crate::cca::{align_signs_to_neighbors, global_cca, CcaSolution, LocalCcaResult, LocalFitter};
use crate::dataset::SpatialDataset;
use crate::error::{GwccaError, Result};
use crate::kernels::KernelSpec;
use crate::pipeline::config::{BandwidthChoice, Config};
use crate::pipeline::preprocess::{preprocess, PreprocessLog};
use crate::scalar::Real;
use crate::selection::{
    candidate_grid, early_stop_scan, local_rho_matrix, screen_results, ScanOutcome, Screening,
    SelectionConfig,
};

#[derive(Clone, Debug)]
pub struct FitResult<T: Real> {
    /// The dataset after preprocessing, as fitted.
    pub dataset: SpatialDataset<T>,
    pub results: Vec<LocalCcaResult<T>>,
    pub global: CcaSolution<T>,
    pub spec: KernelSpec<T>,
    /// Neighbour count when the bandwidth is adaptive.
    pub chosen_k: Option<usize>,
    /// Scan diagnostics; the per-candidate fits are not kept.
    pub scan: Option<ScanOutcome<T>>,
    pub screening: Screening<T>,
    pub selection: SelectionConfig,
    pub preprocess: PreprocessLog,
}

impl<T: Real> FitResult<T> {
    /// One-based reported variates.
    pub fn reported(&self) -> Vec<usize> {
        self.screening.reported.iter().map(|c| c + 1).collect()
    }

    pub fn local_rho(&self) -> nalgebra::DMatrix<T> {
        local_rho_matrix(&self.results)
    }
}

fn candidates<T: Real>(dataset: &SpatialDataset<T>, choice: &BandwidthChoice) -> Result<Vec<usize>> {
    match choice {
        BandwidthChoice::Scan(ks) => {
            if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > dataset.n()) {
                return Err(GwccaError::Configuration(format!(
                    "candidate k = {k} outside 1..={}",
                    dataset.n()
                )));
            }
            Ok(ks.clone())
        }
        BandwidthChoice::ScanGrid(count) => candidate_grid(dataset.n(), dataset.p(), dataset.q(), *count),
        BandwidthChoice::FixedK(k) => Ok(vec![*k]),
        BandwidthChoice::FixedDistance(_) => Err(GwccaError::Configuration(
            "a bandwidth scan works over neighbour counts; drop the fixed distance".into(),
        )),
    }
}

/// Preprocesses and runs only the bandwidth scan.
pub fn scan<T: Real>(raw: &SpatialDataset<T>, config: &Config) -> Result<(ScanOutcome<T>, PreprocessLog)> {
    config.validate()?;
    let (dataset, log) = preprocess(raw, &config.preprocess)?;
    let ks = candidates(&dataset, &config.bandwidth_choice()?)?;
    let mut outcome = early_stop_scan(
        &dataset,
        config.kernel.family,
        &ks,
        &config.selection,
        T::lit(config.kernel.ridge),
    )?;
    outcome.fits.clear();
    Ok((outcome, log))
}

/// Preprocesses, chooses the bandwidth (scan unless one is fixed), fits every
/// location and screens the variates.
pub fn fit<T: Real>(raw: &SpatialDataset<T>, config: &Config) -> Result<FitResult<T>> {
    config.validate()?;
    let (dataset, log) = preprocess(raw, &config.preprocess)?;
    let ridge = T::lit(config.kernel.ridge);
    let family = config.kernel.family;
    let global = global_cca(&dataset.x, &dataset.y)?;
    let choice = config.bandwidth_choice()?;
    let as_config = |e: GwccaError| match e {
        GwccaError::Parameter(m) => GwccaError::Configuration(m),
        e => e,
    };

    let (spec, chosen_k, mut results, scan) = match choice {
        BandwidthChoice::FixedK(k) => {
            let spec = KernelSpec::adaptive(family, k).map_err(as_config)?;
            spec.validate(dataset.n()).map_err(as_config)?;
            let fits = LocalFitter::new(&dataset, ridge)?.fit_all(&spec)?;
            (spec, Some(k), fits, None)
        }
        BandwidthChoice::FixedDistance(r) => {
            let spec = KernelSpec::fixed(family, T::lit(r)).map_err(as_config)?;
            let fits = LocalFitter::new(&dataset, ridge)?.fit_all(&spec)?;
            (spec, None, fits, None)
        }
        ref c => {
            let ks = candidates(&dataset, c)?;
            let mut outcome = early_stop_scan(&dataset, family, &ks, &config.selection, ridge)?;
            log::info!(
                "bandwidth scan chose k = {} ({}) after {} candidates",
                outcome.chosen_k,
                outcome.stop_reason,
                outcome.records.len()
            );
            let fits = std::mem::take(&mut outcome.fits);
            let spec = KernelSpec::adaptive(family, outcome.chosen_k)?;
            (spec, Some(outcome.chosen_k), fits, Some(outcome))
        }
    };
    if config.kernel.align_signs {
        align_signs_to_neighbors(&mut results, &dataset.coords);
    }
    let screening = screen_results(&results, &config.selection)?;
    Ok(FitResult {
        dataset,
        results,
        global,
        spec,
        chosen_k,
        scan,
        screening,
        selection: config.selection.clone(),
        preprocess: log,
    })
}

/// Runs `f` on a worker pool of `threads` threads (0: machine parallelism).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| GwccaError::Configuration(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

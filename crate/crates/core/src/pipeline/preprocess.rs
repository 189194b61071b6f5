use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{GwccaError, Result};
use crate::pipeline::config::PreprocessConfig;
use crate::scalar::Real;

/// Per-column mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessLog {
    pub dropped_rows: usize,
    pub dropped_x: Vec<String>,
    pub dropped_y: Vec<String>,
    pub x_scaling: Option<Standardization>,
    pub y_scaling: Option<Standardization>,
}

fn column_moments<T: Real>(col: impl Iterator<Item = T> + Clone, n: usize) -> (T, T) {
    let nf = T::from_count(n);
    let mean = col.clone().fold(T::zero(), |a, b| a + b) / nf;
    let var = col.fold(T::zero(), |a, b| a + (b - mean) * (b - mean)) / nf;
    (mean, var.sqrt())
}

/// Centres each column and scales it to unit population standard deviation.
pub fn zscore<T: Real>(block: &DMatrix<T>, names: &[String]) -> Result<(DMatrix<T>, Standardization)> {
    let (n, m) = block.shape();
    if n == 0 {
        return Err(GwccaError::Input("cannot standardise an empty block".into()));
    }
    let mut out = block.clone();
    let mut means = Vec::with_capacity(m);
    let mut stds = Vec::with_capacity(m);
    for j in 0..m {
        let (mean, sd) = column_moments(block.column(j).iter().copied(), n);
        if !(sd > T::zero()) {
            return Err(GwccaError::DegenerateVariance {
                variable: names.get(j).cloned().unwrap_or_else(|| format!("column {j}")),
            });
        }
        for v in out.column_mut(j).iter_mut() {
            *v = (*v - mean) / sd;
        }
        means.push(mean.as_f64());
        stds.push(sd.as_f64());
    }
    Ok((
        out,
        Standardization {
            names: names.to_vec(),
            means,
            stds,
        },
    ))
}

/// Pearson correlation matrix; a constant column correlates 0 with everything else.
pub fn correlation_matrix<T: Real>(block: &DMatrix<T>) -> DMatrix<T> {
    let (n, m) = block.shape();
    let mut centred = block.clone();
    let mut sds = Vec::with_capacity(m);
    for j in 0..m {
        let (mean, sd) = column_moments(block.column(j).iter().copied(), n);
        for v in centred.column_mut(j).iter_mut() {
            *v -= mean;
        }
        sds.push(sd);
    }
    let nf = T::from_count(n.max(1));
    let cov = centred.tr_mul(&centred) / nf;
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            T::one()
        } else if sds[i] > T::zero() && sds[j] > T::zero() {
            (cov[(i, j)] / (sds[i] * sds[j])).clamp(-T::one(), T::one())
        } else {
            T::zero()
        }
    })
}

/// Greedy removal of collinear variables. While some pair exceeds `threshold`
/// in |r|, the worst pair loses whichever member has the larger mean |r| to the
/// other remaining variables (the later column on ties). Returns the kept
/// column indices and the dropped names in drop order.
pub fn collinearity_filter<T: Real>(
    block: &DMatrix<T>,
    names: &[String],
    threshold: f64,
) -> (Vec<usize>, Vec<String>) {
    let r = correlation_matrix(block);
    let thr = T::lit(threshold);
    let mut kept: Vec<usize> = (0..block.ncols()).collect();
    let mut dropped = Vec::new();
    loop {
        let mut worst: Option<(usize, usize, T)> = None;
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                let v = r[(i, j)].abs();
                if v > thr && worst.is_none_or(|w| v > w.2) {
                    worst = Some((i, j, v));
                }
            }
        }
        let Some((i, j, _)) = worst else { break };
        let mean_abs = |c: usize| {
            let others = kept.iter().filter(|&&o| o != c);
            let s = others.clone().fold(T::zero(), |acc, &o| acc + r[(c, o)].abs());
            s / T::from_count(others.count().max(1))
        };
        let victim = if mean_abs(i) > mean_abs(j) { i } else { j };
        kept.retain(|&c| c != victim);
        dropped.push(names[victim].clone());
    }
    (kept, dropped)
}

fn select_columns<T: Real>(block: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(block.nrows(), cols.len(), |i, j| block[(i, cols[j])])
}

/// Collinearity filtering within each set, then global z-scoring.
pub fn preprocess<T: Real>(
    dataset: &SpatialDataset<T>,
    config: &PreprocessConfig,
) -> Result<(SpatialDataset<T>, PreprocessLog)> {
    let mut log = PreprocessLog::default();
    let (mut x, mut y) = (dataset.x.clone(), dataset.y.clone());
    let (mut xn, mut yn) = (dataset.x_names.clone(), dataset.y_names.clone());
    if let Some(t) = config.collinearity_threshold {
        let (kx, dx) = collinearity_filter(&x, &xn, t);
        let (ky, dy) = collinearity_filter(&y, &yn, t);
        x = select_columns(&x, &kx);
        y = select_columns(&y, &ky);
        xn = kx.iter().map(|&c| xn[c].clone()).collect();
        yn = ky.iter().map(|&c| yn[c].clone()).collect();
        if !dx.is_empty() || !dy.is_empty() {
            log::info!("collinearity filter dropped {:?} from X and {:?} from Y", dx, dy);
        }
        log.dropped_x = dx;
        log.dropped_y = dy;
    }
    if config.standardize {
        let (zx, sx) = zscore(&x, &xn)?;
        let (zy, sy) = zscore(&y, &yn)?;
        x = zx;
        y = zy;
        log.x_scaling = Some(sx);
        log.y_scaling = Some(sy);
    }
    let out = SpatialDataset::new(dataset.ids.clone(), dataset.coords.clone(), x, y, xn, yn)?;
    Ok((out, log))
}

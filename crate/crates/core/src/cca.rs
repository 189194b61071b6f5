//! Canonical correlation from covariance blocks.
//!
//! Both blocks are whitened through a symmetric eigendecomposition and the
//! whitened cross-covariance is decomposed by SVD. Singular values are the
//! canonical correlations; the back-transformed singular vectors are the
//! canonical weights, scaled to unit variance and sign-fixed so that the
//! largest-magnitude entry of `(a_j, b_j)` is positive.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::SpatialDataset;
use crate::error::{GwccaError, Result};
use crate::kernels::{distances_from, weights_from_distances, Coord, KernelSpec};
use crate::moments::{JointRows, LocalCovariances};
use crate::scalar::Real;

/// Ridge levels tried, as multiples of `trace / dim`, when a block is
/// numerically rank deficient.
pub const RIDGE_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];
/// Relative smallest-eigenvalue level (of `trace / dim`) that triggers the ladder.
pub const RIDGE_TRIGGER: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest are floored when whitening.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization<T> {
    pub ridge_x: T,
    pub ridge_y: T,
    /// True when the automatic ladder had to raise a ridge.
    pub escalated: bool,
}

impl<T: Real> Regularization<T> {
    pub fn applied(&self) -> bool {
        self.ridge_x > T::zero() || self.ridge_y > T::zero()
    }

    pub fn magnitude(&self) -> T {
        self.ridge_x.max(self.ridge_y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcaSolution<T: Real> {
    /// Canonical correlations, descending, in [0, 1].
    pub rho: DVector<T>,
    /// p x psi, column j is a_j.
    pub a_weights: DMatrix<T>,
    /// q x psi, column j is b_j.
    pub b_weights: DMatrix<T>,
    pub regularization: Regularization<T>,
    pub psi: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalCcaResult<T: Real> {
    pub target_index: usize,
    pub bandwidth_used: T,
    pub solution: CcaSolution<T>,
}

struct Whitening<T: Real> {
    inv_sqrt: DMatrix<T>,
    regularized: DMatrix<T>,
    ridge: T,
    escalated: bool,
}

fn whiten<T: Real>(block: &DMatrix<T>, base_ridge: T, name: &str) -> Result<Whitening<T>> {
    let dim = block.nrows();
    let sym = (block + block.transpose()) * T::lit(0.5);
    let trace = sym.trace();
    if !(trace > T::zero()) || !trace.finite() {
        return Err(GwccaError::DegenerateVariance {
            variable: format!("{name} block (trace {trace})"),
        });
    }
    let scale = trace / T::from_count(dim);
    let eig = sym.clone().symmetric_eigen();
    let lmin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b));
    let trigger = T::lit(RIDGE_TRIGGER) * scale;

    let mut ridge = base_ridge;
    let mut escalated = false;
    if lmin + ridge < trigger {
        let step = RIDGE_LADDER
            .iter()
            .map(|&lvl| base_ridge + T::lit(lvl) * scale)
            .find(|&r| lmin + r >= trigger);
        match step {
            Some(r) => {
                ridge = r;
                escalated = true;
            }
            None => {
                return Err(GwccaError::Numerical(format!(
                    "{name} block is indefinite (smallest eigenvalue {lmin}, trace {trace})"
                )))
            }
        }
    }

    let shifted: Vec<T> = eig.eigenvalues.iter().map(|&l| l + ridge).collect();
    let lmax = shifted.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let floor = T::lit(EIGEN_FLOOR) * lmax;
    let inv = DVector::from_iterator(dim, shifted.iter().map(|&l| T::one() / l.max(floor).sqrt()));
    let v = &eig.eigenvectors;
    let inv_sqrt = v * DMatrix::from_diagonal(&inv) * v.transpose();
    let mut regularized = sym;
    for i in 0..dim {
        regularized[(i, i)] += ridge;
    }
    Ok(Whitening {
        inv_sqrt,
        regularized,
        ridge,
        escalated,
    })
}

fn quad_norm<T: Real>(v: &DVector<T>, m: &DMatrix<T>) -> T {
    (v.transpose() * m * v)[(0, 0)].max(T::zero()).sqrt()
}

/// Index of the largest |entry| over `a` then `b`; lowest index wins ties.
fn dominant_entry<T: Real>(a: &DVector<T>, b: &DVector<T>) -> T {
    let mut best = T::zero();
    let mut best_abs = -T::one();
    for &v in a.iter().chain(b.iter()) {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = v;
        }
    }
    best
}

/// Thin SVD of a small dense matrix by one-sided Jacobi rotations.
///
/// Returns `(sigma, u, v)` with `sigma` descending, `u` p x psi and `v`
/// q x psi. Left vectors of zero singular values are completed to an
/// orthonormal set. Used instead of the bidiagonal routine in nalgebra,
/// which loses accuracy on rank-deficient inputs.
pub fn jacobi_svd<T: Real>(k: &DMatrix<T>) -> (DVector<T>, DMatrix<T>, DMatrix<T>) {
    let transposed = k.nrows() < k.ncols();
    let mut a = if transposed { k.transpose() } else { k.clone() };
    let (m, n) = a.shape();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    for _ in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if alpha == T::zero() || beta == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = a.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let top = order.first().map_or(T::zero(), |&i| norms[i]);
    let tiny = top * eps * T::from_count(m.max(1));

    let mut sigma = DVector::zeros(n);
    let mut left = DMatrix::zeros(m, n);
    let mut right = DMatrix::zeros(n, n);
    let mut missing = Vec::new();
    for (col, &src) in order.iter().enumerate() {
        sigma[col] = norms[src];
        right.set_column(col, &v.column(src));
        if norms[src] > tiny {
            left.set_column(col, &(a.column(src) / norms[src]));
        } else {
            missing.push(col);
        }
    }
    // complete the left basis with the unit vector least covered by it
    let mut filled: Vec<usize> = (0..n).filter(|c| !missing.contains(c)).collect();
    for col in missing {
        let mut best = DVector::<T>::zeros(m);
        let mut best_norm = -T::one();
        for e in 0..m {
            let mut w = DVector::<T>::zeros(m);
            w[e] = T::one();
            for _ in 0..2 {
                for &f in &filled {
                    let proj = left.column(f).dot(&w);
                    w -= left.column(f) * proj;
                }
            }
            let nw = w.norm();
            if nw > best_norm {
                best = w / nw;
                best_norm = nw;
            }
        }
        left.set_column(col, &best);
        filled.push(col);
    }
    if transposed {
        (sigma, right, left)
    } else {
        (sigma, left, right)
    }
}

/// Canonical correlations and weights from raw blocks.
pub fn solve_cca_blocks<T: Real>(
    sigma_xx: &DMatrix<T>,
    sigma_yy: &DMatrix<T>,
    sigma_xy: &DMatrix<T>,
    ridge: T,
) -> Result<CcaSolution<T>> {
    let (p, q) = (sigma_xx.nrows(), sigma_yy.nrows());
    if !sigma_xx.is_square()
        || !sigma_yy.is_square()
        || sigma_xy.nrows() != p
        || sigma_xy.ncols() != q
        || p == 0
        || q == 0
    {
        return Err(GwccaError::Input(format!(
            "covariance blocks have inconsistent shapes: {:?}, {:?}, {:?}",
            sigma_xx.shape(),
            sigma_yy.shape(),
            sigma_xy.shape()
        )));
    }
    if !(ridge >= T::zero()) {
        return Err(GwccaError::Parameter(format!("ridge must be >= 0, got {ridge}")));
    }
    if sigma_xx
        .iter()
        .chain(sigma_yy.iter())
        .chain(sigma_xy.iter())
        .any(|v| !v.finite())
    {
        return Err(GwccaError::Numerical("non-finite covariance entry".into()));
    }
    let wx = whiten(sigma_xx, ridge, "X")?;
    let wy = whiten(sigma_yy, ridge, "Y")?;

    let k = &wx.inv_sqrt * sigma_xy * &wy.inv_sqrt;
    let psi = p.min(q);
    let (sv, u, v) = jacobi_svd(&k);

    let mut rho = DVector::zeros(psi);
    let mut a_weights = DMatrix::zeros(p, psi);
    let mut b_weights = DMatrix::zeros(q, psi);
    for col in 0..psi {
        let mut a = &wx.inv_sqrt * u.column(col);
        let mut b = &wy.inv_sqrt * v.column(col);
        let na = quad_norm(&a, &wx.regularized);
        let nb = quad_norm(&b, &wy.regularized);
        if na > T::zero() {
            a /= na;
        }
        if nb > T::zero() {
            b /= nb;
        }
        if dominant_entry(&a, &b) < T::zero() {
            a.neg_mut();
            b.neg_mut();
        }
        rho[col] = sv[col].clamp(T::zero(), T::one());
        a_weights.set_column(col, &a);
        b_weights.set_column(col, &b);
    }

    Ok(CcaSolution {
        rho,
        a_weights,
        b_weights,
        regularization: Regularization {
            ridge_x: wx.ridge,
            ridge_y: wy.ridge,
            escalated: wx.escalated || wy.escalated,
        },
        psi,
    })
}

/// Canonical correlation analysis of one set of covariance blocks.
pub fn solve_cca<T: Real>(cov: &LocalCovariances<T>, ridge: T) -> Result<CcaSolution<T>> {
    solve_cca_blocks(&cov.sigma_xx, &cov.sigma_yy, &cov.sigma_xy, ridge)
}

fn check_columns<T: Real>(block: &DMatrix<T>, label: &str) -> Result<()> {
    for (j, col) in block.column_iter().enumerate() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(GwccaError::DegenerateVariance {
                variable: format!("{label}[{j}]"),
            });
        }
    }
    Ok(())
}

fn uniform_covariances<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<LocalCovariances<T>> {
    let n = x.nrows();
    let (p, q) = (x.ncols(), y.ncols());
    if y.nrows() != n {
        return Err(GwccaError::Input(format!(
            "X has {n} rows but Y has {}",
            y.nrows()
        )));
    }
    if n <= p + q {
        return Err(GwccaError::Input(format!(
            "{n} observations for {} variables; need n > p + q",
            p + q
        )));
    }
    check_columns(x, "X")?;
    check_columns(y, "Y")?;
    let nf = T::from_count(n);
    let mx = x.row_sum() / nf;
    let my = y.row_sum() / nf;
    let mut xc = x.clone();
    let mut yc = y.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mx;
    }
    for mut row in yc.row_iter_mut() {
        row -= &my;
    }
    let sxx = xc.tr_mul(&xc) / nf;
    let syy = yc.tr_mul(&yc) / nf;
    let sxy = xc.tr_mul(&yc) / nf;
    Ok(LocalCovariances {
        sigma_xx: (&sxx + sxx.transpose()) * T::lit(0.5),
        sigma_yy: (&syy + syy.transpose()) * T::lit(0.5),
        sigma_xy: sxy,
        weight_mass: nf,
        target_index: 0,
    })
}

/// Ordinary (unweighted) CCA, the global baseline.
pub fn global_cca<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<CcaSolution<T>> {
    solve_cca(&uniform_covariances(x, y)?, T::zero())
}

/// Fits local CCA at many targets over one dataset.
pub struct LocalFitter<'a, T: Real> {
    coords: &'a [Coord<T>],
    rows: JointRows<T>,
    ridge: T,
}

impl<'a, T: Real> LocalFitter<'a, T> {
    pub fn new(dataset: &'a SpatialDataset<T>, ridge: T) -> Result<Self> {
        if !(ridge >= T::zero()) {
            return Err(GwccaError::Parameter(format!("ridge must be >= 0, got {ridge}")));
        }
        Ok(LocalFitter {
            coords: &dataset.coords,
            rows: JointRows::new(&dataset.x, &dataset.y)?,
            ridge,
        })
    }

    pub fn fit_at(&self, target: usize, spec: &KernelSpec<T>) -> Result<LocalCcaResult<T>> {
        let n = self.coords.len();
        if target >= n {
            return Err(GwccaError::Input(format!(
                "target index {target} out of range for {n} locations"
            )));
        }
        spec.validate(n)?;
        let dist = distances_from(self.coords, target);
        let w = weights_from_distances(&dist, target, spec)?;
        let cov = self.rows.local_covariances(&w.weights, target)?;
        let solution = solve_cca(&cov, self.ridge).map_err(|e| e.at_location(target))?;
        Ok(LocalCcaResult {
            target_index: target,
            bandwidth_used: w.bandwidth_used,
            solution,
        })
    }

    /// Fits every location in parallel; the result is in location order and
    /// the reported error, if any, is the one at the lowest index.
    pub fn fit_all(&self, spec: &KernelSpec<T>) -> Result<Vec<LocalCcaResult<T>>> {
        spec.validate(self.coords.len())?;
        let fits: Vec<Result<LocalCcaResult<T>>> = (0..self.coords.len())
            .into_par_iter()
            .map(|i| self.fit_at(i, spec))
            .collect();
        fits.into_iter().collect()
    }
}

/// Local CCA at a single target.
pub fn local_cca<T: Real>(
    dataset: &SpatialDataset<T>,
    target_index: usize,
    spec: &KernelSpec<T>,
    ridge: T,
) -> Result<LocalCcaResult<T>> {
    LocalFitter::new(dataset, ridge)?.fit_at(target_index, spec)
}

/// Canonical variates `U = X_c A` and `V = Y_c B` on column-centred data.
pub fn canonical_scores<T: Real>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    solution: &CcaSolution<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if x.ncols() != solution.a_weights.nrows()
        || y.ncols() != solution.b_weights.nrows()
        || x.nrows() != y.nrows()
    {
        return Err(GwccaError::Input(format!(
            "scores: X {:?}, Y {:?} do not conform with weights {:?}, {:?}",
            x.shape(),
            y.shape(),
            solution.a_weights.shape(),
            solution.b_weights.shape()
        )));
    }
    let nf = T::from_count(x.nrows().max(1));
    let mut xc = x.clone();
    let mut yc = y.clone();
    let mx = x.row_sum() / nf;
    let my = y.row_sum() / nf;
    for mut row in xc.row_iter_mut() {
        row -= &mx;
    }
    for mut row in yc.row_iter_mut() {
        row -= &my;
    }
    Ok((xc * &solution.a_weights, yc * &solution.b_weights))
}

/// Flips each location's variate signs to agree with its nearest
/// lower-indexed neighbour. Locations are visited in index order.
pub fn align_signs_to_neighbors<T: Real>(results: &mut [LocalCcaResult<T>], coords: &[Coord<T>]) {
    for i in 1..results.len().min(coords.len()) {
        let dist = distances_from(&coords[..=i], i);
        let mut nearest = 0;
        for j in 1..i {
            if dist[j] < dist[nearest] {
                nearest = j;
            }
        }
        let (done, rest) = results.split_at_mut(i);
        let reference = &done[nearest].solution;
        let current = &mut rest[0].solution;
        for c in 0..current.psi.min(reference.psi) {
            let dot = current.a_weights.column(c).dot(&reference.a_weights.column(c))
                + current.b_weights.column(c).dot(&reference.b_weights.column(c));
            if dot < T::zero() {
                current.a_weights.column_mut(c).neg_mut();
                current.b_weights.column_mut(c).neg_mut();
            }
        }
    }
}

//! Synthetic datasets with known spatially varying canonical structure.
//!
//! Each location draws one `(x, y)` from a zero-mean normal whose joint
//! covariance has identity marginal blocks and cross block
//! `A0 diag(rho) B0^T`, plus a small diagonal jitter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{GwccaError, Result};
use crate::kernels::Coord;
use crate::scalar::Real;

/// Dense GRF factorisation is refused above this many points.
pub const MAX_GRF_POINTS: usize = 10_000;
/// Starting diagonal jitter for the random field covariance.
pub const GRF_JITTER: f64 = 1e-8;
const GRF_JITTER_MAX: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bump {
    pub beta0: f64,
    pub beta1: f64,
    pub center: [f64; 2],
    pub sigma: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Bump {
            beta0: 0.30,
            beta1: 0.45,
            center: [0.5, 0.5],
            sigma: 0.15,
        }
    }
}

/// An extra canonical structure with no spatial pattern: its correlation is
/// drawn independently at every location from `U(low, high)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseStructure {
    pub low: f64,
    pub high: f64,
}

impl Default for NoiseStructure {
    fn default() -> Self {
        NoiseStructure { low: 0.0, high: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams1 {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rho1_slope: f64,
    pub rho1_intercept: f64,
    pub bump: Bump,
    pub jitter: f64,
    pub rho_cap: f64,
    pub seed: u64,
    pub noise_structure: Option<NoiseStructure>,
}

impl Default for SynthParams1 {
    fn default() -> Self {
        SynthParams1 {
            n: 2000,
            p: 5,
            q: 5,
            rho1_slope: 0.65,
            rho1_intercept: 0.30,
            bump: Bump::default(),
            jitter: 1e-6,
            rho_cap: 0.95,
            seed: 0,
            noise_structure: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams2 {
    pub grid_size: usize,
    pub p: usize,
    pub q: usize,
    pub length_scale: f64,
    pub marginal_sigma: f64,
    pub tanh_alpha: f64,
    pub rho_base: f64,
    pub rho_amp: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SynthParams2 {
    fn default() -> Self {
        SynthParams2 {
            grid_size: 60,
            p: 5,
            q: 5,
            length_scale: 0.2,
            marginal_sigma: 1.0,
            tanh_alpha: 1.0,
            rho_base: 0.30,
            rho_amp: 0.50,
            jitter: 1e-6,
            seed: 0,
        }
    }
}

fn param(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(GwccaError::Parameter(msg()))
    }
}

impl SynthParams1 {
    pub fn validate(&self) -> Result<()> {
        let structures = if self.noise_structure.is_some() { 3 } else { 2 };
        param(self.p >= structures && self.q >= structures, || {
            format!(
                "p and q must be at least {structures}, got p={} q={}",
                self.p, self.q
            )
        })?;
        param(self.n > self.p + self.q, || {
            format!("n={} must exceed p + q", self.n)
        })?;
        param(self.rho_cap > 0.0 && self.rho_cap < 1.0, || {
            format!("rho_cap must lie in (0, 1), got {}", self.rho_cap)
        })?;
        let b = &self.bump;
        param(b.beta0 > 0.0 && b.beta1 >= 0.0 && b.beta0 + b.beta1 < 1.0, || {
            format!(
                "bump needs 0 < beta0 and beta0 + beta1 < 1, got {} and {}",
                b.beta0, b.beta1
            )
        })?;
        param(b.sigma > 0.0, || {
            format!("bump sigma must be positive, got {}", b.sigma)
        })?;
        param(self.rho1_intercept >= 0.0 && self.rho1_slope.is_finite(), || {
            "rho1 intercept must be >= 0".into()
        })?;
        param(self.rho1_slope + self.rho1_intercept >= 0.0, || {
            "rho1 must stay nonnegative on the unit square".into()
        })?;
        param(self.jitter >= 0.0, || {
            format!("jitter must be >= 0, got {}", self.jitter)
        })?;
        if let Some(ns) = &self.noise_structure {
            param(0.0 <= ns.low && ns.low <= ns.high && ns.high < 1.0, || {
                format!(
                    "noise structure range must satisfy 0 <= low <= high < 1, got ({}, {})",
                    ns.low, ns.high
                )
            })?;
        }
        Ok(())
    }
}

impl SynthParams2 {
    pub fn validate(&self) -> Result<()> {
        param(self.p >= 2 && self.q >= 2, || {
            format!("p and q must be at least 2, got p={} q={}", self.p, self.q)
        })?;
        param(self.grid_size >= 2, || {
            format!("grid size must be at least 2, got {}", self.grid_size)
        })?;
        param(self.grid_size * self.grid_size > self.p + self.q, || {
            "grid too small for p + q".into()
        })?;
        param(self.length_scale > 0.0, || {
            format!("length scale must be positive, got {}", self.length_scale)
        })?;
        param(self.marginal_sigma > 0.0, || {
            "marginal sigma must be positive".into()
        })?;
        param(
            self.rho_base > 0.0 && self.rho_amp >= 0.0 && self.rho_base + self.rho_amp < 1.0,
            || {
                format!(
                    "need 0 < rho_base and rho_base + rho_amp < 1, got {} and {}",
                    self.rho_base, self.rho_amp
                )
            },
        )?;
        param(self.jitter >= 0.0, || {
            format!("jitter must be >= 0, got {}", self.jitter)
        })?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTruth<T: Real> {
    /// One field per planted structure, in generation order.
    pub rho_fields: Vec<Vec<T>>,
    pub a0: DMatrix<T>,
    pub b0: DMatrix<T>,
    /// Diagonal jitter the random field needed, when one was simulated.
    pub grf_jitter: Option<f64>,
}

impl<T: Real> SyntheticTruth<T> {
    pub fn rho1(&self) -> &[T] {
        &self.rho_fields[0]
    }

    pub fn rho2(&self) -> &[T] {
        &self.rho_fields[1]
    }

    /// Per-location truth as an n x structures matrix.
    pub fn rho_matrix(&self) -> DMatrix<T> {
        let n = self.rho_fields[0].len();
        DMatrix::from_fn(n, self.rho_fields.len(), |i, j| self.rho_fields[j][i])
    }
}

fn orthonormal<T: Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<T> {
    let g = DMatrix::from_fn(rows, cols, |_, _| T::lit(rng.sample(StandardNormal)));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn directions_from<T: Real>(
    p: usize,
    q: usize,
    structures: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if p < structures || q < structures || structures < 2 {
        return Err(GwccaError::Parameter(format!(
            "directions need p, q >= {} (got p={p}, q={q})",
            structures.max(2)
        )));
    }
    let a0 = orthonormal(p, structures, rng);
    let b0 = orthonormal(q, structures, rng);
    Ok((a0, b0))
}

/// Seeded orthonormal `p x 2` and `q x 2` direction matrices.
pub fn make_directions<T: Real>(p: usize, q: usize, seed: u64) -> Result<(DMatrix<T>, DMatrix<T>)> {
    directions_from(p, q, 2, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Cross block `A0 diag(rho) B0^T`.
pub fn cross_cov<T: Real>(a0: &DMatrix<T>, b0: &DMatrix<T>, rho: &[T]) -> Result<DMatrix<T>> {
    let m = rho.len();
    if a0.ncols() != m || b0.ncols() != m {
        return Err(GwccaError::Input(format!(
            "{} correlations for direction matrices with {} and {} columns",
            m,
            a0.ncols(),
            b0.ncols()
        )));
    }
    if let Some(r) = rho.iter().find(|r| !(**r >= T::zero() && **r < T::one())) {
        return Err(GwccaError::Validity(format!(
            "canonical correlation {r} outside [0, 1)"
        )));
    }
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(rho));
    Ok(a0 * d * b0.transpose())
}

/// `[[I, C], [C^T, I]] + eps I`.
pub fn joint_cov<T: Real>(cross: &DMatrix<T>, eps: T) -> DMatrix<T> {
    let (p, q) = cross.shape();
    let mut j = DMatrix::identity(p + q, p + q);
    j.view_mut((0, p), (p, q)).copy_from(cross);
    j.view_mut((p, 0), (q, p)).copy_from(&cross.transpose());
    for i in 0..p + q {
        j[(i, i)] += eps;
    }
    j
}

/// One zero-mean normal draw, split into its first `p` and remaining components.
pub fn sample_location<T: Real>(
    joint_cov: &DMatrix<T>,
    p: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(DVector<T>, DVector<T>)> {
    let d = joint_cov.nrows();
    if !joint_cov.is_square() || p == 0 || p >= d {
        return Err(GwccaError::Input(format!(
            "cannot split a {:?} covariance at p={p}",
            joint_cov.shape()
        )));
    }
    let chol = Cholesky::new(joint_cov.clone())
        .ok_or_else(|| GwccaError::Validity("joint covariance is not positive definite".into()))?;
    let z = DVector::from_fn(d, |_, _| T::lit(rng.sample(StandardNormal)));
    let v = chol.l() * z;
    Ok((v.rows(0, p).into_owned(), v.rows(p, d - p).into_owned()))
}

fn draw_dataset<T: Real>(
    coords: Vec<Coord<T>>,
    rho_fields: &[Vec<T>],
    a0: &DMatrix<T>,
    b0: &DMatrix<T>,
    eps: T,
    rng: &mut ChaCha8Rng,
) -> Result<SpatialDataset<T>> {
    let n = coords.len();
    let (p, q) = (a0.nrows(), b0.nrows());
    let mut x = DMatrix::zeros(n, p);
    let mut y = DMatrix::zeros(n, q);
    let mut rho = vec![T::zero(); rho_fields.len()];
    for i in 0..n {
        for (r, f) in rho.iter_mut().zip(rho_fields) {
            *r = f[i];
        }
        let joint = joint_cov(&cross_cov(a0, b0, &rho)?, eps);
        let (xi, yi) = sample_location(&joint, p, rng)
            .map_err(|e| GwccaError::Validity(format!("location {i}: {e}")))?;
        x.set_row(i, &xi.transpose());
        y.set_row(i, &yi.transpose());
    }
    SpatialDataset::from_blocks(coords, x, y)
}

/// Uniform locations on the unit square; linear east-west trend in the first
/// structure, Gaussian bump in the second.
pub fn generate_dataset1<T: Real>(params: &SynthParams1) -> Result<(SpatialDataset<T>, SyntheticTruth<T>)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let structures = if params.noise_structure.is_some() { 3 } else { 2 };
    let (a0, b0) = directions_from::<T>(params.p, params.q, structures, &mut rng)?;
    let coords: Vec<Coord<T>> = (0..params.n)
        .map(|_| [T::lit(rng.gen::<f64>()), T::lit(rng.gen::<f64>())])
        .collect();
    let cap = T::lit(params.rho_cap);
    let b = &params.bump;
    let two_s2 = T::lit(2.0 * b.sigma * b.sigma);
    let (cx, cy) = (T::lit(b.center[0]), T::lit(b.center[1]));
    let mut fields = vec![
        coords
            .iter()
            .map(|c| (T::lit(params.rho1_slope) * c[0] + T::lit(params.rho1_intercept)).min(cap))
            .collect::<Vec<T>>(),
        coords
            .iter()
            .map(|c| {
                let d2 = (c[0] - cx) * (c[0] - cx) + (c[1] - cy) * (c[1] - cy);
                (T::lit(b.beta0) + T::lit(b.beta1) * (-d2 / two_s2).exp()).min(cap)
            })
            .collect(),
    ];
    if let Some(ns) = &params.noise_structure {
        fields.push(
            (0..params.n)
                .map(|_| T::lit(rng.gen_range(ns.low..=ns.high)))
                .collect(),
        );
    }
    let ds = draw_dataset(coords, &fields, &a0, &b0, T::lit(params.jitter), &mut rng)?;
    Ok((
        ds,
        SyntheticTruth {
            rho_fields: fields,
            a0,
            b0,
            grf_jitter: None,
        },
    ))
}

/// Regular `s x s` grid over the unit square, row-major with the first coordinate varying fastest.
pub fn unit_grid<T: Real>(s: usize) -> Vec<Coord<T>> {
    let step = |i: usize| T::from_count(i) / T::from_count(s.saturating_sub(1).max(1));
    (0..s)
        .flat_map(|j| (0..s).map(move |i| [step(i), step(j)]))
        .collect()
}

/// Lower factor of a squared-exponential field covariance, reusable across draws.
#[derive(Clone, Debug)]
pub struct GrfSampler<T: Real> {
    factor: DMatrix<T>,
    /// Diagonal jitter the factorisation needed.
    pub jitter: f64,
}

impl<T: Real> GrfSampler<T> {
    pub fn new(coords: &[Coord<T>], length_scale: T, sigma: T) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(GwccaError::Input("random field on an empty grid".into()));
        }
        if n > MAX_GRF_POINTS {
            return Err(GwccaError::Capacity(format!(
                "{n} grid points exceed the dense factorisation limit of {MAX_GRF_POINTS}; use a coarser grid"
            )));
        }
        if !(length_scale > T::zero()) || !(sigma > T::zero()) {
            return Err(GwccaError::Parameter(format!(
                "length scale and sigma must be positive, got {length_scale} and {sigma}"
            )));
        }
        let s2 = sigma * sigma;
        let two_l2 = T::lit(2.0) * length_scale * length_scale;
        let base = DMatrix::from_fn(n, n, |i, j| {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            s2 * (-(dx * dx + dy * dy) / two_l2).exp()
        });
        let mut jitter = GRF_JITTER;
        loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += T::lit(jitter);
            }
            if let Some(ch) = Cholesky::<T, Dyn>::new(k) {
                if jitter > GRF_JITTER {
                    log::warn!("random field covariance needed diagonal jitter {jitter:e}");
                }
                return Ok(GrfSampler {
                    factor: ch.unpack(),
                    jitter,
                });
            }
            jitter *= 10.0;
            if jitter > GRF_JITTER_MAX * 1.000001 {
                return Err(GwccaError::Validity(format!(
                    "random field covariance not positive definite up to jitter {GRF_JITTER_MAX:e}"
                )));
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<T> {
        let n = self.factor.nrows();
        let z = DVector::from_fn(n, |_, _| T::lit(rng.sample(StandardNormal)));
        (&self.factor * z).iter().copied().collect()
    }
}

/// One zero-mean squared-exponential random field realisation.
pub fn sample_grf<T: Real>(coords: &[Coord<T>], length_scale: T, sigma: T, seed: u64) -> Result<Vec<T>> {
    let sampler = GrfSampler::new(coords, length_scale, sigma)?;
    Ok(sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Regular grid; first structure from a thresholded random field, second a diagonal gradient.
pub fn generate_dataset2<T: Real>(params: &SynthParams2) -> Result<(SpatialDataset<T>, SyntheticTruth<T>)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (a0, b0) = directions_from::<T>(params.p, params.q, 2, &mut rng)?;
    let coords = unit_grid::<T>(params.grid_size);
    let sampler = GrfSampler::new(
        &coords,
        T::lit(params.length_scale),
        T::lit(params.marginal_sigma),
    )?;
    let z = sampler.sample(&mut rng);
    let n = T::from_count(z.len());
    let mean = z.iter().fold(T::zero(), |a, &b| a + b) / n;
    let sd = (z.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / n).sqrt();
    if !(sd > T::zero()) {
        return Err(GwccaError::Validity(
            "random field realisation is constant".into(),
        ));
    }
    let alpha = T::lit(params.tanh_alpha);
    let fields = vec![
        z.iter()
            .map(|&v| T::lit(0.5) + T::lit(0.4) * (alpha * (v - mean) / sd).tanh())
            .collect::<Vec<T>>(),
        coords
            .iter()
            .map(|c| T::lit(params.rho_base) + T::lit(params.rho_amp) * (c[0] + c[1]) / T::lit(2.0))
            .collect(),
    ];
    let ds = draw_dataset(coords, &fields, &a0, &b0, T::lit(params.jitter), &mut rng)?;
    Ok((
        ds,
        SyntheticTruth {
            rho_fields: fields,
            a0,
            b0,
            grf_jitter: Some(sampler.jitter),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{global_cca, solve_cca_blocks};
    use approx::assert_abs_diff_eq;

    fn block(j: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let d = j.nrows();
        (
            j.view((0, 0), (p, p)).into_owned(),
            j.view((p, p), (d - p, d - p)).into_owned(),
            j.view((0, p), (p, d - p)).into_owned(),
        )
    }

    #[test]
    fn directions_are_orthonormal_and_seeded() {
        for (p, q) in [(2, 2), (5, 5), (7, 3)] {
            let (a, b) = make_directions::<f64>(p, q, 9).unwrap();
            assert_eq!(a.shape(), (p, 2));
            assert!((a.tr_mul(&a) - DMatrix::identity(2, 2)).amax() < 1e-12);
            assert!((b.tr_mul(&b) - DMatrix::identity(2, 2)).amax() < 1e-12);
            assert_eq!((a.clone(), b.clone()), make_directions(p, q, 9).unwrap());
            if p == 2 {
                assert!((&a * a.transpose() - DMatrix::identity(2, 2)).amax() < 1e-12);
            }
        }
        assert!(make_directions::<f64>(1, 4, 0).is_err());
    }

    #[test]
    fn cross_block_has_prescribed_singular_values() {
        let (a, b) = make_directions::<f64>(5, 4, 3).unwrap();
        let c = cross_cov(&a, &b, &[0.7, 0.2]).unwrap();
        let mut sv: Vec<f64> = c.singular_values().iter().copied().collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert_abs_diff_eq!(sv[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(sv[1], 0.2, epsilon = 1e-12);
        assert!(sv[2..].iter().all(|s| s.abs() < 1e-12));
        assert_eq!(cross_cov(&a, &b, &[0.0, 0.0]).unwrap().amax(), 0.0);
        assert!(matches!(
            cross_cov(&a, &b, &[1.0, 0.2]),
            Err(GwccaError::Validity(_))
        ));
    }

    #[test]
    fn exact_joint_covariance_round_trips() {
        let (a, b) = make_directions::<f64>(5, 5, 4).unwrap();
        let j = joint_cov(&cross_cov(&a, &b, &[0.8, 0.35]).unwrap(), 0.0);
        let (sxx, syy, sxy) = block(&j, 5);
        let sol = solve_cca_blocks(&sxx, &syy, &sxy, 0.0).unwrap();
        assert_abs_diff_eq!(sol.rho[0], 0.8, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.rho[1], 0.35, epsilon = 1e-10);
        assert!(sol.rho.iter().skip(2).all(|r| *r < 1e-10));
    }

    #[test]
    fn jitter_shrinks_correlations_by_one_plus_eps() {
        let (a, b) = make_directions::<f64>(4, 4, 5).unwrap();
        let eps = 1e-3;
        let j = joint_cov(&cross_cov(&a, &b, &[0.9, 0.5]).unwrap(), eps);
        let (sxx, syy, sxy) = block(&j, 4);
        let sol = solve_cca_blocks(&sxx, &syy, &sxy, 0.0).unwrap();
        assert_abs_diff_eq!(sol.rho[0], 0.9 / (1.0 + eps), epsilon = 1e-12);
        assert_abs_diff_eq!(sol.rho[1], 0.5 / (1.0 + eps), epsilon = 1e-12);
    }

    #[test]
    fn sampling_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let ident = DMatrix::<f64>::identity(4, 4);
        let mut sums = [0.0f64; 4];
        let mut sq = [0.0f64; 4];
        let mut cross = 0.0;
        for _ in 0..n {
            let (x, y) = sample_location(&ident, 2, &mut rng).unwrap();
            for (k, v) in x.iter().chain(y.iter()).enumerate() {
                sums[k] += v;
                sq[k] += v * v;
            }
            cross += x[0] * y[0];
        }
        for k in 0..4 {
            let m = sums[k] / n as f64;
            assert!((sq[k] / n as f64 - m * m - 1.0).abs() < 0.02);
        }
        assert!((cross / n as f64).abs() < 0.05);
        let mut bad = ident.clone();
        bad[(0, 0)] = -1.0;
        assert!(matches!(
            sample_location(&bad, 2, &mut rng),
            Err(GwccaError::Validity(_))
        ));
    }

    #[test]
    fn constant_structure_is_recovered_globally() {
        let (a, b) = make_directions::<f64>(5, 5, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let coords = vec![[0.0, 0.0]; n];
        let fields = vec![vec![0.6; n], vec![0.6; n]];
        let ds = draw_dataset(coords, &fields, &a, &b, 1e-6, &mut rng).unwrap();
        let sol = global_cca(&ds.x, &ds.y).unwrap();
        assert!((sol.rho[0] - 0.6).abs() < 0.02, "{}", sol.rho);
        assert!((sol.rho[1] - 0.6).abs() < 0.02, "{}", sol.rho);
    }

    #[test]
    fn dataset1_truth_fields() {
        let params = SynthParams1 {
            n: 400,
            seed: 3,
            ..Default::default()
        };
        let (ds, truth) = generate_dataset1::<f64>(&params).unwrap();
        assert_eq!(ds.n(), 400);
        assert_eq!((ds.p(), ds.q()), (5, 5));
        for (c, (&r1, &r2)) in ds.coords.iter().zip(truth.rho1().iter().zip(truth.rho2())) {
            assert!((0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1]));
            assert_eq!(r1, (0.65 * c[0] + 0.30f64).min(0.95));
            assert!(r2 > 0.3 - 1e-15 && r2 <= 0.75 + 1e-15);
        }
        let again = generate_dataset1::<f64>(&params).unwrap();
        assert_eq!(ds, again.0);
        assert_eq!(truth, again.1);
    }

    #[test]
    fn dataset1_field_formulas() {
        let p = SynthParams1::default();
        let f = |x: f64| (p.rho1_slope * x + p.rho1_intercept).min(p.rho_cap);
        assert_abs_diff_eq!(f(0.0), 0.30, epsilon = 1e-15);
        assert_abs_diff_eq!(f(1.0), 0.95, epsilon = 1e-15);
        let params = SynthParams1 {
            n: 50,
            ..Default::default()
        };
        let (ds, truth) = generate_dataset1::<f64>(&params).unwrap();
        // the second structure peaks at the centre and decays to beta0
        for (c, &r2) in ds.coords.iter().zip(truth.rho2()) {
            let d2 = (c[0] - 0.5).powi(2) + (c[1] - 0.5).powi(2);
            assert_abs_diff_eq!(
                r2,
                0.30 + 0.45 * (-d2 / (2.0 * 0.15f64.powi(2))).exp(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn planted_structure_adds_a_third_field() {
        let params = SynthParams1 {
            n: 200,
            noise_structure: Some(NoiseStructure::default()),
            ..Default::default()
        };
        let (_, truth) = generate_dataset1::<f64>(&params).unwrap();
        assert_eq!(truth.rho_fields.len(), 3);
        assert_eq!(truth.a0.ncols(), 3);
        assert!(truth.rho_fields[2].iter().all(|r| (0.0..=0.3).contains(r)));
    }

    #[test]
    fn grid_and_dataset2_fields() {
        let g = unit_grid::<f64>(4);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], [0.0, 0.0]);
        assert_eq!(g[1], [1.0 / 3.0, 0.0]);
        assert_eq!(g[15], [1.0, 1.0]);
        let params = SynthParams2 {
            grid_size: 20,
            seed: 2,
            ..Default::default()
        };
        let (ds, truth) = generate_dataset2::<f64>(&params).unwrap();
        assert_eq!(ds.n(), 400);
        assert!(truth.rho1().iter().all(|&r| r > 0.1 && r < 0.9));
        assert_abs_diff_eq!(truth.rho2()[0], 0.30, epsilon = 1e-15);
        assert_abs_diff_eq!(truth.rho2()[399], 0.80, epsilon = 1e-15);
        assert_eq!(truth.grf_jitter, Some(GRF_JITTER));
    }

    #[test]
    fn grf_moments_over_many_seeds() {
        let coords = unit_grid::<f64>(6);
        let sampler = GrfSampler::new(&coords, 0.2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws: Vec<Vec<f64>> = (0..200).map(|_| sampler.sample(&mut rng)).collect();
        let centre = 14;
        let var = draws.iter().map(|d| d[centre] * d[centre]).sum::<f64>() / 200.0;
        assert!((var - 1.0).abs() < 0.2, "{var}");
        let near = draws.iter().map(|d| d[centre] * d[centre + 1]).sum::<f64>() / 200.0;
        let far = draws.iter().map(|d| d[0] * d[35]).sum::<f64>() / 200.0;
        assert!(near > far);
    }

    #[test]
    fn long_length_scale_gives_flat_fields() {
        let coords = unit_grid::<f64>(5);
        let z = sample_grf(&coords, 50.0, 1.0, 1).unwrap();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        assert!(sd < 0.1, "{sd}");
    }

    #[test]
    fn oversized_grid_is_refused() {
        let coords = vec![[0.0f64, 0.0]; MAX_GRF_POINTS + 1];
        assert!(matches!(
            GrfSampler::new(&coords, 0.2, 1.0),
            Err(GwccaError::Capacity(_))
        ));
    }

    #[test]
    fn parameter_validation() {
        let bad = SynthParams1 {
            p: 1,
            ..Default::default()
        };
        assert!(generate_dataset1::<f64>(&bad).is_err());
        let bad2 = SynthParams2 {
            rho_base: 0.6,
            rho_amp: 0.5,
            ..Default::default()
        };
        assert!(generate_dataset2::<f64>(&bad2).is_err());
    }
}

//! Geographically weighted moments.
//!
//! Every statistic is centred at the weighted local mean and normalised by
//! the weight mass, so multiplying all weights by a constant changes
//! nothing. Sums run in observation order.

use nalgebra::DMatrix;

use crate::error::{GwccaError, Result};
use crate::kernels::WeightVector;
use crate::scalar::Real;

/// Below this total weight a neighbourhood is treated as empty.
pub const MIN_WEIGHT_MASS: f64 = 1e-12;

/// Local covariance blocks at one target location.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalCovariances<T: Real> {
    pub sigma_xx: DMatrix<T>,
    pub sigma_yy: DMatrix<T>,
    pub sigma_xy: DMatrix<T>,
    pub weight_mass: T,
    pub target_index: usize,
}

impl<T: Real> LocalCovariances<T> {
    pub fn p(&self) -> usize {
        self.sigma_xx.nrows()
    }

    pub fn q(&self) -> usize {
        self.sigma_yy.nrows()
    }
}

fn weight_mass<T: Real>(w: &[T]) -> Result<T> {
    let mass = w.iter().fold(T::zero(), |acc, &v| acc + v);
    if !(mass >= T::lit(MIN_WEIGHT_MASS)) {
        return Err(GwccaError::DegenerateNeighborhood {
            target: usize::MAX,
            reason: format!("total weight {mass} is below {MIN_WEIGHT_MASS:e}"),
        });
    }
    Ok(mass)
}

fn check_len<T>(x: &[T], w: &[T]) -> Result<()> {
    if x.len() != w.len() {
        return Err(GwccaError::Input(format!(
            "length mismatch: {} values, {} weights",
            x.len(),
            w.len()
        )));
    }
    Ok(())
}

fn mean_with_mass<T: Real>(x: &[T], w: &[T], mass: T) -> T {
    x.iter().zip(w).fold(T::zero(), |acc, (&xi, &wi)| acc + wi * xi) / mass
}

/// Weighted mean.
pub fn gw_mean<T: Real>(x: &[T], w: &[T]) -> Result<T> {
    check_len(x, w)?;
    let mass = weight_mass(w)?;
    Ok(mean_with_mass(x, w, mass))
}

/// Weighted covariance of two variables about their weighted means.
pub fn gw_cov<T: Real>(x: &[T], y: &[T], w: &[T]) -> Result<T> {
    check_len(x, w)?;
    check_len(y, w)?;
    let mass = weight_mass(w)?;
    let mx = mean_with_mass(x, w, mass);
    let my = mean_with_mass(y, w, mass);
    let s = x.iter().zip(y).zip(w).fold(T::zero(), |acc, ((&xi, &yi), &wi)| {
        acc + wi * ((xi - mx) * (yi - my))
    });
    Ok(s / mass)
}

/// Weighted standard deviation (no degrees-of-freedom correction).
pub fn gw_std<T: Real>(x: &[T], w: &[T]) -> Result<T> {
    let v = gw_cov(x, x, w)?;
    Ok(v.max(T::zero()).sqrt())
}

/// Weighted Pearson correlation, clamped to [-1, 1].
pub fn gw_corr<T: Real>(x: &[T], y: &[T], w: &[T]) -> Result<T> {
    let sx = gw_std(x, w)?;
    let sy = gw_std(y, w)?;
    if !(sx > T::zero()) {
        return Err(GwccaError::DegenerateVariance { variable: "x".into() });
    }
    if !(sy > T::zero()) {
        return Err(GwccaError::DegenerateVariance { variable: "y".into() });
    }
    let c = gw_cov(x, y, w)?;
    let r = c / (sx * sy);
    Ok(r.clamp(-T::one(), T::one()))
}

/// Row-major copy of `[X | Y]` used for repeated local covariance evaluation.
#[derive(Clone, Debug)]
pub struct JointRows<T> {
    n: usize,
    p: usize,
    q: usize,
    data: Vec<T>,
}

impl<T: Real> JointRows<T> {
    pub fn new(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(GwccaError::Input(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        let (n, p, q) = (x.nrows(), x.ncols(), y.ncols());
        let mut data = Vec::with_capacity(n * (p + q));
        for i in 0..n {
            data.extend(x.row(i).iter().copied());
            data.extend(y.row(i).iter().copied());
        }
        Ok(JointRows { n, p, q, data })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    /// Centred, mass-normalised local covariance blocks.
    pub fn local_covariances(&self, weights: &[T], target: usize) -> Result<LocalCovariances<T>> {
        let (p, q) = (self.p, self.q);
        let dim = p + q;
        if weights.len() != self.n {
            return Err(GwccaError::Input(format!(
                "{} weights for {} observations",
                weights.len(),
                self.n
            )));
        }
        let positive = weights.iter().filter(|&&w| w > T::zero()).count();
        if positive < dim + 2 {
            return Err(GwccaError::DegenerateNeighborhood {
                target,
                reason: format!(
                    "{positive} observations carry positive weight, at least {} required",
                    dim + 2
                ),
            });
        }
        let mass = weight_mass(weights).map_err(|e| match e {
            GwccaError::DegenerateNeighborhood { reason, .. } => {
                GwccaError::DegenerateNeighborhood { target, reason }
            }
            e => e,
        })?;

        let mut mean = vec![T::zero(); dim];
        for (row, &w) in self.data.chunks_exact(dim).zip(weights) {
            if w > T::zero() {
                for (m, &z) in mean.iter_mut().zip(row) {
                    *m += w * z;
                }
            }
        }
        for m in &mut mean {
            *m /= mass;
        }

        // upper triangle of the joint covariance, row-major
        let mut acc = vec![T::zero(); dim * dim];
        let mut centred = vec![T::zero(); dim];
        for (row, &w) in self.data.chunks_exact(dim).zip(weights) {
            if w > T::zero() {
                for ((c, &z), &m) in centred.iter_mut().zip(row).zip(&mean) {
                    *c = z - m;
                }
                for a in 0..dim {
                    let wa = w * centred[a];
                    let dst = &mut acc[a * dim + a..(a + 1) * dim];
                    for (s, &cb) in dst.iter_mut().zip(&centred[a..]) {
                        *s += wa * cb;
                    }
                }
            }
        }
        let joint = |a: usize, b: usize| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            acc[lo * dim + hi] / mass
        };
        Ok(LocalCovariances {
            sigma_xx: DMatrix::from_fn(p, p, &joint),
            sigma_yy: DMatrix::from_fn(q, q, |a, b| joint(p + a, p + b)),
            sigma_xy: DMatrix::from_fn(p, q, |a, b| joint(a, p + b)),
            weight_mass: mass,
            target_index: target,
        })
    }
}

/// Local covariance blocks of X and Y under the weights `w`.
pub fn gw_cov_matrices<T: Real>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    w: &WeightVector<T>,
) -> Result<LocalCovariances<T>> {
    JointRows::new(x, y)?.local_covariances(&w.weights, w.target_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    fn wv(weights: Vec<f64>) -> WeightVector<f64> {
        WeightVector {
            target_index: 0,
            weights,
            bandwidth_used: 1.0,
        }
    }

    fn random_block(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.gen_range(-2.0..2.0))
    }

    // plain two-pass population covariance
    fn population_cov(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
    }

    #[test]
    fn mean_examples() {
        assert_abs_diff_eq!(gw_mean(&[1.0, 2.0, 6.0], &uniform(3)).unwrap(), 3.0);
        assert_eq!(gw_mean(&[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(gw_mean(&[0.0, 10.0], &[1.0, 3.0]).unwrap(), 7.5);
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let err = gw_mean(&[1.0, 2.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, GwccaError::DegenerateNeighborhood { .. }));
        assert!(gw_std(&[1.0, 2.0], &[0.0, 1e-13]).is_err());
        assert!(gw_mean(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn std_examples() {
        assert_eq!(gw_std(&[4.0, 4.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(gw_std(&[0.0, 10.0], &[1.0, 1.0]).unwrap(), 5.0, epsilon = 1e-14);
        let x = [1.0, 2.0, 4.0, 8.0];
        let pop = population_cov(&x, &x).sqrt();
        assert_abs_diff_eq!(gw_std(&x, &uniform(4)).unwrap(), pop, epsilon = 1e-14);
    }

    #[test]
    fn cov_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..50).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s = gw_std(&x, &w).unwrap();
        assert_abs_diff_eq!(gw_cov(&x, &x, &w).unwrap(), s * s, epsilon = 1e-12);
        assert_eq!(gw_cov(&[2.0; 5], &[7.0; 5], &uniform(5)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            gw_cov(&x, &y, &uniform(50)).unwrap(),
            population_cov(&x, &y),
            epsilon = 1e-14
        );
    }

    #[test]
    fn corr_examples() {
        let x = [0.3, -1.0, 2.5, 4.0, 0.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let w = [0.2, 1.0, 0.7, 0.1, 0.5];
        assert_abs_diff_eq!(gw_corr(&x, &y, &w).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gw_corr(&x, &neg, &w).unwrap(), -1.0, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
        let pearson =
            population_cov(&a, &b) / (population_cov(&a, &a).sqrt() * population_cov(&b, &b).sqrt());
        assert_abs_diff_eq!(gw_corr(&a, &b, &uniform(80)).unwrap(), pearson, epsilon = 1e-12);
    }

    #[test]
    fn corr_names_the_constant_variable() {
        let err = gw_corr(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0], &uniform(3)).unwrap_err();
        match err {
            GwccaError::DegenerateVariance { variable } => assert_eq!(variable, "y"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn uniform_weights_reproduce_population_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_block(&mut rng, 40, 3);
        let y = random_block(&mut rng, 40, 2);
        let cov = gw_cov_matrices(&x, &y, &wv(uniform(40))).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let xa: Vec<f64> = x.column(a).iter().copied().collect();
                let xb: Vec<f64> = x.column(b).iter().copied().collect();
                let expect = population_cov(&xa, &xb);
                assert!((cov.sigma_xx[(a, b)] - expect).abs() <= 1e-10 * expect.abs().max(1e-3));
            }
            for b in 0..2 {
                let xa: Vec<f64> = x.column(a).iter().copied().collect();
                let yb: Vec<f64> = y.column(b).iter().copied().collect();
                assert_abs_diff_eq!(cov.sigma_xy[(a, b)], population_cov(&xa, &yb), epsilon = 1e-13);
            }
        }
        assert_eq!(cov.weight_mass, 40.0);
    }

    #[test]
    fn scalar_blocks_match_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_block(&mut rng, 30, 1);
        let y = random_block(&mut rng, 30, 1);
        let w: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cov = gw_cov_matrices(&x, &y, &wv(w.clone())).unwrap();
        let xs = x.as_slice();
        let ys = y.as_slice();
        assert_abs_diff_eq!(
            cov.sigma_xx[(0, 0)],
            gw_std(xs, &w).unwrap().powi(2),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            cov.sigma_yy[(0, 0)],
            gw_std(ys, &w).unwrap().powi(2),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(cov.sigma_xy[(0, 0)], gw_cov(xs, ys, &w).unwrap(), epsilon = 1e-13);
    }

    #[test]
    fn duplicated_column_gives_singular_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = random_block(&mut rng, 25, 3);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &c0);
        let y = random_block(&mut rng, 25, 2);
        let w: Vec<f64> = (0..25).map(|_| rng.gen_range(0.1..1.0)).collect();
        let cov = gw_cov_matrices(&x, &y, &wv(w)).unwrap();
        let eig = cov.sigma_xx.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-14);
        assert_eq!(cov.sigma_xx[(0, 0)], cov.sigma_xx[(2, 2)]);
    }

    #[test]
    fn too_few_positive_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_block(&mut rng, 10, 2);
        let y = random_block(&mut rng, 10, 2);
        let mut w = vec![0.0; 10];
        for v in w.iter_mut().take(5) {
            *v = 1.0;
        }
        let err = gw_cov_matrices(
            &x,
            &y,
            &WeightVector {
                target_index: 3,
                weights: w,
                bandwidth_used: 1.0,
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            GwccaError::DegenerateNeighborhood { target: 3, .. }
        ));
    }

    proptest! {
        #[test]
        fn blocks_are_symmetric_psd_and_scale_free(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_block(&mut rng, 30, 4);
            let y = random_block(&mut rng, 30, 3);
            let w: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
            let cov = gw_cov_matrices(&x, &y, &wv(w.clone())).unwrap();
            prop_assert_eq!(&cov.sigma_xx, &cov.sigma_xx.transpose());
            prop_assert_eq!(&cov.sigma_yy, &cov.sigma_yy.transpose());
            let trace = cov.sigma_xx.trace();
            let eig = cov.sigma_xx.clone().symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-10 * trace / 4.0);

            let scaled: Vec<f64> = w.iter().map(|v| v * scale).collect();
            let cov2 = gw_cov_matrices(&x, &y, &wv(scaled)).unwrap();
            for (a, b) in cov.sigma_xy.iter().zip(cov2.sigma_xy.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            for (a, b) in cov.sigma_xx.iter().zip(cov2.sigma_xx.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn corr_is_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
            prop_assert_eq!(gw_corr(&x, &y, &w).unwrap(), gw_corr(&y, &x, &w).unwrap());
        }
    }
}

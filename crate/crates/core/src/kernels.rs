//! Spatial distances, bandwidths and kernel weights.
//!
//! Distances are planar Euclidean, so coordinates must already be projected.
//! An adaptive bandwidth of `k` neighbours counts the target itself as its
//! own first neighbour.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GwccaError, Result};
use crate::scalar::Real;

/// Planar coordinate pair.
pub type Coord<T> = [T; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    Boxcar,
    Bisquare,
    Tricube,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::Gaussian,
        KernelFamily::Exponential,
        KernelFamily::Boxcar,
        KernelFamily::Bisquare,
        KernelFamily::Tricube,
    ];

    /// True for families that vanish beyond the bandwidth.
    pub fn is_compact(self) -> bool {
        matches!(
            self,
            KernelFamily::Boxcar | KernelFamily::Bisquare | KernelFamily::Tricube
        )
    }

    /// Kernel value without argument checks; `r` must be positive.
    #[inline]
    pub(crate) fn eval<T: Real>(self, d: T, r: T) -> T {
        let u = d / r;
        let one = T::one();
        match self {
            KernelFamily::Gaussian => (-(u * u) / T::lit(2.0)).exp(),
            KernelFamily::Exponential => (-u).exp(),
            KernelFamily::Boxcar => {
                if d <= r {
                    one
                } else {
                    T::zero()
                }
            }
            KernelFamily::Bisquare => {
                if d <= r {
                    let t = one - u * u;
                    t * t
                } else {
                    T::zero()
                }
            }
            KernelFamily::Tricube => {
                if d <= r {
                    let t = one - u * u * u;
                    t * t * t
                } else {
                    T::zero()
                }
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Exponential => "exponential",
            KernelFamily::Boxcar => "boxcar",
            KernelFamily::Bisquare => "bisquare",
            KernelFamily::Tricube => "tricube",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelFamily {
    type Err = GwccaError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "exponential" => Ok(KernelFamily::Exponential),
            "boxcar" => Ok(KernelFamily::Boxcar),
            "bisquare" => Ok(KernelFamily::Bisquare),
            "tricube" => Ok(KernelFamily::Tricube),
            _ => Err(GwccaError::Parameter(format!(
                "unknown kernel `{s}` (expected gaussian, exponential, boxcar, bisquare or tricube)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth<T> {
    /// Fixed distance in coordinate units.
    Fixed(T),
    /// Distance to the k-th nearest neighbour, the target included.
    Adaptive(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth<T>,
}

impl<T: Real> KernelSpec<T> {
    pub fn fixed(family: KernelFamily, r: T) -> Result<Self> {
        if !(r.finite() && r > T::zero()) {
            return Err(GwccaError::Parameter(format!(
                "fixed bandwidth must be positive and finite, got {r}"
            )));
        }
        Ok(KernelSpec {
            family,
            bandwidth: Bandwidth::Fixed(r),
        })
    }

    pub fn adaptive(family: KernelFamily, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(GwccaError::Parameter("adaptive bandwidth needs k >= 1".into()));
        }
        Ok(KernelSpec {
            family,
            bandwidth: Bandwidth::Adaptive(k),
        })
    }

    /// Checks the spec against a dataset of `n` locations.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.bandwidth {
            Bandwidth::Fixed(r) if !(r.finite() && r > T::zero()) => Err(GwccaError::Parameter(format!(
                "fixed bandwidth must be positive and finite, got {r}"
            ))),
            Bandwidth::Adaptive(k) if k == 0 || k > n => {
                Err(GwccaError::Parameter(format!("adaptive k = {k} outside 1..={n}")))
            }
            _ => Ok(()),
        }
    }
}

/// Kernel weights of every observation relative to one target location.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T> {
    pub target_index: usize,
    pub weights: Vec<T>,
    pub bandwidth_used: T,
}

impl<T: Real> WeightVector<T> {
    pub fn mass(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc + w)
    }

    pub fn positive_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > T::zero()).count()
    }
}

impl<T> AsRef<[T]> for WeightVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.weights
    }
}

pub(crate) fn check_coords<T: Real>(coords: &[Coord<T>]) -> Result<()> {
    if let Some((i, _)) = coords
        .iter()
        .enumerate()
        .find(|(_, c)| !(c[0].finite() && c[1].finite()))
    {
        return Err(GwccaError::Input(format!("non-finite coordinate at row {i}")));
    }
    Ok(())
}

#[inline]
fn euclidean<T: Real>(a: &Coord<T>, b: &Coord<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Full symmetric distance matrix.
pub fn pairwise_distances<T: Real>(coords: &[Coord<T>]) -> Result<DMatrix<T>> {
    if coords.len() < 2 {
        return Err(GwccaError::Input("need at least two locations".into()));
    }
    check_coords(coords)?;
    let n = coords.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = euclidean(&coords[i], &coords[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// Distances from one target to every location (one row of [`pairwise_distances`]).
pub fn distances_from<T: Real>(coords: &[Coord<T>], target: usize) -> Vec<T> {
    let c = coords[target];
    coords
        .iter()
        .enumerate()
        .map(|(j, p)| if j == target { T::zero() } else { euclidean(&c, p) })
        .collect()
}

/// The k-th smallest distance (1-based), the target's own zero distance
/// counting as the first.
pub fn adaptive_bandwidth<T: Real>(distances_from_target: &[T], k: usize) -> Result<T> {
    let n = distances_from_target.len();
    if k == 0 || k > n {
        return Err(GwccaError::Parameter(format!("adaptive k = {k} outside 1..={n}")));
    }
    let mut buf = distances_from_target.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| {
        a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(*kth)
}

/// Kernel weight at distance `d` for bandwidth `r`.
pub fn kernel_weight<T: Real>(family: KernelFamily, d: T, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(GwccaError::Parameter(format!(
            "bandwidth must be positive, got {r}"
        )));
    }
    if !(d >= T::zero()) {
        return Err(GwccaError::Parameter(format!(
            "distance must be nonnegative, got {d}"
        )));
    }
    Ok(family.eval(d, r))
}

/// Resolves the bandwidth at `target_index` and weights every observation,
/// including the target itself.
pub fn weight_vector<T: Real>(
    coords: &[Coord<T>],
    target_index: usize,
    spec: &KernelSpec<T>,
) -> Result<WeightVector<T>> {
    let n = coords.len();
    if target_index >= n {
        return Err(GwccaError::Input(format!(
            "target index {target_index} out of range for {n} locations"
        )));
    }
    spec.validate(n)?;
    let dist = distances_from(coords, target_index);
    weights_from_distances(&dist, target_index, spec)
}

pub(crate) fn weights_from_distances<T: Real>(
    dist: &[T],
    target_index: usize,
    spec: &KernelSpec<T>,
) -> Result<WeightVector<T>> {
    let r = match spec.bandwidth {
        Bandwidth::Fixed(r) => r,
        Bandwidth::Adaptive(k) => adaptive_bandwidth(dist, k)?,
    };
    if !(r > T::zero()) {
        return Err(GwccaError::DegenerateNeighborhood {
            target: target_index,
            reason: "resolved bandwidth is zero".into(),
        });
    }
    let weights = dist.iter().map(|&d| spec.family.eval(d, r)).collect();
    Ok(WeightVector {
        target_index,
        weights,
        bandwidth_used: r,
    })
}

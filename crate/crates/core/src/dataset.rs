use nalgebra::DMatrix;

use crate::error::{GwccaError, Result};
use crate::kernels::{check_coords, Coord};
use crate::scalar::Real;

/// Locations plus two aligned variable blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialDataset<T: Real> {
    pub ids: Vec<String>,
    pub coords: Vec<Coord<T>>,
    pub x: DMatrix<T>,
    pub y: DMatrix<T>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
}

impl<T: Real> SpatialDataset<T> {
    pub fn new(
        ids: Vec<String>,
        coords: Vec<Coord<T>>,
        x: DMatrix<T>,
        y: DMatrix<T>,
        x_names: Vec<String>,
        y_names: Vec<String>,
    ) -> Result<Self> {
        let n = coords.len();
        if ids.len() != n || x.nrows() != n || y.nrows() != n {
            return Err(GwccaError::Input(format!(
                "row counts disagree: {} ids, {} coordinates, {} X rows, {} Y rows",
                ids.len(),
                n,
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(GwccaError::Input(
                "both variable sets need at least one column".into(),
            ));
        }
        if x_names.len() != x.ncols() || y_names.len() != y.ncols() {
            return Err(GwccaError::Input("column names do not match block widths".into()));
        }
        if n <= x.ncols() + y.ncols() {
            return Err(GwccaError::Input(format!(
                "{n} observations for {} variables; need n > p + q",
                x.ncols() + y.ncols()
            )));
        }
        check_coords(&coords)?;
        if x.iter().chain(y.iter()).any(|v| !v.finite()) {
            return Err(GwccaError::Input("non-finite value in a variable block".into()));
        }
        Ok(SpatialDataset {
            ids,
            coords,
            x,
            y,
            x_names,
            y_names,
        })
    }

    /// Builds a dataset with generated ids (`0`, `1`, ...) and column names (`x1`, `y1`, ...).
    pub fn from_blocks(coords: Vec<Coord<T>>, x: DMatrix<T>, y: DMatrix<T>) -> Result<Self> {
        let ids = (0..coords.len()).map(|i| i.to_string()).collect();
        let x_names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let y_names = (1..=y.ncols()).map(|j| format!("y{j}")).collect();
        Self::new(ids, coords, x, y, x_names, y_names)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    /// Canonical rank, `min(p, q)`.
    pub fn psi(&self) -> usize {
        self.p().min(self.q())
    }
}

//! CSV reading and writing.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::SpatialDataset;
use crate::error::{GwccaError, Result};
use crate::pipeline::config::DataConfig;
use crate::scalar::Real;
use crate::synth::SyntheticTruth;

/// Number formatting for every export: 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn is_indexed(name: &str, prefix: char) -> bool {
    let mut chars = name.chars();
    chars.next() == Some(prefix) && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
    }
}

fn open_reader(path: &Path) -> Result<(csv::Reader<fs::File>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| GwccaError::csv(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| GwccaError::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    Ok((rdr, header))
}

fn column_index(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| GwccaError::MissingColumn {
            column: name.to_string(),
            path: path.display().to_string(),
        })
}

fn parse_cell<T: Real>(cell: &str, column: &str, line: usize, path: &Path) -> Result<T> {
    cell.parse::<f64>().map(T::lit).map_err(|_| {
        GwccaError::Input(format!(
            "{}: line {line}, column `{column}`: `{cell}` is not a number",
            path.display()
        ))
    })
}

/// A dataset read from CSV and the number of rows dropped for missing cells.
#[derive(Clone, Debug)]
pub struct Loaded<T: Real> {
    pub dataset: SpatialDataset<T>,
    pub dropped_rows: usize,
}

/// Reads a dataset. Rows with an empty declared cell are dropped and counted;
/// a cell that is present but not numeric is an error.
pub fn load_csv<T: Real>(path: &Path, schema: &DataConfig) -> Result<Loaded<T>> {
    let (mut rdr, header) = open_reader(path)?;
    let pick = |given: &[String], prefix: char| -> Vec<String> {
        if given.is_empty() {
            header.iter().filter(|h| is_indexed(h, prefix)).cloned().collect()
        } else {
            given.to_vec()
        }
    };
    let x_names = pick(&schema.x_columns, 'x');
    let y_names = pick(&schema.y_columns, 'y');
    if x_names.is_empty() || y_names.is_empty() {
        return Err(GwccaError::Input(format!(
            "{}: no {} columns declared or found",
            path.display(),
            if x_names.is_empty() { "X-set" } else { "Y-set" }
        )));
    }
    let id_col = column_index(&header, &schema.id, path)?;
    let cx = column_index(&header, &schema.x, path)?;
    let cy = column_index(&header, &schema.y, path)?;
    let xi = x_names
        .iter()
        .map(|c| column_index(&header, c, path))
        .collect::<Result<Vec<_>>>()?;
    let yi = y_names
        .iter()
        .map(|c| column_index(&header, c, path))
        .collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut xv: Vec<T> = Vec::new();
    let mut yv: Vec<T> = Vec::new();
    let mut dropped = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| GwccaError::csv(path, e))?;
        let line = row + 2;
        let numeric = || {
            [cx, cy]
                .into_iter()
                .chain(xi.iter().copied())
                .chain(yi.iter().copied())
        };
        if numeric()
            .chain([id_col])
            .any(|c| rec.get(c).is_none_or(str::is_empty))
        {
            dropped += 1;
            continue;
        }
        let val = |c: usize| parse_cell::<T>(&rec[c], &header[c], line, path);
        ids.push(rec[id_col].to_string());
        coords.push([val(cx)?, val(cy)?]);
        for &c in &xi {
            xv.push(val(c)?);
        }
        for &c in &yi {
            yv.push(val(c)?);
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing values", path.display());
    }
    if ids.is_empty() {
        return Err(GwccaError::Input(format!("{}: no usable rows", path.display())));
    }
    let n = ids.len();
    let x = DMatrix::from_row_slice(n, x_names.len(), &xv);
    let y = DMatrix::from_row_slice(n, y_names.len(), &yv);
    let dataset = SpatialDataset::new(ids, coords, x, y, x_names, y_names)?;
    Ok(Loaded {
        dataset,
        dropped_rows: dropped,
    })
}

/// Rows of strings written as one CSV file.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| GwccaError::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |e: csv::Error| GwccaError::csv(path, e);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| GwccaError::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| GwccaError::io(path, e))
}

/// Writes a dataset in the layout `load_csv` reads by default.
pub fn write_dataset_csv<T: Real>(path: &Path, dataset: &SpatialDataset<T>) -> Result<()> {
    let mut header = vec!["id".to_string(), "x".into(), "y".into()];
    header.extend(dataset.x_names.iter().cloned());
    header.extend(dataset.y_names.iter().cloned());
    let rows: Vec<Vec<String>> = (0..dataset.n())
        .map(|i| {
            let mut r = vec![
                dataset.ids[i].clone(),
                fmt_num(dataset.coords[i][0].as_f64()),
                fmt_num(dataset.coords[i][1].as_f64()),
            ];
            r.extend(dataset.x.row(i).iter().map(|v| fmt_num(v.as_f64())));
            r.extend(dataset.y.row(i).iter().map(|v| fmt_num(v.as_f64())));
            r
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Writes `id, x, y, rho1_true, rho2_true[, ...]`.
pub fn write_truth_csv<T: Real>(
    path: &Path,
    dataset: &SpatialDataset<T>,
    truth: &SyntheticTruth<T>,
) -> Result<()> {
    let mut header = vec!["id".to_string(), "x".into(), "y".into()];
    header.extend((1..=truth.rho_fields.len()).map(|j| format!("rho{j}_true")));
    let rows: Vec<Vec<String>> = (0..dataset.n())
        .map(|i| {
            let mut r = vec![
                dataset.ids[i].clone(),
                fmt_num(dataset.coords[i][0].as_f64()),
                fmt_num(dataset.coords[i][1].as_f64()),
            ];
            r.extend(truth.rho_fields.iter().map(|f| fmt_num(f[i].as_f64())));
            r
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Location ids with a matrix of the selected columns, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct IdTable {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

impl IdTable {
    /// Rows reordered to follow `ids`.
    pub fn aligned_to(&self, ids: &[String], path: &Path) -> Result<DMatrix<f64>> {
        let pos: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                pos.get(id.as_str()).copied().ok_or_else(|| {
                    GwccaError::Input(format!("{}: no row for location `{id}`", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(rows.len(), self.values.ncols(), |i, j| {
            self.values[(rows[i], j)]
        }))
    }
}

/// Reads `id` plus every column accepted by `keep`, ordered by the key it returns.
pub fn read_id_table(path: &Path, keep: impl Fn(&str) -> Option<usize>) -> Result<IdTable> {
    let (mut rdr, header) = open_reader(path)?;
    let id_col = column_index(&header, "id", path)?;
    let mut cols: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(c, h)| keep(h).map(|k| (k, c)))
        .collect();
    cols.sort();
    if cols.is_empty() {
        return Err(GwccaError::Input(format!(
            "{}: no value columns found",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    let mut vals = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| GwccaError::csv(path, e))?;
        ids.push(rec.get(id_col).unwrap_or_default().to_string());
        for &(_, c) in &cols {
            let cell = rec.get(c).unwrap_or_default();
            vals.push(parse_cell::<f64>(cell, &header[c], row + 2, path)?);
        }
    }
    if ids.is_empty() {
        return Err(GwccaError::Input(format!("{}: no rows", path.display())));
    }
    let values = DMatrix::from_row_slice(ids.len(), cols.len(), &vals);
    Ok(IdTable {
        ids,
        columns: cols.iter().map(|&(_, c)| header[c].clone()).collect(),
        values,
    })
}

/// `rho_<j>` column number.
pub fn rho_column(name: &str) -> Option<usize> {
    name.strip_prefix("rho_")?.parse().ok()
}

/// `rho<j>_true` column number.
pub fn truth_column(name: &str) -> Option<usize> {
    name.strip_prefix("rho")?.strip_suffix("_true")?.parse().ok()
}

/// Global correlations from a `variate, rho` file, in variate order.
pub fn read_global(path: &Path) -> Result<Vec<f64>> {
    let (mut rdr, header) = open_reader(path)?;
    let vc = column_index(&header, "variate", path)?;
    let rc = column_index(&header, "rho", path)?;
    let mut pairs = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| GwccaError::csv(path, e))?;
        let v: usize = rec.get(vc).unwrap_or_default().parse().map_err(|_| {
            GwccaError::Input(format!(
                "{}: line {}: bad variate number",
                path.display(),
                row + 2
            ))
        })?;
        pairs.push((
            v,
            parse_cell::<f64>(rec.get(rc).unwrap_or_default(), "rho", row + 2, path)?,
        ));
    }
    pairs.sort_by_key(|p| p.0);
    if pairs.is_empty() || pairs.iter().enumerate().any(|(i, p)| p.0 != i + 1) {
        return Err(GwccaError::Input(format!(
            "{}: variates must run 1, 2, ... without gaps",
            path.display()
        )));
    }
    Ok(pairs.into_iter().map(|p| p.1).collect())
}

//! Run configuration, read from TOML.
//!
//! ```toml
//! [data]
//! path = "counties.csv"
//! id = "fips"
//! x = "easting"
//! y = "northing"
//! x_columns = ["poverty", "uninsured"]
//! y_columns = ["diabetes", "obesity"]
//!
//! [preprocess]
//! standardize = true
//! collinearity_threshold = 0.7
//!
//! [kernel]
//! family = "gaussian"
//! k = 100            # or: bandwidth = 0.25; omit both to scan
//!
//! [scan]
//! candidates = 30
//!
//! [selection]
//! patience = 2
//!
//! [run]
//! seed = 0
//! threads = 4
//! out = "results/run1"
//! ```
//!
//! Every section and key is optional. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GwccaError, Result};
use crate::kernels::KernelFamily;
use crate::selection::SelectionConfig;
use crate::synth::{SynthParams1, SynthParams2};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub kernel: KernelConfig,
    pub scan: ScanConfig,
    pub selection: SelectionConfig,
    pub run: RunConfig,
    pub synth: SynthConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub id: String,
    pub x: String,
    pub y: String,
    /// Empty means every column named `x<digits>`.
    pub x_columns: Vec<String>,
    /// Empty means every column named `y<digits>`.
    pub y_columns: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            id: "id".into(),
            x: "x".into(),
            y: "y".into(),
            x_columns: Vec::new(),
            y_columns: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub standardize: bool,
    /// Pairwise |r| above which one variable of a pair is dropped; absent disables the filter.
    pub collinearity_threshold: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            standardize: true,
            collinearity_threshold: Some(0.7),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    /// Fixed adaptive bandwidth (neighbour count).
    pub k: Option<usize>,
    /// Fixed distance bandwidth.
    pub bandwidth: Option<f64>,
    pub ridge: f64,
    /// Flip loadings to agree with the nearest earlier location.
    pub align_signs: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: KernelFamily::Gaussian,
            k: None,
            bandwidth: None,
            ridge: 0.0,
            align_signs: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Number of geometrically spaced candidates.
    pub candidates: usize,
    /// Explicit ascending candidate list; overrides `candidates`.
    pub ks: Option<Vec<usize>>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            candidates: 30,
            ks: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses the machine's parallelism.
    pub threads: usize,
    pub out: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dataset: u8,
    pub dataset1: SynthParams1,
    pub dataset2: SynthParams2,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dataset: 1,
            dataset1: SynthParams1::default(),
            dataset2: SynthParams2::default(),
        }
    }
}

/// How the bandwidth is decided.
#[derive(Clone, Debug, PartialEq)]
pub enum BandwidthChoice {
    Scan(Vec<usize>),
    ScanGrid(usize),
    FixedK(usize),
    FixedDistance(f64),
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)
            .map_err(|e| GwccaError::Configuration(format!("malformed configuration: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GwccaError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn bandwidth_choice(&self) -> Result<BandwidthChoice> {
        match (self.kernel.k, self.kernel.bandwidth) {
            (Some(_), Some(_)) => Err(GwccaError::Configuration(
                "set either a neighbour count k or a distance bandwidth, not both".into(),
            )),
            (Some(k), None) => Ok(BandwidthChoice::FixedK(k)),
            (None, Some(r)) => Ok(BandwidthChoice::FixedDistance(r)),
            (None, None) => Ok(match &self.scan.ks {
                Some(ks) => BandwidthChoice::Scan(ks.clone()),
                None => BandwidthChoice::ScanGrid(self.scan.candidates),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: GwccaError| GwccaError::Configuration(e.to_string());
        self.selection.validate().map_err(as_config)?;
        self.bandwidth_choice()?;
        if let Some(t) = self.preprocess.collinearity_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(GwccaError::Configuration(format!(
                    "collinearity_threshold must lie in [0, 1], got {t}"
                )));
            }
        }
        if !(self.kernel.ridge >= 0.0) {
            return Err(GwccaError::Configuration(format!(
                "ridge must be >= 0, got {}",
                self.kernel.ridge
            )));
        }
        if self.scan.candidates == 0 {
            return Err(GwccaError::Configuration(
                "scan.candidates must be positive".into(),
            ));
        }
        if !matches!(self.synth.dataset, 1 | 2) {
            return Err(GwccaError::Configuration(format!(
                "synth.dataset must be 1 or 2, got {}",
                self.synth.dataset
            )));
        }
        Ok(())
    }
}

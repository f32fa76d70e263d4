use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use embsurr_core::digest::fnv1a64;
use embsurr_core::gp::GpConfig;
use embsurr_core::spfp::SpfpConfig;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Half-open seed range `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(self) -> impl Iterator<Item = u64> {
        self.start..self.end
    }

    pub fn len(self) -> usize {
        self.end.saturating_sub(self.start) as usize
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, end: 30 }
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("seed range {s:?} is not of the form a..b"))?;
        let start = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
        let end = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
        if end <= start {
            return Err(format!("seed range {s:?} is empty"));
        }
        Ok(Self { start, end })
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub bootstraps: usize,
    pub bootstrap_seed: u64,
    /// Coordinates with the largest importance that get effect curves.
    pub top_dims: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { bootstraps: 200, bootstrap_seed: 0, top_dims: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// EMBD or CSV file; relative paths resolve against the config file.
    pub dataset: PathBuf,
    pub val_fraction: f64,
    /// Seed of the stratified validation split, shared by every run.
    pub split_seed: u64,
    pub zscore_epsilon: f64,
    /// Average adjacent coordinate pairs within each tower before scaling.
    pub pool: bool,
    pub spfp: SpfpConfig,
    pub gp: GpConfig,
    pub seeds: SeedRange,
    pub analysis: AnalysisConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            val_fraction: 0.1,
            split_seed: 0,
            zscore_epsilon: 1e-8,
            pool: false,
            spfp: SpfpConfig::default(),
            gp: GpConfig::default(),
            seeds: SeedRange::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: StudyConfig = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if config.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                config.dataset = dir.join(&config.dataset);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Validation("config names no dataset".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Validation(format!("val_fraction {} outside (0, 1)", self.val_fraction)));
        }
        if self.zscore_epsilon <= 0.0 {
            return Err(Error::Validation("zscore_epsilon must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation(format!("seed range {} is empty", self.seeds)));
        }
        self.gp.validate()?;
        Ok(())
    }

    /// FNV-1a-64 of the canonical JSON of everything that shapes results.
    ///
    /// The seed list, dataset path and analysis settings are left out, so a
    /// study can be extended with more seeds or moved without invalidating
    /// finished runs. The dataset itself is tracked by its own digest.
    pub fn digest(&self) -> u64 {
        let shaping = serde_json::json!({
            "val_fraction": self.val_fraction,
            "split_seed": self.split_seed,
            "zscore_epsilon": self.zscore_epsilon,
            "pool": self.pool,
            "spfp": self.spfp,
            "gp": self.gp,
        });
        fnv1a64(shaping.to_string().as_bytes())
    }
}

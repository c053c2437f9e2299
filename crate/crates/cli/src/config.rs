use std::path::{Path, PathBuf};

use serde::Deserialize;

use povmlab::{Error, Result};

pub const SEED_ENV: &str = "POVMLAB_SEED";
pub const DEFAULT_SEED: u64 = 2024;

/// Run configuration; every field may come from the JSON file and be
/// overridden by the matching flag.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub observable: Option<String>,
    pub analyzers: Vec<String>,
    /// Shrinking-family specs, e.g. `shrinking-arc:start=0,length=3.14`.
    pub families: Vec<String>,
    pub count: Option<usize>,
    /// Explicit sets in the set syntax, e.g. `[0,1)∪[2,3)`.
    pub sets: Vec<String>,
    pub dims: Vec<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reference: Option<String>,
    pub probe_set: Option<String>,
    pub state: Option<String>,
    pub cells: Option<String>,
    pub samples: Option<u64>,
    pub kernel: Option<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { input: path.display().to_string(), reason: e.to_string() })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse { input: path.display().to_string(), reason: e.to_string() })
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overridden_by(mut self, flags: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$( if flags.$f.is_some() { self.$f = flags.$f; } )*};
        }
        macro_rules! take_vec {
            ($($f:ident),*) => {$( if !flags.$f.is_empty() { self.$f = flags.$f; } )*};
        }
        take!(observable, count, seed, out, reference, probe_set, state, cells, samples, kernel);
        take_vec!(analyzers, families, sets, dims);
        self
    }

    /// Seed after the environment override.
    pub fn resolved_seed(&self) -> Result<u64> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Parse {
                input: v.clone(),
                reason: format!("{SEED_ENV} must be a natural number"),
            }),
            Err(_) => Ok(self.seed.unwrap_or(DEFAULT_SEED)),
        }
    }
}

//! Settings from an optional TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use seqcoref::corpus::{Format, PrepConfig};
use seqcoref::linearize::{Scheme, SchemeKind};
use seqcoref::metrics::Profile;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub scheme: Option<SchemeKind>,
    pub sentence_markers: Option<bool>,
    pub gap_slope: Option<f64>,
    pub beam: Option<usize>,
    pub profile: Option<Profile>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub data_root: Option<PathBuf>,
    pub prep: Option<PrepConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))
    }
}

/// Effective settings for one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub scheme: Scheme,
    pub gap_slope: f64,
    pub beam: usize,
    pub profile: Profile,
    pub format: Option<Format>,
    pub seed: u64,
    pub jobs: usize,
    pub data_root: Option<PathBuf>,
    pub prep: PrepConfig,
}

impl Settings {
    /// Resolves an input path against the data root when it is relative
    /// and not present as given.
    pub fn input(&self, path: &Path) -> PathBuf {
        match &self.data_root {
            Some(root) if path.is_relative() && !path.exists() => root.join(path),
            _ => path.to_path_buf(),
        }
    }
}

pub struct Overrides {
    pub scheme: Option<SchemeKind>,
    pub sentence_markers: bool,
    pub gap_slope: Option<f64>,
    pub beam: Option<usize>,
    pub profile: Option<Profile>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub data_root: Option<PathBuf>,
}

pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Settings, CliError> {
    let markers = flags.sentence_markers || file.sentence_markers.unwrap_or(false);
    let fallback = if markers { SchemeKind::PartialToken } else { SchemeKind::FullToken };
    let kind = flags.scheme.or(file.scheme).unwrap_or(fallback);
    let scheme = Scheme::new(kind, markers).map_err(|e| CliError::Usage(e.to_string()))?;
    let gap_slope = flags.gap_slope.or(file.gap_slope).unwrap_or(0.0);
    if !gap_slope.is_finite() || gap_slope < 0.0 {
        return Err(CliError::Usage(format!("gap slope must be a non-negative number, got {gap_slope}")));
    }
    let beam = flags.beam.or(file.beam).unwrap_or(4);
    if beam == 0 {
        return Err(CliError::Usage("beam width must be at least 1".into()));
    }
    let prep = file.prep.unwrap_or_default();
    prep.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Settings {
        scheme,
        gap_slope,
        beam,
        profile: flags.profile.or(file.profile).unwrap_or_default(),
        format: flags.format.or(file.format),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        jobs: flags.jobs.or(file.jobs).unwrap_or(1).max(1),
        data_root: flags.data_root.or(file.data_root),
        prep,
    })
}

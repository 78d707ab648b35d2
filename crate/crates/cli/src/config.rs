//! Settings resolution: command-line flags, then the `--config` file, then
//! the `ABSA_ENDPOINT` environment variable, then built-in defaults.

use std::path::{Path, PathBuf};

use absa_core::backends::RemoteEndpointConfig;
use absa_core::corpus::ConflictPolicy;
use absa_core::metrics::{MatchMode, NormConfig};
use absa_core::pipeline::FilterConfig;
use absa_core::report::Format;
use clap::ValueEnum;
use serde::Deserialize;

use crate::CliError;

pub const ENDPOINT_ENV: &str = "ABSA_ENDPOINT";
pub const DEFAULT_OUT: &str = "absa-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Lexicon,
    Replay,
    Remote,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Lexicon => "lexicon",
            BackendKind::Replay => "replay",
            BackendKind::Remote => "remote",
        }
    }
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub ate: Option<BackendKind>,
    pub asc: Option<BackendKind>,
    pub fixtures: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub conflict: Option<ConflictPolicy>,
    pub out: Option<PathBuf>,
    pub format: Option<Vec<Format>>,
    pub tolerance: Option<f64>,
    pub match_mode: Option<MatchMode>,
    pub filter: Option<FilterConfig>,
    pub norm: Option<NormConfig>,
    /// Client settings for the remote backend; `base_url` is taken from the endpoint.
    pub remote: Option<RemoteEndpointConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved settings for commands that touch backends.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub corpus: PathBuf,
    pub ate: BackendKind,
    pub asc: BackendKind,
    pub fixtures: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub remote: RemoteEndpointConfig,
    pub parallelism: usize,
    pub conflict: ConflictPolicy,
    pub filter: FilterConfig,
    pub norm: NormConfig,
    pub match_mode: MatchMode,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

/// Flags shared by `run`, `score` and `record`, before resolution.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub ate: Option<BackendKind>,
    pub asc: Option<BackendKind>,
    pub fixtures: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub conflict: Option<ConflictPolicy>,
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl CliConfig {
    pub fn resolve(flags: Overrides, file: &FileConfig, default_backend: BackendKind) -> Result<CliConfig, CliError> {
        let corpus = flags
            .corpus
            .or_else(|| file.corpus.clone())
            .ok_or_else(|| CliError::input("no corpus given (use --corpus)"))?;
        let parallelism = flags.parallelism.or(file.parallelism).unwrap_or(1);
        if parallelism == 0 {
            return Err(CliError::input("--parallelism must be at least 1"));
        }
        let endpoint = flags
            .endpoint
            .or_else(|| file.endpoint.clone())
            .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|v| !v.trim().is_empty()));
        let mut remote = file.remote.clone().unwrap_or_default();
        if let Some(url) = &endpoint {
            remote.base_url = url.clone();
        }
        let formats = if !flags.formats.is_empty() {
            flags.formats
        } else {
            file.format.clone().unwrap_or_else(|| vec![Format::Json, Format::Csv, Format::Markdown])
        };
        let filter = file.filter.clone().unwrap_or_default();
        filter.validate().map_err(CliError::input)?;
        Ok(CliConfig {
            corpus,
            ate: flags.ate.or(file.ate).unwrap_or(default_backend),
            asc: flags.asc.or(file.asc).unwrap_or(default_backend),
            fixtures: flags.fixtures.or_else(|| file.fixtures.clone()),
            endpoint,
            lexicon: flags.lexicon.or_else(|| file.lexicon.clone()),
            remote,
            parallelism,
            conflict: flags.conflict.or(file.conflict).unwrap_or_default(),
            filter,
            norm: file.norm.clone().unwrap_or_default(),
            match_mode: file.match_mode.unwrap_or_default(),
            out: flags.out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            formats,
        })
    }

    /// Rejects settings that name a backend's resources without selecting it.
    pub fn check_backends(&self, kinds: &[BackendKind]) -> Result<(), CliError> {
        let uses = |k| kinds.contains(&k);
        if uses(BackendKind::Replay) && self.fixtures.is_none() {
            return Err(CliError::input("replay backend needs --fixtures"));
        }
        if !uses(BackendKind::Replay) && self.fixtures.is_some() {
            return Err(CliError::input("--fixtures given but no replay backend selected"));
        }
        if uses(BackendKind::Remote) && self.endpoint.is_none() {
            return Err(CliError::input(format!("remote backend needs --endpoint or {ENDPOINT_ENV}")));
        }
        if !uses(BackendKind::Lexicon) && self.lexicon.is_some() {
            return Err(CliError::input("--lexicon given but no lexicon backend selected"));
        }
        Ok(())
    }
}

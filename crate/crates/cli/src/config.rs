//! Run configuration: a single JSON file provides defaults, command-line
//! flags override individual values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use powercast::error::{Error, Result};
use powercast::{BacktestConfig, SimulationConfig, SynthConfig};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub prices: Option<PathBuf>,
    pub futures: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub max_fill_days: Option<u32>,
    pub backtest: Option<BacktestConfig>,
    pub simulation: Option<SimulationConfig>,
    pub synth: Option<SynthConfig>,
}

/// Resolved global context for one invocation.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub file: FileConfig,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
}

impl RunContext {
    pub fn load(
        config_path: Option<&Path>,
        out_flag: Option<PathBuf>,
        seed_override: Option<u64>,
    ) -> Result<Self> {
        let file = match config_path {
            None => FileConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::schema(path, e.line(), e.to_string()))?
            }
        };
        let out_dir = out_flag
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(RunContext {
            file,
            out_dir,
            seed_override,
        })
    }

    pub fn ensure_out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        Ok(&self.out_dir)
    }

    /// Resolve an input path: the flag wins, the config file is the
    /// fallback. The file must exist.
    pub fn input(
        &self,
        flag: Option<PathBuf>,
        from_config: Option<&PathBuf>,
        what: &str,
    ) -> Result<PathBuf> {
        let path = flag
            .or_else(|| from_config.cloned())
            .ok_or_else(|| Error::domain(format!("no {what} file given (flag or config)")))?;
        if !path.exists() {
            return Err(Error::io(
                &path,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{what} file not found"),
                ),
            ));
        }
        Ok(path)
    }

    pub fn max_fill_days(&self) -> u32 {
        self.file.max_fill_days.unwrap_or(7)
    }
}

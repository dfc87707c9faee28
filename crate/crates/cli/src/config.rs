use std::path::{Path, PathBuf};

use ipdg_qmc::experiment::VectorSource;
use ipdg_qmc::{Error, ExperimentConfig, Result};

/// Parses and validates a TOML configuration. Relative `vector` and `out`
/// paths are resolved against the directory of the file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display()))?;
    let mut config = parse_config_str(&text).map_err(|e| e.context(path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    if let VectorSource::File(p) = &config.vector {
        config.vector = VectorSource::File(resolve(base, p));
    }
    config.out = resolve(base, &config.out);
    Ok(config)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Validation(e.to_string().trim_end().to_string()))?;
    config.validate()?;
    Ok(config)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

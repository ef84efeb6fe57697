//! Config files, found by explicit path or in `$RPU_CONFIG_DIR`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::formats::{read, FormatError};

pub const CONFIG_DIR_VAR: &str = "RPU_CONFIG_DIR";

/// Default file names inside the config directory.
pub const MACHINE_FILE: &str = "machine.json";
pub const CHIPS_FILE: &str = "chips.json";
pub const IO_FILE: &str = "io.json";
pub const WORKLOAD_FILE: &str = "workload.json";

pub fn config_dir() -> Option<PathBuf> {
    std::env::var_os(CONFIG_DIR_VAR).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// `explicit` if given, else `name` in the config directory if it exists.
pub fn locate(explicit: Option<&Path>, name: &str) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let p = config_dir()?.join(name);
    p.is_file().then_some(p)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| FormatError::Json(format!("{}: {e}", path.display())))
}

pub fn load<T: DeserializeOwned>(explicit: Option<&Path>, name: &str) -> Result<Option<T>, FormatError> {
    locate(explicit, name).map(|p| load_json(&p)).transpose()
}

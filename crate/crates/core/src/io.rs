//! Configuration files: cusp lattices, branch-divisor overrides and golden values.
//!
//! Layout of a config directory:
//!
//! ```text
//! lattices/*.json   {"label", "d", "n", "gram"}
//! branch/d<d>.json  BranchConfig
//! goldens.json      free-form object of expected values
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::CuspLattice;
use crate::cone::BranchConfig;
use crate::lattice::{CuspStratum, GramLattice, LatticeError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Lattice {
        path: String,
        #[source]
        source: LatticeError,
    },
    #[error("{path}: no stratum N = {n} for d = {d}")]
    Stratum { path: String, d: u64, n: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeEntry {
    pub label: String,
    pub d: u64,
    pub n: u64,
    pub gram: Vec<Vec<i64>>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    serde_json::from_str(&read(path)?).map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })
}

/// Sorted `.json` files directly under `dir`; a missing directory is empty.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>, ConfigError> {
    if !dir.is_dir() {
        return Ok(vec![]);
    }
    let rd = fs::read_dir(dir).map_err(|source| ConfigError::Read { path: dir.display().to_string(), source })?;
    let mut out: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

/// Every lattice entry under `config/lattices`, validated as an even positive-definite lattice.
pub fn load_lattices(config: &Path) -> Result<Vec<(PathBuf, CuspLattice)>, ConfigError> {
    let mut out = Vec::new();
    for path in json_files(&config.join("lattices"))? {
        let e: LatticeEntry = read_json(&path)?;
        let p = path.display().to_string();
        let lattice = GramLattice::new(e.gram).map_err(|source| ConfigError::Lattice { path: p.clone(), source })?;
        let stratum = CuspStratum::new(e.d, e.n).ok_or(ConfigError::Stratum { path: p, d: e.d, n: e.n })?;
        out.push((path, CuspLattice { label: e.label, stratum, lattice }));
    }
    Ok(out)
}

pub fn lattices_for(config: &Path, d: u64) -> Result<Vec<CuspLattice>, ConfigError> {
    Ok(load_lattices(config)?.into_iter().map(|(_, l)| l).filter(|l| l.stratum.d == d).collect())
}

/// `branch/d<d>.json` if present.
pub fn branch_override(config: &Path, d: u64) -> Result<Option<(PathBuf, BranchConfig)>, ConfigError> {
    let path = config.join("branch").join(format!("d{d}.json"));
    if !path.is_file() {
        return Ok(None);
    }
    let b: BranchConfig = read_json(&path)?;
    Ok(Some((path, b)))
}

pub fn lattice_entry(label: &str, stratum: &CuspStratum, g: &GramLattice) -> LatticeEntry {
    LatticeEntry { label: label.to_string(), d: stratum.d, n: stratum.n, gram: g.gram.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_dir_is_empty() {
        assert!(load_lattices(Path::new("/nonexistent/k3nl")).unwrap().is_empty());
    }
}

//! Run manifests: command, parameters and SHA-256 of every config file read.
//! Nothing time- or host-dependent goes in, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub params: BTreeMap<String, Value>,
    pub config_hashes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            params: BTreeMap::new(),
            config_hashes: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) {
        self.params.insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
    }

    /// Records the file's hash; unreadable files are recorded as such and fail later on read.
    pub fn hash_file(&mut self, path: &Path) {
        let h = match std::fs::read(path) {
            Ok(bytes) => format!("{:x}", Sha256::digest(&bytes)),
            Err(e) => format!("unreadable: {e}"),
        };
        self.config_hashes.insert(path.display().to_string(), h);
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_sorted() {
        let mut m = Manifest::new("x");
        m.param("b", 1);
        m.param("a", 2);
        let s = serde_json::to_string(&m.to_json()).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }
}

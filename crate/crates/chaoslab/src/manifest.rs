//! Run manifests and error records.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Hex form of the first 8 bytes of SHA-256 over the rendered config.
pub fn config_hash(rendered: &str) -> String {
    let digest = Sha256::digest(rendered.as_bytes());
    hex::encode(&digest[..8])
}

/// SHA-256 of a byte string, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub kind: String,
    pub rows: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub subcommand: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub error: String,
    /// Module that raised the error (`config`, `kernels`, `sde_engine`, ...).
    pub origin: String,
    /// Absent when the config could not be resolved.
    pub config_hash: Option<String>,
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_16_hex_digits_of_sha256() {
        // SHA-256("abc") = ba7816bf8f01cfea...
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea");
        assert_eq!(config_hash("abd").len(), 16);
    }

    #[test]
    fn manifest_serializes_every_field() {
        let m = RunManifest {
            config_hash: "00".into(),
            tool_version: "0.1.0".into(),
            seed: 3,
            subcommand: "simulate".into(),
            started: now_rfc3339(),
            finished: now_rfc3339(),
            outputs: vec![OutputRecord { path: "a.csv".into(), kind: "csv".into(), rows: 2 }],
        };
        let json = serde_json::to_string(&m).unwrap();
        for key in ["config_hash", "tool_version", "seed", "started", "finished", "outputs", "rows"] {
            assert!(json.contains(key));
        }
        assert_eq!(serde_json::from_str::<RunManifest>(&json).unwrap(), m);
    }
}

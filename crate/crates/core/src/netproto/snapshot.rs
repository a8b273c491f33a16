//! Versioned JSON snapshot of a server: public key, comparison key and every entry in
//! index order. No private-key material is ever part of a snapshot.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wire::encode_bytes;
use crate::keyfile::{int_from_hex, int_to_hex, ComparisonKeyFile, PublicKeyFile};
use crate::ostore::{EncryptedIndex, IndexEntry};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported snapshot version {0}")]
    VersionMismatch(u32),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub id: u64,
    pub key_hex: String,
    pub payload_b64: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct SnapshotDocument {
    pub version: u32,
    pub pk: PublicKeyFile,
    pub ck: ComparisonKeyFile,
    pub entries: Vec<SnapshotEntry>,
}

impl SnapshotDocument {
    pub fn capture(index: &EncryptedIndex) -> Self {
        SnapshotDocument {
            version: SNAPSHOT_VERSION,
            pk: PublicKeyFile::from_key(index.public_key()),
            ck: ComparisonKeyFile::from_key(index.comparison_key()),
            entries: index
                .iter()
                .map(|e| SnapshotEntry {
                    id: e.entry_id,
                    key_hex: int_to_hex(e.key.value()),
                    payload_b64: encode_bytes(&e.payload),
                })
                .collect(),
        }
    }

    /// Rebuilds the index, re-validating every key and re-deriving the order.
    pub fn rebuild(&self) -> Result<EncryptedIndex, SnapshotError> {
        use base64::Engine;
        if self.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::VersionMismatch(self.version));
        }
        let corrupt = |e: crate::Error| SnapshotError::Corrupt(e.to_string());
        let pk = self.pk.to_key().map_err(corrupt)?;
        let ck = self.ck.to_key(&pk).map_err(corrupt)?;
        let mut index = EncryptedIndex::new(pk, ck).map_err(corrupt)?;
        for e in &self.entries {
            let value = int_from_hex(&e.key_hex)
                .ok_or_else(|| SnapshotError::Corrupt(format!("entry {} key is not hex", e.id)))?;
            let key = index.public_key().ciphertext_from_value(value).map_err(corrupt)?;
            let payload = base64::engine::general_purpose::STANDARD
                .decode(&e.payload_b64)
                .map_err(|_| SnapshotError::Corrupt(format!("entry {} payload is not base64", e.id)))?;
            index
                .insert_entry(IndexEntry {
                    entry_id: e.id,
                    key,
                    payload,
                })
                .map_err(corrupt)?;
        }
        Ok(index)
    }

    pub fn write_to(&self, path: &Path) -> Result<(), SnapshotError> {
        let json = serde_json::to_vec_pretty(self).expect("snapshot always serializes");
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, json)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, SnapshotError> {
        let bytes = fs::read(path)?;
        // look at the version first so a future format is reported as such
        let raw: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == SNAPSHOT_VERSION as u64 => {}
            Some(v) => return Err(SnapshotError::VersionMismatch(v as u32)),
            None => return Err(SnapshotError::Corrupt("missing version".into())),
        }
        serde_json::from_value(raw).map_err(|e| SnapshotError::Corrupt(e.to_string()))
    }
}

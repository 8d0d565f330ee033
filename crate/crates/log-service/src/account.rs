//! Per-account state: `state.json` (rewritten atomically on every change),
//! the record store, and one `presig-<batch>.bin` file per uploaded batch.
//!
//! Consumed presignature indices are not kept in `state.json`: each FIDO2
//! record carries the index it consumed, so the record append is also the
//! consumption and the two cannot disagree after a crash.

use std::collections::HashMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use larch_core::api::{BatchInfo, BatchStatus};
use larch_core::crypto::{Point, Scalar};
use larch_core::ecdsa2p::{decode_batch_file, CompressedLogHalf, UsedIndices};
use larch_core::record::StoredRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::store::{Entry, RecordStore};

pub const STATE_FILE: &str = "state.json";
const STATE_VERSION: u32 = 1;

/// Fixed-size byte strings stored as hex.
mod hex32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).ok().and_then(|v| v.try_into().ok()).ok_or_else(|| serde::de::Error::custom("expected 32 hex bytes"))
    }
}

mod hexvec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchState {
    pub id: u64,
    pub start: u64,
    pub count: u32,
    pub uploaded_ms: u64,
    pub activates_ms: u64,
    pub objected: bool,
    #[serde(with = "hex32")]
    pub log_seed: [u8; 32],
}

impl BatchState {
    pub fn contains(&self, index: u64) -> bool {
        index >= self.start && index - self.start < self.count as u64
    }

    pub fn end(&self) -> u64 {
        self.start + self.count as u64
    }

    pub fn info(&self, now_ms: u64) -> BatchInfo {
        let status = if self.objected {
            BatchStatus::Objected
        } else if now_ms >= self.activates_ms {
            BatchStatus::Active
        } else {
            BatchStatus::Pending
        };
        BatchInfo {
            id: self.id,
            start: self.start,
            count: self.count,
            status,
            uploaded_ms: self.uploaded_ms,
            activates_ms: self.activates_ms,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fido2State {
    #[serde(with = "hex32")]
    pub cm: [u8; 32],
    /// The log's signing-key share `x`.
    #[serde(with = "hex32")]
    pub x: [u8; 32],
    /// The client's record-signing verification key.
    #[serde(with = "hexvec")]
    pub integrity_key: Vec<u8>,
    pub batches: Vec<BatchState>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TotpEntry {
    #[serde(with = "hexvec")]
    pub id: Vec<u8>,
    #[serde(with = "hex32")]
    pub key_share: [u8; 32],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TotpState {
    pub version: u64,
    pub entries: Vec<TotpEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PwState {
    #[serde(with = "hex32")]
    pub k: [u8; 32],
    /// The client's ElGamal key `X`.
    #[serde(with = "hexvec")]
    pub client_key: Vec<u8>,
    /// Registered `Hash(id)` values, compressed.
    #[serde(default)]
    pub hashes: Vec<String>,
    pub version: u64,
    #[serde(with = "hex32")]
    pub padding_seed: [u8; 32],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccountState {
    pub format: u32,
    pub id: String,
    /// SHA-256 of the bearer token.
    pub token_hash: String,
    pub created_ms: u64,
    pub fido2: Fido2State,
    pub totp: TotpState,
    pub pw: PwState,
    pub next_batch: u64,
}

impl AccountState {
    pub fn new(id: String, token: &str, created_ms: u64, fido2: Fido2State, pw: PwState) -> AccountState {
        AccountState {
            format: STATE_VERSION,
            id,
            token_hash: token_hash(token),
            created_ms,
            fido2,
            totp: TotpState::default(),
            pw,
            next_batch: 0,
        }
    }

    pub fn log_key(&self) -> Scalar {
        Scalar::from_bytes(&self.fido2.x).expect("stored scalar is canonical")
    }

    pub fn pw_key(&self) -> Scalar {
        Scalar::from_bytes(&self.pw.k).expect("stored scalar is canonical")
    }

    pub fn pw_hashes(&self) -> Vec<Point> {
        self.pw
            .hashes
            .iter()
            .map(|h| hex::decode(h).ok().and_then(|b| Point::from_slice(&b)).expect("stored point is valid"))
            .collect()
    }
}

pub fn token_hash(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

pub struct Account {
    pub dir: PathBuf,
    pub state: AccountState,
    pub store: RecordStore,
    pub used: UsedIndices,
    halves: HashMap<u64, Arc<Vec<CompressedLogHalf>>>,
}

fn batch_path(dir: &Path, id: u64) -> PathBuf {
    dir.join(format!("presig-{id}.bin"))
}

/// Writes `bytes` to `path` through a synced temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        if let Ok(d) = std::fs::File::open(parent) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

impl Account {
    pub fn create(dir: PathBuf, state: AccountState, first_batch: &[u8]) -> io::Result<Account> {
        std::fs::create_dir_all(&dir)?;
        write_atomic(&batch_path(&dir, 0), first_batch)?;
        let store = RecordStore::open(&dir)?;
        let a = Account { dir, state, store, used: UsedIndices::new(), halves: HashMap::new() };
        a.save()?;
        Ok(a)
    }

    pub fn load(dir: PathBuf) -> io::Result<Account> {
        let bytes = std::fs::read(dir.join(STATE_FILE))?;
        let state: AccountState =
            serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let store = RecordStore::open(&dir)?;
        let mut used = UsedIndices::new();
        for e in store.entries() {
            if let Entry::Record(StoredRecord { presig_index: Some(i), .. }) = e {
                let _ = used.mark(*i);
            }
        }
        Ok(Account { dir, state, store, used, halves: HashMap::new() })
    }

    pub fn save(&self) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(&self.state).expect("state serializes");
        write_atomic(&self.dir.join(STATE_FILE), &json)
    }

    pub fn write_batch(&self, id: u64, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&batch_path(&self.dir, id), bytes)
    }

    pub fn delete_batch(&mut self, id: u64) -> io::Result<()> {
        self.halves.remove(&id);
        match std::fs::remove_file(batch_path(&self.dir, id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    /// The explicit log half for `index` in batch `id`, loading the file on
    /// first use.
    pub fn log_half(&mut self, id: u64, index: u64) -> io::Result<CompressedLogHalf> {
        if !self.halves.contains_key(&id) {
            let bytes = std::fs::read(batch_path(&self.dir, id))?;
            let (_, halves) =
                decode_batch_file(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            self.halves.insert(id, Arc::new(halves));
        }
        let b = self.state.fido2.batches.iter().find(|b| b.id == id).expect("batch exists");
        Ok(self.halves[&id][(index - b.start) as usize])
    }
}

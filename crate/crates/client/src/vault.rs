//! The client's secrets: a versioned JSON file with hex-encoded fields.
//!
//! Saves go through a synced temporary file and a rename, so a failed
//! command never leaves a half-written vault. A sidecar `.lock` file held
//! for the lifetime of a [`VaultFile`] keeps two invocations apart.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fs2::FileExt;
use larch_core::api::Credentials;
use larch_core::crypto::{Point, Scalar};
use serde::{Deserialize, Serialize};

pub const VAULT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fido2Rp {
    pub name: String,
    #[serde(with = "hex::serde")]
    pub y: [u8; 32],
    #[serde(with = "hex::serde")]
    pub pk: Vec<u8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VaultBatch {
    pub id: u64,
    pub start: u64,
    #[serde(with = "hex::serde")]
    pub client_seed: [u8; 32],
    /// `f(R)` per index, hex; all zeros marks a void index.
    pub ts: Vec<String>,
}

impl VaultBatch {
    pub fn end(&self) -> u64 {
        self.start + self.ts.len() as u64
    }

    pub fn t(&self, index: u64) -> Option<Scalar> {
        let s = self.ts.get(index.checked_sub(self.start)? as usize)?;
        let bytes: [u8; 32] = hex::decode(s).ok()?.try_into().ok()?;
        Scalar::from_bytes(&bytes).filter(|t| !t.is_zero())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fido2Vault {
    #[serde(with = "hex::serde")]
    pub log_key: Vec<u8>,
    pub zk_reps: u16,
    pub rps: Vec<Fido2Rp>,
    pub batches: Vec<VaultBatch>,
    /// Indices this client has started a signature with.
    pub used: Vec<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TotpRp {
    pub name: String,
    #[serde(with = "hex::serde")]
    pub id: [u8; 16],
    #[serde(with = "hex::serde")]
    pub k_client: [u8; 32],
    /// Unregistered entries stay so old records still resolve in audits.
    #[serde(default)]
    pub removed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PwRp {
    pub name: String,
    #[serde(with = "hex::serde")]
    pub id: [u8; 16],
    #[serde(with = "hex::serde")]
    pub k_id: Vec<u8>,
    /// The password was imported and renders as its original string.
    #[serde(default)]
    pub imported: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PwVault {
    #[serde(with = "hex::serde")]
    pub x: [u8; 32],
    #[serde(with = "hex::serde")]
    pub log_key: Vec<u8>,
    pub rps: Vec<PwRp>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vault {
    pub version: u32,
    pub log_url: String,
    pub credentials: Credentials,
    /// Archive key and the nonce of the log's commitment to it.
    #[serde(with = "hex::serde")]
    pub k: [u8; 32],
    #[serde(with = "hex::serde")]
    pub r: [u8; 32],
    /// Signs record ciphertexts.
    #[serde(with = "hex::serde")]
    pub integrity_sk: [u8; 32],
    pub fido2: Fido2Vault,
    pub totp: Vec<TotpRp>,
    pub pw: PwVault,
    /// Records seen by the last audit; fewer on a later audit means the log
    /// lost or dropped some.
    #[serde(default)]
    pub audited: u64,
}

fn scalar(b: &[u8; 32]) -> Scalar {
    Scalar::from_bytes(b).expect("vault scalar is canonical")
}

fn point(b: &[u8]) -> Point {
    Point::from_slice(b).expect("vault point is valid")
}

impl Vault {
    pub fn integrity_key(&self) -> Scalar {
        scalar(&self.integrity_sk)
    }

    pub fn fido2_log_key(&self) -> Point {
        point(&self.fido2.log_key)
    }

    pub fn pw_x(&self) -> Scalar {
        scalar(&self.pw.x)
    }

    pub fn pw_log_key(&self) -> Point {
        point(&self.pw.log_key)
    }

    pub fn active_totp(&self) -> impl Iterator<Item = &TotpRp> {
        self.totp.iter().filter(|r| !r.removed)
    }

    fn check(&self) -> io::Result<()> {
        if self.version != VAULT_VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unsupported vault version {}", self.version)));
        }
        let ok = Scalar::from_bytes(&self.integrity_sk).is_some()
            && Scalar::from_bytes(&self.pw.x).is_some()
            && Point::from_slice(&self.fido2.log_key).is_some()
            && Point::from_slice(&self.pw.log_key).is_some()
            && self.fido2.rps.iter().all(|r| Scalar::from_bytes(&r.y).is_some() && Point::from_slice(&r.pk).is_some())
            && self.pw.rps.iter().all(|r| Point::from_slice(&r.k_id).is_some());
        if !ok {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "vault holds an invalid key"));
        }
        Ok(())
    }
}

/// An open, locked vault path.
pub struct VaultFile {
    path: PathBuf,
    _lock: File,
}

impl VaultFile {
    /// Locks `path` for this process. Fails if another process holds it.
    pub fn lock(path: &Path) -> io::Result<VaultFile> {
        let lock_path = path.with_extension("lock");
        let f = OpenOptions::new().create(true).truncate(false).write(true).open(&lock_path)?;
        f.try_lock_exclusive()
            .map_err(|_| io::Error::new(io::ErrorKind::WouldBlock, format!("vault {} is in use", path.display())))?;
        Ok(VaultFile { path: path.to_path_buf(), _lock: f })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// True when there is nothing to overwrite.
    pub fn is_vacant(&self) -> bool {
        std::fs::metadata(&self.path).map(|m| m.len() == 0).unwrap_or(true)
    }

    pub fn load(&self) -> io::Result<Vault> {
        let bytes = std::fs::read(&self.path)?;
        let v: Vault = serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        v.check()?;
        Ok(v)
    }

    pub fn save(&self, v: &Vault) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(v).expect("vault serializes");
        let tmp = self.path.with_extension("tmp");
        let mut f = File::create(&tmp)?;
        f.write_all(&json)?;
        f.sync_all()?;
        std::fs::rename(&tmp, &self.path)
    }
}

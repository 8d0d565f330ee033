#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use hmac::{Hmac, Mac};
use larch_client::Client;
use larch_core::crypto::{Point, Signature};
use larch_core::protocol::fido2;
use larch_log::{LocalTransport, LogService, ServiceConfig};
use p256::ecdsa::signature::hazmat::PrehashVerifier;
use sha2::Sha256;
use tempfile::TempDir;

pub struct Env {
    pub dir: TempDir,
    pub service: Arc<LogService>,
    pub clock: Arc<AtomicU64>,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_millis() as u64
}

impl Env {
    pub fn new() -> Env {
        Env::with_window(Duration::ZERO)
    }

    /// A log whose clock only moves when the test advances it.
    pub fn with_window(window: Duration) -> Env {
        let dir = TempDir::new().unwrap();
        let clock = Arc::new(AtomicU64::new(now_ms()));
        let service = Arc::new(open(dir.path(), window, clock.clone()));
        Env { dir, service, clock }
    }

    pub fn advance(&self, d: Duration) {
        self.clock.fetch_add(d.as_millis() as u64, Ordering::SeqCst);
    }

    pub fn now_secs(&self) -> u64 {
        self.clock.load(Ordering::SeqCst) / 1000
    }

    /// Drops in-memory state and reloads everything from disk.
    pub fn restart(&mut self) {
        let window = self.service.config().objection_window;
        self.service = Arc::new(open(self.dir.path(), window, self.clock.clone()));
    }

    pub fn transport(&self) -> LocalTransport {
        LocalTransport::new(self.service.clone())
    }

    pub fn enroll(&self, presigs: usize) -> Client<LocalTransport> {
        Client::enroll(self.transport(), "local", presigs).unwrap()
    }

    /// The same vault against a fresh transport, e.g. after a restart.
    pub fn reattach(&self, c: Client<LocalTransport>) -> Client<LocalTransport> {
        Client::new(c.vault, self.transport())
    }
}

fn open(dir: &std::path::Path, window: Duration, clock: Arc<AtomicU64>) -> LogService {
    let mut cfg = ServiceConfig::new(dir);
    cfg.objection_window = window;
    LogService::open(cfg).unwrap().with_clock(move || clock.load(Ordering::SeqCst))
}

/// RFC 6238 with SHA-256, before the decimal reduction.
pub fn oracle_totp31(key: &[u8], t: u64) -> u32 {
    let mut mac = Hmac::<Sha256>::new_from_slice(key).unwrap();
    mac.update(&t.to_be_bytes());
    let h = mac.finalize().into_bytes();
    let off = (h[h.len() - 1] & 0x0f) as usize;
    u32::from_be_bytes(h[off..off + 4].try_into().unwrap()) & 0x7fff_ffff
}

pub fn oracle_totp(key: &[u8], t: u64) -> String {
    format!("{:06}", oracle_totp31(key, t) % 1_000_000)
}

/// Checks a FIDO2 signature with the p256 crate.
pub fn oracle_verify(pk: &Point, rp: &str, chal: &[u8; 32], sig: &Signature) -> bool {
    let vk = p256::ecdsa::VerifyingKey::from_sec1_bytes(&pk.to_bytes()).unwrap();
    let Ok(s) = p256::ecdsa::Signature::from_slice(&sig.to_bytes()) else { return false };
    let digest = fido2::auth_digest(&fido2::rp_id(rp), chal);
    vk.verify_prehash(&digest, &s).is_ok()
}

pub fn record_log(env: &Env, account: &str) -> std::path::PathBuf {
    env.dir.path().join(account).join("records.log")
}

//! Endpoint logic, independent of the HTTP layer.
//!
//! Each account sits behind its own mutex. Proof verification runs outside
//! it; the critical section covers the replay check, the record append, the
//! presignature consumption and list-version checks, so those commit
//! together.

use std::collections::HashMap;
use std::io;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use larch_core::api::*;
use larch_core::circuit::totp::{decode_log_output, totp_circuit, totp_log_bits, TOTP_ID_LEN, TOTP_KEY_LEN};
use larch_core::crypto::ecdsa::ecdsa_verify_bytes;
use larch_core::crypto::elgamal::Ciphertext;
use larch_core::crypto::{Point, Scalar};
use larch_core::ecdsa2p::{
    check_opening, commit_mac, decode_batch_file, log_half, log_key_gen, sign_round1, sign_round2, Party,
    Round1Msg, SignShares,
};
use larch_core::gc::session::{decode_frames, encode_frames, Channel, Frame, FrameKind, GarblerSession, SESSION_ID_LEN};
use larch_core::gc::GcError;
use larch_core::protocol::{fido2, pw, totp};
use larch_core::record::{integrity_message, StoredRecord};
use larch_core::zk::ZkParams;
use rand::rngs::OsRng;
use rand::{Rng, RngCore};

use crate::account::{token_hash, Account, AccountState, BatchState, Fido2State, PwState, TotpEntry};
use crate::store::Entry;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub objection_window: Duration,
    pub totp_skew_steps: u64,
    pub zk: ZkParams,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> ServiceConfig {
        ServiceConfig {
            data_dir: data_dir.into(),
            objection_window: Duration::ZERO,
            totp_skew_steps: 1,
            zk: ZkParams::TEST,
        }
    }
}

/// Test hooks around record appends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// The append fails; the request must fail closed.
    FailBeforeAppend,
    /// The append completes, then the request dies before responding.
    CrashAfterAppend,
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn system_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

enum SignStage {
    AwaitMac,
    AwaitOpen { s: Scalar, sigma: Scalar, tau: Scalar, nonce: [u8; 32] },
}

struct PendingSign {
    shares: SignShares,
    stage: SignStage,
}

struct TotpSession {
    account: String,
    garbler: GarblerSession,
}

pub struct LogService {
    cfg: ServiceConfig,
    accounts: RwLock<HashMap<String, Arc<Mutex<Account>>>>,
    signing: Mutex<HashMap<(String, u64), PendingSign>>,
    sessions: Mutex<HashMap<[u8; SESSION_ID_LEN], TotpSession>>,
    fault: Mutex<Option<Fault>>,
    clock: Clock,
}

fn storage(e: io::Error) -> ApiError {
    ApiError::Storage(e.to_string())
}

fn gc_err(e: GcError) -> ApiError {
    ApiError::bad(e.to_string())
}

fn point(bytes: &[u8], what: &str) -> Result<Point, ApiError> {
    Point::from_slice(bytes).filter(|p| !p.is_identity()).ok_or_else(|| ApiError::bad(format!("{what}: invalid point")))
}

fn scalar(bytes: &[u8], what: &str) -> Result<Scalar, ApiError> {
    Scalar::from_slice(bytes).ok_or_else(|| ApiError::bad(format!("{what}: invalid scalar")))
}

fn array<const N: usize>(bytes: &[u8], what: &str) -> Result<[u8; N], ApiError> {
    bytes.try_into().map_err(|_| ApiError::bad(format!("{what}: expected {N} bytes, got {}", bytes.len())))
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl LogService {
    /// Opens the data directory and loads every account in it.
    pub fn open(cfg: ServiceConfig) -> io::Result<LogService> {
        std::fs::create_dir_all(&cfg.data_dir)?;
        let mut accounts = HashMap::new();
        for entry in std::fs::read_dir(&cfg.data_dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let a = Account::load(entry.path())?;
            accounts.insert(a.state.id.clone(), Arc::new(Mutex::new(a)));
        }
        Ok(LogService {
            cfg,
            accounts: RwLock::new(accounts),
            signing: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            fault: Mutex::new(None),
            clock: Arc::new(system_ms),
        })
    }

    /// Replaces the wall clock (milliseconds since the epoch).
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> LogService {
        self.clock = Arc::new(clock);
        self
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn inject_fault(&self, fault: Option<Fault>) {
        *lock(&self.fault) = fault;
    }

    fn now_ms(&self) -> u64 {
        (self.clock)()
    }

    fn account(&self, c: &Credentials) -> Result<Arc<Mutex<Account>>, ApiError> {
        let a = self.accounts.read().unwrap_or_else(|e| e.into_inner()).get(&c.account).cloned();
        let a = a.ok_or(ApiError::Unauthorized)?;
        if lock(&a).state.token_hash != token_hash(&c.token) {
            return Err(ApiError::Unauthorized);
        }
        Ok(a)
    }

    /// Appends a record under the caller's account lock.
    fn append(&self, acct: &mut Account, mut rec: StoredRecord) -> Result<u64, ApiError> {
        let fault = *lock(&self.fault);
        if fault == Some(Fault::FailBeforeAppend) {
            return Err(ApiError::Storage("injected failure before append".into()));
        }
        rec.seq = acct.store.head();
        let seq = acct.store.append(rec).map_err(storage)?;
        if fault == Some(Fault::CrashAfterAppend) {
            return Err(ApiError::Storage("injected crash after append".into()));
        }
        Ok(seq)
    }

    fn check_upload(&self, req: &PresignUpload) -> Result<([u8; 32], u64, u32), ApiError> {
        let seed = array::<32>(&req.log_seed, "log seed")?;
        let (start, halves) = decode_batch_file(&req.batch).map_err(|e| ApiError::bad(e.to_string()))?;
        if halves.is_empty() {
            return Err(ApiError::bad("empty presignature batch"));
        }
        Ok((seed, start, halves.len() as u32))
    }

    pub fn enroll(&self, req: &EnrollRequest) -> Result<EnrollResponse, ApiError> {
        let cm = array::<32>(&req.cm, "commitment")?;
        point(&req.integrity_key, "integrity key")?;
        point(&req.pw_key, "password key")?;
        let (log_seed, start, count) = self.check_upload(&req.presign)?;
        if start != 0 {
            return Err(ApiError::bad("first batch must start at index 0"));
        }

        let id = hex::encode(OsRng.gen::<[u8; 12]>());
        let token = hex::encode(OsRng.gen::<[u8; 32]>());
        let key = log_key_gen(&mut OsRng);
        let k = Scalar::random_nonzero(&mut OsRng);
        let now = self.now_ms();
        let batch = BatchState {
            id: 0,
            start,
            count,
            uploaded_ms: now,
            activates_ms: now,
            objected: false,
            log_seed,
        };
        let fido2 = Fido2State { cm, x: key.x.to_bytes(), integrity_key: req.integrity_key.clone(), batches: vec![batch.clone()] };
        let pw = PwState {
            k: k.to_bytes(),
            client_key: req.pw_key.clone(),
            hashes: Vec::new(),
            version: 0,
            padding_seed: OsRng.gen(),
        };
        let mut state = AccountState::new(id.clone(), &token, now, fido2, pw);
        state.next_batch = 1;
        let account = Account::create(self.cfg.data_dir.join(&id), state, &req.presign.batch).map_err(storage)?;
        self.accounts.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), Arc::new(Mutex::new(account)));
        tracing::info!(account = %id, presigs = count, "enrolled");
        Ok(EnrollResponse {
            credentials: Credentials { account: id, token },
            fido2_key: key.big_x.to_bytes().to_vec(),
            pw_key: Point::mul_base(&k).to_bytes().to_vec(),
            zk_reps: self.cfg.zk.reps as u16,
            batch: batch.info(now),
        })
    }

    pub fn fido2_presign(&self, c: &Credentials, req: &PresignUpload) -> Result<BatchInfo, ApiError> {
        let (log_seed, start, count) = self.check_upload(req)?;
        let a = self.account(c)?;
        let mut acct = lock(&a);
        let end = acct.state.fido2.batches.iter().map(BatchState::end).max().unwrap_or(0);
        if start != end {
            return Err(ApiError::Conflict(format!("batch must start at index {end}")));
        }
        let now = self.now_ms();
        let id = acct.state.next_batch;
        let batch = BatchState {
            id,
            start,
            count,
            uploaded_ms: now,
            activates_ms: now + self.cfg.objection_window.as_millis() as u64,
            objected: false,
            log_seed,
        };
        acct.write_batch(id, &req.batch).map_err(storage)?;
        acct.state.next_batch += 1;
        acct.state.fido2.batches.push(batch.clone());
        acct.save().map_err(storage)?;
        Ok(batch.info(now))
    }

    pub fn fido2_object(&self, c: &Credentials, req: &ObjectRequest) -> Result<BatchInfo, ApiError> {
        let a = self.account(c)?;
        let mut acct = lock(&a);
        let now = self.now_ms();
        let b = acct
            .state
            .fido2
            .batches
            .iter_mut()
            .find(|b| b.id == req.batch)
            .ok_or_else(|| ApiError::NotFound(format!("batch {}", req.batch)))?;
        if b.objected {
            return Ok(b.info(now));
        }
        if now >= b.activates_ms {
            return Err(ApiError::AlreadyActive);
        }
        b.objected = true;
        let info = b.info(now);
        acct.save().map_err(storage)?;
        acct.delete_batch(req.batch).map_err(storage)?;
        tracing::info!(account = %c.account, batch = req.batch, "batch objected");
        Ok(info)
    }

    pub fn fido2_auth(&self, c: &Credentials, ip: &str, req: &Fido2AuthRequest) -> Result<Fido2AuthResponse, ApiError> {
        let a = self.account(c)?;
        let (cm, integrity_key, x) = {
            let acct = lock(&a);
            (acct.state.fido2.cm, acct.state.fido2.integrity_key.clone(), acct.state.log_key())
        };
        let stmt = fido2::statement(&cm, &req.ct, &req.dgst).ok_or_else(|| ApiError::bad("ciphertext or digest length"))?;
        let theirs = Round1Msg::from_bytes(&req.round1).ok_or_else(|| ApiError::bad("round-1 message"))?;
        let ctx = fido2::proof_context(&c.account, req.index);
        if !fido2::verify_auth(&stmt, &ctx, &req.proof, self.cfg.zk.reps) {
            return Err(ApiError::RejectProof);
        }
        if !ecdsa_verify_bytes(&integrity_key, &integrity_message(Mechanism::Fido2, &req.ct), &req.sig) {
            return Err(ApiError::RejectIntegrity);
        }
        let digest = Scalar::reduce_bytes(&array::<32>(&req.dgst, "digest")?);

        let mut acct = lock(&a);
        let now = self.now_ms();
        let batch = acct
            .state
            .fido2
            .batches
            .iter()
            .find(|b| b.contains(req.index) && !b.objected)
            .cloned()
            .ok_or(ApiError::RejectReplay(req.index))?;
        if now < batch.activates_ms {
            return Err(ApiError::RejectInactive(req.index));
        }
        if acct.used.contains(req.index) {
            return Err(ApiError::RejectReplay(req.index));
        }
        let explicit = acct.log_half(batch.id, req.index).map_err(storage)?;
        if explicit.is_void() {
            return Err(ApiError::RejectReplay(req.index));
        }
        let half = log_half(&batch.log_seed, req.index, &explicit);

        let rec = StoredRecord {
            seq: 0,
            ts_ms: now,
            ip: ip.to_string(),
            mech: Mechanism::Fido2,
            presig_index: Some(req.index),
            ct: req.ct.clone(),
            sig: req.sig.clone(),
        };
        let head = acct.store.head();
        let appended = self.append(&mut acct, rec);
        if acct.store.head() == head {
            return Err(appended.expect_err("nothing was appended"));
        }
        // The record is durable, so the index is consumed even if the
        // request dies below.
        let round1 = sign_round1(Party::Log, req.index, &half, &x, &mut acct.used);
        drop(acct);
        appended?;
        let (mine, state) = round1.map_err(|e| ApiError::bad(e.to_string()))?;
        let shares = sign_round2(&state, &theirs, &digest);
        lock(&self.signing).insert((c.account.clone(), req.index), PendingSign { shares, stage: SignStage::AwaitMac });
        Ok(Fido2AuthResponse { round1: mine.to_bytes().to_vec() })
    }

    pub fn fido2_auth_mac(&self, c: &Credentials, req: &Fido2MacRequest) -> Result<Fido2MacResponse, ApiError> {
        self.account(c)?;
        let s1 = scalar(&req.s, "signature share")?;
        let mut signing = lock(&self.signing);
        let p = signing
            .get_mut(&(c.account.clone(), req.index))
            .ok_or_else(|| ApiError::NotFound(format!("signing session {}", req.index)))?;
        if !matches!(p.stage, SignStage::AwaitMac) {
            return Err(ApiError::Conflict("signature shares already exchanged".into()));
        }
        let s = p.shares.s + s1;
        let (sigma, tau) = p.shares.mac_shares(&s);
        let (cm, nonce) = commit_mac(&sigma, &tau, &mut OsRng);
        p.stage = SignStage::AwaitOpen { s, sigma, tau, nonce };
        Ok(Fido2MacResponse { s: p.shares.s.to_bytes().to_vec(), mac_commitment: cm.0.to_vec() })
    }

    pub fn fido2_auth_check(&self, c: &Credentials, req: &Fido2CheckRequest) -> Result<Fido2CheckResponse, ApiError> {
        self.account(c)?;
        let sigma1 = scalar(&req.sigma, "sigma")?;
        let tau1 = scalar(&req.tau, "tau")?;
        let p = lock(&self.signing)
            .remove(&(c.account.clone(), req.index))
            .ok_or_else(|| ApiError::NotFound(format!("signing session {}", req.index)))?;
        let SignStage::AwaitOpen { s, sigma, tau, nonce } = p.stage else {
            return Err(ApiError::Conflict("signature shares not exchanged yet".into()));
        };
        if check_opening(p.shares.t, s, (sigma, tau), (sigma1, tau1)).is_err() {
            tracing::warn!(account = %c.account, index = req.index, "signature opening check failed");
            return Err(ApiError::Abort);
        }
        Ok(Fido2CheckResponse { sigma: sigma.to_bytes().to_vec(), tau: tau.to_bytes().to_vec(), nonce: nonce.to_vec() })
    }

    fn totp_info(state: &AccountState) -> TotpListInfo {
        let n = state.totp.entries.len();
        TotpListInfo { registered: n as u32, slots: n.max(1).next_power_of_two() as u32, version: state.totp.version }
    }

    pub fn totp_register(&self, c: &Credentials, req: &TotpRegisterRequest) -> Result<TotpListInfo, ApiError> {
        let id = array::<TOTP_ID_LEN>(&req.id, "identifier")?;
        let key_share = array::<TOTP_KEY_LEN>(&req.key_share, "key share")?;
        if id == totp::DUMMY_ID {
            return Err(ApiError::bad("identifier is reserved"));
        }
        let a = self.account(c)?;
        let mut acct = lock(&a);
        if acct.state.totp.entries.iter().any(|e| e.id == id) {
            return Err(ApiError::Conflict("identifier already registered".into()));
        }
        acct.state.totp.entries.push(TotpEntry { id: id.to_vec(), key_share });
        acct.state.totp.version += 1;
        acct.save().map_err(storage)?;
        Ok(Self::totp_info(&acct.state))
    }

    pub fn totp_unregister(&self, c: &Credentials, req: &TotpUnregisterRequest) -> Result<TotpListInfo, ApiError> {
        let a = self.account(c)?;
        let mut acct = lock(&a);
        let before = acct.state.totp.entries.len();
        acct.state.totp.entries.retain(|e| e.id != req.id);
        if acct.state.totp.entries.len() != before {
            acct.state.totp.version += 1;
            acct.save().map_err(storage)?;
        }
        Ok(Self::totp_info(&acct.state))
    }

    pub fn totp_session(&self, c: &Credentials, ip: &str, step: TotpStep, body: &[u8]) -> Result<Vec<u8>, ApiError> {
        let a = self.account(c)?;
        let frames = decode_frames(body).map_err(gc_err)?;
        let first = frames.first().ok_or_else(|| ApiError::bad("no frames"))?;
        let id = first.session;
        match step {
            TotpStep::Open => {
                let [open] = &frames[..] else { return Err(ApiError::bad("expected one frame")) };
                let mut ch = Channel::new(id);
                let payload = ch.recv(open, FrameKind::SessionOpen).map_err(gc_err)?;
                let req: TotpOpen =
                    serde_json::from_slice(payload).map_err(|e| ApiError::bad(format!("session open: {e}")))?;
                if req.mech != "totp" {
                    return Err(ApiError::bad(format!("unknown mechanism {:?}", req.mech)));
                }
                let now_step = totp::time_step(self.now_ms() / 1000);
                if !totp::within_skew(req.t, now_step, self.cfg.totp_skew_steps) {
                    return Err(ApiError::RejectTime);
                }
                let (cm, slots, version) = {
                    let acct = lock(&a);
                    let info = Self::totp_info(&acct.state);
                    if req.n != info.slots {
                        return Err(ApiError::RejectStale(info.version));
                    }
                    let mut slots: Vec<([u8; TOTP_ID_LEN], [u8; TOTP_KEY_LEN])> = acct
                        .state
                        .totp
                        .entries
                        .iter()
                        .map(|e| (e.id.as_slice().try_into().expect("16-byte id"), e.key_share))
                        .collect();
                    while slots.len() < info.slots as usize {
                        slots.push((totp::DUMMY_ID, OsRng.gen()));
                    }
                    (acct.state.fido2.cm, slots, info.version)
                };
                let circuit = totp_circuit(slots.len()).map_err(|e| ApiError::bad(e.to_string()))?;
                let inputs = totp_log_bits(&cm, &slots, req.t);
                let mut seed = [0u8; 32];
                OsRng.fill_bytes(&mut seed);
                let (garbler, out) =
                    GarblerSession::start(ch, circuit, totp::session_layout(), &inputs, &seed, &mut OsRng).map_err(gc_err)?;
                let mut sessions = lock(&self.sessions);
                if sessions.contains_key(&id) {
                    return Err(ApiError::Conflict("session id in use".into()));
                }
                sessions.insert(id, TotpSession { account: c.account.clone(), garbler });
                tracing::debug!(account = %c.account, version, slots = slots.len(), "totp session opened");
                Ok(encode_frames(&out))
            }
            TotpStep::Ot => {
                let [ot2] = &frames[..] else { return Err(ApiError::bad("expected one frame")) };
                let mut sessions = lock(&self.sessions);
                let s = sessions.get_mut(&id).filter(|s| s.account == c.account).ok_or_else(|| ApiError::NotFound("session".into()))?;
                let ot3 = s.garbler.on_ot_round2(ot2).map_err(gc_err)?;
                Ok(encode_frames(&[ot3]))
            }
            TotpStep::Finish => {
                let [labels, sig] = &frames[..] else { return Err(ApiError::bad("expected two frames")) };
                let mut s = {
                    let mut sessions = lock(&self.sessions);
                    match sessions.get(&id) {
                        Some(s) if s.account == c.account => sessions.remove(&id).expect("present"),
                        _ => return Err(ApiError::NotFound("session".into())),
                    }
                };
                let outs = s.garbler.on_labels_back(labels).map_err(gc_err)?;
                let (ct, valid) = decode_log_output(&outs[0]).ok_or_else(|| ApiError::bad("log output width"))?;
                let sig = s.garbler.channel.recv(sig, FrameKind::IntegritySig).map_err(gc_err)?.to_vec();
                if !valid {
                    return Err(ApiError::RejectUnknown);
                }
                let mut acct = lock(&a);
                if !ecdsa_verify_bytes(&acct.state.fido2.integrity_key, &integrity_message(Mechanism::Totp, &ct), &sig) {
                    return Err(ApiError::RejectIntegrity);
                }
                let rec = StoredRecord {
                    seq: 0,
                    ts_ms: self.now_ms(),
                    ip: ip.to_string(),
                    mech: Mechanism::Totp,
                    presig_index: None,
                    ct: ct.to_vec(),
                    sig,
                };
                self.append(&mut acct, rec)?;
                drop(acct);
                let out: Frame = s.garbler.output_bits().map_err(gc_err)?;
                Ok(encode_frames(&[out]))
            }
        }
    }

    pub fn pw_register(&self, c: &Credentials, req: &PwRegisterRequest) -> Result<PwRegisterResponse, ApiError> {
        let h = point(&req.hash, "hash")?;
        let a = self.account(c)?;
        let mut acct = lock(&a);
        let enc = hex::encode(h.to_bytes());
        if acct.state.pw.hashes.contains(&enc) {
            return Err(ApiError::Conflict("identifier already registered".into()));
        }
        acct.state.pw.hashes.push(enc);
        acct.state.pw.version += 1;
        acct.save().map_err(storage)?;
        let evaluated = h * acct.state.pw_key();
        Ok(PwRegisterResponse { evaluated: evaluated.to_bytes().to_vec(), version: acct.state.pw.version })
    }

    fn pw_snapshot(state: &AccountState) -> (u64, Vec<Point>) {
        let v = state.pw.version;
        (v, pw::padded_list(&state.pw_hashes(), &state.pw.padding_seed, v))
    }

    pub fn pw_list(&self, c: &Credentials) -> Result<PwListResponse, ApiError> {
        let a = self.account(c)?;
        let (version, list) = Self::pw_snapshot(&lock(&a).state);
        Ok(PwListResponse { version, elements: list.iter().map(|p| p.to_bytes().to_vec()).collect() })
    }

    pub fn pw_auth(&self, c: &Credentials, ip: &str, req: &PwAuthRequest) -> Result<PwAuthResponse, ApiError> {
        let ct = Ciphertext::from_bytes(&req.ct).ok_or_else(|| ApiError::bad("ciphertext"))?;
        let a = self.account(c)?;
        let (version, list, big_x, integrity_key, k) = {
            let acct = lock(&a);
            let (v, list) = Self::pw_snapshot(&acct.state);
            let big_x = point(&acct.state.pw.client_key, "client key")?;
            (v, list, big_x, acct.state.fido2.integrity_key.clone(), acct.state.pw_key())
        };
        if req.version != version {
            return Err(ApiError::RejectStale(version));
        }
        if !pw::auth_verify(&big_x, &list, &ct, &req.proof1, &req.proof2, &c.account, version) {
            return Err(ApiError::RejectProof);
        }
        if !ecdsa_verify_bytes(&integrity_key, &integrity_message(Mechanism::Pw, &req.ct), &req.sig) {
            return Err(ApiError::RejectIntegrity);
        }
        let mut acct = lock(&a);
        if acct.state.pw.version != version {
            return Err(ApiError::RejectStale(acct.state.pw.version));
        }
        let rec = StoredRecord {
            seq: 0,
            ts_ms: self.now_ms(),
            ip: ip.to_string(),
            mech: Mechanism::Pw,
            presig_index: None,
            ct: req.ct.clone(),
            sig: req.sig.clone(),
        };
        self.append(&mut acct, rec)?;
        Ok(PwAuthResponse { y: pw::evaluate(&k, &ct).to_bytes().to_vec() })
    }

    pub fn audit(&self, c: &Credentials, req: &AuditRequest) -> Result<AuditResponse, ApiError> {
        let a = self.account(c)?;
        let acct = lock(&a);
        let now = self.now_ms();
        let limit = req.limit.map(|l| l as usize).unwrap_or(usize::MAX);
        let records = acct
            .store
            .fetch(req.from_seq, limit)
            .iter()
            .map(|e| match e {
                Entry::Record(r) => WireRecord {
                    seq: r.seq,
                    ts_ms: r.ts_ms,
                    ip: r.ip.clone(),
                    mech: r.mech,
                    presig_index: r.presig_index,
                    ct: r.ct.clone(),
                    sig: r.sig.clone(),
                    corrupt: false,
                },
                Entry::Corrupt { seq, raw } => WireRecord {
                    seq: *seq,
                    ts_ms: 0,
                    ip: String::new(),
                    mech: Mechanism::Fido2,
                    presig_index: None,
                    ct: raw.clone(),
                    sig: Vec::new(),
                    corrupt: true,
                },
            })
            .collect();
        Ok(AuditResponse {
            records,
            head: acct.store.head(),
            batches: acct.state.fido2.batches.iter().map(|b| b.info(now)).collect(),
        })
    }
}

/// In-process transport: calls the service directly, as a fixed client IP.
#[derive(Clone)]
pub struct LocalTransport {
    pub service: Arc<LogService>,
    pub ip: String,
}

impl LocalTransport {
    pub fn new(service: Arc<LogService>) -> LocalTransport {
        LocalTransport { service, ip: "local".into() }
    }
}

impl LogApi for LocalTransport {
    fn enroll(&self, req: &EnrollRequest) -> Result<EnrollResponse, ApiError> {
        self.service.enroll(req)
    }
    fn fido2_presign(&self, c: &Credentials, req: &PresignUpload) -> Result<BatchInfo, ApiError> {
        self.service.fido2_presign(c, req)
    }
    fn fido2_object(&self, c: &Credentials, req: &ObjectRequest) -> Result<BatchInfo, ApiError> {
        self.service.fido2_object(c, req)
    }
    fn fido2_auth(&self, c: &Credentials, req: &Fido2AuthRequest) -> Result<Fido2AuthResponse, ApiError> {
        self.service.fido2_auth(c, &self.ip, req)
    }
    fn fido2_auth_mac(&self, c: &Credentials, req: &Fido2MacRequest) -> Result<Fido2MacResponse, ApiError> {
        self.service.fido2_auth_mac(c, req)
    }
    fn fido2_auth_check(&self, c: &Credentials, req: &Fido2CheckRequest) -> Result<Fido2CheckResponse, ApiError> {
        self.service.fido2_auth_check(c, req)
    }
    fn totp_register(&self, c: &Credentials, req: &TotpRegisterRequest) -> Result<TotpListInfo, ApiError> {
        self.service.totp_register(c, req)
    }
    fn totp_unregister(&self, c: &Credentials, req: &TotpUnregisterRequest) -> Result<TotpListInfo, ApiError> {
        self.service.totp_unregister(c, req)
    }
    fn totp_session(&self, c: &Credentials, step: TotpStep, frames: &[u8]) -> Result<Vec<u8>, ApiError> {
        self.service.totp_session(c, &self.ip, step, frames)
    }
    fn pw_register(&self, c: &Credentials, req: &PwRegisterRequest) -> Result<PwRegisterResponse, ApiError> {
        self.service.pw_register(c, req)
    }
    fn pw_list(&self, c: &Credentials) -> Result<PwListResponse, ApiError> {
        self.service.pw_list(c)
    }
    fn pw_auth(&self, c: &Credentials, req: &PwAuthRequest) -> Result<PwAuthResponse, ApiError> {
        self.service.pw_auth(c, &self.ip, req)
    }
    fn audit(&self, c: &Credentials, req: &AuditRequest) -> Result<AuditResponse, ApiError> {
        self.service.audit(c, req)
    }
}

//! Client side of enrollment, registration, authentication and auditing for
//! all three mechanisms, over any [`LogApi`] transport.

use std::collections::HashSet;
use std::io;

use larch_core::api::*;
use larch_core::circuit::fido2::Fido2Witness;
use larch_core::circuit::totp::{decode_code, totp_circuit, TotpClientInput};
use larch_core::crypto::ecdsa::{ecdsa_sign, verify_digest};
use larch_core::crypto::elgamal::Ciphertext;
use larch_core::crypto::{commit, Commitment, KeyPair, Point, Scalar, Signature};
use larch_core::ecdsa2p::{
    check_opening, client_half, client_key_gen, encode_batch_file, presign_batch, sign_round1, sign_round2,
    verify_mac_commitment, Party, PresigHalf, Round1Msg, UsedIndices,
};
use larch_core::gc::session::{decode_frames, encode_frames, Channel, EvaluatorSession, Frame, FrameKind};
use larch_core::protocol::{fido2, pw, totp};
use larch_core::record::integrity_message;
use larch_core::zk::ZkParams;
use rand::rngs::OsRng;
use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::vault::{Fido2Rp, Fido2Vault, PwRp, PwVault, TotpRp, Vault, VaultBatch, VAULT_VERSION};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Api(#[from] ApiError),
    /// The request cannot be served from local state (unknown rp, bad input).
    #[error("{0}")]
    Usage(String),
    #[error("vault: {0}")]
    Vault(#[from] io::Error),
    #[error("protocol failure: {0}")]
    Protocol(String),
}

fn proto(e: impl std::fmt::Display) -> ClientError {
    ClientError::Protocol(e.to_string())
}

fn scalar(b: &[u8]) -> Result<Scalar, ClientError> {
    Scalar::from_slice(b).ok_or_else(|| proto("log sent an invalid scalar"))
}

fn point(b: &[u8]) -> Result<Point, ClientError> {
    Point::from_slice(b).filter(|p| !p.is_identity()).ok_or_else(|| proto("log sent an invalid point"))
}

/// Everything one FIDO2 signature needs, detached from the vault so that
/// several can run at once.
pub struct Fido2Job {
    pub index: u64,
    credentials: Credentials,
    y: Scalar,
    pk: Point,
    id: [u8; 32],
    chal: [u8; 32],
    k: [u8; 32],
    r: [u8; 32],
    cm: [u8; 32],
    integrity: Scalar,
    half: PresigHalf,
    reps: usize,
}

impl Fido2Job {
    /// Proof, record signature, and the three signing calls.
    pub fn run<T: LogApi + ?Sized>(&self, api: &T) -> Result<Signature, ClientError> {
        let mut rng = OsRng;
        let nonce: [u8; 12] = rng.gen();
        let ct = fido2::encrypt_id(&self.k, &nonce, &self.id);
        let dgst = fido2::auth_digest(&self.id, &self.chal);
        let stmt = fido2::statement(&self.cm, &ct, &dgst).expect("fixed lengths");
        let witness = Fido2Witness { k: self.k, r: self.r, id: self.id, chal: self.chal };
        let ctx = fido2::proof_context(&self.credentials.account, self.index);
        let proof = fido2::prove_auth(&witness, &stmt, &ctx, ZkParams { reps: self.reps }, &mut rng).map_err(proto)?;
        let sig = ecdsa_sign(&self.integrity, &integrity_message(Mechanism::Fido2, &ct), None, &mut rng).map_err(proto)?;

        let mut used = UsedIndices::new();
        let (mine, state) = sign_round1(Party::Client, self.index, &self.half, &self.y, &mut used).map_err(proto)?;
        let c = &self.credentials;
        let resp = api.fido2_auth(
            c,
            &Fido2AuthRequest {
                index: self.index,
                dgst: dgst.to_vec(),
                ct: ct.to_vec(),
                proof,
                sig: sig.to_bytes().to_vec(),
                round1: mine.to_bytes().to_vec(),
            },
        )?;
        let theirs = Round1Msg::from_bytes(&resp.round1).ok_or_else(|| proto("malformed round-1 reply"))?;
        let digest = Scalar::reduce_bytes(&dgst);
        let shares = sign_round2(&state, &theirs, &digest);

        let mac = api.fido2_auth_mac(c, &Fido2MacRequest { index: self.index, s: shares.s.to_bytes().to_vec() })?;
        let s = shares.s + scalar(&mac.s)?;
        let cm = Commitment(mac.mac_commitment.as_slice().try_into().map_err(|_| proto("commitment length"))?);
        let (sigma, tau) = shares.mac_shares(&s);
        let open = api.fido2_auth_check(
            c,
            &Fido2CheckRequest { index: self.index, sigma: sigma.to_bytes().to_vec(), tau: tau.to_bytes().to_vec() },
        )?;
        let (sigma0, tau0) = (scalar(&open.sigma)?, scalar(&open.tau)?);
        let nonce: [u8; 32] = open.nonce.as_slice().try_into().map_err(|_| proto("nonce length"))?;
        if !verify_mac_commitment(&cm, &sigma0, &tau0, &nonce) {
            return Err(ApiError::Abort.into());
        }
        let sig = check_opening(shares.t, s, (sigma, tau), (sigma0, tau0)).map_err(|_| ApiError::Abort)?;
        if !verify_digest(&self.pk, &digest, &sig) {
            return Err(proto("joint signature does not verify"));
        }
        Ok(sig)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditRow {
    pub seq: u64,
    pub ts_ms: u64,
    pub time: String,
    pub ip: String,
    pub mech: Mechanism,
    pub rp: Option<String>,
    pub presig_index: Option<u64>,
    /// Why the row could not be trusted, if it could not.
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BatchRow {
    #[serde(flatten)]
    pub info: BatchInfo,
    /// False for a batch this client never uploaded.
    pub known: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub records: Vec<AuditRow>,
    pub batches: Vec<BatchRow>,
    /// Records an earlier audit saw that are gone now.
    pub missing: u64,
}

impl AuditReport {
    pub fn flagged(&self) -> bool {
        self.missing > 0 || self.records.iter().any(|r| r.flag.is_some()) || self.batches.iter().any(|b| !b.known)
    }

    /// Relying-party names in record order, for unflagged rows.
    pub fn rp_sequence(&self, mech: Mechanism) -> Vec<String> {
        self.records.iter().filter(|r| r.mech == mech).filter_map(|r| r.rp.clone()).collect()
    }
}

pub fn format_time(ts_ms: u64) -> String {
    chrono::DateTime::from_timestamp_millis(ts_ms as i64)
        .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
        .unwrap_or_default()
}

pub struct Client<T> {
    pub vault: Vault,
    pub api: T,
}

const AUDIT_PAGE: u32 = 512;

impl<T: LogApi> Client<T> {
    pub fn new(vault: Vault, api: T) -> Client<T> {
        Client { vault, api }
    }

    /// Creates keys, uploads the first presignature batch and enrolls.
    pub fn enroll(api: T, log_url: &str, presigs: usize) -> Result<Client<T>, ClientError> {
        if presigs == 0 {
            return Err(ClientError::Usage("at least one presignature is required".into()));
        }
        let mut rng = OsRng;
        let k: [u8; 32] = rng.gen();
        let r: [u8; 32] = rng.gen();
        let cm = commit(&k, &r).expect("32-byte inputs");
        let integrity = KeyPair::generate(&mut rng);
        let x = Scalar::random_nonzero(&mut rng);
        let master: [u8; 32] = rng.gen();
        let batch = presign_batch(&master, 0, presigs);
        let req = EnrollRequest {
            cm: cm.0.to_vec(),
            integrity_key: integrity.pk.to_bytes().to_vec(),
            pw_key: Point::mul_base(&x).to_bytes().to_vec(),
            presign: PresignUpload { log_seed: batch.log_seed.to_vec(), batch: encode_batch_file(0, &batch.log_halves) },
        };
        let resp = api.enroll(&req)?;
        point(&resp.fido2_key)?;
        point(&resp.pw_key)?;
        let vault = Vault {
            version: VAULT_VERSION,
            log_url: log_url.to_string(),
            credentials: resp.credentials,
            k,
            r,
            integrity_sk: integrity.sk.to_bytes(),
            fido2: Fido2Vault {
                log_key: resp.fido2_key,
                zk_reps: resp.zk_reps,
                rps: Vec::new(),
                batches: vec![VaultBatch {
                    id: resp.batch.id,
                    start: 0,
                    client_seed: batch.client_seed,
                    ts: batch.ts.iter().map(|t| hex::encode(t.to_bytes())).collect(),
                }],
                used: Vec::new(),
            },
            totp: Vec::new(),
            pw: PwVault { x: x.to_bytes(), log_key: resp.pw_key, rps: Vec::new() },
            audited: 0,
        };
        Ok(Client { vault, api })
    }

    fn creds(&self) -> &Credentials {
        &self.vault.credentials
    }

    // FIDO2

    /// Local only: derives a fresh key share and public key.
    pub fn fido2_register(&mut self, name: &str) -> Point {
        let key = client_key_gen(&self.vault.fido2_log_key(), &mut OsRng).expect("enrolled log key is not the identity");
        self.vault.fido2.rps.push(Fido2Rp { name: name.to_string(), y: key.y.to_bytes(), pk: key.pk.to_bytes().to_vec() });
        key.pk
    }

    pub fn fido2_public_key(&self, name: &str) -> Option<Point> {
        self.vault.fido2.rps.iter().rev().find(|r| r.name == name).and_then(|r| Point::from_slice(&r.pk))
    }

    /// Lowest index not yet used, skipping void ones.
    fn next_index(&self) -> Option<(usize, u64)> {
        let used: HashSet<u64> = self.vault.fido2.used.iter().copied().collect();
        self.vault.fido2.batches.iter().enumerate().find_map(|(bi, b)| {
            (b.start..b.end()).find(|i| !used.contains(i) && b.t(*i).is_some()).map(|i| (bi, i))
        })
    }

    pub fn presignatures_left(&self) -> usize {
        let used: HashSet<u64> = self.vault.fido2.used.iter().copied().collect();
        self.vault
            .fido2
            .batches
            .iter()
            .map(|b| (b.start..b.end()).filter(|i| !used.contains(i) && b.t(*i).is_some()).count())
            .sum()
    }

    /// Reserves a presignature and marks it used in the vault.
    pub fn fido2_prepare(&mut self, name: &str, chal: &[u8; 32]) -> Result<Fido2Job, ClientError> {
        let rp = self
            .vault
            .fido2
            .rps
            .iter()
            .rev()
            .find(|r| r.name == name)
            .cloned()
            .ok_or_else(|| ClientError::Usage(format!("no FIDO2 credential for {name:?}")))?;
        let (bi, index) = self.next_index().ok_or(ApiError::Exhausted)?;
        let b = &self.vault.fido2.batches[bi];
        let half = client_half(&b.client_seed, index, b.t(index).expect("non-void"));
        self.vault.fido2.used.push(index);
        Ok(Fido2Job {
            index,
            credentials: self.creds().clone(),
            y: Scalar::from_bytes(&rp.y).expect("valid vault"),
            pk: Point::from_slice(&rp.pk).expect("valid vault"),
            id: fido2::rp_id(name),
            chal: *chal,
            k: self.vault.k,
            r: self.vault.r,
            cm: commit(&self.vault.k, &self.vault.r).expect("32-byte inputs").0,
            integrity: self.vault.integrity_key(),
            half,
            reps: self.vault.fido2.zk_reps as usize,
        })
    }

    pub fn fido2_auth(&mut self, name: &str, chal: &[u8; 32]) -> Result<Signature, ClientError> {
        let job = self.fido2_prepare(name, chal)?;
        job.run(&self.api)
    }

    /// Deals and uploads a new batch after the last known index.
    pub fn fido2_replenish(&mut self, count: usize) -> Result<BatchInfo, ClientError> {
        if count == 0 {
            return Err(ClientError::Usage("count must be positive".into()));
        }
        let start = self.vault.fido2.batches.iter().map(VaultBatch::end).max().unwrap_or(0);
        let master: [u8; 32] = OsRng.gen();
        let batch = presign_batch(&master, start, count);
        let info = self.api.fido2_presign(
            self.creds(),
            &PresignUpload { log_seed: batch.log_seed.to_vec(), batch: encode_batch_file(start, &batch.log_halves) },
        )?;
        self.vault.fido2.batches.push(VaultBatch {
            id: info.id,
            start,
            client_seed: batch.client_seed,
            ts: batch.ts.iter().map(|t| hex::encode(t.to_bytes())).collect(),
        });
        Ok(info)
    }

    /// Cancels a pending batch and forgets it locally.
    pub fn fido2_object(&mut self, batch: u64) -> Result<BatchInfo, ClientError> {
        let info = self.api.fido2_object(self.creds(), &ObjectRequest { batch })?;
        self.vault.fido2.batches.retain(|b| b.id != batch);
        Ok(info)
    }

    // TOTP

    pub fn totp_slots(&self) -> usize {
        self.vault.active_totp().count().max(1).next_power_of_two()
    }

    pub fn totp_register(&mut self, name: &str, key: &[u8]) -> Result<TotpListInfo, ClientError> {
        let (k_client, k_log) = totp::split_key(key, &mut OsRng)
            .ok_or_else(|| ClientError::Usage("TOTP keys longer than 32 bytes are not supported".into()))?;
        for _ in 0..4 {
            let id = totp::random_id(&mut OsRng);
            match self.api.totp_register(self.creds(), &TotpRegisterRequest { id: id.to_vec(), key_share: k_log.to_vec() }) {
                Ok(info) => {
                    self.vault.totp.push(TotpRp { name: name.to_string(), id, k_client, removed: false });
                    return Ok(info);
                }
                Err(ApiError::Conflict(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(proto("could not find an unused identifier"))
    }

    pub fn totp_unregister(&mut self, name: &str) -> Result<TotpListInfo, ClientError> {
        let pos = self
            .vault
            .totp
            .iter()
            .rposition(|r| r.name == name && !r.removed)
            .ok_or_else(|| ClientError::Usage(format!("no TOTP registration for {name:?}")))?;
        let info = self.api.totp_unregister(self.creds(), &TotpUnregisterRequest { id: self.vault.totp[pos].id.to_vec() })?;
        self.vault.totp[pos].removed = true;
        Ok(info)
    }

    /// Runs the garbled-circuit session for time step `t`; returns the
    /// 31-bit truncated HMAC.
    pub fn totp_auth_raw(&mut self, name: &str, t: u64) -> Result<u32, ClientError> {
        let rp = self
            .vault
            .active_totp()
            .filter(|r| r.name == name)
            .last()
            .cloned()
            .ok_or_else(|| ClientError::Usage(format!("no TOTP registration for {name:?}")))?;
        let n = self.totp_slots();
        let circuit = totp_circuit(n).map_err(proto)?;
        let mut rng = OsRng;
        let nonce: [u8; 12] = rng.gen();
        let inputs = TotpClientInput { k: &self.vault.k, r: &self.vault.r, id: &rp.id, k_client: &rp.k_client, nonce: &nonce }
            .to_bits();
        let mut sid = [0u8; 16];
        rng.fill_bytes(&mut sid);
        let mut ch = Channel::new(sid);
        let open = serde_json::to_vec(&TotpOpen { mech: "totp".into(), t, n: n as u32 }).expect("serializes");
        let open = ch.send(FrameKind::SessionOpen, open);
        let mut eval = EvaluatorSession::new(ch, circuit, totp::session_layout(), &inputs).map_err(proto)?;

        let c = self.vault.credentials.clone();
        let step = |step: TotpStep, frames: &[Frame]| -> Result<Vec<Frame>, ClientError> {
            let body = self.api.totp_session(&c, step, &encode_frames(frames))?;
            decode_frames(&body).map_err(proto)
        };
        let setup = step(TotpStep::Open, &[open])?;
        let [blob, ot1] = &setup[..] else { return Err(proto("expected two setup frames")) };
        let ot2 = eval.on_setup(blob, ot1, &mut rng).map_err(proto)?;
        let ot3 = step(TotpStep::Ot, &[ot2])?;
        let [ot3] = &ot3[..] else { return Err(proto("expected one OT frame")) };
        let labels = eval.on_ot_round3(ot3).map_err(proto)?;
        let ct = totp::encrypt_id(&self.vault.k, &nonce, &rp.id);
        let sig = ecdsa_sign(&self.vault.integrity_key(), &integrity_message(Mechanism::Totp, &ct), None, &mut rng)
            .map_err(proto)?;
        let sig = eval.channel.send(FrameKind::IntegritySig, sig.to_bytes().to_vec());
        let out = step(TotpStep::Finish, &[labels, sig])?;
        let [out] = &out[..] else { return Err(proto("expected one output frame")) };
        let outputs = eval.on_output_bits(out).map_err(proto)?;
        Ok(decode_code(&outputs[0]))
    }

    pub fn totp_auth(&mut self, name: &str, t: u64) -> Result<String, ClientError> {
        Ok(totp::format_code(self.totp_auth_raw(name, t)?))
    }

    // Passwords

    fn pw_evaluate(&mut self) -> Result<([u8; 16], Point), ClientError> {
        for _ in 0..4 {
            let id: [u8; 16] = OsRng.gen();
            let req = PwRegisterRequest { hash: pw::hash_id(&id).to_bytes().to_vec() };
            match self.api.pw_register(self.creds(), &req) {
                Ok(resp) => return Ok((id, point(&resp.evaluated)?)),
                Err(ApiError::Conflict(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(proto("could not find an unused identifier"))
    }

    /// Returns the new password; it is not stored.
    pub fn pw_register(&mut self, name: &str) -> Result<String, ClientError> {
        let (id, evaluated) = self.pw_evaluate()?;
        let k_id = Point::random(&mut OsRng);
        let pw = pw::finish_register(&k_id, &evaluated);
        self.vault.pw.rps.push(PwRp { name: name.to_string(), id, k_id: k_id.to_bytes().to_vec(), imported: false });
        Ok(pw::render_password(&pw))
    }

    /// Makes future authentications for `name` yield `password`.
    pub fn pw_import(&mut self, name: &str, password: &str) -> Result<(), ClientError> {
        if password.len() > larch_core::crypto::elgamal::EMBED_MAX {
            return Err(ClientError::Usage(format!(
                "imported passwords are limited to {} bytes",
                larch_core::crypto::elgamal::EMBED_MAX
            )));
        }
        let (id, evaluated) = self.pw_evaluate()?;
        let k_id = pw::import_key_share(password, &evaluated).map_err(|e| ClientError::Usage(e.to_string()))?;
        self.vault.pw.rps.push(PwRp { name: name.to_string(), id, k_id: k_id.to_bytes().to_vec(), imported: true });
        Ok(())
    }

    pub fn pw_auth(&mut self, name: &str) -> Result<String, ClientError> {
        let rp = self
            .vault
            .pw
            .rps
            .iter()
            .rev()
            .find(|r| r.name == name)
            .cloned()
            .ok_or_else(|| ClientError::Usage(format!("no password registration for {name:?}")))?;
        let list = self.api.pw_list(self.creds())?;
        let points = list.elements.iter().map(|e| point(e)).collect::<Result<Vec<_>, _>>()?;
        let target = pw::hash_id(&rp.id);
        let idx = points.iter().position(|p| *p == target).ok_or(ApiError::RejectUnknown)?;
        let x = self.vault.pw_x();
        let start = pw::auth_client(&x, &points, idx, &self.vault.credentials.account, list.version, &mut OsRng)
            .map_err(proto)?;
        let ct = start.ct.to_bytes();
        let sig = ecdsa_sign(&self.vault.integrity_key(), &integrity_message(Mechanism::Pw, &ct), None, &mut OsRng)
            .map_err(proto)?;
        let resp = self.api.pw_auth(
            self.creds(),
            &PwAuthRequest {
                version: list.version,
                ct: ct.to_vec(),
                proof1: start.proof1,
                proof2: start.proof2,
                sig: sig.to_bytes().to_vec(),
            },
        )?;
        let y = point(&resp.y)?;
        let k_id = Point::from_slice(&rp.k_id).expect("valid vault");
        let pw = pw::finish_auth(&k_id, &y, &self.vault.pw_log_key(), &x, &start.r);
        if rp.imported {
            pw::render_imported(&pw).ok_or_else(|| proto("imported password did not decode"))
        } else {
            Ok(pw::render_password(&pw))
        }
    }

    // Audit

    pub fn fetch_records(&self) -> Result<(Vec<WireRecord>, Vec<BatchInfo>), ClientError> {
        let mut records = Vec::new();
        loop {
            let page = self
                .api
                .audit(self.creds(), &AuditRequest { from_seq: records.len() as u64, limit: Some(AUDIT_PAGE) })?;
            let done = page.records.is_empty() || records.len() + page.records.len() >= page.head as usize;
            records.extend(page.records);
            if done {
                return Ok((records, page.batches));
            }
        }
    }

    /// Fetches every record, checks its signature and decrypts it.
    pub fn audit(&mut self) -> Result<AuditReport, ClientError> {
        let (records, batches) = self.fetch_records()?;
        let integrity = KeyPair::from_secret(self.vault.integrity_key()).pk;
        let x = self.vault.pw_x();
        let rows = records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let (rp, flag) = self.resolve(rec, i as u64, &integrity, &x);
                AuditRow {
                    seq: rec.seq,
                    ts_ms: rec.ts_ms,
                    time: format_time(rec.ts_ms),
                    ip: rec.ip.clone(),
                    mech: rec.mech,
                    rp,
                    presig_index: rec.presig_index,
                    flag,
                }
            })
            .collect();
        let known: HashSet<u64> = self.vault.fido2.batches.iter().map(|b| b.id).collect();
        let batches = batches
            .into_iter()
            .map(|info| BatchRow { known: known.contains(&info.id) || info.status == BatchStatus::Objected, info })
            .collect();
        let seen = records.len() as u64;
        let missing = self.vault.audited.saturating_sub(seen);
        self.vault.audited = self.vault.audited.max(seen);
        Ok(AuditReport { records: rows, batches, missing })
    }

    fn resolve(&self, rec: &WireRecord, pos: u64, integrity: &Point, x: &Scalar) -> (Option<String>, Option<String>) {
        if rec.corrupt {
            return (None, Some("record is unreadable".into()));
        }
        if rec.seq != pos {
            return (None, Some(format!("sequence gap: expected {pos}")));
        }
        if !larch_core::crypto::ecdsa::ecdsa_verify_bytes(
            &integrity.to_bytes(),
            &integrity_message(rec.mech, &rec.ct),
            &rec.sig,
        ) {
            return (None, Some("record signature does not verify".into()));
        }
        let name = match rec.mech {
            Mechanism::Fido2 => fido2::decrypt_id(&self.vault.k, &rec.ct)
                .and_then(|id| self.vault.fido2.rps.iter().find(|r| fido2::rp_id(&r.name) == id).map(|r| r.name.clone())),
            Mechanism::Totp => totp::decrypt_id(&self.vault.k, &rec.ct)
                .and_then(|id| self.vault.totp.iter().find(|r| r.id == id).map(|r| r.name.clone())),
            Mechanism::Pw => Ciphertext::from_bytes(&rec.ct).and_then(|ct| {
                let h = pw::decrypt_record(x, &ct);
                self.vault.pw.rps.iter().find(|r| pw::hash_id(&r.id) == h).map(|r| r.name.clone())
            }),
        };
        match name {
            Some(n) => (Some(n), None),
            None => (None, Some("relying party not in vault".into())),
        }
    }
}

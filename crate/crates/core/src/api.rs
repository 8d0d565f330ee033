//! Request and response types exchanged between client and log, and the
//! [`LogApi`] trait both the HTTP transport and the in-process service
//! implement. Binary fields travel as base64 strings in JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::record::Mechanism;

/// Serde adapter for `Vec<u8>` as standard base64.
pub mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom)
    }

    pub mod list {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for item in v {
                seq.serialize_element(&STANDARD.encode(item))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApiError {
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("proof rejected")]
    RejectProof,
    #[error("record signature rejected")]
    RejectIntegrity,
    #[error("presignature {0} is used or unknown")]
    RejectReplay(u64),
    #[error("presignature {0} is not active yet")]
    RejectInactive(u64),
    #[error("time step outside the accepted window")]
    RejectTime,
    #[error("relying party is not registered")]
    RejectUnknown,
    #[error("registration list is stale; current version is {0}")]
    RejectStale(u64),
    #[error("batch is already active")]
    AlreadyActive,
    #[error("signature opening check failed")]
    Abort,
    #[error("no presignatures left")]
    Exhausted,
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::Unauthorized => 401,
            ApiError::NotFound(_) => 404,
            ApiError::BadRequest(_) => 400,
            ApiError::Conflict(_) | ApiError::AlreadyActive => 409,
            ApiError::RejectProof
            | ApiError::RejectIntegrity
            | ApiError::RejectReplay(_)
            | ApiError::RejectInactive(_)
            | ApiError::RejectTime
            | ApiError::RejectUnknown
            | ApiError::RejectStale(_)
            | ApiError::Abort
            | ApiError::Exhausted => 422,
            ApiError::Storage(_) => 500,
            ApiError::Transport(_) => 502,
        }
    }

    pub fn bad(reason: impl Into<String>) -> ApiError {
        ApiError::BadRequest(reason.into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credentials {
    pub account: String,
    pub token: String,
}

impl Credentials {
    pub fn bearer(&self) -> String {
        format!("{}.{}", self.account, self.token)
    }

    pub fn from_bearer(s: &str) -> Option<Credentials> {
        let (account, token) = s.split_once('.')?;
        Some(Credentials { account: account.to_string(), token: token.to_string() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresignUpload {
    /// PRG seed for the log's implicit presignature fields.
    #[serde(with = "b64")]
    pub log_seed: Vec<u8>,
    /// Batch file of compressed log halves.
    #[serde(with = "b64")]
    pub batch: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BatchStatus {
    Pending,
    Active,
    Objected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchInfo {
    pub id: u64,
    pub start: u64,
    pub count: u32,
    pub status: BatchStatus,
    pub uploaded_ms: u64,
    pub activates_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrollRequest {
    /// Commitment to the archive key.
    #[serde(with = "b64")]
    pub cm: Vec<u8>,
    /// Key that signs record ciphertexts.
    #[serde(with = "b64")]
    pub integrity_key: Vec<u8>,
    /// ElGamal public key for password records.
    #[serde(with = "b64")]
    pub pw_key: Vec<u8>,
    pub presign: PresignUpload,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrollResponse {
    pub credentials: Credentials,
    /// The log's ECDSA key share, `X = g^x`.
    #[serde(with = "b64")]
    pub fido2_key: Vec<u8>,
    /// The log's password key, `K = g^k`.
    #[serde(with = "b64")]
    pub pw_key: Vec<u8>,
    /// Repetitions the log requires in FIDO2 proofs.
    pub zk_reps: u16,
    pub batch: BatchInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRequest {
    pub batch: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fido2AuthRequest {
    pub index: u64,
    #[serde(with = "b64")]
    pub dgst: Vec<u8>,
    /// `nonce[12] ‖ body[32]`.
    #[serde(with = "b64")]
    pub ct: Vec<u8>,
    #[serde(with = "b64")]
    pub proof: Vec<u8>,
    #[serde(with = "b64")]
    pub sig: Vec<u8>,
    /// The client's first signing message `(d₁, e₁)`.
    #[serde(with = "b64")]
    pub round1: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fido2AuthResponse {
    #[serde(with = "b64")]
    pub round1: Vec<u8>,
}

/// The client's signature share. The log answers with its own share and a
/// commitment to its MAC-check values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fido2MacRequest {
    pub index: u64,
    #[serde(with = "b64")]
    pub s: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fido2MacResponse {
    #[serde(with = "b64")]
    pub s: Vec<u8>,
    #[serde(with = "b64")]
    pub mac_commitment: Vec<u8>,
}

/// The client's MAC-check values in the clear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fido2CheckRequest {
    pub index: u64,
    #[serde(with = "b64")]
    pub sigma: Vec<u8>,
    #[serde(with = "b64")]
    pub tau: Vec<u8>,
}

/// The opening of the log's commitment, sent only when the check passed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fido2CheckResponse {
    #[serde(with = "b64")]
    pub sigma: Vec<u8>,
    #[serde(with = "b64")]
    pub tau: Vec<u8>,
    #[serde(with = "b64")]
    pub nonce: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotpRegisterRequest {
    #[serde(with = "b64")]
    pub id: Vec<u8>,
    #[serde(with = "b64")]
    pub key_share: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotpUnregisterRequest {
    #[serde(with = "b64")]
    pub id: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotpListInfo {
    pub registered: u32,
    /// Circuit slot count: `registered` rounded up to a power of two.
    pub slots: u32,
    pub version: u64,
}

/// Payload of the session-open frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotpOpen {
    pub mech: String,
    pub t: u64,
    pub n: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TotpStep {
    Open,
    Ot,
    Finish,
}

impl TotpStep {
    pub fn path(self) -> &'static str {
        match self {
            TotpStep::Open => "/totp/session/open",
            TotpStep::Ot => "/totp/session/ot",
            TotpStep::Finish => "/totp/session/finish",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PwRegisterRequest {
    /// `Hash(id)`, never `id` itself.
    #[serde(with = "b64")]
    pub hash: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PwRegisterResponse {
    /// `Hash(id)^k`.
    #[serde(with = "b64")]
    pub evaluated: Vec<u8>,
    pub version: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PwListResponse {
    pub version: u64,
    /// Registered hashes followed by padding, power-of-two length.
    #[serde(with = "b64::list")]
    pub elements: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PwAuthRequest {
    pub version: u64,
    #[serde(with = "b64")]
    pub ct: Vec<u8>,
    #[serde(with = "b64")]
    pub proof1: Vec<u8>,
    #[serde(with = "b64")]
    pub proof2: Vec<u8>,
    #[serde(with = "b64")]
    pub sig: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PwAuthResponse {
    /// `c₂^k`.
    #[serde(with = "b64")]
    pub y: Vec<u8>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRequest {
    pub from_seq: u64,
    pub limit: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRecord {
    pub seq: u64,
    pub ts_ms: u64,
    pub ip: String,
    pub mech: Mechanism,
    pub presig_index: Option<u64>,
    #[serde(with = "b64")]
    pub ct: Vec<u8>,
    #[serde(with = "b64")]
    pub sig: Vec<u8>,
    /// The stored frame no longer parses; `ct` holds its raw bytes.
    #[serde(default)]
    pub corrupt: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResponse {
    pub records: Vec<WireRecord>,
    /// Sequence number of the next record to be written.
    pub head: u64,
    pub batches: Vec<BatchInfo>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
}

/// Every log endpoint. All calls except `enroll` carry credentials.
pub trait LogApi {
    fn enroll(&self, req: &EnrollRequest) -> Result<EnrollResponse, ApiError>;
    fn fido2_presign(&self, c: &Credentials, req: &PresignUpload) -> Result<BatchInfo, ApiError>;
    fn fido2_object(&self, c: &Credentials, req: &ObjectRequest) -> Result<BatchInfo, ApiError>;
    fn fido2_auth(&self, c: &Credentials, req: &Fido2AuthRequest) -> Result<Fido2AuthResponse, ApiError>;
    fn fido2_auth_mac(&self, c: &Credentials, req: &Fido2MacRequest) -> Result<Fido2MacResponse, ApiError>;
    fn fido2_auth_check(&self, c: &Credentials, req: &Fido2CheckRequest) -> Result<Fido2CheckResponse, ApiError>;
    fn totp_register(&self, c: &Credentials, req: &TotpRegisterRequest) -> Result<TotpListInfo, ApiError>;
    fn totp_unregister(&self, c: &Credentials, req: &TotpUnregisterRequest) -> Result<TotpListInfo, ApiError>;
    /// One step of the garbled-circuit session; bodies are encoded frames.
    fn totp_session(&self, c: &Credentials, step: TotpStep, frames: &[u8]) -> Result<Vec<u8>, ApiError>;
    fn pw_register(&self, c: &Credentials, req: &PwRegisterRequest) -> Result<PwRegisterResponse, ApiError>;
    fn pw_list(&self, c: &Credentials) -> Result<PwListResponse, ApiError>;
    fn pw_auth(&self, c: &Credentials, req: &PwAuthRequest) -> Result<PwAuthResponse, ApiError>;
    fn audit(&self, c: &Credentials, req: &AuditRequest) -> Result<AuditResponse, ApiError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_round_trip_through_json() {
        for e in [ApiError::Unauthorized, ApiError::RejectReplay(7), ApiError::bad("x"), ApiError::RejectStale(3)] {
            let j = serde_json::to_string(&e).unwrap();
            assert_eq!(serde_json::from_str::<ApiError>(&j).unwrap(), e);
        }
        assert_eq!(serde_json::to_string(&ApiError::Abort).unwrap(), r#"{"error":"ABORT"}"#);
    }

    #[test]
    fn binary_fields_are_base64() {
        let r = PwListResponse { version: 2, elements: vec![vec![1, 2, 3], vec![]] };
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, r#"{"version":2,"elements":["AQID",""]}"#);
        assert_eq!(serde_json::from_str::<PwListResponse>(&j).unwrap(), r);
    }

    #[test]
    fn bearer_round_trip() {
        let c = Credentials { account: "a1".into(), token: "t0k".into() };
        assert_eq!(Credentials::from_bearer(&c.bearer()), Some(c));
        assert_eq!(Credentials::from_bearer("nodot"), None);
    }
}

//! Authentication records as stored by the log.
//!
//! Frame body: `seq u64 ‖ ts_ms u64 ‖ mech u8 ‖ has_index u8 ‖ [index u64] ‖
//! ip_len u8 ‖ ip ‖ ct_len u16 ‖ ct ‖ sig[64]`, integers big-endian.

use serde::{Deserialize, Serialize};

use crate::crypto::ecdsa::SIGNATURE_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Fido2,
    Totp,
    Pw,
}

impl Mechanism {
    pub fn tag(self) -> u8 {
        match self {
            Mechanism::Fido2 => 1,
            Mechanism::Totp => 2,
            Mechanism::Pw => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Mechanism> {
        match tag {
            1 => Some(Mechanism::Fido2),
            2 => Some(Mechanism::Totp),
            3 => Some(Mechanism::Pw),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Fido2 => "fido2",
            Mechanism::Totp => "totp",
            Mechanism::Pw => "pw",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Mechanism, String> {
        match s {
            "fido2" => Ok(Mechanism::Fido2),
            "totp" => Ok(Mechanism::Totp),
            "pw" => Ok(Mechanism::Pw),
            other => Err(format!("unknown mechanism {other:?}")),
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The message a client signs so the log can check the ciphertext it stores.
pub fn integrity_message(mech: Mechanism, ct: &[u8]) -> Vec<u8> {
    let mut m = b"larch/record/v1".to_vec();
    m.push(mech.tag());
    m.extend_from_slice(ct);
    m
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredRecord {
    pub seq: u64,
    pub ts_ms: u64,
    pub ip: String,
    pub mech: Mechanism,
    /// FIDO2 records carry the presignature index they consumed.
    pub presig_index: Option<u64>,
    pub ct: Vec<u8>,
    pub sig: Vec<u8>,
}

impl StoredRecord {
    /// `ts ‖ ct ‖ sig`, the part that is not framing or metadata.
    pub fn payload_len(&self) -> usize {
        8 + self.ct.len() + self.sig.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let ip = self.ip.as_bytes();
        let ip = &ip[..ip.len().min(255)];
        let mut out = Vec::with_capacity(32 + ip.len() + self.ct.len() + self.sig.len());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.ts_ms.to_be_bytes());
        out.push(self.mech.tag());
        match self.presig_index {
            Some(i) => {
                out.push(1);
                out.extend_from_slice(&i.to_be_bytes());
            }
            None => out.push(0),
        }
        out.push(ip.len() as u8);
        out.extend_from_slice(ip);
        out.extend_from_slice(&(self.ct.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.ct);
        out.extend_from_slice(&self.sig);
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<StoredRecord> {
        let mut r = Reader(bytes);
        let seq = r.u64()?;
        let ts_ms = r.u64()?;
        let mech = Mechanism::from_tag(r.u8()?)?;
        let presig_index = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            _ => return None,
        };
        let ip_len = r.u8()? as usize;
        let ip = String::from_utf8(r.take(ip_len)?.to_vec()).ok()?;
        let ct_len = u16::from_be_bytes(r.take(2)?.try_into().ok()?) as usize;
        let ct = r.take(ct_len)?.to_vec();
        let sig = r.take(SIGNATURE_LEN)?.to_vec();
        if !r.0.is_empty() {
            return None;
        }
        Some(StoredRecord { seq, ts_ms, ip, mech, presig_index, ct, sig })
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.0.len() < n {
            return None;
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Some(a)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_be_bytes(self.take(8)?.try_into().ok()?))
    }
}

//! Core of larchkit: accountable authentication in which a client and a log
//! service jointly produce FIDO2 signatures, TOTP codes and passwords, with
//! every authentication leaving an encrypted record only the client can read.

pub mod api;
pub mod circuit;
pub mod crypto;
pub mod dlproof;
pub mod ecdsa2p;
pub mod gc;
pub mod protocol;
pub mod record;
pub mod zk;

//! Mechanism-level helpers shared by client and log: message framing,
//! record ciphertexts, proof statements and credential formulas.

pub mod fido2;
pub mod pw;
pub mod totp;

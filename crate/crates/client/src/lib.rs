//! Client library for the larch log: vault storage, HTTP transport and the
//! per-mechanism protocol drivers used by `larchctl`.

pub mod client;
pub mod http;
pub mod vault;

pub use client::{AuditReport, AuditRow, BatchRow, Client, ClientError, Fido2Job};
pub use http::HttpTransport;
pub use vault::{Vault, VaultFile};

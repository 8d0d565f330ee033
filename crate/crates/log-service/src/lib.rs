//! The log service: holds one share of every credential, checks proofs,
//! and appends an encrypted record before releasing its contribution.

pub mod account;
pub mod config;
pub mod http;
pub mod service;
pub mod store;

pub use service::{Fault, LocalTransport, LogService, ServiceConfig};

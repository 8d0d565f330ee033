mod common;

use std::time::Duration;

use common::*;
use larch_client::ClientError;
use larch_core::api::{ApiError, BatchStatus, Fido2AuthRequest, LogApi, Mechanism};
use larch_core::protocol::totp;

fn api_err<T: std::fmt::Debug>(r: Result<T, ClientError>) -> ApiError {
    match r {
        Err(ClientError::Api(e)) => e,
        other => panic!("expected an API error, got {other:?}"),
    }
}

#[test]
fn fido2_signatures_verify_under_registered_key() {
    let env = Env::new();
    let mut c = env.enroll(8);
    let pk = c.fido2_register("example.com");
    for i in 0..3u8 {
        let chal = [i; 32];
        let sig = c.fido2_auth("example.com", &chal).unwrap();
        assert!(oracle_verify(&pk, "example.com", &chal, &sig));
        assert!(!oracle_verify(&pk, "example.org", &chal, &sig));
    }
    assert_eq!(c.presignatures_left(), 5);
}

#[test]
fn duplicate_rp_names_get_independent_keys() {
    let env = Env::new();
    let mut c = env.enroll(4);
    let a = c.fido2_register("dup.test");
    let b = c.fido2_register("dup.test");
    assert_ne!(a, b);
    let sig = c.fido2_auth("dup.test", &[9; 32]).unwrap();
    assert!(oracle_verify(&b, "dup.test", &[9; 32], &sig));
}

#[test]
fn presignatures_run_out_and_replenish() {
    let env = Env::new();
    let mut c = env.enroll(2);
    c.fido2_register("rp");
    c.fido2_auth("rp", &[1; 32]).unwrap();
    c.fido2_auth("rp", &[2; 32]).unwrap();
    assert_eq!(api_err(c.fido2_auth("rp", &[3; 32])), ApiError::Exhausted);
    let info = c.fido2_replenish(3).unwrap();
    assert_eq!((info.start, info.count), (2, 3));
    c.fido2_auth("rp", &[3; 32]).unwrap();
    assert_eq!(c.presignatures_left(), 2);
}

#[test]
fn replayed_index_is_rejected() {
    let env = Env::new();
    let mut c = env.enroll(4);
    c.fido2_register("rp");
    c.fido2_auth("rp", &[1; 32]).unwrap();
    // Rewind the local bookkeeping so the client reuses index 0.
    c.vault.fido2.used.clear();
    assert_eq!(api_err(c.fido2_auth("rp", &[2; 32])), ApiError::RejectReplay(0));
}

#[test]
fn proof_is_checked_before_the_index() {
    let env = Env::new();
    let c = env.enroll(2);
    let req = Fido2AuthRequest {
        index: 99,
        dgst: vec![0; 32],
        ct: vec![0; 44],
        proof: vec![],
        sig: vec![0; 64],
        round1: vec![0; 64],
    };
    assert_eq!(c.api.fido2_auth(&c.vault.credentials, &req).unwrap_err(), ApiError::RejectProof);
}

#[test]
fn new_batches_wait_out_the_objection_window() {
    let env = Env::with_window(Duration::from_secs(3600));
    let mut c = env.enroll(1);
    c.fido2_register("rp");
    c.fido2_auth("rp", &[1; 32]).unwrap();
    let b = c.fido2_replenish(2).unwrap();
    assert_eq!(b.status, BatchStatus::Pending);
    assert_eq!(api_err(c.fido2_auth("rp", &[2; 32])), ApiError::RejectInactive(1));

    env.advance(Duration::from_secs(3601));
    c.fido2_auth("rp", &[3; 32]).unwrap();
    assert_eq!(api_err(c.fido2_object(b.id)), ApiError::AlreadyActive);
}

#[test]
fn objected_batch_is_never_used() {
    let env = Env::with_window(Duration::from_secs(60));
    let mut c = env.enroll(1);
    c.fido2_register("rp");
    // A copy of the vault uploads a batch this client never sees, as a
    // compromised device would.
    let mut rogue = larch_client::Client::new(c.vault.clone(), env.transport());
    let b = rogue.fido2_replenish(2).unwrap();

    let report = c.audit().unwrap();
    let row = report.batches.iter().find(|r| r.info.id == b.id).unwrap();
    assert!(!row.known);
    assert!(report.flagged());

    let info = c.fido2_object(b.id).unwrap();
    assert_eq!(info.status, BatchStatus::Objected);
    env.advance(Duration::from_secs(120));
    c.fido2_auth("rp", &[1; 32]).unwrap();
    rogue.vault.fido2.used.push(0);
    assert_eq!(api_err(rogue.fido2_auth("rp", &[2; 32])), ApiError::RejectReplay(1));
    assert!(!c.audit().unwrap().flagged());
}

#[test]
fn totp_codes_match_reference() {
    let env = Env::new();
    let mut c = env.enroll(1);
    let key = b"12345678901234567890123456789012";
    c.totp_register("bank", key).unwrap();
    c.totp_register("mail", b"short key").unwrap();
    let t = totp::time_step(env.now_secs());
    assert_eq!(c.totp_auth("bank", t).unwrap(), oracle_totp(key, t));
    assert_eq!(c.totp_auth("mail", t + 1).unwrap(), oracle_totp(b"short key", t + 1));
    assert_eq!(c.audit().unwrap().rp_sequence(Mechanism::Totp), ["bank", "mail"]);
}

#[test]
fn totp_rejects_skewed_time_and_stale_lists() {
    let env = Env::new();
    let mut c = env.enroll(1);
    c.totp_register("a", b"k1").unwrap();
    let t = totp::time_step(env.now_secs());
    assert_eq!(api_err(c.totp_auth("a", t + 5)), ApiError::RejectTime);

    // Another device registers, so this vault's view of the list is stale.
    let mut other = larch_client::Client::new(c.vault.clone(), env.transport());
    other.totp_register("b", b"k2").unwrap();
    other.totp_register("c", b"k3").unwrap();
    assert!(matches!(api_err(c.totp_auth("a", t)), ApiError::RejectStale(_)));
    assert!(c.audit().unwrap().records.is_empty());
}

#[test]
fn totp_unregister_removes_the_slot() {
    let env = Env::new();
    let mut c = env.enroll(1);
    c.totp_register("a", b"k1").unwrap();
    c.totp_register("b", b"k2").unwrap();
    let info = c.totp_unregister("a").unwrap();
    assert_eq!((info.registered, info.slots), (1, 1));
    assert!(matches!(c.totp_auth("a", 0), Err(ClientError::Usage(_))));
    let t = totp::time_step(env.now_secs());
    assert_eq!(c.totp_auth("b", t).unwrap(), oracle_totp(b"k2", t));
}

#[test]
fn totp_keys_over_32_bytes_are_refused() {
    let env = Env::new();
    let mut c = env.enroll(1);
    assert!(matches!(c.totp_register("a", &[7; 33]), Err(ClientError::Usage(_))));
}

#[test]
fn passwords_are_stable_and_distinct() {
    let env = Env::new();
    let mut c = env.enroll(1);
    let a = c.pw_register("a.test").unwrap();
    let b = c.pw_register("b.test").unwrap();
    assert_ne!(a, b);
    assert_eq!(c.pw_auth("a.test").unwrap(), a);
    assert_eq!(c.pw_auth("b.test").unwrap(), b);
    c.pw_import("legacy.test", "hunter2 with spaces").unwrap();
    assert_eq!(c.pw_auth("legacy.test").unwrap(), "hunter2 with spaces");
    assert!(matches!(c.pw_import("x", &"x".repeat(31)), Err(ClientError::Usage(_))));
    assert_eq!(c.audit().unwrap().rp_sequence(Mechanism::Pw), ["a.test", "b.test", "legacy.test"]);
}

#[test]
fn password_auth_follows_list_updates() {
    let env = Env::new();
    let mut c = env.enroll(1);
    let pw = c.pw_register("a").unwrap();
    let mut other = larch_client::Client::new(c.vault.clone(), env.transport());
    other.pw_register("b").unwrap();
    // pw_auth fetches the current list, so it still succeeds.
    assert_eq!(c.pw_auth("a").unwrap(), pw);
}

#[test]
fn state_survives_restart() {
    let mut env = Env::new();
    let mut c = env.enroll(4);
    let pk = c.fido2_register("rp");
    c.fido2_auth("rp", &[1; 32]).unwrap();
    let pw = c.pw_register("site").unwrap();
    c.totp_register("otp", b"key").unwrap();

    env.restart();
    let mut c = env.reattach(c);
    let sig = c.fido2_auth("rp", &[2; 32]).unwrap();
    assert!(oracle_verify(&pk, "rp", &[2; 32], &sig));
    assert_eq!(c.pw_auth("site").unwrap(), pw);
    let t = totp::time_step(env.now_secs());
    assert_eq!(c.totp_auth("otp", t).unwrap(), oracle_totp(b"key", t));
    c.vault.fido2.used.retain(|i| *i != 0);
    assert_eq!(api_err(c.fido2_auth("rp", &[3; 32])), ApiError::RejectReplay(0));

    let report = c.audit().unwrap();
    assert!(!report.flagged());
    assert_eq!(report.records.len(), 4);
    assert_eq!(report.records[0].presig_index, Some(0));
}

#[test]
fn tampered_records_are_flagged() {
    let mut env = Env::new();
    let mut c = env.enroll(4);
    c.fido2_register("rp");
    c.fido2_auth("rp", &[1; 32]).unwrap();
    c.pw_register("site").unwrap();
    c.pw_auth("site").unwrap();
    assert!(!c.audit().unwrap().flagged());

    let path = record_log(&env, &c.vault.credentials.account);
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 70] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    env.restart();
    let mut c = env.reattach(c);
    let report = c.audit().unwrap();
    assert!(report.flagged());
    assert!(report.records[0].flag.is_none());
    assert!(report.records[1].flag.is_some());
}

#[test]
fn dropped_records_are_flagged() {
    let mut env = Env::new();
    let mut c = env.enroll(1);
    c.pw_register("a").unwrap();
    c.pw_auth("a").unwrap();
    c.pw_auth("a").unwrap();
    assert_eq!(c.audit().unwrap().records.len(), 2);

    // Cut the final frame off the log.
    let path = record_log(&env, &c.vault.credentials.account);
    let bytes = std::fs::read(&path).unwrap();
    let first = 4 + u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
    std::fs::write(&path, &bytes[..first]).unwrap();
    env.restart();
    let mut c = env.reattach(c);
    let report = c.audit().unwrap();
    assert_eq!((report.records.len(), report.missing), (1, 1));
    assert!(report.flagged());
}

#[test]
fn wrong_credentials_are_refused() {
    let env = Env::new();
    let mut c = env.enroll(1);
    c.vault.credentials.token = "00".repeat(32);
    assert_eq!(api_err(c.pw_register("x")), ApiError::Unauthorized);
}

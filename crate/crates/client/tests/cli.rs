mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Duration;

use common::*;
use larch_client::{HttpTransport, VaultFile};
use larch_core::api::{ApiError, AuditRequest, Credentials, LogApi};
use larch_core::crypto::{Point, Signature};
use larch_core::protocol::totp;
use larch_log::http::{spawn, ServerHandle};
use larch_log::{LogService, ServiceConfig};
use tempfile::TempDir;

struct Setup {
    _data: TempDir,
    home: TempDir,
    server: ServerHandle,
}

impl Setup {
    fn new() -> Setup {
        Setup::with_window(Duration::ZERO)
    }

    fn with_window(window: Duration) -> Setup {
        let data = TempDir::new().unwrap();
        let mut cfg = ServiceConfig::new(data.path());
        cfg.objection_window = window;
        let svc = Arc::new(LogService::open(cfg).unwrap());
        let server = spawn(svc, "127.0.0.1:0".parse().unwrap()).unwrap();
        Setup { _data: data, home: TempDir::new().unwrap(), server }
    }

    fn vault(&self) -> PathBuf {
        self.home.path().join("vault.json")
    }

    fn run(&self, args: &[&str]) -> Output {
        larchctl(&self.vault(), &self.server.url(), args)
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap().trim().to_string()
    }
}

fn larchctl(vault: &Path, url: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_larchctl"))
        .env_remove("LARCH_LOG_URL")
        .env_remove("LARCH_VAULT")
        .arg("--vault")
        .arg(vault)
        .arg("--log-url")
        .arg(url)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn full_cli_session() {
    let s = Setup::new();
    s.ok(&["enroll", "--presigs", "4"]);
    let out = s.run(&["enroll"]);
    assert_eq!(out.status.code(), Some(64));

    let pk = s.ok(&["register", "fido2", "example.com"]);
    let chal = hex::encode([7u8; 32]);
    let sig = s.ok(&["auth", "fido2", "example.com", "--challenge", &chal]);
    let (p, g) = (Point::from_slice(&hex::decode(&pk).unwrap()).unwrap(), Signature::from_bytes(&hex::decode(&sig).unwrap()).unwrap());
    assert!(oracle_verify(&p, "example.com", &[7; 32], &g));
    assert_eq!(s.ok(&["verify-sig", &pk, "example.com", &chal, &sig]), "valid");
    let other = hex::encode([8u8; 32]);
    assert_eq!(s.run(&["verify-sig", &pk, "example.com", &other, &sig]).status.code(), Some(1));

    let pw = s.ok(&["register", "pw", "shop.test"]);
    assert_eq!(s.ok(&["auth", "pw", "shop.test"]), pw);
    s.ok(&["register", "pw", "old.test", "--import", "correct horse"]);
    assert_eq!(s.ok(&["auth", "pw", "old.test"]), "correct horse");

    let key = b"a totp secret of 20b";
    let b32 = data_encoding::BASE32.encode(key);
    s.ok(&["register", "totp", "bank", "--totp-key", &b32]);
    let now = now_ms() / 1000;
    let code = s.ok(&["auth", "totp", "bank", "--time", &now.to_string()]);
    assert_eq!(code, oracle_totp(key, totp::time_step(now)));

    let table = s.ok(&["audit"]);
    let rps: Vec<&str> = table.lines().skip(1).take_while(|l| !l.is_empty()).map(|l| l.split_whitespace().nth(4).unwrap()).collect();
    assert_eq!(rps, ["example.com", "shop.test", "old.test", "bank"]);
    let json: serde_json::Value = serde_json::from_str(&s.ok(&["audit", "--json"])).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 4);
    assert_eq!(json["records"][0]["presig_index"], 0);
    assert_eq!(json["records"][0]["ip"], "127.0.0.1");

    s.ok(&["unregister", "bank"]);
    assert_eq!(s.run(&["auth", "totp", "bank"]).status.code(), Some(64));
}

#[test]
fn usage_errors_exit_64() {
    let s = Setup::new();
    assert_eq!(s.run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(s.run(&["auth", "pw", "x"]).status.code(), Some(64));
    s.ok(&["enroll", "--presigs", "1"]);
    assert_eq!(s.run(&["register", "totp", "bank"]).status.code(), Some(64));
    assert_eq!(s.run(&["register", "totp", "bank", "--totp-key", "not base32!"]).status.code(), Some(64));
    assert_eq!(s.run(&["auth", "fido2", "nobody"]).status.code(), Some(64));
    assert_eq!(s.run(&["auth", "fido2", "nobody", "--challenge", "abc"]).status.code(), Some(64));
}

#[test]
fn empty_audit_prints_a_header() {
    let s = Setup::new();
    s.ok(&["enroll", "--presigs", "1"]);
    let out = s.ok(&["audit"]);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("SEQ"));
    assert_eq!(lines[1], "");
    assert!(lines[2].trim_start().starts_with("BATCH"));
}

#[test]
fn exhausted_presignatures_fail_and_replenish_recovers() {
    let s = Setup::new();
    s.ok(&["enroll", "--presigs", "1"]);
    s.ok(&["register", "fido2", "rp"]);
    s.ok(&["auth", "fido2", "rp"]);
    let out = s.run(&["auth", "fido2", "rp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no presignatures left"), "{}", String::from_utf8_lossy(&out.stderr));
    s.ok(&["replenish", "--count", "2"]);
    s.ok(&["auth", "fido2", "rp"]);
}

#[test]
fn audit_exits_2_on_an_unknown_batch() {
    let s = Setup::with_window(Duration::from_secs(3600));
    s.ok(&["enroll", "--presigs", "1"]);
    // A second copy of the vault uploads a batch the first never learns of.
    let copy = s.home.path().join("copy.json");
    std::fs::copy(s.vault(), &copy).unwrap();
    let out = larchctl(&copy, &s.server.url(), &["replenish", "--count", "1"]);
    assert!(out.status.success());
    assert_eq!(s.run(&["audit"]).status.code(), Some(2));
    s.ok(&["object", "1"]);
    assert_eq!(s.run(&["audit"]).status.code(), Some(0));
}

#[test]
fn vault_is_locked_while_in_use() {
    let s = Setup::new();
    s.ok(&["enroll", "--presigs", "1"]);
    let _held = VaultFile::lock(&s.vault()).unwrap();
    let out = s.run(&["audit"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("in use"));
}

#[test]
fn http_errors_map_to_status_codes() {
    let s = Setup::new();
    let url = s.server.url();
    let http = reqwest::blocking::Client::new();
    let r = http.post(format!("{url}/audit")).json(&AuditRequest::default()).send().unwrap();
    assert_eq!(r.status(), 401);
    assert_eq!(r.json::<ApiError>().unwrap(), ApiError::Unauthorized);
    let r = http.post(format!("{url}/no/such")).send().unwrap();
    assert_eq!(r.status(), 404);
    let r = http.post(format!("{url}/enroll")).header("content-type", "application/json").body("{").send().unwrap();
    assert_eq!(r.status(), 400);
    assert!(matches!(r.json::<ApiError>().unwrap(), ApiError::BadRequest(_)));

    let api = HttpTransport::new(&url).unwrap();
    let bogus = Credentials { account: "nobody".into(), token: "x".into() };
    assert_eq!(api.pw_list(&bogus).unwrap_err(), ApiError::Unauthorized);
    let dead = HttpTransport::new("http://127.0.0.1:1").unwrap();
    assert!(matches!(dead.pw_list(&bogus).unwrap_err(), ApiError::Transport(_)));
}

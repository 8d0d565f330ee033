//! `larchctl`: command-line client for a larch log.
//!
//! Exit codes: 0 success, 1 failure, 2 audit found something to flag,
//! 64 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use larch_client::client::format_time;
use larch_client::{AuditReport, Client, ClientError, HttpTransport, VaultFile};
use larch_core::crypto::ecdsa::verify_digest;
use larch_core::crypto::{Point, Scalar, Signature};
use larch_core::protocol::{fido2, totp};
use rand::Rng;

const EXIT_FAILURE: u8 = 1;
const EXIT_FLAGGED: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "larchctl", version, about = "Authenticate through a larch log and audit its records")]
struct Cli {
    /// Base URL of the log service.
    #[arg(long, env = "LARCH_LOG_URL", global = true)]
    log_url: Option<String>,
    /// Path of the client vault.
    #[arg(long, env = "LARCH_VAULT", global = true, default_value = "larch-vault.json")]
    vault: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mech {
    Fido2,
    Totp,
    Pw,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enroll with the log and create the vault.
    Enroll {
        #[arg(long, default_value_t = 64)]
        presigs: usize,
    },
    /// Register a relying party.
    Register {
        #[arg(value_enum)]
        mech: Mech,
        rp: String,
        /// Base32 TOTP secret, as shown by the relying party.
        #[arg(long)]
        totp_key: Option<String>,
        /// Import an existing password instead of generating one.
        #[arg(long)]
        import: Option<String>,
    },
    /// Authenticate to a relying party.
    Auth {
        #[arg(value_enum)]
        mech: Mech,
        rp: String,
        /// FIDO2 challenge, 32 bytes hex; random if omitted.
        #[arg(long)]
        challenge: Option<String>,
        /// TOTP Unix time in seconds; now if omitted.
        #[arg(long)]
        time: Option<u64>,
    },
    /// Remove a TOTP registration.
    Unregister { rp: String },
    /// Upload a new batch of FIDO2 presignatures.
    Replenish {
        #[arg(long, default_value_t = 64)]
        count: usize,
    },
    /// Cancel a presignature batch that is still in its objection window.
    Object { batch: u64 },
    /// Download, verify and decrypt every record.
    Audit {
        #[arg(long)]
        json: bool,
    },
    /// Check a FIDO2 signature offline.
    VerifySig {
        /// Public key, hex SEC1.
        pk: String,
        rp: String,
        challenge: String,
        sig: String,
    },
}

enum Failure {
    Usage(String),
    Other(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Failure {
        match e {
            ClientError::Usage(m) => Failure::Usage(m),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Other(format!("vault: {e}"))
    }
}

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

fn hex32(s: &str, what: &str) -> Result<[u8; 32], Failure> {
    hex::decode(s).ok().and_then(|b| b.try_into().ok()).ok_or_else(|| usage(format!("{what} must be 32 bytes of hex")))
}

fn base32_decode(s: &str) -> Option<Vec<u8>> {
    let clean: String = s.chars().filter(|c| !c.is_whitespace() && *c != '-').collect::<String>().to_ascii_uppercase();
    data_encoding::BASE32_NOPAD.decode(clean.trim_end_matches('=').as_bytes()).ok()
}

fn open_client(cli: &Cli, vf: &VaultFile) -> Result<Client<HttpTransport>, Failure> {
    if vf.is_vacant() {
        return Err(usage(format!("no vault at {}; run `larchctl enroll` first", vf.path().display())));
    }
    let vault = vf.load()?;
    let url = cli.log_url.clone().unwrap_or_else(|| vault.log_url.clone());
    let api = HttpTransport::new(&url).map_err(|e| Failure::Other(e.to_string()))?;
    Ok(Client::new(vault, api))
}

fn print_audit(report: &AuditReport) {
    if report.missing > 0 {
        println!("WARNING: {} record(s) seen by an earlier audit are missing", report.missing);
    }
    println!("{:>6}  {:<24}  {:<6}  {:<15}  {:<24}  FLAG", "SEQ", "TIME", "MECH", "IP", "RP");
    for r in &report.records {
        println!(
            "{:>6}  {:<24}  {:<6}  {:<15}  {:<24}  {}",
            r.seq,
            r.time,
            r.mech.name(),
            r.ip,
            r.rp.as_deref().unwrap_or("-"),
            r.flag.as_deref().unwrap_or("")
        );
    }
    if !report.batches.is_empty() {
        println!();
        println!("{:>6}  {:>8}  {:>6}  {:<9}  {:<24}  FLAG", "BATCH", "START", "COUNT", "STATUS", "ACTIVATES");
        for b in &report.batches {
            println!(
                "{:>6}  {:>8}  {:>6}  {:<9}  {:<24}  {}",
                b.info.id,
                b.info.start,
                b.info.count,
                format!("{:?}", b.info.status).to_lowercase(),
                format_time(b.info.activates_ms),
                if b.known { "" } else { "not uploaded by this client" }
            );
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Cmd::VerifySig { pk, rp, challenge, sig } = &cli.cmd {
        let pk = hex::decode(pk).ok().and_then(|b| Point::from_slice(&b)).ok_or_else(|| usage("invalid public key"))?;
        let chal = hex32(challenge, "challenge")?;
        let sig = hex::decode(sig).ok().and_then(|b| Signature::from_bytes(&b)).ok_or_else(|| usage("invalid signature"))?;
        let digest = Scalar::reduce_bytes(&fido2::auth_digest(&fido2::rp_id(rp), &chal));
        return if verify_digest(&pk, &digest, &sig) {
            println!("valid");
            Ok(0)
        } else {
            println!("invalid");
            Ok(EXIT_FAILURE)
        };
    }

    let vf = VaultFile::lock(&cli.vault)?;
    if let Cmd::Enroll { presigs } = cli.cmd {
        if !vf.is_vacant() {
            return Err(usage(format!("vault {} already exists", cli.vault.display())));
        }
        let url = cli.log_url.clone().ok_or_else(|| usage("--log-url is required to enroll"))?;
        let api = HttpTransport::new(&url).map_err(|e| Failure::Other(e.to_string()))?;
        let c = Client::enroll(api, &url, presigs)?;
        vf.save(&c.vault)?;
        println!("enrolled as {}", c.vault.credentials.account);
        return Ok(0);
    }

    let mut c = open_client(&cli, &vf)?;
    // Saved even on failure: a FIDO2 index is spent once the attempt starts.
    let result = dispatch(&mut c, &cli.cmd);
    vf.save(&c.vault)?;
    result
}

fn dispatch(c: &mut Client<HttpTransport>, cmd: &Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::Enroll { .. } | Cmd::VerifySig { .. } => unreachable!("handled before the vault is opened"),
        Cmd::Register { mech, rp, totp_key, import } => match mech {
            Mech::Fido2 => println!("{}", hex::encode(c.fido2_register(rp).to_bytes())),
            Mech::Totp => {
                let key = totp_key.as_deref().ok_or_else(|| usage("--totp-key is required for totp"))?;
                let key = base32_decode(key).ok_or_else(|| usage("--totp-key is not valid base32"))?;
                let info = c.totp_register(rp, &key)?;
                println!("registered ({} of {} slots)", info.registered, info.slots);
            }
            Mech::Pw => match import {
                Some(pw) => {
                    c.pw_import(rp, pw)?;
                    println!("imported");
                }
                None => println!("{}", c.pw_register(rp)?),
            },
        },
        Cmd::Auth { mech, rp, challenge, time } => match mech {
            Mech::Fido2 => {
                let chal = match challenge {
                    Some(h) => hex32(h, "challenge")?,
                    None => {
                        let chal: [u8; 32] = rand::thread_rng().gen();
                        eprintln!("challenge {}", hex::encode(chal));
                        chal
                    }
                };
                let sig = c.fido2_auth(rp, &chal)?;
                println!("{}", hex::encode(sig.to_bytes()));
            }
            Mech::Totp => {
                let now = time.unwrap_or_else(|| std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
                println!("{}", c.totp_auth(rp, totp::time_step(now))?);
            }
            Mech::Pw => println!("{}", c.pw_auth(rp)?),
        },
        Cmd::Unregister { rp } => {
            let info = c.totp_unregister(rp)?;
            println!("unregistered ({} remaining)", info.registered);
        }
        Cmd::Replenish { count } => {
            let b = c.fido2_replenish(*count)?;
            println!("batch {} indices {}..{} active at {}", b.id, b.start, b.start + b.count as u64, format_time(b.activates_ms));
        }
        Cmd::Object { batch } => {
            c.fido2_object(*batch)?;
            println!("batch {batch} cancelled");
        }
        Cmd::Audit { json } => {
            let report = c.audit()?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializes"));
            } else {
                print_audit(&report);
            }
            if report.flagged() {
                return Ok(EXIT_FLAGGED);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("larchctl: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Other(m)) => {
            eprintln!("larchctl: {m}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

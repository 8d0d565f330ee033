use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use larch_core::zk::ZkParams;

use crate::service::ServiceConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RepsProfile {
    /// 20 repetitions; fast, for tests only.
    Test,
    /// 137 repetitions, soundness error below 2^-80.
    Prod,
}

#[derive(Clone, Debug, Parser)]
#[command(name = "larch-log", about = "Log service for split-secret authentication")]
pub struct Config {
    #[arg(long, env = "BIND", default_value = "127.0.0.1:8700")]
    pub bind: SocketAddr,
    #[arg(long, env = "DATA_DIR", default_value = "larch-data")]
    pub data_dir: PathBuf,
    /// Delay before a replenished presignature batch becomes usable.
    #[arg(long, env = "OBJECTION_WINDOW_SECS", default_value_t = 3600)]
    pub objection_window_secs: u64,
    /// Accepted distance, in 30-second steps, between client and log time.
    #[arg(long, env = "TOTP_SKEW_STEPS", default_value_t = 1)]
    pub totp_skew_steps: u64,
    #[arg(long, env = "REPS_PROFILE", value_enum, default_value = "prod")]
    pub reps_profile: RepsProfile,
}

impl Config {
    pub fn service(&self) -> ServiceConfig {
        ServiceConfig {
            data_dir: self.data_dir.clone(),
            objection_window: Duration::from_secs(self.objection_window_secs),
            totp_skew_steps: self.totp_skew_steps,
            zk: match self.reps_profile {
                RepsProfile::Test => ZkParams::TEST,
                RepsProfile::Prod => ZkParams::PROD,
            },
        }
    }
}

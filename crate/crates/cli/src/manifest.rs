use std::path::Path;

use catloop::config::Config;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        InputDigest {
            path: path.display().to_string(),
            sha256: digest_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Everything that determines a run's outputs. `manifest_id` hashes all of
/// it except the timestamp and the output list, so equal ids mean equal
/// inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub manifest_id: String,
    pub command: String,
    pub arguments: serde_json::Value,
    pub config: Config,
    pub inputs: Vec<InputDigest>,
    pub tool_version: String,
    pub seed: u64,
    /// RFC 3339; taken from `SOURCE_DATE_EPOCH` when set.
    pub timestamp: String,
    pub outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
struct Identity<'a> {
    command: &'a str,
    arguments: &'a serde_json::Value,
    config: &'a Config,
    inputs: &'a [InputDigest],
    tool_version: &'a str,
    seed: u64,
}

fn timestamp() -> Result<String, CliError> {
    let at = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("SOURCE_DATE_EPOCH is not an integer: {v:?}")))?;
            DateTime::<Utc>::from_timestamp(secs, 0)
                .ok_or_else(|| CliError::Usage(format!("SOURCE_DATE_EPOCH out of range: {secs}")))?
        }
        Err(_) => Utc::now(),
    };
    Ok(at.to_rfc3339_opts(SecondsFormat::Secs, true))
}

impl RunManifest {
    pub fn new(
        command: &str,
        arguments: serde_json::Value,
        config: &Config,
        inputs: Vec<InputDigest>,
        seed: u64,
    ) -> Result<Self, CliError> {
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let identity = Identity {
            command,
            arguments: &arguments,
            config,
            inputs: &inputs,
            tool_version: &tool_version,
            seed,
        };
        let manifest_id = digest_hex(&serde_json::to_vec(&identity).expect("manifest serializes"));
        Ok(RunManifest {
            manifest_id,
            command: command.to_string(),
            arguments,
            config: config.clone(),
            inputs,
            tool_version,
            seed,
            timestamp: timestamp()?,
            outputs: Vec::new(),
        })
    }
}

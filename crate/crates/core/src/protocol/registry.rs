//! Append-only JSON-lines registry of claims and verdicts.
//!
//! One record per LF-terminated line. Writers hold `<registry>.lock`, created
//! exclusively, for the duration of an append; readers take no lock and skip
//! lines that fail to parse.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::claim::Claim;

const LOCK_ATTEMPTS: u32 = 200;
const LOCK_BACKOFF: Duration = Duration::from_millis(25);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub timestamp: u64,
    pub claim_digest: String,
    pub claimant_id: String,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(registry: &Path) -> Result<Self> {
        let mut lock = registry.as_os_str().to_owned();
        lock.push(".lock");
        let lock = PathBuf::from(lock);
        for _ in 0..LOCK_ATTEMPTS {
            match OpenOptions::new().write(true).create_new(true).open(&lock) {
                Ok(_) => return Ok(Self(lock)),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => thread::sleep(LOCK_BACKOFF),
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::Protocol(format!(
            "registry lock {} is held by another writer",
            lock.display()
        )))
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Appends one record for `claim` and returns it.
pub fn registry_append(
    path: impl AsRef<Path>,
    claim: &Claim,
    verdict: &str,
    phi: Option<f64>,
) -> Result<RegistryRecord> {
    let path = path.as_ref();
    let record = RegistryRecord {
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        claim_digest: hex::encode(claim.digest()?),
        claimant_id: claim.claimant_id.clone(),
        verdict: verdict.to_owned(),
        phi,
    };
    let mut line = serde_json::to_string(&record)?;
    line.push('\n');
    let _guard = LockGuard::acquire(path)?;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    // a previous writer that crashed mid-line must not corrupt this record
    if needs_newline(path)? {
        file.write_all(b"\n")?;
    }
    file.write_all(line.as_bytes())?;
    file.sync_data()?;
    Ok(record)
}

fn needs_newline(path: &Path) -> Result<bool> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = File::open(path)?;
    let len = f.metadata()?.len();
    if len == 0 {
        return Ok(false);
    }
    f.seek(SeekFrom::Start(len - 1))?;
    let mut last = [0u8; 1];
    f.read_exact(&mut last)?;
    Ok(last[0] != b'\n')
}

/// Replays the registry in append order, skipping unparsable lines.
pub fn registry_list(path: impl AsRef<Path>) -> Result<Vec<RegistryRecord>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).split(b'\n').enumerate() {
        let line = line?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match serde_json::from_slice::<RegistryRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}:{}: skipping corrupt record: {e}", path.display(), n + 1),
        }
    }
    Ok(out)
}

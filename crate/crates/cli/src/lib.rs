//! IO companion to the core crate: clip and dataset files, checkpoints,
//! run directories, threaded rollout collection, and evaluation reports.

pub mod checkpoint;
pub mod formats;
pub mod parallel;
pub mod report;
pub mod run;

/// FNV-1a, used to fingerprint configs and manifests in logs.
pub fn content_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Marker for failures that should exit with the usage/validation code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

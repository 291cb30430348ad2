use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid ensemble or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to converge or became unstable.
    /// `fingerprint` identifies the offending input so the failure can be replayed.
    #[error("numerical error: {message} (input fingerprint {fingerprint:#018x})")]
    Numerical { message: String, fingerprint: u64 },

    /// Integrator could not find an ordering-preserving step.
    #[error("integrator stiffness: {halvings} halvings exhausted, min gap {min_gap:.3e}")]
    Stiffness { halvings: u32, min_gap: f64 },

    /// Metropolis proposal width tuning failed to land in the target window.
    #[error("sampler tuning failure: acceptance rate {rate:.3} outside [0.1, 0.7]")]
    Tuning { rate: f64 },

    /// Explicit finite-difference step violates the stability bound.
    #[error("step-size error: dt {dt:.3e} exceeds CFL bound {bound:.3e}")]
    Cfl { dt: f64, bound: f64 },

    /// Malformed experiment spec file.
    #[error("schema violation: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// FNV-1a over raw bytes; used for input fingerprints and spec hashes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Fingerprint a slice of f64 data (bit pattern, not value comparison).
pub fn fingerprint_f64(data: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &x in data {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

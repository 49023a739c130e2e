//! Seed derivation and the crate-wide RNG type.
//!
//! Every stochastic component draws from its own stream. Component seeds are
//! the first eight bytes (little endian) of SHA-256 over the master seed, the
//! component name and a grid coordinate, so results never depend on the
//! order in which components run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(master: u64, component: &str, coordinate: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((component.len() as u64).to_le_bytes());
    hasher.update(component.as_bytes());
    hasher.update((coordinate.len() as u64).to_le_bytes());
    hasher.update(coordinate.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Short hex digest used to stamp output files with the configuration they came from.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

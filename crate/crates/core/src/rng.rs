//! Deterministic random-number plumbing.
//!
//! Every random decision in the pipeline flows from a single master seed
//! through *named streams* ("split", "shuffle", "tree-17", ...). Stream
//! derivation hashes the master seed together with the stream name, so
//! adding a new consumer never perturbs the draws seen by existing ones,
//! and results are reproducible across platforms and thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from `master` for the given stream name.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is at least 8 bytes"))
}

/// A ChaCha generator seeded from `(master, stream)`.
///
/// ChaCha is used (rather than the standard library's default generator)
/// because its output is stable across rand versions and platforms, which
/// the byte-identical-rerun guarantee depends on.
pub fn seeded_rng(master: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// Deterministically shuffle `items` in place using the named stream.
pub fn shuffle<T>(items: &mut [T], master: u64, stream: &str) {
    use rand::seq::SliceRandom;
    let mut rng = seeded_rng(master, stream);
    items.shuffle(&mut rng);
}

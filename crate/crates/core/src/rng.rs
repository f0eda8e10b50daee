//! Reproducible random streams.
//!
//! Every replicate owns a ChaCha8 stream whose 32-byte seed is
//! `SHA-256("monoslope/v1" ‖ master ‖ len(tag) ‖ tag ‖ n ‖ replicate)`, with
//! all integers little-endian `u64`. The mapping depends on nothing but its
//! inputs, so runs reproduce across machines and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

fn digest(master: u64, tag: &str, n: u64, replicate: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"monoslope/v1");
    h.update(master.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(n.to_le_bytes());
    h.update(replicate.to_le_bytes());
    h.finalize().into()
}

/// Stream for one replicate.
pub fn stream(master: u64, tag: &str, n: u64, replicate: u64) -> Stream {
    ChaCha8Rng::from_seed(digest(master, tag, n, replicate))
}

/// Short form of the stream seed, recorded next to each replicate.
pub fn seed_id(master: u64, tag: &str, n: u64, replicate: u64) -> u64 {
    let d = digest(master, tag, n, replicate);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

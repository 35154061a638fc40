// SPDX-License-Identifier: Apache-2.0

//! Counter-addressed random streams.
//!
//! Every named input gets a 256-bit ChaCha8 key: `SHA-256("embodied/stream/v1"
//! || seed as u64 little-endian || 0x00 || name)`. Trials are split into fixed
//! chunks of [`CHUNK`]; chunk `k` draws from ChaCha8 stream number `k` under
//! that key. The value of trial `t` therefore depends only on
//! `(seed, name, t)`, never on how chunks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub const CHUNK: usize = 8192;

/// Child seed for a labelled sub-run, e.g. one provisioning candidate.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"embodied/seed/v1");
    hasher.update(seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn derive(seed: u64, name: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"embodied/stream/v1");
        hasher.update(seed.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(name.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        StreamKey(key)
    }

    /// Generator positioned at the start of chunk `chunk`.
    pub fn chunk_rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(chunk as u64);
        rng
    }

    /// Fills `n` values; `draw` maps the chunk generator to one value.
    pub fn fill<F>(&self, n: usize, draw: F) -> Vec<f64>
    where
        F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
    {
        let mut out = vec![0.0; n];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(k, slot)| {
            let mut rng = self.chunk_rng(k);
            for v in slot.iter_mut() {
                *v = draw(&mut rng);
            }
        });
        out
    }

    /// `n` uniforms in `[0, 1)`.
    pub fn uniforms(&self, n: usize) -> Vec<f64> {
        self.fill(n, |rng| rng.random::<f64>())
    }
}

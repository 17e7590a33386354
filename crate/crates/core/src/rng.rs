//! Counter-based seed derivation.
//!
//! Every random stream used by the toolkit is keyed by
//! `(master_seed, n, replicate, sub_index, role)`. The key is folded through
//! the SplitMix64 finalizer into a 64-bit seed for a ChaCha8 generator, so a
//! stream depends only on its key, not on which worker thread consumes it or
//! in which order streams are opened.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The generator used for all simulation streams.
pub type SimRng = ChaCha8Rng;

/// What a derived stream is used for. The discriminant enters the hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Theta = 1,
    Paths = 2,
    Surrogates = 3,
    Design = 4,
    Coupling = 5,
    Moments = 6,
    Misc = 7,
}

/// Identifies one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub n: u64,
    pub replicate: u64,
    pub sub: u64,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(master: u64, n: usize, replicate: usize, role: StreamRole) -> Self {
        Self {
            master,
            n: n as u64,
            replicate: replicate as u64,
            sub: 0,
            role,
        }
    }

    pub fn with_sub(self, sub: usize) -> Self {
        Self {
            sub: sub as u64,
            ..self
        }
    }

    pub fn with_role(self, role: StreamRole) -> Self {
        Self { role, ..self }
    }

    pub fn seed(&self) -> u64 {
        derive_seed(
            self.master,
            &[self.n, self.replicate, self.sub, self.role as u64],
        )
    }

    pub fn rng(&self) -> SimRng {
        SimRng::seed_from_u64(self.seed())
    }
}

/// Splits `0..total` into consecutive blocks of `block` items, maps each block
/// in parallel and returns the results in block order. Block boundaries do not
/// depend on the worker count, so sequential folds over the result are
/// reproducible.
pub fn blocked<T, F>(total: usize, block: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let block = block.max(1);
    let blocks = total.div_ceil(block);
    (0..blocks)
        .into_par_iter()
        .map(|b| f(b * block..((b + 1) * block).min(total)))
        .collect()
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` one word at a time.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Convenience for a one-off stream that is not part of a replicate grid.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

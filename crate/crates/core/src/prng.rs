// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

//! Counter-based Philox4x64-10 generator with a serializable 32-byte state.
//!
//! A state is a `(key, counter)` pair; every call to [`Philox::next_block`]
//! encrypts the current counter under the key and then increments it, so
//! replaying from a saved state reproduces the stream exactly. Each noise
//! vector consumes whole blocks, which keeps states free of buffered output.

use serde::{Deserialize, Serialize};

use crate::special::normal_quantile;

const M0: u64 = 0xD2E7_470E_E14C_6C93;
const M1: u64 = 0xCA5A_8263_9512_1157;
const W0: u64 = 0x9E37_79B9_7F4A_7C15;
const W1: u64 = 0xBB67_AE85_84CA_A73B;

/// Size in bytes of a serialized [`PrngStateToken`].
pub const TOKEN_LEN: usize = 32;

/// Generator state: 16-byte key followed by a 16-byte counter, both
/// little-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrngStateToken {
    pub key: [u64; 2],
    pub counter: [u64; 2],
}

impl PrngStateToken {
    pub fn to_bytes(&self) -> [u8; TOKEN_LEN] {
        let mut out = [0u8; TOKEN_LEN];
        for (i, w) in self.key.iter().chain(self.counter.iter()).enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; TOKEN_LEN]) -> Self {
        let word = |i: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[i * 8..(i + 1) * 8]);
            u64::from_le_bytes(b)
        };
        Self {
            key: [word(0), word(1)],
            counter: [word(2), word(3)],
        }
    }
}

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// Philox4x64 with ten rounds on a 256-bit counter block.
pub fn philox4x64_10(ctr: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut x = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, x[0]);
        let (hi1, lo1) = mulhilo(M1, x[2]);
        x = [hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0];
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Philox {
    state: PrngStateToken,
}

impl Philox {
    /// Stream `stream` of the generator family keyed by `seed`, at counter zero.
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::from_state(PrngStateToken {
            key: [seed, stream],
            counter: [0, 0],
        })
    }

    pub fn from_state(state: PrngStateToken) -> Self {
        Self { state }
    }

    pub fn state(&self) -> PrngStateToken {
        self.state
    }

    pub fn set_state(&mut self, state: PrngStateToken) {
        self.state = state;
    }

    /// Four fresh 64-bit words; advances the 128-bit counter by one.
    pub fn next_block(&mut self) -> [u64; 4] {
        let [c0, c1] = self.state.counter;
        let out = philox4x64_10([c0, c1, 0, 0], self.state.key);
        let (lo, carry) = c0.overflowing_add(1);
        self.state.counter = [lo, c1.wrapping_add(carry as u64)];
        out
    }

    /// Advances the counter by `blocks` without generating output.
    pub fn skip_blocks(&mut self, blocks: u128) {
        let c = (self.state.counter[1] as u128) << 64 | self.state.counter[0] as u128;
        let c = c.wrapping_add(blocks);
        self.state.counter = [c as u64, (c >> 64) as u64];
    }

    /// Fills `out` with standard normal variates, one per 64-bit word, by
    /// the inverse-CDF transform. Consumes `ceil(out.len() / 4)` blocks.
    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for chunk in out.chunks_mut(4) {
            let block = self.next_block();
            for (slot, &w) in chunk.iter_mut().zip(block.iter()) {
                *slot = normal_quantile(unit_open(w));
            }
        }
    }
}

/// Maps a 64-bit word to `(m + 1/2) 2^-52`, where `m` is its top 52 bits.
/// The result lies in `[2^-53, 1 - 2^-53]`; both ends are exact.
#[inline]
pub fn unit_open(w: u64) -> f64 {
    ((w >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Blocks consumed by one Gaussian vector of dimension `dim`.
pub fn blocks_per_vector(dim: usize) -> u128 {
    dim.div_ceil(4) as u128
}

//! Seeded, path-addressed random streams.
//!
//! A [`RandomStream`] is a master seed plus a derivation path of `(label, index)` pairs.
//! Streams with the same seed and path always produce the same bits, so any party that
//! knows the path (for example a cluster center replaying a member node) can reproduce
//! the coins of another party exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed out by [`RandomStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// A master seed plus a digest of its derivation path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomStream {
    master_seed: u64,
    lanes: [u64; 2],
    depth: u32,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl RandomStream {
    /// Root stream for a master seed (empty path).
    pub fn new(master_seed: u64) -> Self {
        RandomStream {
            master_seed,
            lanes: [splitmix(master_seed), splitmix(master_seed ^ 0xA5A5_A5A5_A5A5_A5A5)],
            depth: 0,
        }
    }

    /// The master seed this stream was rooted at.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Length of the derivation path.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Child stream obtained by appending `(label, index)` to the path.
    pub fn derive(&self, label: &str, index: u64) -> Self {
        let l = fnv1a(label);
        let a = splitmix(self.lanes[0] ^ l ^ splitmix(index.wrapping_add(self.depth as u64)));
        let b = splitmix(self.lanes[1].rotate_left(17) ^ splitmix(l ^ index) ^ a);
        RandomStream { master_seed: self.master_seed, lanes: [a, b], depth: self.depth + 1 }
    }

    /// The per-node, per-round stream used by the round engine.
    pub fn node_round(seed: u64, node: usize, round: u64) -> Self {
        RandomStream::new(seed).derive("node", node as u64).derive("round", round)
    }

    /// A fresh ChaCha generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut s = self.lanes[0] ^ self.lanes[1].rotate_left(32);
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            s = splitmix(s ^ self.lanes[i % 2]);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// A single 64-bit value summarising the stream, handy as a sub-seed.
    pub fn seed_u64(&self) -> u64 {
        splitmix(self.lanes[0] ^ self.lanes[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_bits() {
        let a = RandomStream::new(42).derive("x", 3).derive("y", 1);
        let b = RandomStream::new(42).derive("x", 3).derive("y", 1);
        assert_eq!(a, b);
        let va: [u64; 4] = a.rng().r#gen();
        let vb: [u64; 4] = b.rng().r#gen();
        assert_eq!(va, vb);
    }

    #[test]
    fn different_paths_differ() {
        let root = RandomStream::new(7);
        let a: u64 = root.derive("x", 0).rng().r#gen();
        let b: u64 = root.derive("x", 1).rng().r#gen();
        let c: u64 = root.derive("y", 0).rng().r#gen();
        let d: u64 = root.derive("x", 0).derive("x", 0).rng().r#gen();
        assert!(a != b && a != c && b != c && a != d);
    }

    #[test]
    fn derivation_order_matters() {
        let r = RandomStream::new(1);
        assert_ne!(r.derive("a", 1).derive("b", 2), r.derive("b", 2).derive("a", 1));
    }

    #[test]
    fn coarse_uniformity() {
        // Bits of disjoint streams should look balanced.
        let mut ones = 0u32;
        for i in 0..2000u64 {
            let v: u64 = RandomStream::new(9).derive("u", i).rng().r#gen();
            ones += v.count_ones();
        }
        let mean = ones as f64 / 2000.0;
        assert!((mean - 32.0).abs() < 0.5, "mean popcount {mean}");
    }
}

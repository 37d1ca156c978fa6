//! Stable 64-bit FNV-1a. `std`'s hasher is not guaranteed stable across
//! releases, and hashed features and rng streams must be.

const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(OFFSET)
    }
}

impl Fnv64 {
    pub fn write(&mut self, bytes: &[u8]) -> &mut Self {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(PRIME);
        }
        self
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Derives a per-stream seed so different seeds / features get different
/// permutations from one user-supplied rng seed.
pub fn mix_seed(rng_seed: u64, stream: &str) -> u64 {
    let mut h = Fnv64::default();
    h.write(&rng_seed.to_le_bytes()).write(stream.as_bytes());
    h.finish()
}

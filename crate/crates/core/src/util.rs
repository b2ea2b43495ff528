//! Small shared helpers.

/// FNV-1a 64-bit hash; used to derive stable per-draw and per-model random
/// stream keys (the std hasher is randomized per process).
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

pub fn hash_str_with(base: u64, s: &str) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(base);
    h.write(s.as_bytes());
    h.finish()
}

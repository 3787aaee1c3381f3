//! 32-bit FNV-1a folding over little-endian words.

pub const OFFSET_BASIS: u32 = 0x811c_9dc5;
pub const PRIME: u32 = 0x0100_0193;

#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u32);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(OFFSET_BASIS)
    }
}

impl Fnv1a {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u32::from(b);
            self.0 = self.0.wrapping_mul(PRIME);
        }
    }

    pub fn write_u32(&mut self, v: u32) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u32 {
        self.0
    }
}

/// Fold a word stream.
pub fn fold_words(words: impl IntoIterator<Item = u32>) -> u32 {
    let mut h = Fnv1a::new();
    for w in words {
        h.write_u32(w);
    }
    h.finish()
}

//! Small shared helpers.

/// FNV-1a 64-bit. Stable across platforms; used for config and world
/// fingerprints, not for security.
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a_str(s: &str) -> u64 {
    let mut h = Fnv1a::new();
    h.write(s.as_bytes());
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vectors() {
        // Reference values for FNV-1a 64.
        assert_eq!(fnv1a_str(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_str("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a_str("foobar"), 0x85944171f73967e8);
    }
}

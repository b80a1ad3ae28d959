use serde::{Deserialize, Serialize};

use super::Conditioning;

/// Maps prompt text to a conditioning vector.
pub trait TextEncoder: Sync {
    fn encode(&self, text: &str) -> Conditioning;
    fn dim(&self) -> usize;
}

/// Signed feature hashing over lowercase alphanumeric tokens, L2-normalized.
/// Deterministic and weight-free; stands in for a learned text encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashingTextEncoder {
    dim: usize,
}

impl HashingTextEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        Self { dim }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl TextEncoder for HashingTextEncoder {
    fn encode(&self, text: &str) -> Conditioning {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let h = fnv1a(token.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            v[idx] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Conditioning(v)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

use sha2::{Digest, Sha256};

use super::{Embedder, LlmError};
use crate::index::text::tokens;

/// Deterministic feature-hashing embedder over normalized tokens and token
/// bigrams. Vectors are L2-normalized; text without tokens maps to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
}

const BIGRAM_WEIGHT: f32 = 0.5;

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim }
    }

    fn add(&self, v: &mut [f32], feature: &str, weight: f32) {
        let h = Sha256::digest(feature.as_bytes());
        let slot = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) % self.dim as u64;
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[slot as usize] += sign * weight;
    }

    pub fn embed_text(&self, text: &str) -> Vec<f32> {
        let toks = tokens(text);
        let mut v = vec![0.0f32; self.dim];
        for t in &toks {
            self.add(&mut v, t, 1.0);
        }
        for pair in toks.windows(2) {
            self.add(&mut v, &format!("{} {}", pair[0], pair[1]), BIGRAM_WEIGHT);
        }
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        Ok(self.embed_text(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_text_same_vector_and_unit_norm() {
        let e = HashEmbedder::new(64);
        let a = e.embed_text("icoFoam lid-driven cavity");
        assert_eq!(a, e.embed_text("icoFoam lid-driven cavity"));
        let n: f32 = a.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-5);
    }

    #[test]
    fn empty_text_is_zero() {
        assert!(HashEmbedder::new(8).embed_text("  ").iter().all(|&x| x == 0.0));
    }
}

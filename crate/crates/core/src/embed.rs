//! Embedding vectors, the provider abstraction, cosine similarity, and the
//! deterministic hash-based test provider.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::text::fnv1a64;

/// Dimension of the deterministic hash embedder.
pub const HASH_EMBEDDER_DIM: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding provider failed: {message}")]
    Provider { message: String },
}

/// A vector with its Euclidean norm cached. Vectors stored in the index are
/// L2-normalized, so cosine against them reduces to a dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = l2_norm(&values);
        Self { values, norm }
    }

    /// Scales the vector to unit norm. Zero vectors are left unchanged.
    pub fn normalized(mut self) -> Self {
        if self.norm > 0.0 {
            for v in &mut self.values {
                *v /= self.norm;
            }
            self.norm = 1.0;
        }
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    libm::sqrt(values.iter().map(|v| v * v).sum::<f64>())
}

/// Cosine similarity: dot(a, b) / (|a| |b|).
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot / (a.norm * b.norm))
}

/// Something that turns texts into vectors. Deterministic per provider
/// version: the same text must always produce the same vector.
pub trait EmbeddingProvider {
    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut batch = self.embed_batch(&[text.to_string()])?;
        batch.pop().ok_or(EmbedError::Provider {
            message: "empty batch result".to_string(),
        })
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for &T {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for alloc::boxed::Box<T> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Deterministic token-hash embedder for reproducible retrieval tests.
///
/// For each lowercased alphanumeric token, the FNV-1a 64-bit hash selects a
/// basis index (`hash mod 256`) and a sign (+1 when bit 63 is clear, else
/// −1); the signed one-hots are summed over all tokens and L2-normalized.
/// Text with no tokens — or a token sum that cancels to zero — maps to the
/// first basis vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl HashEmbedder {
    pub fn embed_text(text: &str) -> Embedding {
        let mut values = vec![0.0f64; HASH_EMBEDDER_DIM];
        let mut any = false;
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
        {
            let hash = fnv1a64(token.as_bytes());
            let index = (hash % HASH_EMBEDDER_DIM as u64) as usize;
            let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
            values[index] += sign;
            any = true;
        }
        if !any || values.iter().all(|v| *v == 0.0) {
            values = vec![0.0; HASH_EMBEDDER_DIM];
            values[0] = 1.0;
            return Embedding::new(values);
        }
        Embedding::new(values).normalized()
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        HASH_EMBEDDER_DIM
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        Ok(texts.iter().map(|t| Self::embed_text(t)).collect())
    }
}

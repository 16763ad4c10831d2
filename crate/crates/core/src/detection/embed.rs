//! Text encoders used by the contrastive detector.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::http::{HttpError, JsonClient, RetryPolicy};
use crate::text::fold;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding provider: {0}")]
    Provider(#[from] HttpError),
    #[error("embedding provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding dimension changed from {expected} to {got}")]
    DimensionChanged { expected: usize, got: usize },
    #[error("empty embedding vector")]
    EmptyVector,
}

/// A dense text embedding. Cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Arc<[f64]>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::EmptyVector);
        }
        Ok(Self(values.into()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub trait Embedder: Send + Sync {
    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(texts)
    }
}

/// Deterministic stand-in encoder for tests and offline runs.
///
/// Each text is case-folded, hashed, and expanded into a unit vector, so two
/// texts get the same vector exactly when their folded forms are equal.
/// Unrelated texts land on near-orthogonal random directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockEmbedder {
    dim: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self { dim: 64 }
    }
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }

    pub fn vector(&self, text: &str) -> EmbeddingVector {
        let seed: [u8; 32] = Sha256::digest(fold(text).as_bytes()).into();
        let mut rng = Pcg64::from_seed(seed);
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                return EmbeddingVector(v.into_iter().map(|x| x / norm).collect());
            }
        }
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub(crate) struct InFlight {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    pub(crate) fn new(max: usize) -> Self {
        Self {
            slots: Mutex::new(max.max(1)),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.slots.lock().unwrap();
            while *free == 0 {
                free = self.freed.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.slots.lock().unwrap() += 1;
        self.freed.notify_one();
        out
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

/// Client for `POST {url}` with `{"texts": [...]}` returning `{"vectors": [...], "dim": d}`.
#[derive(Debug)]
pub struct HttpEmbedder {
    url: String,
    headers: Vec<(&'static str, String)>,
    client: JsonClient,
    retry: RetryPolicy,
    batch_size: usize,
    in_flight: InFlight,
    dim: OnceLock<usize>,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            headers: Vec::new(),
            client: JsonClient::default(),
            retry: RetryPolicy::default(),
            batch_size: 64,
            in_flight: InFlight::new(4),
            dim: OnceLock::new(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        if let Some(key) = key {
            self.headers.push(("Authorization", format!("Bearer {key}")));
        }
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.in_flight = InFlight::new(n);
        self
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let resp: EmbedResponse = self.in_flight.run(|| {
            self.retry.run(
                |_| self.client.post(&self.url, &self.headers, &EmbedRequest { texts }),
                HttpError::is_retryable,
            )
        })?;
        if resp.vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                got: resp.vectors.len(),
            });
        }
        let dim = *self.dim.get_or_init(|| resp.dim);
        if resp.dim != dim {
            return Err(EmbedError::DimensionChanged {
                expected: dim,
                got: resp.dim,
            });
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(EmbedError::DimensionChanged {
                        expected: dim,
                        got: v.len(),
                    });
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.embed_batch(chunk)?);
        }
        Ok(out)
    }
}

/// Memoizes another embedder by exact text.
#[derive(Debug)]
pub struct CachedEmbedder<E> {
    inner: E,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let missing: Vec<String> = {
            let cache = self.cache.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .filter(|t| !cache.contains_key(*t) && seen.insert(t.as_str()))
                .cloned()
                .collect()
        };
        if !missing.is_empty() {
            let vectors = self.inner.embed(&missing)?;
            if vectors.len() != missing.len() {
                return Err(EmbedError::CountMismatch {
                    expected: missing.len(),
                    got: vectors.len(),
                });
            }
            let mut cache = self.cache.lock().unwrap();
            for (t, v) in missing.into_iter().zip(vectors) {
                cache.insert(t, v);
            }
        }
        let cache = self.cache.lock().unwrap();
        Ok(texts.iter().map(|t| cache[t].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn mock_vectors_follow_folding() {
        let e = MockEmbedder::new(16);
        assert_eq!(e.vector("Viel Glück"), e.vector("VIEL GLÜCK"));
        assert_ne!(e.vector("viel Glück"), e.vector("viel Gluck"));
        let norm: f64 = e.vector("x").values().iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    struct Counting {
        calls: AtomicUsize,
        texts: AtomicUsize,
    }

    impl Embedder for Counting {
        fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            MockEmbedder::default().embed(texts)
        }
    }

    #[test]
    fn cache_embeds_each_text_once() {
        let inner = Counting {
            calls: AtomicUsize::new(0),
            texts: AtomicUsize::new(0),
        };
        let cached = CachedEmbedder::new(inner);
        let batch: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let first = cached.embed(&batch).unwrap();
        let second = cached.embed(&batch).unwrap();
        assert_eq!(first, second);
        assert_eq!(first[0], first[2]);
        assert_eq!(cached.inner.calls.load(Ordering::SeqCst), 1);
        assert_eq!(cached.inner.texts.load(Ordering::SeqCst), 2);
        assert_eq!(cached.len(), 2);
    }
}

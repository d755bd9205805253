//! Embedding backends: fixed-dimension semantic vectors for coreset
//! selection. Vectors are always L2-normalized, so Euclidean distance on
//! them is monotone in cosine distance.

mod hashing;
mod http;

pub use hashing::HashingEmbedder;
pub use http::HttpEmbedder;

use serde::{Deserialize, Serialize};

use crate::datamodel::ExampleId;
use crate::error::{Error, Result};

/// Row-per-example embedding matrix. Row order is meaningful: it mirrors
/// the input order of the texts that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub rows: Vec<(ExampleId, Vec<f64>)>,
}

impl EmbeddingMatrix {
    /// Pair ids with vectors, normalizing and validating every row.
    pub fn new(dim: usize, ids: Vec<ExampleId>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::InvalidInput(format!(
                "{} ids vs {} vectors",
                ids.len(),
                vectors.len()
            )));
        }
        let mut rows = Vec::with_capacity(ids.len());
        for (id, mut vector) in ids.into_iter().zip(vectors) {
            if vector.len() != dim {
                return Err(Error::backend(
                    format!(
                        "embedding for example {id} has dimension {}, expected {dim}",
                        vector.len()
                    ),
                    false,
                ));
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::backend(
                    format!("embedding for example {id} has non-finite entries"),
                    false,
                ));
            }
            normalize(&mut vector)?;
            rows.push((id, vector));
        }
        Ok(EmbeddingMatrix { dim, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ExampleId> + '_ {
        self.rows.iter().map(|(id, _)| *id)
    }
}

fn normalize(vector: &mut [f64]) -> Result<()> {
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::backend("embedding has zero norm", false));
    }
    for x in vector.iter_mut() {
        *x /= norm;
    }
    Ok(())
}

/// A backend producing one raw vector per input text, order-preserving.
/// Normalization happens when the vectors are assembled into a matrix.
pub trait EmbedderBackend: Send + Sync {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
    fn dim(&self) -> usize;
    fn fingerprint(&self) -> String;
}

/// Embed texts into a matrix with positional row ids (row i gets id i).
pub fn embed(backend: &dyn EmbedderBackend, texts: &[String]) -> Result<EmbeddingMatrix> {
    let ids = (0..texts.len() as u64).map(ExampleId).collect();
    embed_with_ids_inner(backend, ids, texts)
}

/// Embed `(id, text)` pairs, preserving order.
pub fn embed_with_ids(
    backend: &dyn EmbedderBackend,
    items: &[(ExampleId, String)],
) -> Result<EmbeddingMatrix> {
    let ids: Vec<ExampleId> = items.iter().map(|(id, _)| *id).collect();
    let texts: Vec<String> = items.iter().map(|(_, text)| text.clone()).collect();
    embed_with_ids_inner(backend, ids, &texts)
}

fn embed_with_ids_inner(
    backend: &dyn EmbedderBackend,
    ids: Vec<ExampleId>,
    texts: &[String],
) -> Result<EmbeddingMatrix> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("no texts to embed".into()));
    }
    let vectors = backend.embed_raw(texts)?;
    if vectors.len() != texts.len() {
        return Err(Error::backend(
            format!(
                "backend returned {} vectors for {} texts",
                vectors.len(),
                texts.len()
            ),
            false,
        ));
    }
    EmbeddingMatrix::new(backend.dim(), ids, vectors)
}

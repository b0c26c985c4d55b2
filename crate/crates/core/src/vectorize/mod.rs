//! Text to numbers: tokenization, TF-IDF, embedding tables, and fusion of
//! document vectors with the sentiment feature block.

mod embedding;
mod matrix;
mod tfidf;
mod tokenize;

use std::collections::HashMap;

pub use embedding::{embed_corpus, read_embedding_table, write_embedding_table, EmbeddingTable};
pub use matrix::{read_matrix, write_matrix, FeatureMatrix, Row, SparseRow};
pub use tfidf::{fit_tfidf, transform_tfidf, TfidfVocabulary};
pub use tokenize::tokenize;

use crate::error::{Error, Result};
use crate::sentiment::{SentimentBlock, SENTIMENT_BLOCK_WIDTH};

/// Append each row's sentiment block when `use_sentiment` is set; otherwise
/// return the base matrix unchanged.
pub fn fuse_features(
    base: &FeatureMatrix,
    blocks: &HashMap<String, SentimentBlock>,
    use_sentiment: bool,
) -> Result<FeatureMatrix> {
    if !use_sentiment {
        return Ok(base.clone());
    }
    let extra = base
        .ids()
        .iter()
        .map(|id| {
            blocks
                .get(id)
                .map(|b| b.to_vec())
                .ok_or_else(|| Error::Join(id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    base.append_columns(SENTIMENT_BLOCK_WIDTH, &extra)
}

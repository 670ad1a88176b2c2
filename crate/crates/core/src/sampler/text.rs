//! Tokenization and TF-IDF weighting.

use std::collections::BTreeMap;

use super::{Document, SamplerError};

/// Lowercases, splits on non-alphanumeric characters, and drops tokens
/// shorter than two characters. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

/// Row-sparse matrix; each row holds `(column, weight)` pairs sorted by
/// column index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub cols: usize,
}

impl SparseMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// TF-IDF weights for a document collection, with the vocabulary that
/// defines the column order.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfMatrix {
    /// Distinct terms in ascending order; column `j` is `vocab[j]`.
    pub vocab: Vec<String>,
    pub matrix: SparseMatrix,
}

/// TF-IDF with smoothed idf and L2-normalized rows.
///
/// `tf` is the raw term count in the document and
/// `idf = ln((1 + N) / (1 + df)) + 1`, so a term present in every document
/// still carries weight 1 before normalization.
pub fn tfidf<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
) -> Result<TfIdfMatrix, SamplerError> {
    let docs: Vec<&Document> = docs.into_iter().collect();
    if docs.len() < 2 {
        return Err(SamplerError::EmptyCorpus(docs.len()));
    }
    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(&d.text)).collect();
    for (doc, tokens) in docs.iter().zip(&tokenized) {
        if tokens.is_empty() {
            return Err(SamplerError::EmptyDocument(doc.doc_id.clone()));
        }
    }

    let mut vocab_df: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in &tokenized {
        let mut seen: Vec<&str> = tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *vocab_df.entry(term).or_insert(0) += 1;
        }
    }
    let vocab: Vec<String> = vocab_df.keys().map(|t| t.to_string()).collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab_df
        .values()
        .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
        .collect();

    let mut rows = Vec::with_capacity(docs.len());
    for tokens in &tokenized {
        let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
        let mut row: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(term, tf)| {
                let col = vocab
                    .binary_search_by(|v| v.as_str().cmp(term))
                    .expect("every token is in the vocabulary");
                (col, tf * idf[col])
            })
            .collect();
        let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut row {
                *w /= norm;
            }
        }
        rows.push(row);
    }
    Ok(TfIdfMatrix {
        matrix: SparseMatrix {
            rows,
            cols: vocab.len(),
        },
        vocab,
    })
}

//! Representative item selection from a labeled text corpus.
//!
//! Per stratum: TF-IDF, truncated SVD to a low-rank embedding, k-means
//! (cluster count fixed by the plan or chosen by maximal mean silhouette),
//! then one document per cluster: the member nearest its centroid, ties
//! broken by lexicographically smallest document id. Randomness is confined
//! to explicit seeds, so a (documents, plan, seed) triple always yields the
//! same selection.

mod kmeans;
mod svd;
mod text;

pub use kmeans::{choose_k, kmeans, silhouette, KMeansFit};
pub use svd::{sparse_from_dense, truncated_svd, SvdResult};
pub use text::{tfidf, tokenize, SparseMatrix, TfIdfMatrix};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("need at least 2 documents, got {0}")]
    EmptyCorpus(usize),
    #[error("document {0} has no tokens")]
    EmptyDocument(String),
    #[error("duplicate document id {0}")]
    DuplicateDocId(String),
    #[error("rank {rank} outside [1, {max}]")]
    RankTooLarge { rank: usize, max: usize },
    #[error("cannot form {k} clusters from {points} points")]
    TooFewPoints { k: usize, points: usize },
    #[error("silhouette needs at least 2 clusters")]
    SingleCluster,
    #[error("stratum {stratum} needs {needed} documents, has {have}")]
    StratumTooSmall {
        stratum: String,
        needed: usize,
        have: usize,
    },
    #[error("mismatched dimensions")]
    DimensionMismatch,
}

/// One labeled text item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    /// Stratification labels, e.g. hateful yes/no, target group/individual.
    pub strata: BTreeMap<String, String>,
}

/// Document embedding produced by the TF-IDF + SVD pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub doc_ids: Vec<String>,
    /// Row per document, `rank` coordinates each.
    pub vectors: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

/// Cluster count policy for one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterCount {
    /// Exactly this many clusters.
    Fixed(usize),
    /// Search the configured k range by mean silhouette.
    Auto,
}

/// One stratum of the sampling plan: a label filter plus a cluster count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub name: String,
    /// Documents match when every listed label has exactly this value.
    pub filters: BTreeMap<String, String>,
    pub clusters: ClusterCount,
}

/// Knobs of the selection pipeline, all defaulted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// SVD rank; defaults to `min(100, vocabulary, documents - 1)`.
    pub svd_rank: Option<usize>,
    /// Inclusive k search range for [`ClusterCount::Auto`].
    pub k_range: (usize, usize),
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            svd_rank: None,
            k_range: (2, 25),
            seed: 0,
        }
    }
}

/// One selected representative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub stratum: String,
    pub cluster: usize,
    pub doc_id: String,
}

/// Embeds one document group: TF-IDF then truncated SVD.
pub fn embed_documents(
    docs: &[&Document],
    svd_rank: Option<usize>,
    seed: u64,
) -> Result<Embedding, SamplerError> {
    let weights = tfidf(docs.iter().copied())?;
    let max_rank = docs.len().min(weights.vocab.len());
    let default_rank = 100
        .min(weights.vocab.len())
        .min(docs.len().saturating_sub(1))
        .max(1);
    let rank = svd_rank.unwrap_or(default_rank).min(max_rank);
    let svd = truncated_svd(&weights.matrix, rank, seed)?;
    Ok(Embedding {
        doc_ids: docs.iter().map(|d| d.doc_id.clone()).collect(),
        vectors: svd.scores,
        singular_values: svd.singular_values,
    })
}

/// Seed used for stratum `index` of a plan; stratum 0 uses the base seed
/// unchanged. Exposed so external checks can reproduce a stratum's
/// embedding and clustering.
pub fn stratum_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs the whole per-stratum pipeline and emits one document per cluster.
pub fn select_representatives(
    docs: &[Document],
    plan: &[StratumSpec],
    config: &SamplerConfig,
) -> Result<Vec<Selection>, SamplerError> {
    let mut ids = BTreeSet::new();
    for d in docs {
        if !ids.insert(d.doc_id.as_str()) {
            return Err(SamplerError::DuplicateDocId(d.doc_id.clone()));
        }
    }

    let mut selections = Vec::new();
    for (index, spec) in plan.iter().enumerate() {
        let members: Vec<&Document> = docs
            .iter()
            .filter(|d| {
                spec.filters
                    .iter()
                    .all(|(label, value)| d.strata.get(label) == Some(value))
            })
            .collect();
        let needed = match spec.clusters {
            ClusterCount::Fixed(k) => k.max(2),
            ClusterCount::Auto => config.k_range.0.max(2),
        };
        if members.len() < needed {
            return Err(SamplerError::StratumTooSmall {
                stratum: spec.name.clone(),
                needed,
                have: members.len(),
            });
        }

        let seed = stratum_seed(config.seed, index);
        let embedding = embed_documents(&members, config.svd_rank, seed)?;
        let fit = match spec.clusters {
            ClusterCount::Fixed(k) => kmeans(&embedding.vectors, k, seed)?,
            ClusterCount::Auto => choose_k(&embedding.vectors, config.k_range, seed)?.1,
        };

        for cluster in 0..fit.centroids.len() {
            let mut best: Option<(f64, &str)> = None;
            for (i, doc_id) in embedding.doc_ids.iter().enumerate() {
                if fit.assignments[i] != cluster {
                    continue;
                }
                let d: f64 = embedding.vectors[i]
                    .iter()
                    .zip(&fit.centroids[cluster])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let closer = match &best {
                    None => true,
                    Some((bd, bid)) => d < *bd || (d == *bd && doc_id.as_str() < *bid),
                };
                if closer {
                    best = Some((d, doc_id));
                }
            }
            let (_, doc_id) = best.expect("k-means leaves no cluster empty");
            selections.push(Selection {
                stratum: spec.name.clone(),
                cluster,
                doc_id: doc_id.to_string(),
            });
        }
    }
    Ok(selections)
}

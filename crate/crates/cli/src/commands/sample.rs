use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use vsr_core::{select_representatives, ClusterCount, Document, SamplerConfig, StratumSpec};

use super::ensure_out_dir;
use crate::error::CliError;
use crate::report::{write_json, write_text, SCHEMA_VERSION};

/// Plan-file entry; `clusters` is either a number or `"auto"`.
#[derive(Deserialize)]
struct PlanEntry {
    name: String,
    #[serde(default)]
    filters: BTreeMap<String, String>,
    clusters: ClustersField,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ClustersField {
    Count(usize),
    Mode(String),
}

fn parse_plan(path: &Path) -> Result<Vec<StratumSpec>, CliError> {
    let file = File::open(path)?;
    let entries: Vec<PlanEntry> = serde_json::from_reader(file)?;
    entries
        .into_iter()
        .map(|e| {
            let clusters = match e.clusters {
                ClustersField::Count(k) => ClusterCount::Fixed(k),
                ClustersField::Mode(mode) if mode == "auto" => ClusterCount::Auto,
                ClustersField::Mode(other) => {
                    return Err(CliError::domain(format!(
                        "stratum {}: clusters must be a number or \"auto\", got {other:?}",
                        e.name
                    )))
                }
            };
            Ok(StratumSpec {
                name: e.name,
                filters: e.filters,
                clusters,
            })
        })
        .collect()
}

/// corpus.csv: `doc_id, text`, plus one column per stratum label.
fn parse_corpus(path: &Path) -> Result<Vec<Document>, CliError> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let doc_id_idx = headers
        .iter()
        .position(|h| h == "doc_id")
        .ok_or_else(|| CliError::domain("corpus file is missing a doc_id column"))?;
    let text_idx = headers
        .iter()
        .position(|h| h == "text")
        .ok_or_else(|| CliError::domain("corpus file is missing a text column"))?;

    let mut docs = Vec::new();
    for (row_index, record) in reader.records().enumerate() {
        let record = record?;
        let line = row_index + 2;
        let get = |idx: usize| {
            record
                .get(idx)
                .ok_or_else(|| CliError::domain(format!("corpus line {line}: short row")))
        };
        let mut strata = BTreeMap::new();
        for (idx, header) in headers.iter().enumerate() {
            if idx == doc_id_idx || idx == text_idx {
                continue;
            }
            strata.insert(header.to_string(), get(idx)?.to_string());
        }
        docs.push(Document {
            doc_id: get(doc_id_idx)?.to_string(),
            text: get(text_idx)?.to_string(),
            strata,
        });
    }
    Ok(docs)
}

#[derive(Serialize)]
struct SampleMeta {
    schema_version: &'static str,
    seed: u64,
    svd_rank: Option<usize>,
    svd_rank_policy: &'static str,
    k_range: (usize, usize),
    tokenizer: &'static str,
    exclude_pattern: Option<String>,
    documents_total: usize,
    documents_excluded: usize,
    strata: Vec<StratumMeta>,
}

#[derive(Serialize)]
struct StratumMeta {
    name: String,
    clusters: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    corpus: &Path,
    plan_path: &Path,
    seed: u64,
    svd_rank: Option<usize>,
    k_range: (usize, usize),
    exclude_pattern: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    if k_range.0 < 2 || k_range.0 > k_range.1 {
        return Err(CliError::domain(format!(
            "invalid k range {}..={}",
            k_range.0, k_range.1
        )));
    }
    let plan = parse_plan(plan_path)?;
    let mut docs = parse_corpus(corpus)?;
    let total = docs.len();
    if let Some(pattern) = exclude_pattern {
        let regex = Regex::new(pattern)
            .map_err(|e| CliError::domain(format!("invalid exclude pattern: {e}")))?;
        docs.retain(|d| !regex.is_match(&d.text));
    }
    let excluded = total - docs.len();

    let config = SamplerConfig {
        svd_rank,
        k_range,
        seed,
    };
    let selections = select_representatives(&docs, &plan, &config)?;

    ensure_out_dir(out)?;
    let mut csv = String::from("stratum,cluster,doc_id\n");
    for s in &selections {
        let _ = writeln!(csv, "{},{},{}", s.stratum, s.cluster, s.doc_id);
    }
    write_text(&out.join("selections.csv"), &csv)?;

    let strata = plan
        .iter()
        .map(|spec| StratumMeta {
            name: spec.name.clone(),
            clusters: selections.iter().filter(|s| s.stratum == spec.name).count(),
        })
        .collect();
    write_json(
        &out.join("sample_meta.json"),
        &SampleMeta {
            schema_version: SCHEMA_VERSION,
            seed,
            svd_rank,
            svd_rank_policy: "min(100, vocabulary, documents - 1) unless set",
            k_range,
            tokenizer: "lowercase, split on non-alphanumeric, drop tokens shorter than 2",
            exclude_pattern: exclude_pattern.map(str::to_string),
            documents_total: total,
            documents_excluded: excluded,
            strata,
        },
    )
}

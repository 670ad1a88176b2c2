//! Value-sensitive rejection of machine decisions.
//!
//! A binary classifier with a reject option withholds low-confidence decisions
//! and hands them to a human. This crate turns user-survey responses into a
//! five-scalar value model (the perceived value of TP/TN outcomes and the cost
//! of FP/FN/rejection outcomes), calibrates classifier confidences with
//! temperature scaling, computes the total delivered value as a function of
//! the rejection threshold, and selects thresholds and models by value rather
//! than accuracy.
//!
//! # Modules
//!
//! | Module | Responsibility |
//! |--------|----------------|
//! | [`ingest`] | Parse and validate prediction files, survey responses, and value models |
//! | [`calibrate`] | Temperature scaling and expected calibration error |
//! | [`reject`] | Reject option, total-value curves, optimal thresholds, model comparison |
//! | [`survey`] | Magnitude-estimation normalization, scenario values, reliability and validity statistics |
//! | [`sampler`] | Representative item selection via TF-IDF, truncated SVD, k-means, and silhouette |
//!
//! # Example
//!
//! Sweep the rejection threshold and read off the value-optimal operating
//! point:
//!
//! ```
//! use vsr_core::{sweep, theoretical_threshold, Label, PredictionRecord, Scores, ValueModel};
//!
//! let records: Vec<PredictionRecord> = (0..100)
//!     .map(|i| PredictionRecord {
//!         model_id: "m".into(),
//!         item_id: format!("item{i}"),
//!         scores: Scores::Probability { p_pos: 0.5 + 0.005 * f64::from(i) },
//!         true_label: if i % 3 == 0 { Label::Neg } else { Label::Pos },
//!     })
//!     .collect();
//! let values = ValueModel::new(1.0, 1.0, -3.0, -3.0, -0.25)?;
//!
//! let curve = sweep(&records, &values, 0.01)?;
//! assert!(curve.argmax.tau >= 0.5);
//! assert!(curve.argmax.total_value >= curve.points.last().unwrap().total_value);
//!
//! // with incorrect outcomes 3x as costly as correct ones are valuable,
//! // a calibrated classifier should reject below 0.75 confidence
//! assert_eq!(theoretical_threshold(&values, Label::Pos)?, 0.75);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod calibrate;
pub mod ingest;
pub mod reject;
pub mod sampler;
pub mod survey;

pub use calibrate::{
    apply_temperature, calibrate_records, confidence_samples, expected_calibration_error,
    fit_temperature, CalibrateError, CalibrationModel,
};
pub use ingest::{
    ensure_unique_keys, parse_predictions, parse_predictions_reader, parse_survey,
    parse_survey_reader, parse_value_model, parse_value_model_reader, FileFormat, HatefulJudgment,
    IngestError, Label, PredictionRecord, Scale, Scenario, Scores, Stance, SurveyResponse,
    ValueModel,
};
pub use reject::{
    classify_outcome, compare_models, decide, sweep, sweep_per_class, theoretical_threshold,
    value_at, ComparisonReport, Decision, ModelComparison, Outcome, OutcomeCounts, OutcomeTally,
    PerClassCurve, PerClassReport, RejectError, RejectionPolicy, ThresholdReport, ValueCurve,
};
pub use sampler::{
    choose_k, embed_documents, kmeans, select_representatives, silhouette, sparse_from_dense,
    stratum_seed, tfidf, tokenize, truncated_svd, ClusterCount, Document, Embedding, KMeansFit,
    SamplerConfig, SamplerError, Selection, SparseMatrix, StratumSpec, SvdResult, TfIdfMatrix,
};
pub use survey::{
    convergent_validity, kendall_tau_b, krippendorff_alpha, kruskal_wallis, mann_whitney_u,
    normalize_me, normalized_responses, per_question_medians, scenario_value_table,
    scenario_values, signed_value, spearman, AlphaMetric, KruskalWallisResult, MannWhitneyResult,
    NormalizedResponse, QuestionMedian, ReliabilityBand, ReliabilityData, ScenarioStats,
    ScenarioValueTable, SurveyError, ValidityReport,
};

//! Weighted multi-criteria assessment of non-pecuniary damages.
//!
//! The engine scores per-criterion presence levels through a configurable
//! [`schema::CriteriaSchema`], classifies the weighted total into a severity
//! band, locates it within the band's thirds, and recommends compensation as
//! a multiple of a baseline amount. Everything runs on exact decimals.

pub mod assess;
pub mod canonical;
pub mod classification;
pub mod llm;
pub mod locale;
pub mod prompt;
pub mod report;
pub mod schema;
pub mod scoring;
pub mod sensitivity;
pub mod store;
pub mod testing;

pub use assess::{assess, AssessError, AssessmentResult};
pub use classification::{
    classify, classify_total, recommend_compensation, Classification, ClassifyError,
    CompensationRecommendation, Third,
};
pub use report::{build_report, render_report_text, Report, ReportError, ReportFormat};
pub use schema::{
    default_clt_schema, load_schema, validate_schema, ClassificationBand, CriteriaSchema,
    CriterionSpec, Logic, SchemaError, Violation, ViolationCode,
};
pub use scoring::{
    score_case, severity_of, CaseFile, CriterionAssessment, Money, ScoreBreakdown, ScoreRow,
    ScoringError,
};
pub use canonical::{canonicalize, to_canonical_string};
pub use llm::{complete_via_model, CompletionError, EndpointConfig};
pub use prompt::{parse_response, render_prompt, synthesize_response, ParsedResponse, PromptDocument, PromptError};
pub use sensitivity::{
    marginal_contributions, weight_sweep, what_if, MarginalContribution, SensitivityError, SweepPoint,
    WhatIfDelta, WhatIfOutcome,
};
pub use store::{CaseStore, ListFilter, NewRecord, RecordKind, RecordSummary, SchemaRef, StoreError, StoredRecord};

//! The full assessment pipeline: score, classify, recommend, report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classification::{classify, recommend_compensation, Classification, ClassifyError, CompensationRecommendation};
use crate::report::{build_report, Report, ReportError};
use crate::schema::CriteriaSchema;
use crate::scoring::{score_case, CaseFile, ScoreBreakdown, ScoringError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub breakdown: ScoreBreakdown,
    pub classification: Classification,
    pub recommendation: CompensationRecommendation,
    pub report: Report,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessError {
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl AssessError {
    /// Stable machine-readable code shared by the HTTP API and the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            AssessError::Scoring(e) => match e {
                ScoringError::Range { .. } | ScoringError::PresenceOutOfRange { .. } => "out_of_range",
                ScoringError::UnknownCriterion { .. } => "unknown_criterion",
                ScoringError::DuplicateAssessment { .. } => "duplicate_assessment",
                ScoringError::EmptyCaseId
                | ScoringError::NonPositiveBaseline(_)
                | ScoringError::InvalidCurrency(_) => "invalid_case",
            },
            AssessError::Classify(ClassifyError::IncompleteCase { .. }) => "incomplete_case",
            AssessError::Classify(ClassifyError::NonPositiveBaseline(_)) => "invalid_case",
            AssessError::Classify(_) => "invalid_schema",
            AssessError::Report(_) => "inconsistent_inputs",
        }
    }

    pub fn field(&self) -> Option<String> {
        match self {
            AssessError::Scoring(e) => e.field(),
            AssessError::Classify(ClassifyError::IncompleteCase { .. }) => Some("assessments".into()),
            _ => None,
        }
    }

    /// Internal errors are invariant breaks inside the engine, not bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, AssessError::Report(_))
    }
}

pub fn assess(schema: &CriteriaSchema, case: &CaseFile) -> Result<AssessmentResult, AssessError> {
    case.validate()?;
    let breakdown = score_case(schema, case)?;
    let classification = classify(schema, &breakdown)?;
    let recommendation = recommend_compensation(schema, &classification, &case.baseline)?;
    let report = build_report(schema, case, &breakdown, &classification, &recommendation)?;
    Ok(AssessmentResult {
        breakdown,
        classification,
        recommendation,
        report,
    })
}

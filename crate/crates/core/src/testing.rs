//! Fixture builders shared by unit, integration and acceptance tests.

use chrono::{DateTime, TimeZone, Utc};
use rust_decimal::Decimal;

use crate::schema::CriteriaSchema;
use crate::scoring::{presence_for_severity, CaseFile, CriterionAssessment, Money};

pub fn fixed_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, 14, 9, 30, 0).unwrap()
}

/// A complete case whose i-th criterion (schema order) has severity `severities[i]`.
pub fn case_with_severities(schema: &CriteriaSchema, severities: &[u8]) -> CaseFile {
    assert_eq!(severities.len(), schema.criteria.len(), "one severity per criterion");
    let assessments = schema
        .criteria
        .iter()
        .zip(severities)
        .map(|(c, &sev)| CriterionAssessment {
            criterion_id: c.id.clone(),
            presence: presence_for_severity(sev, c.logic).expect("severity in 1..5"),
            justification: format!("{} assessed at severity {sev}.", c.name),
            evidence_refs: Vec::new(),
        })
        .collect();
    CaseFile {
        case_id: "fixture".into(),
        facts: "Synthetic fixture case.".into(),
        baseline: Money::new(Decimal::from(3000), "BRL"),
        assessments,
        created_at: fixed_time(),
        updated_at: fixed_time(),
    }
}

pub fn uniform_case(schema: &CriteriaSchema, severity: u8) -> CaseFile {
    case_with_severities(schema, &vec![severity; schema.criteria.len()])
}

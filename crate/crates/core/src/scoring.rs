//! Per-criterion severity and the weighted total.

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{CriteriaSchema, Logic};

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Money {
    pub amount: Decimal,
    pub currency: String,
}

impl Money {
    pub fn new(amount: Decimal, currency: impl Into<String>) -> Self {
        Self {
            amount,
            currency: currency.into(),
        }
    }

    pub fn scaled(&self, factor: Decimal) -> Money {
        Money::new(factor * self.amount, self.currency.clone())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.currency, self.amount)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionAssessment {
    pub criterion_id: String,
    /// Degree (1..5) to which the criterion's factor is present, before logic.
    pub presence: u8,
    #[serde(default)]
    pub justification: String,
    #[serde(default)]
    pub evidence_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub case_id: String,
    pub facts: String,
    pub baseline: Money,
    pub assessments: Vec<CriterionAssessment>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl CaseFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks the case-level invariants that do not depend on a schema.
    pub fn validate(&self) -> Result<(), ScoringError> {
        if self.case_id.trim().is_empty() {
            return Err(ScoringError::EmptyCaseId);
        }
        if self.baseline.amount <= Decimal::ZERO {
            return Err(ScoringError::NonPositiveBaseline(self.baseline.amount));
        }
        let c = &self.baseline.currency;
        if c.len() != 3 || !c.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(ScoringError::InvalidCurrency(c.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub criterion_id: String,
    pub presence: u8,
    pub logic: Logic,
    pub severity: u8,
    pub weight: Decimal,
    pub weighted_contribution: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub rows: Vec<ScoreRow>,
    pub weighted_total: Decimal,
    pub complete: bool,
    /// Schema criteria without an assessment, in schema order.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("presence {presence} outside 1..5")]
    Range { presence: u8 },
    #[error("{criterion_id}: presence {presence} outside 1..5")]
    PresenceOutOfRange {
        index: usize,
        criterion_id: String,
        presence: u8,
    },
    #[error("unknown criterion {criterion_id}")]
    UnknownCriterion { index: usize, criterion_id: String },
    #[error("duplicate assessment for criterion {criterion_id}")]
    DuplicateAssessment { index: usize, criterion_id: String },
    #[error("case_id must not be empty")]
    EmptyCaseId,
    #[error("baseline amount must be positive, got {0}")]
    NonPositiveBaseline(Decimal),
    #[error("currency {0:?} is not an ISO-4217 code")]
    InvalidCurrency(String),
}

impl ScoringError {
    /// JSON path of the offending field inside a case file.
    pub fn field(&self) -> Option<String> {
        match self {
            ScoringError::Range { .. } => None,
            ScoringError::PresenceOutOfRange { index, .. } => {
                Some(format!("assessments[{index}].presence"))
            }
            ScoringError::UnknownCriterion { index, .. }
            | ScoringError::DuplicateAssessment { index, .. } => {
                Some(format!("assessments[{index}].criterion_id"))
            }
            ScoringError::EmptyCaseId => Some("case_id".into()),
            ScoringError::NonPositiveBaseline(_) => Some("baseline.amount".into()),
            ScoringError::InvalidCurrency(_) => Some("baseline.currency".into()),
        }
    }
}

/// Maps a presence level to a severity level; higher severity is always worse.
pub fn severity_of(presence: u8, logic: Logic) -> Result<u8, ScoringError> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&presence) {
        return Err(ScoringError::Range { presence });
    }
    Ok(match logic {
        Logic::Direct => presence,
        Logic::Inverse => MIN_LEVEL + MAX_LEVEL - presence,
    })
}

/// Inverse of [`severity_of`] for a fixed logic direction.
pub fn presence_for_severity(severity: u8, logic: Logic) -> Result<u8, ScoringError> {
    // the mapping is an involution in both directions
    severity_of(severity, logic)
}

/// Scores every assessment against the schema. Missing criteria yield an
/// incomplete breakdown rather than an error.
pub fn score_case(schema: &CriteriaSchema, case: &CaseFile) -> Result<ScoreBreakdown, ScoringError> {
    score_assessments(schema, &case.assessments)
}

pub fn score_assessments(
    schema: &CriteriaSchema,
    assessments: &[CriterionAssessment],
) -> Result<ScoreBreakdown, ScoringError> {
    let mut slots: Vec<Option<ScoreRow>> = vec![None; schema.criteria.len()];
    let mut seen = HashSet::new();

    for (index, a) in assessments.iter().enumerate() {
        let pos = schema
            .position_of(&a.criterion_id)
            .ok_or_else(|| ScoringError::UnknownCriterion {
                index,
                criterion_id: a.criterion_id.clone(),
            })?;
        if !seen.insert(a.criterion_id.as_str()) {
            return Err(ScoringError::DuplicateAssessment {
                index,
                criterion_id: a.criterion_id.clone(),
            });
        }
        let spec = &schema.criteria[pos];
        let severity =
            severity_of(a.presence, spec.logic).map_err(|_| ScoringError::PresenceOutOfRange {
                index,
                criterion_id: a.criterion_id.clone(),
                presence: a.presence,
            })?;
        slots[pos] = Some(ScoreRow {
            criterion_id: spec.id.clone(),
            presence: a.presence,
            logic: spec.logic,
            severity,
            weight: spec.weight,
            weighted_contribution: Decimal::from(severity) * spec.weight,
        });
    }

    let missing: Vec<String> = schema
        .criteria
        .iter()
        .zip(&slots)
        .filter(|(_, slot)| slot.is_none())
        .map(|(c, _)| c.id.clone())
        .collect();
    let rows: Vec<ScoreRow> = slots.into_iter().flatten().collect();
    let weighted_total = rows.iter().map(|r| r.weighted_contribution).sum();
    Ok(ScoreBreakdown {
        rows,
        weighted_total,
        complete: missing.is_empty(),
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::default_clt_schema;
    use crate::testing::{case_with_severities, uniform_case};
    use proptest::prelude::*;
    use rust_decimal_macros::dec;

    #[test]
    fn severity_examples() {
        assert_eq!(severity_of(1, Logic::Inverse).unwrap(), 5);
        assert_eq!(severity_of(3, Logic::Direct).unwrap(), 3);
        assert_eq!(severity_of(5, Logic::Inverse).unwrap(), 1);
        assert_eq!(severity_of(2, Logic::Inverse).unwrap(), 4);
        assert!(matches!(severity_of(0, Logic::Direct), Err(ScoringError::Range { presence: 0 })));
        assert!(severity_of(6, Logic::Inverse).is_err());
    }

    #[test]
    fn severity_enumeration() {
        // 10 (presence, logic) pairs against a literal table
        let direct = [1, 2, 3, 4, 5];
        let inverse = [5, 4, 3, 2, 1];
        for p in 1..=5u8 {
            assert_eq!(severity_of(p, Logic::Direct).unwrap(), direct[p as usize - 1]);
            assert_eq!(severity_of(p, Logic::Inverse).unwrap(), inverse[p as usize - 1]);
            assert_eq!(presence_for_severity(severity_of(p, Logic::Inverse).unwrap(), Logic::Inverse).unwrap(), p);
        }
    }

    fn table2_weight_sum() -> Decimal {
        // independent of the schema constructor
        [dec!(2.5), dec!(2.0), dec!(1.5), dec!(1.5), dec!(1.2), dec!(1.0), dec!(1.0), dec!(1.0), dec!(1.0), dec!(0.8), dec!(0.6), dec!(0.5)]
            .into_iter()
            .sum()
    }

    #[test]
    fn uniform_totals() {
        let s = default_clt_schema();
        for (sev, expected) in [(5u8, dec!(73.0)), (1, dec!(14.6)), (3, dec!(43.8))] {
            let b = score_case(&s, &uniform_case(&s, sev)).unwrap();
            assert_eq!(b.weighted_total, expected);
            assert_eq!(b.weighted_total, Decimal::from(sev) * table2_weight_sum());
            assert!(b.complete);
            assert_eq!(b.rows.len(), 12);
        }
    }

    #[test]
    fn rows_follow_schema_order() {
        let s = default_clt_schema();
        let mut case = uniform_case(&s, 3);
        case.assessments.reverse();
        let b = score_case(&s, &case).unwrap();
        let ids: Vec<_> = b.rows.iter().map(|r| r.criterion_id.as_str()).collect();
        let schema_ids: Vec<_> = s.criteria.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, schema_ids);
    }

    #[test]
    fn missing_criterion_is_incomplete() {
        let s = default_clt_schema();
        let mut case = uniform_case(&s, 3);
        case.assessments.retain(|a| a.criterion_id != "XII");
        let b = score_case(&s, &case).unwrap();
        assert_eq!(b.rows.len(), 11);
        assert!(!b.complete);
        assert_eq!(b.missing, vec!["XII".to_string()]);
    }

    #[test]
    fn errors_carry_paths() {
        let s = default_clt_schema();
        let mut case = uniform_case(&s, 3);
        case.assessments[3].presence = 9;
        let err = score_case(&s, &case).unwrap_err();
        assert_eq!(err.field().unwrap(), "assessments[3].presence");

        let mut case = uniform_case(&s, 3);
        case.assessments[2].criterion_id = "XIII".into();
        let err = score_case(&s, &case).unwrap_err();
        assert!(matches!(err, ScoringError::UnknownCriterion { index: 2, .. }));

        let mut case = uniform_case(&s, 3);
        case.assessments[5].criterion_id = "I".into();
        assert!(matches!(
            score_case(&s, &case).unwrap_err(),
            ScoringError::DuplicateAssessment { index: 5, .. }
        ));
    }

    #[test]
    fn case_validation() {
        let s = default_clt_schema();
        let mut case = uniform_case(&s, 3);
        assert!(case.validate().is_ok());
        case.baseline.amount = dec!(0);
        assert_eq!(case.validate().unwrap_err().field().unwrap(), "baseline.amount");
        case.baseline.amount = dec!(1);
        case.baseline.currency = "reais".into();
        assert_eq!(case.validate().unwrap_err().field().unwrap(), "baseline.currency");
    }

    fn severities() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(1u8..=5, 12)
    }

    proptest! {
        #[test]
        fn bounds_hold(sev in severities()) {
            let s = default_clt_schema();
            let b = score_case(&s, &case_with_severities(&s, &sev)).unwrap();
            prop_assert!(b.weighted_total >= s.min_total());
            prop_assert!(b.weighted_total <= s.max_total());
        }

        #[test]
        fn increment_adds_exact_weight(sev in severities(), idx in 0usize..12) {
            prop_assume!(sev[idx] < 5);
            let s = default_clt_schema();
            let before = score_case(&s, &case_with_severities(&s, &sev)).unwrap();
            let mut bumped = sev.clone();
            bumped[idx] += 1;
            let after = score_case(&s, &case_with_severities(&s, &bumped)).unwrap();
            prop_assert_eq!(after.weighted_total - before.weighted_total, s.criteria[idx].weight);
        }

        #[test]
        fn permutation_invariant(sev in severities(), seed in any::<u64>()) {
            let s = default_clt_schema();
            let case = case_with_severities(&s, &sev);
            let mut shuffled = case.clone();
            // deterministic rotation + reversal driven by the seed
            let k = (seed % 12) as usize;
            shuffled.assessments.rotate_left(k);
            if seed % 2 == 0 {
                shuffled.assessments.reverse();
            }
            let a = score_case(&s, &case).unwrap();
            let b = score_case(&s, &shuffled).unwrap();
            prop_assert_eq!(a.weighted_total.to_string(), b.weighted_total.to_string());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn contributions_sum_to_total(sev in severities()) {
            let s = default_clt_schema();
            let b = score_case(&s, &case_with_severities(&s, &sev)).unwrap();
            let reversed: Decimal = b.rows.iter().rev().map(|r| r.weighted_contribution).sum();
            prop_assert_eq!(reversed, b.weighted_total);
            for r in &b.rows {
                prop_assert_eq!(r.weighted_contribution, Decimal::from(r.severity) * r.weight);
            }
        }
    }
}

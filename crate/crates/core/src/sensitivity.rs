//! What-if analysis: presence and weight overrides, marginal contributions,
//! and single-criterion weight sweeps.

use std::collections::BTreeMap;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assess::{assess, AssessError, AssessmentResult};
use crate::classification::{classify, recommend_compensation, ClassifyError, Third};
use crate::schema::CriteriaSchema;
use crate::scoring::{score_case, CaseFile, MAX_LEVEL, MIN_LEVEL};

/// Decimal places of the reported shares; they sum to exactly 1.
pub const SHARE_DP: u32 = 12;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfDelta {
    #[serde(default)]
    pub presence_overrides: BTreeMap<String, u8>,
    #[serde(default)]
    pub weight_overrides: BTreeMap<String, Decimal>,
}

impl WhatIfDelta {
    pub fn is_empty(&self) -> bool {
        self.presence_overrides.is_empty() && self.weight_overrides.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfOutcome {
    pub before: AssessmentResult,
    pub after: AssessmentResult,
    pub changed_fields: Vec<FieldChange>,
    pub modified_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalContribution {
    pub criterion_id: String,
    pub severity: u8,
    pub weight: Decimal,
    pub weighted_contribution: Decimal,
    pub share_of_total: Decimal,
    /// Total change if this criterion's severity dropped to 1.
    pub swing_low: Decimal,
    /// Total change if this criterion's severity rose to 5.
    pub swing_high: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub weight: Decimal,
    pub total: Decimal,
    pub band_label: String,
    pub third: Third,
    pub recommended_multiplier: Decimal,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("unknown criterion {id} in {field}")]
    UnknownCriterion { id: String, field: String },
    #[error("{field}: {message}")]
    Range { field: String, message: String },
    #[error(transparent)]
    Assess(#[from] AssessError),
}

impl SensitivityError {
    pub fn code(&self) -> &'static str {
        match self {
            SensitivityError::UnknownCriterion { .. } => "unknown_criterion",
            SensitivityError::Range { .. } => "out_of_range",
            SensitivityError::Assess(e) => e.code(),
        }
    }

    pub fn field(&self) -> Option<String> {
        match self {
            SensitivityError::UnknownCriterion { field, .. } | SensitivityError::Range { field, .. } => {
                Some(field.clone())
            }
            SensitivityError::Assess(e) => e.field(),
        }
    }
}

impl From<ClassifyError> for SensitivityError {
    fn from(e: ClassifyError) -> Self {
        SensitivityError::Assess(e.into())
    }
}

fn check_weight(weight: Decimal, field: String) -> Result<(), SensitivityError> {
    if weight <= Decimal::ZERO {
        return Err(SensitivityError::Range {
            field,
            message: format!("weight must be positive, got {weight}"),
        });
    }
    Ok(())
}

fn apply_delta(
    schema: &CriteriaSchema,
    case: &CaseFile,
    delta: &WhatIfDelta,
) -> Result<(CriteriaSchema, CaseFile), SensitivityError> {
    let mut schema = schema.clone();
    let mut case = case.clone();
    for (id, &presence) in &delta.presence_overrides {
        let field = format!("presence_overrides.{id}");
        if schema.criterion(id).is_none() {
            return Err(SensitivityError::UnknownCriterion { id: id.clone(), field });
        }
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&presence) {
            return Err(SensitivityError::Range {
                field,
                message: format!("presence {presence} outside 1..5"),
            });
        }
        match case.assessments.iter_mut().find(|a| &a.criterion_id == id) {
            Some(a) => a.presence = presence,
            None => {
                return Err(SensitivityError::UnknownCriterion {
                    id: id.clone(),
                    field: format!("{field} (not assessed in case)"),
                })
            }
        }
    }
    for (id, &weight) in &delta.weight_overrides {
        let field = format!("weight_overrides.{id}");
        check_weight(weight, field.clone())?;
        match schema.criteria.iter_mut().find(|c| &c.id == id) {
            Some(c) => c.weight = weight,
            None => return Err(SensitivityError::UnknownCriterion { id: id.clone(), field }),
        }
    }
    Ok((schema, case))
}

fn diff(before: &AssessmentResult, after: &AssessmentResult) -> Vec<FieldChange> {
    let pick = |r: &AssessmentResult| {
        [
            ("weighted_total", r.breakdown.weighted_total.to_string()),
            ("band", r.classification.band_label.clone()),
            ("third", r.classification.third.to_string()),
            ("below_scale", r.classification.below_scale.to_string()),
            ("recommended_multiplier", r.recommendation.recommended_multiplier.to_string()),
            ("recommended_amount", r.recommendation.recommended_amount.to_string()),
        ]
    };
    pick(before)
        .into_iter()
        .zip(pick(after))
        .filter(|((_, b), (_, a))| b != a)
        .map(|((field, before), (_, after))| FieldChange {
            field: field.to_owned(),
            before,
            after,
        })
        .collect()
}

/// Runs the pipeline before and after applying `delta`. Weight overrides keep
/// the schema's band boundaries; only the derived totals move.
pub fn what_if(schema: &CriteriaSchema, case: &CaseFile, delta: &WhatIfDelta) -> Result<WhatIfOutcome, SensitivityError> {
    let before = assess(schema, case)?;
    let (schema_after, case_after) = apply_delta(schema, case, delta)?;
    let after = assess(&schema_after, &case_after)?;
    Ok(WhatIfOutcome {
        changed_fields: diff(&before, &after),
        modified_weights: !delta.weight_overrides.is_empty(),
        before,
        after,
    })
}

/// Largest-remainder rounding of `parts / total` to `dp` places, so the
/// rounded shares add up to exactly one.
fn apportion(parts: &[Decimal], total: Decimal, dp: u32) -> Vec<Decimal> {
    let unit = Decimal::new(1, dp);
    let exact: Vec<Decimal> = parts.iter().map(|p| p / total).collect();
    let mut shares: Vec<Decimal> = exact
        .iter()
        .map(|s| s.round_dp_with_strategy(dp, RoundingStrategy::ToZero))
        .collect();
    let assigned: Decimal = shares.iter().sum();
    let mut leftover = ((Decimal::ONE - assigned) / unit).round();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - shares[b]).cmp(&(exact[a] - shares[a])).then(a.cmp(&b)));
    for i in order {
        if leftover <= Decimal::ZERO {
            break;
        }
        shares[i] += unit;
        leftover -= Decimal::ONE;
    }
    shares
}

pub fn marginal_contributions(schema: &CriteriaSchema, case: &CaseFile) -> Result<Vec<MarginalContribution>, SensitivityError> {
    let breakdown = score_case(schema, case).map_err(AssessError::from)?;
    if !breakdown.complete {
        return Err(ClassifyError::IncompleteCase {
            missing: breakdown.missing,
        }
        .into());
    }
    let parts: Vec<Decimal> = breakdown.rows.iter().map(|r| r.weighted_contribution).collect();
    let shares = apportion(&parts, breakdown.weighted_total, SHARE_DP);
    Ok(breakdown
        .rows
        .iter()
        .zip(shares)
        .map(|(r, share)| MarginalContribution {
            criterion_id: r.criterion_id.clone(),
            severity: r.severity,
            weight: r.weight,
            weighted_contribution: r.weighted_contribution,
            share_of_total: share,
            swing_low: r.weight * Decimal::from(i64::from(MIN_LEVEL) - i64::from(r.severity)),
            swing_high: r.weight * Decimal::from(i64::from(MAX_LEVEL) - i64::from(r.severity)),
        })
        .collect())
}

/// Re-evaluates the case once per candidate weight for one criterion.
pub fn weight_sweep(
    schema: &CriteriaSchema,
    case: &CaseFile,
    criterion_id: &str,
    weight_grid: &[Decimal],
) -> Result<Vec<SweepPoint>, SensitivityError> {
    let pos = schema
        .position_of(criterion_id)
        .ok_or_else(|| SensitivityError::UnknownCriterion {
            id: criterion_id.to_owned(),
            field: "criterion_id".into(),
        })?;
    for (i, &w) in weight_grid.iter().enumerate() {
        check_weight(w, format!("weight_grid[{i}]"))?;
    }
    case.validate().map_err(AssessError::from)?;

    let mut working = schema.clone();
    weight_grid
        .iter()
        .map(|&weight| {
            working.criteria[pos].weight = weight;
            let breakdown = score_case(&working, case).map_err(AssessError::from)?;
            let c = classify(&working, &breakdown)?;
            let r = recommend_compensation(&working, &c, &case.baseline)?;
            Ok(SweepPoint {
                weight,
                total: breakdown.weighted_total,
                band_label: c.band_label,
                third: c.third,
                recommended_multiplier: r.recommended_multiplier,
            })
        })
        .collect()
}

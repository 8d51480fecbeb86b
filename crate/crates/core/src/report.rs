//! The four-section justification report and its text renderings.

use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classification::{recommend_compensation, Classification, CompensationRecommendation, Third};
use crate::locale::{fill, Locale};
use crate::schema::{CriteriaSchema, Logic};
use crate::scoring::{CaseFile, Money, ScoreBreakdown};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub criterion_id: String,
    pub name: String,
    pub analysis: String,
    pub presence: u8,
    pub logic: Logic,
    pub severity: u8,
    pub weight: Decimal,
    pub contribution: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalCalculation {
    pub weighted_total: Decimal,
    pub band_label: String,
    pub third: Third,
    pub below_scale: bool,
    pub recommendation: CompensationRecommendation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_id: String,
    pub schema_version: String,
    pub case_id: String,
    pub language: String,
    pub baseline_label: String,
    pub case_summary: String,
    pub criteria_rows: Vec<ReportRow>,
    pub final_calculation: FinalCalculation,
    pub conclusion: String,
    pub generated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Plain,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("inconsistent report inputs: {0}")]
    Consistency(String),
}

fn inconsistent(msg: impl Into<String>) -> ReportError {
    ReportError::Consistency(msg.into())
}

/// Scores: exactly one decimal place.
pub fn fmt_score(value: Decimal) -> String {
    fixed(value, 1)
}

/// Baseline multiples: two decimal places.
pub fn fmt_multiplier(value: Decimal) -> String {
    fixed(value, 2)
}

/// Money: currency code and exactly two decimal places.
pub fn fmt_money(money: &Money) -> String {
    format!("{} {}", money.currency, fixed(money.amount, 2))
}

fn fixed(value: Decimal, dp: u32) -> String {
    let mut v = value.round_dp_with_strategy(dp, RoundingStrategy::MidpointAwayFromZero);
    v.rescale(dp);
    v.to_string()
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Builds a report using the locale for the schema's jurisdiction. The
/// timestamp is the case's `updated_at`, so identical inputs give identical
/// reports.
pub fn build_report(
    schema: &CriteriaSchema,
    case: &CaseFile,
    breakdown: &ScoreBreakdown,
    classification: &Classification,
    recommendation: &CompensationRecommendation,
) -> Result<Report, ReportError> {
    let locale = Locale::for_jurisdiction(&schema.jurisdiction);
    build_report_with(schema, case, breakdown, classification, recommendation, &locale, case.updated_at)
}

pub fn build_report_with(
    schema: &CriteriaSchema,
    case: &CaseFile,
    breakdown: &ScoreBreakdown,
    classification: &Classification,
    recommendation: &CompensationRecommendation,
    locale: &Locale,
    generated_at: DateTime<Utc>,
) -> Result<Report, ReportError> {
    if breakdown.weighted_total != classification.total {
        return Err(inconsistent(format!(
            "breakdown total {} differs from classified total {}",
            breakdown.weighted_total, classification.total
        )));
    }
    let band = schema
        .bands
        .get(classification.band_index)
        .filter(|b| b.label == classification.band_label)
        .ok_or_else(|| inconsistent(format!("band {} is not in schema", classification.band_label)))?;
    if band.score_lo != classification.score_lo {
        return Err(inconsistent("classification bounds differ from schema band"));
    }
    let expected = recommend_compensation(schema, classification, &case.baseline)
        .map_err(|e| inconsistent(e.to_string()))?;
    if &expected != recommendation {
        return Err(inconsistent("recommendation was not derived from this classification and baseline"));
    }

    let mut criteria_rows = Vec::with_capacity(breakdown.rows.len());
    for row in &breakdown.rows {
        let spec = schema
            .criterion(&row.criterion_id)
            .ok_or_else(|| inconsistent(format!("criterion {} is not in schema", row.criterion_id)))?;
        let assessment = case
            .assessments
            .iter()
            .find(|a| a.criterion_id == row.criterion_id && a.presence == row.presence)
            .ok_or_else(|| inconsistent(format!("breakdown row {} does not match the case", row.criterion_id)))?;
        if spec.weight != row.weight || spec.logic != row.logic {
            return Err(inconsistent(format!("weight or logic of {} differs from schema", row.criterion_id)));
        }
        let analysis = one_line(&assessment.justification);
        criteria_rows.push(ReportRow {
            criterion_id: row.criterion_id.clone(),
            name: spec.name.clone(),
            analysis: if analysis.is_empty() {
                locale.no_justification.clone()
            } else {
                analysis
            },
            presence: row.presence,
            logic: row.logic,
            severity: row.severity,
            weight: row.weight,
            contribution: row.weighted_contribution,
        });
    }
    if criteria_rows.len() != case.assessments.len() {
        return Err(inconsistent("breakdown does not cover every assessed criterion"));
    }

    let final_calculation = FinalCalculation {
        weighted_total: breakdown.weighted_total,
        band_label: classification.band_label.clone(),
        third: classification.third,
        below_scale: classification.below_scale,
        recommendation: recommendation.clone(),
    };
    let mut report = Report {
        schema_id: schema.schema_id.clone(),
        schema_version: schema.version.clone(),
        case_id: case.case_id.clone(),
        language: locale.language.clone(),
        baseline_label: schema.baseline_label.clone(),
        case_summary: case.facts.trim().to_owned(),
        criteria_rows,
        final_calculation,
        conclusion: String::new(),
        generated_at,
    };
    let values = calculation_values(&report, locale);
    report.conclusion = fill(&locale.conclusion, &values.as_refs());
    Ok(report)
}

struct Values {
    pairs: Vec<(&'static str, String)>,
}

impl Values {
    fn as_refs(&self) -> Vec<(&str, &str)> {
        self.pairs.iter().map(|(k, v)| (*k, v.as_str())).collect()
    }
}

fn calculation_values(report: &Report, locale: &Locale) -> Values {
    let calc = &report.final_calculation;
    let rec = &calc.recommendation;
    let below = if calc.below_scale {
        locale.below_scale_note.clone()
    } else {
        String::new()
    };
    Values {
        pairs: vec![
            ("criteria_count", report.criteria_rows.len().to_string()),
            ("total", fmt_score(calc.weighted_total)),
            ("band", calc.band_label.clone()),
            ("third", locale.third(calc.third).to_owned()),
            ("below_scale", below),
            ("third_lo", fmt_multiplier(rec.third_interval.lo)),
            ("third_hi", fmt_multiplier(rec.third_interval.hi)),
            ("amount_lo", fmt_money(&rec.amount_range.lo)),
            ("amount_hi", fmt_money(&rec.amount_range.hi)),
            ("multiplier", fmt_multiplier(rec.recommended_multiplier)),
            ("amount", fmt_money(&rec.recommended_amount)),
            ("cap", fmt_money(&rec.band_cap_amount)),
            ("baseline_label", report.baseline_label.clone()),
        ],
    }
}

/// Renders with the built-in locale matching the report's language.
pub fn render_report_text(report: &Report, format: ReportFormat) -> String {
    render_report_text_with(report, format, &Locale::for_language(&report.language))
}

pub fn render_report_text_with(report: &Report, format: ReportFormat, locale: &Locale) -> String {
    let values = calculation_values(report, locale);
    let values = values.as_refs();
    let h = locale.headings.in_order();
    let meta = fill(
        &locale.meta_line,
        &[
            ("case_id", &report.case_id),
            ("schema_id", &report.schema_id),
            ("schema_version", &report.schema_version),
            ("generated_at", &report.generated_at.to_rfc3339_opts(SecondsFormat::Secs, true)),
        ],
    );
    let criterion_lines: Vec<String> = report
        .criteria_rows
        .iter()
        .map(|r| {
            fill(
                &locale.criterion_line,
                &[
                    ("id", &r.criterion_id),
                    ("name", &r.name),
                    ("presence", &r.presence.to_string()),
                    ("logic", locale.logic(r.logic)),
                    ("severity", &r.severity.to_string()),
                    ("weight", &r.weight.to_string()),
                    ("contribution", &fmt_score(r.contribution)),
                    ("analysis", &r.analysis),
                ],
            )
        })
        .collect();
    let calc_lines = [
        fill(&locale.total_line, &values),
        fill(&locale.classification_line, &values),
        fill(&locale.compensation_line, &values),
        fill(&locale.recommended_line, &values),
    ];

    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "# {}\n\n{}\n", locale.title, meta);
            let _ = writeln!(out, "## 1. {}\n\n{}\n", h[0], report.case_summary);
            let _ = writeln!(out, "## 2. {}\n", h[1]);
            for line in &criterion_lines {
                let _ = writeln!(out, "- {line}");
            }
            let _ = writeln!(out, "\n## 3. {}\n", h[2]);
            for line in &calc_lines {
                let _ = writeln!(out, "- {line}");
            }
            let _ = writeln!(out, "\n## 4. {}\n\n{}", h[3], report.conclusion);
        }
        ReportFormat::Plain => {
            let _ = writeln!(out, "{}\n{}\n", locale.title.to_uppercase(), meta);
            let _ = writeln!(out, "1. {}\n{}\n", h[0], report.case_summary);
            let _ = writeln!(out, "2. {}", h[1]);
            for line in &criterion_lines {
                let _ = writeln!(out, "  {line}");
            }
            let _ = writeln!(out, "\n3. {}", h[2]);
            for line in &calc_lines {
                let _ = writeln!(out, "  {line}");
            }
            let _ = writeln!(out, "\n4. {}\n{}", h[3], report.conclusion);
        }
    }
    out
}

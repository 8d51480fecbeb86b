//! Structured prompt rendering and strict parsing of model responses.
//!
//! The rendered prompt asks for presence levels (not severities) in a fixed
//! one-line grammar per criterion:
//!
//! ```text
//! CRITERION <id>: score=<1-5> | <justification>
//! ```
//!
//! Parsing never repairs input. Anything unusable becomes a diagnostic, and
//! any total or band the model reports is only compared against the engine's
//! own computation.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classification::classify_total;
use crate::schema::CriteriaSchema;
use crate::scoring::{score_assessments, CaseFile, CriterionAssessment, MAX_LEVEL, MIN_LEVEL};

pub const CASE_SUMMARY: &str = "CASE SUMMARY";
pub const CRITERIA_ANALYSIS: &str = "CRITERIA ANALYSIS";
pub const FINAL_CALCULATION: &str = "FINAL CALCULATION";
pub const CONCLUSION: &str = "CONCLUSION";
pub const SECTION_HEADINGS: [&str; 4] = [CASE_SUMMARY, CRITERIA_ANALYSIS, FINAL_CALCULATION, CONCLUSION];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub role_block: String,
    pub context_block: String,
    pub instruction_list: Vec<String>,
    pub criteria_table_block: String,
    pub classification_block: String,
    pub output_format_block: String,
    pub facts_block: String,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub case_summary: String,
    pub assessments: Vec<CriterionAssessment>,
    pub reported_total: Option<Decimal>,
    pub reported_band: Option<String>,
    /// Engine total over the parsed assessments, when they cover the schema.
    pub computed_total: Option<Decimal>,
    pub computed_band: Option<String>,
    pub conclusion: String,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("case facts must not be empty")]
    EmptyFacts,
    #[error("response contains none of the expected section headings")]
    Unparseable,
}

fn uppercase_label(label: &str) -> String {
    label.to_uppercase()
}

pub fn render_prompt(schema: &CriteriaSchema, facts: &str) -> Result<PromptDocument, PromptError> {
    let facts = facts.trim();
    if facts.is_empty() {
        return Err(PromptError::EmptyFacts);
    }

    let role_block = format!(
        "ROLE: You are the Soppia legal assistant. Assess the non-pecuniary damage in the case below \
         criterion by criterion, following schema {} v{} (jurisdiction {}).",
        schema.schema_id, schema.version, schema.jurisdiction
    );
    let context_block = format!(
        "CONTEXT: The case facts at the end of this prompt are the only evidence available. \
         Compensation is expressed in multiples of the {}.",
        schema.baseline_label
    );

    let band_names: Vec<&str> = schema.bands.iter().map(|b| b.label.as_str()).collect();
    let instruction_list = vec![
        "Examine every criterion in the table below against the case facts.".to_owned(),
        "Assign each criterion a score from 1 to 5 measuring how strongly its factor is present \
         (1 = absent, 5 = fully present), explicitly stating the logic (direct or inverse) that applies. \
         Do not invert the score yourself; inverse logic is applied when the total is computed."
            .to_owned(),
        "Multiply each score by its weight and add the results into a total weighted score.".to_owned(),
        format!("Place the total in one of the severity bands ({}).", band_names.join(", ")),
        "Suggest a compensation range for that band.".to_owned(),
        "Write the full reasoning as a report in the output format below.".to_owned(),
    ];
    let mut instructions = String::from("INSTRUCTIONS:\n");
    for (i, step) in instruction_list.iter().enumerate() {
        let _ = writeln!(instructions, "{}. {}", i + 1, step);
    }

    let mut criteria_table_block = String::from("CRITERIA AND WEIGHTS:\nCriterion & Weight & Logic\n");
    for c in &schema.criteria {
        let _ = writeln!(criteria_table_block, "{} - {} & {} & {}", c.id, c.name, c.weight, c.logic.title());
    }

    let mut classification_block = String::from("CLASSIFICATION:\n");
    for band in &schema.bands {
        let range = match band.score_hi {
            Some(hi) => format!("{} to under {} points", band.score_lo, hi),
            None => format!("{}+ points", band.score_lo),
        };
        let _ = writeln!(
            classification_block,
            "- {}: {} (up to {}× {})",
            range,
            uppercase_label(&band.label),
            band.multiplier_cap,
            schema.baseline_label
        );
    }

    let output_format_block = format!(
        "OUTPUT FORMAT: Answer with exactly these four sections and headings.\n\
         1. {CASE_SUMMARY}\n\
         Short account of the relevant facts.\n\
         2. {CRITERIA_ANALYSIS}\n\
         One line per criterion, in exactly this form:\n\
         CRITERION <id>: score=<1-5> | <analysis and justification, stating the logic applied>\n\
         3. {FINAL_CALCULATION}\n\
         Total weighted score: <X> points\n\
         Classification: <{}>\n\
         Suggested compensation: <range in multiples of the {}>\n\
         4. {CONCLUSION}\n\
         Overall findings and the recommended compensation.\n",
        band_names.join("/"),
        schema.baseline_label
    );
    let facts_block = format!("CASE FACTS:\n{facts}\n");

    let rendered = [
        role_block.as_str(),
        context_block.as_str(),
        instructions.trim_end(),
        criteria_table_block.trim_end(),
        classification_block.trim_end(),
        output_format_block.trim_end(),
        facts_block.trim_end(),
    ]
    .join("\n\n")
        + "\n";

    Ok(PromptDocument {
        role_block,
        context_block,
        instruction_list,
        criteria_table_block,
        classification_block,
        output_format_block,
        facts_block,
        rendered,
    })
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^[\s#*_]*(?:\d+[.)]\s*)?[*_]*\s*(CASE SUMMARY|CRITERIA ANALYSIS|FINAL CALCULATION|CONCLUSION)\s*[*_]*\s*:?\s*[*_]*\s*$",
        )
        .unwrap()
    })
}

fn criterion_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:[-*]\s+)?[*_]*CRITERION\s+([^\s:*_]+)[*_]*\s*:\s*score\s*=\s*([+-]?\d+)\s*\|\s*(.*?)\s*$")
            .unwrap()
    })
}

fn criterion_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:[-*]\s+)?[*_]*CRITERION\b").unwrap())
}

fn total_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)total weighted score\s*:\s*\**\s*([^\s*]+)").unwrap())
}

fn band_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^[\s*-]*classification\s*:\s*\**\s*(.+?)\s*\**\s*$").unwrap())
}

fn normalize_band(label: &str) -> String {
    let head = label.split('(').next().unwrap_or(label);
    let lower = head.trim().to_lowercase();
    lower
        .strip_suffix("offense")
        .unwrap_or(&lower)
        .trim()
        .trim_end_matches(['.', '*'])
        .trim()
        .to_owned()
}

/// Splits a response into its four sections and extracts assessments.
pub fn parse_response(text: &str, schema: &CriteriaSchema) -> Result<ParsedResponse, PromptError> {
    let mut sections: BTreeMap<&'static str, Vec<&str>> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let mut current: Option<&'static str> = None;
    let mut skipping_duplicate = false;

    for line in text.lines() {
        if let Some(caps) = heading_re().captures(line) {
            let found = caps[1].to_uppercase();
            let heading = SECTION_HEADINGS
                .iter()
                .copied()
                .find(|h| *h == found)
                .expect("regex alternatives match the heading list");
            if sections.contains_key(heading) {
                diagnostics.push(format!("duplicate section {heading}, later copy ignored"));
                skipping_duplicate = true;
            } else {
                sections.insert(heading, Vec::new());
                skipping_duplicate = false;
            }
            current = Some(heading);
            continue;
        }
        if let (Some(h), false) = (current, skipping_duplicate) {
            sections.get_mut(h).expect("section opened").push(line);
        }
    }
    if sections.is_empty() {
        return Err(PromptError::Unparseable);
    }
    for heading in SECTION_HEADINGS {
        if !sections.contains_key(heading) {
            diagnostics.push(format!("missing section {heading}"));
        }
    }

    let join = |h: &str| {
        sections
            .get(h)
            .map(|lines| lines.join("\n").trim().to_owned())
            .unwrap_or_default()
    };

    // Criterion lines
    let mut candidates: Vec<CriterionAssessment> = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for line in sections.get(CRITERIA_ANALYSIS).map(Vec::as_slice).unwrap_or_default() {
        let Some(caps) = criterion_re().captures(line) else {
            if criterion_prefix_re().is_match(line) {
                diagnostics.push(format!("malformed criterion line: {}", line.trim()));
            }
            continue;
        };
        let id = caps[1].to_owned();
        let justification = caps[3].to_owned();
        if schema.criterion(&id).is_none() {
            diagnostics.push(format!("{id}: unknown criterion"));
            continue;
        }
        *counts.entry(id.clone()).or_default() += 1;
        match caps[2].parse::<i64>() {
            Ok(score) if (i64::from(MIN_LEVEL)..=i64::from(MAX_LEVEL)).contains(&score) => {
                candidates.push(CriterionAssessment {
                    criterion_id: id,
                    presence: score as u8,
                    justification,
                    evidence_refs: Vec::new(),
                });
            }
            _ => diagnostics.push(format!("{id}: score out of range")),
        }
    }
    let duplicated: HashSet<String> = counts
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(id, _)| id)
        .collect();
    for id in schema.criteria.iter().map(|c| &c.id).filter(|id| duplicated.contains(*id)) {
        diagnostics.push(format!("{id}: assessed more than once, all lines omitted"));
    }
    let assessments: Vec<CriterionAssessment> = candidates
        .into_iter()
        .filter(|a| !duplicated.contains(&a.criterion_id))
        .collect();
    let assessed: HashSet<&str> = assessments.iter().map(|a| a.criterion_id.as_str()).collect();
    for c in &schema.criteria {
        if !assessed.contains(c.id.as_str()) && !duplicated.contains(&c.id) {
            diagnostics.push(format!("{}: missing", c.id));
        }
    }

    // Reported figures, kept only for cross-checking
    let mut reported_total = None;
    let mut reported_band = None;
    for line in sections.get(FINAL_CALCULATION).map(Vec::as_slice).unwrap_or_default() {
        if reported_total.is_none() {
            if let Some(caps) = total_re().captures(line) {
                match caps[1].parse::<Decimal>() {
                    Ok(d) => reported_total = Some(d),
                    Err(_) => diagnostics.push(format!("unparseable reported total {:?}", &caps[1])),
                }
                continue;
            }
        }
        if reported_band.is_none() {
            if let Some(caps) = band_re().captures(line) {
                reported_band = Some(caps[1].to_owned());
            }
        }
    }

    let (mut computed_total, mut computed_band) = (None, None);
    if let Ok(breakdown) = score_assessments(schema, &assessments) {
        if breakdown.complete {
            let total = breakdown.weighted_total;
            computed_total = Some(total);
            if let Some(reported) = reported_total {
                if reported != total {
                    diagnostics.push(format!("reported total {reported} ≠ computed {total}"));
                }
            }
            if let Ok(c) = classify_total(schema, total) {
                if let Some(reported) = &reported_band {
                    if normalize_band(reported) != normalize_band(&c.band_label) {
                        diagnostics.push(format!("reported band {reported} ≠ computed {}", c.band_label));
                    }
                }
                computed_band = Some(c.band_label);
            }
        }
    }

    Ok(ParsedResponse {
        case_summary: join(CASE_SUMMARY),
        assessments,
        reported_total,
        reported_band,
        computed_total,
        computed_band,
        conclusion: join(CONCLUSION),
        diagnostics,
    })
}

/// Builds a grammar-conformant response from a case's own assessments, with
/// the engine's total and band in the final calculation when the case is
/// complete.
pub fn synthesize_response(schema: &CriteriaSchema, case: &CaseFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "1. {CASE_SUMMARY}\n{}\n", case.facts.trim());
    let _ = writeln!(out, "2. {CRITERIA_ANALYSIS}");
    for a in &case.assessments {
        let justification = a.justification.split_whitespace().collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "CRITERION {}: score={} | {}", a.criterion_id, a.presence, justification);
    }
    let _ = writeln!(out, "\n3. {FINAL_CALCULATION}");
    if let Ok(b) = score_assessments(schema, &case.assessments) {
        if b.complete {
            let _ = writeln!(out, "Total weighted score: {} points", b.weighted_total);
            if let Ok(c) = classify_total(schema, b.weighted_total) {
                let _ = writeln!(out, "Classification: {}", c.band_label);
            }
        }
    }
    let _ = writeln!(out, "\n4. {CONCLUSION}\nSynthesized from case {}.", case.case_id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{default_clt_schema, ClassificationBand, CriterionSpec, Logic};
    use crate::testing::{case_with_severities, uniform_case};
    use proptest::prelude::*;
    use rust_decimal_macros::dec;

    #[test]
    fn prompt_contains_table_row() {
        let p = render_prompt(&default_clt_schema(), "Worker lost two fingers in a press.").unwrap();
        assert!(p.rendered.contains("\nIII - Possibility of recovery & 2.5 & Inverse\n"));
        assert!(p.rendered.contains("\nIX - Effort to mitigate & 0.8 & Inverse\n"));
        assert!(p.rendered.contains("- 69+ points: VERY SEVERE (up to 50× victim's monthly salary)"));
        assert!(p.rendered.contains("- 15 to under 33 points: MILD (up to 3× victim's monthly salary)"));
        assert!(p.rendered.contains("You are the Soppia legal assistant"));
        assert!(p.rendered.contains("CRITERION <id>: score=<1-5> | "));
        assert_eq!(p.instruction_list.len(), 6);
        assert!(p.instruction_list[1].contains("stating the logic (direct or inverse)"));
        assert!(p.instruction_list[4].contains("Suggest a compensation range"));
    }

    #[test]
    fn prompt_is_deterministic() {
        let s = default_clt_schema();
        assert_eq!(render_prompt(&s, "facts").unwrap(), render_prompt(&s, "facts").unwrap());
    }

    #[test]
    fn empty_facts_rejected() {
        assert_eq!(render_prompt(&default_clt_schema(), "  \n"), Err(PromptError::EmptyFacts));
    }

    #[test]
    fn custom_schema_table_rows() {
        let crit = |id: &str| CriterionSpec {
            id: id.into(),
            name: format!("Factor {id}"),
            description: String::new(),
            logic: Logic::Direct,
            weight: dec!(1),
            level_anchors: None,
        };
        let schema = CriteriaSchema {
            schema_id: "consumer".into(),
            version: "0.1".into(),
            jurisdiction: "XX".into(),
            baseline_label: "minimum wage".into(),
            criteria: vec![crit("A"), crit("B"), crit("C")],
            bands: vec![
                ClassificationBand { label: "Low".into(), score_lo: dec!(3), score_hi: Some(dec!(9)), multiplier_cap: dec!(2) },
                ClassificationBand { label: "High".into(), score_lo: dec!(9), score_hi: None, multiplier_cap: dec!(10) },
            ],
        };
        let p = render_prompt(&schema, "facts").unwrap();
        let rows = p.criteria_table_block.lines().filter(|l| l.contains(" & ")).count();
        assert_eq!(rows, 1 + 3); // header + criteria
    }

    #[test]
    fn well_formed_response() {
        let s = default_clt_schema();
        let case = uniform_case(&s, 3);
        let parsed = parse_response(&synthesize_response(&s, &case), &s).unwrap();
        assert_eq!(parsed.assessments.len(), 12);
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        assert_eq!(parsed.reported_total, Some(dec!(43.8)));
        assert_eq!(parsed.computed_total, Some(dec!(43.8)));
        assert_eq!(parsed.computed_band.as_deref(), Some("Medium"));
    }

    #[test]
    fn out_of_range_score() {
        let s = default_clt_schema();
        let text = synthesize_response(&s, &uniform_case(&s, 3)).replace("CRITERION II: score=3", "CRITERION II: score=7");
        let parsed = parse_response(&text, &s).unwrap();
        assert!(parsed.diagnostics.contains(&"II: score out of range".to_string()));
        assert_eq!(parsed.assessments.len(), 11);
        assert!(parsed.assessments.iter().all(|a| a.criterion_id != "II"));
        assert_eq!(parsed.computed_total, None);
    }

    #[test]
    fn wrong_reported_total() {
        let s = default_clt_schema();
        let text = synthesize_response(&s, &uniform_case(&s, 3))
            .replace("Total weighted score: 43.8 points", "Total weighted score: 40 points");
        let parsed = parse_response(&text, &s).unwrap();
        assert_eq!(parsed.reported_total, Some(dec!(40)));
        assert_eq!(parsed.computed_total, Some(dec!(43.8)));
        assert_eq!(parsed.diagnostics, vec!["reported total 40 ≠ computed 43.8".to_string()]);
    }

    #[test]
    fn wrong_reported_band() {
        let s = default_clt_schema();
        let text = synthesize_response(&s, &uniform_case(&s, 3))
            .replace("Classification: Medium", "Classification: SEVERE Offense (up to 20× salary)");
        let parsed = parse_response(&text, &s).unwrap();
        assert_eq!(
            parsed.diagnostics,
            vec!["reported band SEVERE Offense (up to 20× salary) ≠ computed Medium".to_string()]
        );
        let text = synthesize_response(&s, &uniform_case(&s, 3))
            .replace("Classification: Medium", "Classification: **MEDIUM Offense**");
        assert!(parse_response(&text, &s).unwrap().diagnostics.is_empty());
    }

    #[test]
    fn unknown_duplicate_missing_malformed() {
        let s = default_clt_schema();
        let text = "## 1. CASE SUMMARY\nFacts.\n## 2. CRITERIA ANALYSIS\n\
                    CRITERION I: score=4 | ok\n\
                    CRITERION I: score=2 | again\n\
                    CRITERION XIII: score=2 | no such\n\
                    CRITERION II score 3\n\
                    - **CRITERION III**: score=1 | nothing done\n";
        let parsed = parse_response(text, &s).unwrap();
        let d = &parsed.diagnostics;
        assert!(d.contains(&"missing section FINAL CALCULATION".to_string()));
        assert!(d.contains(&"missing section CONCLUSION".to_string()));
        assert!(d.contains(&"XIII: unknown criterion".to_string()));
        assert!(d.contains(&"malformed criterion line: CRITERION II score 3".to_string()));
        assert!(d.contains(&"I: assessed more than once, all lines omitted".to_string()));
        assert!(d.contains(&"XII: missing".to_string()));
        assert!(!d.contains(&"I: missing".to_string()));
        assert_eq!(parsed.assessments.len(), 1);
        assert_eq!(parsed.assessments[0].criterion_id, "III");
        assert_eq!(parsed.assessments[0].presence, 1);
        assert_eq!(parsed.case_summary, "Facts.");
    }

    #[test]
    fn no_headings_is_unparseable() {
        assert_eq!(
            parse_response("The damage is severe.", &default_clt_schema()),
            Err(PromptError::Unparseable)
        );
    }

    #[test]
    fn decorated_headings_accepted() {
        let s = default_clt_schema();
        let text = "**1. CASE SUMMARY**\nx\n### Criteria Analysis:\nCRITERION I: score=2 | y\n";
        let parsed = parse_response(text, &s).unwrap();
        assert_eq!(parsed.case_summary, "x");
        assert_eq!(parsed.assessments.len(), 1);
    }

    fn justification() -> impl Strategy<Value = String> {
        "[A-Za-z0-9 ,.;()|=-]{0,40}".prop_map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
    }

    proptest! {
        #[test]
        fn round_trip(sev in prop::collection::vec(1u8..=5, 12), notes in prop::collection::vec(justification(), 12), rot in 0usize..12) {
            let s = default_clt_schema();
            let mut case = case_with_severities(&s, &sev);
            for (a, j) in case.assessments.iter_mut().zip(notes) {
                a.justification = j;
            }
            case.assessments.rotate_left(rot);
            let text = synthesize_response(&s, &case);
            let parsed = parse_response(&text, &s).unwrap();
            prop_assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
            prop_assert_eq!(&parsed.assessments, &case.assessments);
        }

        #[test]
        fn parser_never_invents_scores(score in 0i64..12, id in prop::sample::select(vec!["I", "V", "IX", "XII"])) {
            let s = default_clt_schema();
            let text = format!("CRITERIA ANALYSIS\nCRITERION {id}: score={score} | x\n");
            let parsed = parse_response(&text, &s).unwrap();
            for a in &parsed.assessments {
                let needle = format!("score={}", a.presence);
                prop_assert!(text.contains(&needle));
            }
            prop_assert_eq!(parsed.assessments.len(), usize::from((1..=5).contains(&score)));
        }
    }
}

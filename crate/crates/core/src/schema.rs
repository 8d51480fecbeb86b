//! Criteria schemas: the configurable part of the engine.
//!
//! A schema is an ordered list of weighted criteria plus the score bands used
//! for classification. The built-in default is the twelve-criterion CLT
//! Art. 223-G schema; any other framework can be loaded from a JSON document.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a higher presence of the factor aggravates (direct) or mitigates
/// (inverse) the damage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Logic {
    Direct,
    Inverse,
}

impl Logic {
    pub fn as_str(self) -> &'static str {
        match self {
            Logic::Direct => "direct",
            Logic::Inverse => "inverse",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Logic::Direct => "Direct",
            Logic::Inverse => "Inverse",
        }
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: String,
    pub name: String,
    pub description: String,
    pub logic: Logic,
    pub weight: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_anchors: Option<BTreeMap<u8, String>>,
}

/// A half-open score interval `[score_lo, score_hi)` mapped to a compensation
/// cap expressed as a multiple of the schema's baseline. `score_hi = None`
/// means the band is unbounded above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationBand {
    pub label: String,
    pub score_lo: Decimal,
    pub score_hi: Option<Decimal>,
    pub multiplier_cap: Decimal,
}

impl ClassificationBand {
    pub fn contains(&self, total: Decimal) -> bool {
        total >= self.score_lo && self.score_hi.is_none_or(|hi| total < hi)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CriteriaSchema {
    pub schema_id: String,
    pub version: String,
    pub jurisdiction: String,
    pub baseline_label: String,
    pub criteria: Vec<CriterionSpec>,
    pub bands: Vec<ClassificationBand>,
}

// Serialized form carries the derived totals for consumers; they are ignored
// on load and always recomputed.
#[derive(Serialize)]
struct SchemaOut<'a> {
    schema_id: &'a str,
    version: &'a str,
    jurisdiction: &'a str,
    baseline_label: &'a str,
    criteria: &'a [CriterionSpec],
    bands: &'a [ClassificationBand],
    min_total: Decimal,
    max_total: Decimal,
}

impl Serialize for CriteriaSchema {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SchemaOut {
            schema_id: &self.schema_id,
            version: &self.version,
            jurisdiction: &self.jurisdiction,
            baseline_label: &self.baseline_label,
            criteria: &self.criteria,
            bands: &self.bands,
            min_total: self.min_total(),
            max_total: self.max_total(),
        }
        .serialize(serializer)
    }
}

impl CriteriaSchema {
    pub fn weight_sum(&self) -> Decimal {
        self.criteria.iter().map(|c| c.weight).sum()
    }

    /// Total when every criterion sits at severity 1.
    pub fn min_total(&self) -> Decimal {
        self.weight_sum()
    }

    /// Total when every criterion sits at severity 5.
    pub fn max_total(&self) -> Decimal {
        Decimal::from(5) * self.weight_sum()
    }

    pub fn criterion(&self, id: &str) -> Option<&CriterionSpec> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.criteria.iter().position(|c| c.id == id)
    }

    pub fn band_index(&self, label: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.label == label)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialization is infallible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    NoCriteria,
    EmptyId,
    DuplicateId,
    NonPositiveWeight,
    InvalidLevelAnchors,
    NoBands,
    EmptyBandInterval,
    BandGap,
    BandOverlap,
    UnboundedInnerBand,
    NonPositiveCap,
    NonIncreasingCap,
    UnreachableTopBand,
    TopBandCeiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid schema: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl SchemaError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            SchemaError::Invalid(v) => v,
            SchemaError::Parse(_) => &[],
        }
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks every schema invariant and reports all violations at once.
pub fn validate_schema(schema: &CriteriaSchema) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    if schema.criteria.is_empty() {
        out.push(Violation::new(NoCriteria, "criteria", "schema has no criteria"));
    }
    let mut seen = HashSet::new();
    for (i, c) in schema.criteria.iter().enumerate() {
        if c.id.trim().is_empty() {
            out.push(Violation::new(EmptyId, format!("criteria[{i}].id"), "empty criterion id"));
            continue;
        }
        if !seen.insert(c.id.as_str()) {
            out.push(Violation::new(
                DuplicateId,
                format!("{}.id", c.id),
                format!("duplicate criterion id {}", c.id),
            ));
        }
        if c.weight <= Decimal::ZERO {
            out.push(Violation::new(
                NonPositiveWeight,
                format!("{}.weight", c.id),
                format!("weight must be positive, got {}", c.weight),
            ));
        }
        if let Some(anchors) = &c.level_anchors {
            let keys: Vec<u8> = anchors.keys().copied().collect();
            if keys != [1, 2, 3, 4, 5] {
                out.push(Violation::new(
                    InvalidLevelAnchors,
                    format!("{}.level_anchors", c.id),
                    "level anchors must cover exactly levels 1..5",
                ));
            }
        }
    }

    if schema.bands.is_empty() {
        out.push(Violation::new(NoBands, "bands", "schema has no classification bands"));
        return out;
    }
    let last = schema.bands.len() - 1;
    for (i, band) in schema.bands.iter().enumerate() {
        if let Some(hi) = band.score_hi {
            if band.score_lo >= hi {
                out.push(Violation::new(
                    EmptyBandInterval,
                    format!("bands[{i}].score_hi"),
                    format!("band {} has score_lo {} >= score_hi {}", band.label, band.score_lo, hi),
                ));
            }
        }
        if band.multiplier_cap <= Decimal::ZERO {
            out.push(Violation::new(
                NonPositiveCap,
                format!("bands[{i}].multiplier_cap"),
                "multiplier cap must be positive",
            ));
        }
        if i == last {
            continue;
        }
        let next = &schema.bands[i + 1];
        match band.score_hi {
            None => out.push(Violation::new(
                UnboundedInnerBand,
                format!("bands[{i}].score_hi"),
                "only the last band may be unbounded",
            )),
            Some(hi) if hi < next.score_lo => out.push(Violation::new(
                BandGap,
                format!("bands[{}].score_lo", i + 1),
                format!("band gap at {hi}"),
            )),
            Some(hi) if hi > next.score_lo => out.push(Violation::new(
                BandOverlap,
                format!("bands[{}].score_lo", i + 1),
                format!("band overlap at {}", next.score_lo),
            )),
            Some(_) => {}
        }
        if next.multiplier_cap <= band.multiplier_cap {
            out.push(Violation::new(
                NonIncreasingCap,
                format!("bands[{}].multiplier_cap", i + 1),
                "multiplier caps must strictly increase",
            ));
        }
    }

    if !schema.criteria.is_empty() {
        let max_total = schema.max_total();
        let top = &schema.bands[last];
        if max_total < top.score_lo {
            out.push(Violation::new(
                UnreachableTopBand,
                format!("bands[{last}].score_lo"),
                "unreachable top band",
            ));
        }
        if let Some(hi) = top.score_hi {
            if hi <= max_total {
                out.push(Violation::new(
                    TopBandCeiling,
                    format!("bands[{last}].score_hi"),
                    format!("top band ends at {hi} but totals reach {max_total}"),
                ));
            }
        }
    }
    out
}

/// Parses and validates a schema document.
pub fn load_schema(document: &str) -> Result<CriteriaSchema, SchemaError> {
    let schema: CriteriaSchema = serde_json::from_str(document)?;
    let violations = validate_schema(&schema);
    if violations.is_empty() {
        Ok(schema)
    } else {
        Err(SchemaError::Invalid(violations))
    }
}

fn dec(mantissa: i64, scale: u32) -> Decimal {
    Decimal::new(mantissa, scale)
}

/// The CLT Art. 223-G schema: twelve criteria, four bands.
pub fn default_clt_schema() -> CriteriaSchema {
    use Logic::{Direct, Inverse};
    let rows: [(&str, &str, &str, Logic, i64); 12] = [
        ("I", "Nature of the legal interest",
         "Nature of the protected legal interest: how fundamental the infringed right is, such as life, health or dignity.",
         Direct, 15),
        ("II", "Intensity of suffering",
         "Intensity of suffering or humiliation: how much physical or mental pain the victim went through.",
         Direct, 15),
        ("III", "Possibility of recovery",
         "Possibility of physical or psychological recovery: how likely the victim is to get past the harm.",
         Inverse, 25),
        ("IV", "Personal and social repercussions",
         "Personal and social repercussions of the damage: effects on the victim's family, social circle and career.",
         Direct, 10),
        ("V", "Extent and duration of effects",
         "Extent and duration of the effects of the damage: how long the harm lasts, from passing to permanent.",
         Direct, 20),
        ("VI", "Conditions of the offense",
         "Conditions under which the offense occurred: the setting and manner of the harmful act.",
         Direct, 10),
        ("VII", "Degree of intent or fault",
         "Degree of intent or fault: the offender's blameworthiness, from negligence up to deliberate intent.",
         Direct, 12),
        ("VIII", "Spontaneous retraction",
         "Spontaneous retraction: an apology or admission made by the offender of their own accord.",
         Inverse, 6),
        ("IX", "Effort to mitigate",
         "Effort to mitigate the damage: steps the offender took afterwards to help the victim or limit the harm.",
         Inverse, 8),
        ("X", "Forgiveness",
         "Express or tacit forgiveness: forgiveness the victim has given, stated or implied.",
         Inverse, 10),
        ("XI", "Economic situation of the parties",
         "Economic situation of the parties: what the offender can afford and what the victim needs.",
         Direct, 10),
        ("XII", "Publicity of the offense",
         "Degree of publicity of the offense: how widely the harmful act became known.",
         Direct, 5),
    ];
    let criteria = rows
        .into_iter()
        .map(|(id, name, description, logic, tenths)| CriterionSpec {
            id: id.to_owned(),
            name: name.to_owned(),
            description: description.to_owned(),
            logic,
            weight: dec(tenths, 1),
            level_anchors: None,
        })
        .collect();

    let band = |label: &str, lo: i64, hi: Option<i64>, cap: i64| ClassificationBand {
        label: label.to_owned(),
        score_lo: Decimal::from(lo),
        score_hi: hi.map(Decimal::from),
        multiplier_cap: Decimal::from(cap),
    };
    CriteriaSchema {
        schema_id: "clt-art-223-g".to_owned(),
        version: "1.0.0".to_owned(),
        jurisdiction: "BR".to_owned(),
        baseline_label: "victim's monthly salary".to_owned(),
        criteria,
        bands: vec![
            band("Mild", 15, Some(33), 3),
            band("Medium", 33, Some(51), 5),
            band("Severe", 51, Some(69), 20),
            band("Very Severe", 69, None, 50),
        ],
    }
}

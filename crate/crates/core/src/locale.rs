//! Report wording, loaded from locale files.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::classification::Third;
use crate::schema::Logic;

const EN: &str = include_str!("../locales/en.json");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Headings {
    pub case_summary: String,
    pub criteria_analysis: String,
    pub final_calculation: String,
    pub conclusion: String,
}

impl Headings {
    pub fn in_order(&self) -> [&str; 4] {
        [
            &self.case_summary,
            &self.criteria_analysis,
            &self.final_calculation,
            &self.conclusion,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Locale {
    pub language: String,
    #[serde(default)]
    pub jurisdictions: Vec<String>,
    pub title: String,
    pub meta_line: String,
    pub headings: Headings,
    pub criterion_line: String,
    pub no_justification: String,
    pub total_line: String,
    pub classification_line: String,
    pub below_scale_note: String,
    pub compensation_line: String,
    pub recommended_line: String,
    pub conclusion: String,
    pub thirds: BTreeMap<String, String>,
    pub logic: BTreeMap<String, String>,
}

impl Default for Locale {
    fn default() -> Self {
        Self::english()
    }
}

impl Locale {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn english() -> Self {
        Self::from_json(EN).expect("bundled locale parses")
    }

    fn builtin() -> Vec<Locale> {
        vec![Self::english()]
    }

    /// Built-in locale for a language code, falling back to English.
    pub fn for_language(language: &str) -> Self {
        Self::builtin()
            .into_iter()
            .find(|l| l.language == language)
            .unwrap_or_default()
    }

    /// Built-in locale declared for a jurisdiction, falling back to English.
    pub fn for_jurisdiction(jurisdiction: &str) -> Self {
        Self::builtin()
            .into_iter()
            .find(|l| l.jurisdictions.iter().any(|j| j.eq_ignore_ascii_case(jurisdiction)))
            .unwrap_or_default()
    }

    pub fn third(&self, third: Third) -> &str {
        self.thirds.get(third.as_str()).map_or(third.as_str(), String::as_str)
    }

    pub fn logic(&self, logic: Logic) -> &str {
        self.logic.get(logic.as_str()).map_or(logic.as_str(), String::as_str)
    }
}

/// Replaces each `{key}` in `template` with its value.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_owned();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

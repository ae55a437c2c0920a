//! Task 16 (basic induction) ambiguity analysis.
//!
//! Task-16 contexts consist of `X is a <species>.` and `X is <color>.`
//! facts; the question is `What color is X?`. The queried entity's colour
//! must be induced from other entities of the same species. Two signals are
//! computed per sample:
//!
//! * majority rule: ambiguous when the highest colour count among
//!   same-species entities is shared by several colours, or when the label
//!   is not one of the highest-count colours;
//! * multi-support rule: ambiguous when more than one colour has at least
//!   one supporting entity, or when the label is not the unique majority
//!   colour.
//!
//! Each entity's latest species and colour fact is the one that counts.

use std::collections::BTreeMap;

use serde::Serialize;

use super::sample::Sample;
use super::vocab::tokenize;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambiguity {
    Ambiguous,
    Unambiguous,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AmbiguityReport {
    pub id: String,
    pub entity: String,
    pub species: String,
    pub answer: String,
    /// Colour → number of same-species entities with that colour.
    pub color_counts: BTreeMap<String, usize>,
    pub majority_ambiguous: bool,
    pub multi_support: bool,
}

impl AmbiguityReport {
    /// Classification under the majority rule.
    pub fn classification(&self) -> Ambiguity {
        if self.majority_ambiguous {
            Ambiguity::Ambiguous
        } else {
            Ambiguity::Unambiguous
        }
    }
}

pub fn detect_task16_ambiguity(sample: &Sample) -> Result<AmbiguityReport> {
    let grammar = |msg: String| Error::Data(format!("sample {}: {msg}", sample.id));
    let mut species: BTreeMap<String, String> = BTreeMap::new();
    let mut colors: BTreeMap<String, String> = BTreeMap::new();
    for sentence in sample.real_context() {
        let t = tokenize(sentence);
        match t.as_slice() {
            [name, is, article, kind] if is == "is" && (article == "a" || article == "an") => {
                species.insert(name.clone(), kind.clone());
            }
            [name, is, color] if is == "is" => {
                colors.insert(name.clone(), color.clone());
            }
            _ => return Err(grammar(format!("unexpected statement `{sentence}`"))),
        }
    }
    let q = tokenize(&sample.question);
    let entity = match q.as_slice() {
        [what, color, is, name] if what == "what" && color == "color" && is == "is" => name.clone(),
        _ => return Err(grammar(format!("unexpected question `{}`", sample.question))),
    };
    let kind = species
        .get(&entity)
        .cloned()
        .ok_or_else(|| grammar(format!("no species fact for `{entity}`")))?;

    let mut color_counts: BTreeMap<String, usize> = BTreeMap::new();
    for (name, s) in &species {
        if *name == entity || *s != kind {
            continue;
        }
        if let Some(c) = colors.get(name) {
            *color_counts.entry(c.clone()).or_default() += 1;
        }
    }
    let answer = sample.answer.to_lowercase();
    let max = color_counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<&String> = color_counts
        .iter()
        .filter(|(_, &n)| n == max && max > 0)
        .map(|(c, _)| c)
        .collect();
    let label_leads = leaders.iter().any(|c| **c == answer);
    let majority_ambiguous = leaders.len() != 1 || !label_leads;
    let multi_support = color_counts.len() > 1 || majority_ambiguous;

    Ok(AmbiguityReport {
        id: sample.id.clone(),
        entity,
        species: kind,
        answer,
        color_counts,
        majority_ambiguous,
        multi_support,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmbiguitySummary {
    pub analyzed: usize,
    pub grammar_errors: usize,
    pub majority_ambiguous: usize,
    pub multi_support: usize,
}

impl AmbiguitySummary {
    /// `None` when no sample was analyzed.
    pub fn majority_rate(&self) -> Option<f64> {
        (self.analyzed > 0).then(|| self.majority_ambiguous as f64 / self.analyzed as f64)
    }

    pub fn multi_support_rate(&self) -> Option<f64> {
        (self.analyzed > 0).then(|| self.multi_support as f64 / self.analyzed as f64)
    }
}

pub fn summarize_ambiguity(results: &[Result<AmbiguityReport>]) -> AmbiguitySummary {
    let reports: Vec<&AmbiguityReport> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    AmbiguitySummary {
        analyzed: reports.len(),
        grammar_errors: results.len() - reports.len(),
        majority_ambiguous: reports.iter().filter(|r| r.majority_ambiguous).count(),
        multi_support: reports.iter().filter(|r| r.multi_support).count(),
    }
}

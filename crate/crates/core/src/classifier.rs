//! Rule-based query-type classification and effective routing accuracy.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use regex::{RegexSet, RegexSetBuilder};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::router::{QueryType, RouteTable};

pub const DEFAULT_RULES: &str = include_str!("../resources/classifier_rules.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Temporal,
    Assistant,
    Preference,
    Aggregation,
    UserAction,
}

impl Stage {
    pub const ORDER: [Stage; 5] = [
        Stage::Temporal,
        Stage::Assistant,
        Stage::Preference,
        Stage::Aggregation,
        Stage::UserAction,
    ];

    fn header(self) -> &'static str {
        match self {
            Stage::Temporal => "temporal",
            Stage::Assistant => "assistant",
            Stage::Preference => "preference",
            Stage::Aggregation => "aggregation",
            Stage::UserAction => "user-action",
        }
    }

    pub fn query_type(self) -> QueryType {
        match self {
            Stage::Temporal => QueryType::TemporalReasoning,
            Stage::Assistant => QueryType::SingleSessionAssistant,
            Stage::Preference => QueryType::SingleSessionPreference,
            Stage::Aggregation => QueryType::MultiSession,
            Stage::UserAction => QueryType::SingleSessionUser,
        }
    }
}

/// Priority-ordered pattern stages; unmatched queries default to
/// knowledge-update.
#[derive(Debug, Clone)]
pub struct RuleSet {
    stages: Vec<(Stage, RegexSet)>,
}

impl RuleSet {
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_RULES, "<shipped classifier_rules.txt>")
            .expect("shipped rules are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut patterns: Vec<(Stage, Vec<String>)> =
            Stage::ORDER.iter().map(|s| (*s, Vec::new())).collect();
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                msg,
            };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(
                    Stage::ORDER
                        .iter()
                        .position(|s| s.header() == name)
                        .ok_or_else(|| err(format!("unknown stage `{name}`")))?,
                );
                continue;
            }
            let idx = current.ok_or_else(|| err("pattern outside of a stage".into()))?;
            regex::RegexBuilder::new(line)
                .build()
                .map_err(|e| err(format!("bad pattern: {e}")))?;
            patterns[idx].1.push(line.to_owned());
        }
        let stages = patterns
            .into_iter()
            .map(|(stage, pats)| {
                RegexSetBuilder::new(&pats)
                    .case_insensitive(true)
                    .build()
                    .map(|set| (stage, set))
                    .map_err(|e| Error::Config(format!("{origin}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { stages })
    }

    /// The first stage with a matching pattern, if any.
    pub fn matching_stage(&self, text: &str) -> Option<Stage> {
        self.stages
            .iter()
            .find(|(_, set)| set.is_match(text))
            .map(|(stage, _)| *stage)
    }

    pub fn classify(&self, text: &str) -> QueryType {
        self.matching_stage(text)
            .map_or(QueryType::KnowledgeUpdate, Stage::query_type)
    }
}

pub fn classify_query(text: &str, rules: &RuleSet) -> QueryType {
    rules.classify(text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub per_type: BTreeMap<QueryType, TypeAccuracy>,
    pub accuracy: f64,
    pub effective_accuracy: f64,
    /// (gold, predicted) -> count
    #[serde(serialize_with = "confusion_as_list")]
    pub confusion: BTreeMap<(QueryType, QueryType), usize>,
}

fn confusion_as_list<S: serde::Serializer>(
    m: &BTreeMap<(QueryType, QueryType), usize>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|((g, p), n)| (g, p, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeAccuracy {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// A prediction is effectively correct when it equals the gold type or
/// routes to a pipeline in the same family as the gold type's route.
pub fn effective_accuracy(
    gold: &[QueryType],
    predicted: &[QueryType],
    table: &RouteTable,
) -> Result<ClassificationReport> {
    if gold.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let mut correct = 0usize;
    let mut effective = 0usize;
    let mut per_type: BTreeMap<QueryType, (usize, usize)> = BTreeMap::new();
    let mut confusion = BTreeMap::new();
    for (&g, &p) in gold.iter().zip(predicted) {
        let gold_family = table.resolve(g)?.family();
        let pred_family = table.resolve(p)?.family();
        let entry = per_type.entry(g).or_default();
        entry.0 += 1;
        if g == p {
            correct += 1;
            entry.1 += 1;
        }
        if g == p || gold_family == pred_family {
            effective += 1;
        }
        *confusion.entry((g, p)).or_default() += 1;
    }
    let n = gold.len();
    Ok(ClassificationReport {
        n,
        per_type: per_type
            .into_iter()
            .map(|(q, (n, c))| {
                (
                    q,
                    TypeAccuracy {
                        n,
                        correct: c,
                        accuracy: c as f64 / n as f64,
                    },
                )
            })
            .collect(),
        accuracy: correct as f64 / n as f64,
        effective_accuracy: effective as f64 / n as f64,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use QueryType::*;

    #[test]
    fn shipped_examples() {
        let r = RuleSet::shipped();
        assert_eq!(
            r.classify("When did I last visit the dentist?"),
            TemporalReasoning
        );
        assert_eq!(
            r.classify("What did you recommend for my back pain?"),
            SingleSessionAssistant
        );
        assert_eq!(r.classify("xyzzy"), KnowledgeUpdate);
        assert_eq!(
            r.classify("Can you suggest a hotel for my trip?"),
            SingleSessionPreference
        );
        assert_eq!(r.classify("How many books did I buy?"), MultiSession);
        assert_eq!(
            r.classify("What brand of shoes did I get?"),
            SingleSessionUser
        );
    }

    #[test]
    fn earlier_stage_wins() {
        let r = RuleSet::parse("[preference]\nrecommend\n[temporal]\nwhen\n", "t").unwrap();
        assert_eq!(
            r.classify("when would you recommend going"),
            TemporalReasoning
        );
        assert_eq!(r.classify("RECOMMEND something"), SingleSessionPreference);
    }

    #[test]
    fn bad_rules_rejected() {
        assert!(matches!(
            RuleSet::parse("[temporal]\n(unclosed\n", "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(RuleSet::parse("[bogus]\nx\n", "t").is_err());
        assert!(RuleSet::parse("x\n", "t").is_err());
    }

    #[test]
    fn same_family_counts_as_effective() {
        let t = RouteTable::shipped();
        let rep = effective_accuracy(&[KnowledgeUpdate], &[SingleSessionUser], &t).unwrap();
        assert_eq!(rep.accuracy, 0.0);
        assert_eq!(rep.effective_accuracy, 1.0);
        let rep = effective_accuracy(&[KnowledgeUpdate], &[SingleSessionAssistant], &t).unwrap();
        assert_eq!(rep.effective_accuracy, 0.0);
    }

    #[test]
    fn perfect_predictions() {
        let t = RouteTable::shipped();
        let gold = QueryType::RETRIEVAL.to_vec();
        let rep = effective_accuracy(&gold, &gold, &t).unwrap();
        assert_eq!(rep.accuracy, 1.0);
        assert_eq!(rep.effective_accuracy, 1.0);
        assert_eq!(rep.confusion.values().sum::<usize>(), 6);
    }

    #[test]
    fn length_mismatch() {
        let t = RouteTable::shipped();
        assert!(effective_accuracy(&[KnowledgeUpdate], &[], &t).is_err());
    }
}

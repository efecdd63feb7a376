//! LongMemEval-shaped benchmark files.
//!
//! The file is a JSON array of instances:
//!
//! ```json
//! {
//!   "question_id": "q1",                  // suffix "_abs" marks abstention
//!   "question_type": "multi-session",
//!   "question": "...",
//!   "question_date": "2023/05/30 (Tue) 22:10",   // optional
//!   "answer": ...,                              // ignored
//!   "haystack_session_ids": ["s1", ...],
//!   "haystack_dates": ["2023/05/20 (Sat) 02:21", ...],   // optional, parallel
//!   "haystack_sessions": [[{"role": "user", "content": "..."}, ...], ...],
//!   "answer_session_ids": ["s1"]
//! }
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::router::QueryType;

const ABSTENTION_SUFFIX: &str = "_abs";
pub const MAX_GOLD: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub date: Option<String>,
    pub turns: Vec<Turn>,
}

impl Session {
    /// One `role: text` line per turn.
    pub fn content(&self) -> String {
        self.turns
            .iter()
            .map(|t| format!("{}: {}", t.role, t.content))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkInstance {
    pub id: String,
    pub question: String,
    /// `Abstention` for abstention instances.
    pub qtype: QueryType,
    /// The dataset's declared type; equals `qtype` except for abstention.
    pub surface_type: QueryType,
    /// Empty iff abstention.
    pub gold: HashSet<String>,
    pub haystack: Vec<String>,
    pub question_date: Option<String>,
}

impl BenchmarkInstance {
    /// The type used to pick a route under oracle routing.
    pub fn routing_type(&self) -> QueryType {
        self.surface_type
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub instances: Vec<BenchmarkInstance>,
    /// Haystack sessions, parallel to `instances`.
    pub haystacks: Vec<Vec<Session>>,
}

impl Benchmark {
    pub fn retrieval_count(&self) -> usize {
        self.instances
            .iter()
            .filter(|i| i.qtype.is_retrieval())
            .count()
    }

    pub fn abstention_count(&self) -> usize {
        self.instances.len() - self.retrieval_count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawInstance {
    pub question_id: String,
    pub question_type: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_date: Option<String>,
    #[serde(default, skip_serializing)]
    pub answer: serde_json::Value,
    pub haystack_session_ids: Vec<String>,
    #[serde(default)]
    pub haystack_dates: Vec<String>,
    pub haystack_sessions: Vec<Vec<Turn>>,
    pub answer_session_ids: Vec<String>,
}

fn schema(instance: &str, field: &str, msg: impl Into<String>) -> Error {
    Error::Schema {
        instance: instance.to_owned(),
        field: field.to_owned(),
        msg: msg.into(),
    }
}

impl RawInstance {
    fn validate(self) -> Result<(BenchmarkInstance, Vec<Session>)> {
        let id = self.question_id;
        let surface_type: QueryType = self.question_type.parse().map_err(|_| {
            schema(
                &id,
                "question_type",
                format!("unknown type `{}`", self.question_type),
            )
        })?;
        if surface_type == QueryType::Abstention {
            return Err(schema(
                &id,
                "question_type",
                "abstention is marked by the id suffix",
            ));
        }
        let n = self.haystack_session_ids.len();
        if self.haystack_sessions.len() != n {
            return Err(schema(
                &id,
                "haystack_sessions",
                format!(
                    "{} sessions for {n} session ids",
                    self.haystack_sessions.len()
                ),
            ));
        }
        if !self.haystack_dates.is_empty() && self.haystack_dates.len() != n {
            return Err(schema(
                &id,
                "haystack_dates",
                format!("{} dates for {n} sessions", self.haystack_dates.len()),
            ));
        }
        let mut seen = HashSet::with_capacity(n);
        for sid in &self.haystack_session_ids {
            if !seen.insert(sid.as_str()) {
                return Err(Error::Data(format!(
                    "instance `{id}`: session `{sid}` appears twice in haystack"
                )));
            }
        }
        let abstention = id.ends_with(ABSTENTION_SUFFIX);
        let gold: HashSet<String> = if abstention {
            HashSet::new()
        } else {
            self.answer_session_ids.into_iter().collect()
        };
        if !abstention {
            if gold.is_empty() || gold.len() > MAX_GOLD {
                return Err(Error::Data(format!(
                    "instance `{id}` has {} gold sessions (expected 1..={MAX_GOLD})",
                    gold.len()
                )));
            }
            if let Some(g) = gold.iter().find(|g| !seen.contains(g.as_str())) {
                return Err(Error::Data(format!(
                    "instance `{id}`: gold session `{g}` is not in the haystack"
                )));
            }
        }
        let mut dates = self.haystack_dates.into_iter();
        let sessions = self
            .haystack_session_ids
            .iter()
            .zip(self.haystack_sessions)
            .map(|(sid, turns)| Session {
                id: sid.clone(),
                date: dates.next(),
                turns,
            })
            .collect();
        let instance = BenchmarkInstance {
            qtype: if abstention {
                QueryType::Abstention
            } else {
                surface_type
            },
            surface_type,
            gold,
            haystack: self.haystack_session_ids,
            question: self.question,
            question_date: self.question_date,
            id,
        };
        Ok((instance, sessions))
    }

    pub fn from_parts(instance: &BenchmarkInstance, sessions: &[Session]) -> Self {
        let mut gold: Vec<String> = instance.gold.iter().cloned().collect();
        gold.sort();
        Self {
            question_id: instance.id.clone(),
            question_type: instance.surface_type.as_str().to_owned(),
            question: instance.question.clone(),
            question_date: instance.question_date.clone(),
            answer: serde_json::Value::Null,
            haystack_session_ids: sessions.iter().map(|s| s.id.clone()).collect(),
            haystack_dates: sessions.iter().filter_map(|s| s.date.clone()).collect(),
            haystack_sessions: sessions.iter().map(|s| s.turns.clone()).collect(),
            answer_session_ids: gold,
        }
    }
}

pub fn parse_benchmark(text: &str) -> Result<Benchmark> {
    let raw: Vec<RawInstance> = {
        let de = &mut serde_json::Deserializer::from_str(text);
        match serde_path_to_error::deserialize(de) {
            Ok(v) => v,
            Err(err) => return Err(locate_schema_error(text, err)),
        }
    };
    let mut instances = Vec::with_capacity(raw.len());
    let mut haystacks = Vec::with_capacity(raw.len());
    let mut ids = HashSet::new();
    for r in raw {
        if !ids.insert(r.question_id.clone()) {
            return Err(Error::Data(format!(
                "duplicate question_id `{}`",
                r.question_id
            )));
        }
        let (inst, sessions) = r.validate()?;
        instances.push(inst);
        haystacks.push(sessions);
    }
    Ok(Benchmark {
        instances,
        haystacks,
    })
}

/// Names the instance whose field failed to deserialize.
fn locate_schema_error(text: &str, err: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = err.path().to_string();
    let index = path
        .strip_prefix('[')
        .and_then(|p| p.split(']').next())
        .and_then(|i| i.parse::<usize>().ok());
    let instance = index
        .and_then(|i| {
            let all: serde_json::Value = serde_json::from_str(text).ok()?;
            all.get(i)?.get("question_id")?.as_str().map(str::to_owned)
        })
        .or_else(|| index.map(|i| format!("#{i}")))
        .unwrap_or_else(|| "<file>".into());
    schema(&instance, &path, err.into_inner().to_string())
}

pub fn load_benchmark(path: &Path) -> Result<Benchmark> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_benchmark(&text)
}

pub fn write_benchmark(path: &Path, bench: &Benchmark) -> Result<()> {
    let raw: Vec<RawInstance> = bench
        .instances
        .iter()
        .zip(&bench.haystacks)
        .map(|(i, s)| RawInstance::from_parts(i, s))
        .collect();
    let text = serde_json::to_string_pretty(&raw).expect("benchmark serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

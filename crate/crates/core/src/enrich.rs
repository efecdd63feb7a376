//! Storage-time vocabulary enrichment for the lexical index.
//!
//! Three rule kinds expand a session's vocabulary: hypernym maps
//! (specific term to broader terms), action bridges (verb forms that
//! queries and content phrase differently) and topic rooms (terms added
//! when a set of triggers co-occurs). The output is appended to the text
//! fed to the enriched lexical index and never to embedding input.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tokenize::{is_single_token, tokenize};

/// The shipped V2 vocabulary.
pub const DEFAULT_VOCABULARY: &str = include_str!("../resources/vocab_v2.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicRoom {
    pub name: String,
    /// Alternative trigger sets; a room fires when every term of any one
    /// set occurs in the content.
    pub trigger_sets: Vec<Vec<String>>,
    pub added_terms: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub version: String,
    pub hypernyms: HashMap<String, Vec<String>>,
    pub bridges: HashMap<String, Vec<String>>,
    pub rooms: Vec<TopicRoom>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Hypernyms,
    Bridges,
    Rooms,
}

fn split_terms(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

impl Vocabulary {
    pub fn empty() -> Self {
        Self {
            version: "none".into(),
            ..Self::default()
        }
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_VOCABULARY, "<shipped vocab_v2.txt>")
            .expect("shipped vocabulary is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates the line-oriented vocabulary format.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut vocab = Self::empty();
        let mut section = Section::None;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_owned(),
            line,
            msg,
        };
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("@version") {
                let v = v.trim();
                if v.is_empty() {
                    return Err(parse_err(lineno, "missing version label".into()));
                }
                vocab.version = v.to_owned();
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[hypernyms]" => Section::Hypernyms,
                    "[bridges]" => Section::Bridges,
                    "[rooms]" => Section::Rooms,
                    _ => return Err(parse_err(lineno, format!("unknown section {line}"))),
                };
                continue;
            }
            match section {
                Section::None => {
                    return Err(parse_err(lineno, "rule outside of a section".into()));
                }
                Section::Hypernyms | Section::Bridges => {
                    let (trigger, rest) = line.split_once("->").ok_or_else(|| {
                        parse_err(lineno, "expected `trigger -> term, ...`".into())
                    })?;
                    let trigger = trigger.trim().to_owned();
                    let expansions = split_terms(rest);
                    validate_map_entry(&trigger, &expansions)?;
                    let map = if section == Section::Hypernyms {
                        &mut vocab.hypernyms
                    } else {
                        &mut vocab.bridges
                    };
                    if map.insert(trigger.clone(), expansions).is_some() {
                        return Err(Error::Vocabulary {
                            entry: trigger,
                            msg: "trigger defined twice in one section".into(),
                        });
                    }
                }
                Section::Rooms => {
                    let parts: Vec<_> = line.split('|').collect();
                    let [name, triggers, terms] = parts.as_slice() else {
                        return Err(parse_err(
                            lineno,
                            "expected `room | trigger, ... | term, ...`".into(),
                        ));
                    };
                    let name = name.trim().to_owned();
                    let triggers = split_terms(triggers);
                    let terms = split_terms(terms);
                    validate_room(&name, &triggers, &terms)?;
                    match vocab.rooms.iter_mut().find(|r| r.name == name) {
                        Some(room) => {
                            room.trigger_sets.push(triggers);
                            for t in terms {
                                if !room.added_terms.contains(&t) {
                                    room.added_terms.push(t);
                                }
                            }
                        }
                        None => vocab.rooms.push(TopicRoom {
                            name,
                            trigger_sets: vec![triggers],
                            added_terms: terms,
                        }),
                    }
                }
            }
        }
        Ok(vocab)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.hypernyms.len(), self.bridges.len(), self.rooms.len())
    }

    pub fn is_empty(&self) -> bool {
        self.counts() == (0, 0, 0)
    }

    /// Every term this vocabulary can emit.
    pub fn output_terms(&self) -> HashSet<&str> {
        self.hypernyms
            .values()
            .chain(self.bridges.values())
            .flatten()
            .chain(
                self.rooms
                    .iter()
                    .flat_map(|r| std::iter::once(&r.name).chain(&r.added_terms)),
            )
            .map(String::as_str)
            .collect()
    }
}

fn check_token(entry: &str, term: &str) -> Result<()> {
    if is_single_token(term) {
        Ok(())
    } else {
        Err(Error::Vocabulary {
            entry: entry.to_owned(),
            msg: format!("`{term}` is not a single normalized token"),
        })
    }
}

fn validate_map_entry(trigger: &str, expansions: &[String]) -> Result<()> {
    check_token(trigger, trigger)?;
    if expansions.is_empty() {
        return Err(Error::Vocabulary {
            entry: trigger.to_owned(),
            msg: "no expansions".into(),
        });
    }
    if expansions.len() == 1 && expansions[0] == trigger {
        return Err(Error::Vocabulary {
            entry: trigger.to_owned(),
            msg: "maps only to itself".into(),
        });
    }
    expansions.iter().try_for_each(|e| check_token(trigger, e))
}

fn validate_room(name: &str, triggers: &[String], terms: &[String]) -> Result<()> {
    check_token(name, name)?;
    if triggers.len() < 2 {
        return Err(Error::Vocabulary {
            entry: name.to_owned(),
            msg: "a room needs at least two co-occurring triggers".into(),
        });
    }
    if terms.is_empty() {
        return Err(Error::Vocabulary {
            entry: name.to_owned(),
            msg: "no added terms".into(),
        });
    }
    triggers
        .iter()
        .chain(terms)
        .try_for_each(|t| check_token(name, t))
}

/// Returns the enrichment text for `content` (the appended terms only).
///
/// Hypernym expansions come first in content-token order, then bridge
/// terms, then each firing room's name followed by its terms, in file
/// order. Duplicates keep their first position.
pub fn enrich(content: &str, vocab: &Vocabulary) -> String {
    let tokens = tokenize(content);
    let present: HashSet<&str> = tokens.iter().map(String::as_str).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut out: Vec<&str> = Vec::new();
    for map in [&vocab.hypernyms, &vocab.bridges] {
        for tok in &tokens {
            for t in map.get(tok).into_iter().flatten() {
                if seen.insert(t) {
                    out.push(t);
                }
            }
        }
    }
    for room in &vocab.rooms {
        let fires = room
            .trigger_sets
            .iter()
            .any(|set| set.iter().all(|t| present.contains(t.as_str())));
        if fires {
            for t in std::iter::once(&room.name).chain(&room.added_terms) {
                if seen.insert(t) {
                    out.push(t);
                }
            }
        }
    }
    out.join(" ")
}

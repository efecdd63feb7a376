//! Inverted index with BM25 ranking.
//!
//! Scoring uses the non-negative IDF form
//! `ln(1 + (N - df + 0.5) / (df + 0.5))` and the usual saturation and
//! length-normalisation terms. Ties break by ascending doc id; documents
//! scoring zero are never returned.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{len_u32, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::ranked::{RankedList, ScoredDoc};
use crate::tokenize::tokenize;

const MAGIC: &[u8; 8] = b"MRLEXIDX";
pub const LEXICAL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 >= 0.0 && k1.is_finite()) || !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidArgument(format!(
                "BM25 parameters out of range: k1={k1}, b={b}"
            )));
        }
        Ok(Self { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexicalIndex {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    postings: HashMap<String, Vec<Posting>>,
    total_length: u64,
}

impl LexicalIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, doc_id: &str, text: &str) -> Result<()> {
        if self.doc_lookup.contains_key(doc_id) {
            return Err(Error::DuplicateDoc(doc_id.to_owned()));
        }
        let ordinal = len_u32(self.doc_ids.len());
        let tokens = tokenize(text);
        // Postings stay sorted by ordinal because ordinals only grow.
        let mut counts: HashMap<String, u32> = HashMap::new();
        for tok in &tokens {
            *counts.entry(tok.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            self.postings
                .entry(term)
                .or_default()
                .push(Posting { doc: ordinal, tf });
        }
        self.doc_ids.push(doc_id.to_owned());
        self.doc_lookup.insert(doc_id.to_owned(), ordinal);
        self.doc_lengths.push(len_u32(tokens.len()));
        self.total_length += tokens.len() as u64;
        Ok(())
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avg_doc_length(&self) -> f64 {
        if self.doc_ids.is_empty() {
            0.0
        } else {
            self.total_length as f64 / self.doc_ids.len() as f64
        }
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup
            .get(doc_id)
            .map(|&o| self.doc_lengths[o as usize])
    }

    pub fn term_frequency(&self, term: &str, doc_id: &str) -> u32 {
        let Some(&ordinal) = self.doc_lookup.get(doc_id) else {
            return 0;
        };
        self.postings
            .get(term)
            .and_then(|p| p.iter().find(|p| p.doc == ordinal))
            .map_or(0, |p| p.tf)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_ids.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn search(&self, query: &str, k: usize, params: Bm25Params) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut scores = vec![0.0f64; self.doc_ids.len()];
        let mut touched = vec![false; self.doc_ids.len()];
        let avgdl = self.avg_doc_length();
        for term in tokenize(query) {
            let Some(postings) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for p in postings {
                let tf = f64::from(p.tf);
                let dl = f64::from(self.doc_lengths[p.doc as usize]);
                let norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
                scores[p.doc as usize] += idf * tf * (params.k1 + 1.0) / (tf + norm);
                touched[p.doc as usize] = true;
            }
        }
        let hits = scores
            .iter()
            .zip(&touched)
            .enumerate()
            .filter(|(_, (&s, &t))| t && s > 0.0)
            .map(|(i, (&score, _))| ScoredDoc {
                id: self.doc_ids[i].clone(),
                score,
            })
            .collect();
        Ok(RankedList::from_unsorted("bm25", hits, k))
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::default();
        enc.u32(len_u32(self.doc_ids.len()));
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            enc.str(id);
            enc.u32(*len);
        }
        let mut terms: Vec<_> = self.postings.iter().collect();
        terms.sort_by(|a, b| a.0.cmp(b.0));
        enc.u32(len_u32(terms.len()));
        for (term, postings) in terms {
            enc.str(term);
            enc.u32(len_u32(postings.len()));
            for p in postings {
                enc.u32(p.doc);
                enc.u32(p.tf);
            }
        }
        enc.finish(MAGIC, LEXICAL_FORMAT_VERSION)
    }

    pub(crate) fn decode(path: &Path, data: &[u8]) -> Result<Self> {
        let mut dec = Decoder::open(path, data, MAGIC, LEXICAL_FORMAT_VERSION)?;
        let mut index = LexicalIndex::new();
        let n_docs = dec.u32()? as usize;
        for ordinal in 0..n_docs {
            let id = dec.str()?;
            let len = dec.u32()?;
            if index
                .doc_lookup
                .insert(id.clone(), len_u32(ordinal))
                .is_some()
            {
                return Err(dec.corrupt(format!("duplicate doc id `{id}`")));
            }
            index.doc_ids.push(id);
            index.doc_lengths.push(len);
            index.total_length += u64::from(len);
        }
        let n_terms = dec.u32()? as usize;
        for _ in 0..n_terms {
            let term = dec.str()?;
            let n = dec.u32()? as usize;
            let mut postings = Vec::with_capacity(n.min(n_docs));
            for _ in 0..n {
                let doc = dec.u32()?;
                let tf = dec.u32()?;
                if doc as usize >= n_docs || tf == 0 {
                    return Err(dec.corrupt(format!("bad posting for `{term}`")));
                }
                postings.push(Posting { doc, tf });
            }
            index.postings.insert(term, postings);
        }
        dec.finish()?;
        Ok(index)
    }
}

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::Serialize;

use crate::benchmark::BenchmarkInstance;
use crate::error::{Error, Result};
use crate::eval::metrics::{ndcg_at_k, recall_all_at_k};
use crate::ranked::RankedList;
use crate::router::QueryType;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScore {
    pub id: String,
    pub qtype: QueryType,
    pub recall_all: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeScores {
    pub n: usize,
    pub recall_all: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub n: usize,
    /// Macro averages over every instance, abstention included.
    pub recall_all: f64,
    pub ndcg: f64,
    /// Retrieval types only.
    pub per_type: BTreeMap<QueryType, TypeScores>,
    pub per_instance: Vec<InstanceScore>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate_run(
    instances: &[BenchmarkInstance],
    results: &HashMap<String, RankedList>,
    k: usize,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let missing: Vec<_> = instances
        .iter()
        .filter(|i| !results.contains_key(&i.id))
        .map(|i| i.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Evaluation(format!(
            "no result for {} instance(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let per_instance: Vec<_> = instances
        .iter()
        .map(|inst| {
            let r = &results[&inst.id];
            InstanceScore {
                id: inst.id.clone(),
                qtype: inst.qtype,
                recall_all: recall_all_at_k(r, &inst.gold, k),
                ndcg: ndcg_at_k(r, &inst.gold, k),
            }
        })
        .collect();
    let mut per_type = BTreeMap::new();
    for qtype in QueryType::RETRIEVAL {
        let of_type: Vec<_> = per_instance.iter().filter(|s| s.qtype == qtype).collect();
        if !of_type.is_empty() {
            per_type.insert(
                qtype,
                TypeScores {
                    n: of_type.len(),
                    recall_all: mean(of_type.iter().map(|s| s.recall_all)),
                    ndcg: mean(of_type.iter().map(|s| s.ndcg)),
                },
            );
        }
    }
    Ok(EvalReport {
        k,
        n: per_instance.len(),
        recall_all: mean(per_instance.iter().map(|s| s.recall_all)),
        ndcg: mean(per_instance.iter().map(|s| s.ndcg)),
        per_type,
        per_instance,
    })
}

impl EvalReport {
    pub fn recall_scores(&self) -> Vec<f64> {
        self.per_instance.iter().map(|s| s.recall_all).collect()
    }

    pub fn ndcg_scores(&self) -> Vec<f64> {
        self.per_instance.iter().map(|s| s.ndcg).collect()
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let k = self.k;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>5} {:>8} {:>8}",
            "type",
            "n",
            format!("Ra@{k}"),
            format!("NDCG@{k}")
        );
        for (q, s) in &self.per_type {
            let _ = writeln!(
                out,
                "{:<28} {:>5} {:>8.3} {:>8.3}",
                q.as_str(),
                s.n,
                s.recall_all,
                s.ndcg
            );
        }
        let _ = writeln!(
            out,
            "{:<28} {:>5} {:>8.3} {:>8.3}",
            "all (macro)", self.n, self.recall_all, self.ndcg
        );
        out
    }
}

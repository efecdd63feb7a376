//! Stratified k-fold cross-validation of route-table derivation.
//!
//! Within each query type, instance ids are sorted, shuffled with a
//! seeded ChaCha8 stream, and dealt round-robin to folds. The dealing
//! position carries over from one type to the next, so per-type fold
//! sizes differ by at most one and so do overall fold sizes.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::router::{derive_route_table, Metric, Pipeline, PipelineScores, QueryType, RouteTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Splits retrieval instances (abstention entries are ignored).
pub fn stratified_kfold(items: &[(&str, QueryType)], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned: Vec<Vec<String>> = vec![Vec::new(); folds];
    let mut next = 0usize;
    for qtype in QueryType::RETRIEVAL {
        let mut ids: Vec<&str> = items
            .iter()
            .filter(|(_, q)| *q == qtype)
            .map(|(id, _)| *id)
            .collect();
        if ids.len() < folds {
            return Err(Error::Evaluation(format!(
                "type {qtype} has {} instances, fewer than {folds} folds",
                ids.len()
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids {
            assigned[next].push(id.to_owned());
            next = (next + 1) % folds;
        }
    }
    Ok((0..folds)
        .map(|f| Fold {
            test: assigned[f].clone(),
            train: assigned
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, ids)| ids.iter().cloned())
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_size: usize,
    pub recall_all: f64,
    pub ndcg: f64,
    pub table: RouteTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteStability {
    pub modal: Pipeline,
    pub agreeing: usize,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Mean and sample (n - 1) standard deviation of held-out Ra@k.
    pub mean: f64,
    pub std: f64,
    pub full_data_recall_all: f64,
    pub full_data_table: RouteTable,
    pub stability: BTreeMap<QueryType, RouteStability>,
}

fn routed_mean(scores: &[&PipelineScores], table: &RouteTable, metric: Metric) -> f64 {
    let sum: f64 = scores
        .iter()
        .map(|s| s.score(table.routes[&s.qtype], metric))
        .sum();
    sum / scores.len() as f64
}

pub fn cross_validate(
    scores: &[PipelineScores],
    folds: usize,
    seed: u64,
    candidates: &[Pipeline],
    derive_metric: Metric,
) -> Result<CvReport> {
    let retrieval: Vec<&PipelineScores> =
        scores.iter().filter(|s| s.qtype.is_retrieval()).collect();
    let keyed: Vec<(&str, QueryType)> =
        retrieval.iter().map(|s| (s.id.as_str(), s.qtype)).collect();
    let splits = stratified_kfold(&keyed, folds, seed)?;

    let mut results = Vec::with_capacity(folds);
    for (f, split) in splits.iter().enumerate() {
        let train_ids: HashSet<&str> = split.train.iter().map(String::as_str).collect();
        let (train, test): (Vec<&PipelineScores>, Vec<&PipelineScores>) = retrieval
            .iter()
            .copied()
            .partition(|s| train_ids.contains(s.id.as_str()));
        let table = derive_route_table(
            &train,
            candidates,
            derive_metric,
            format!("derived-fold-{f}"),
        )?;
        results.push(FoldResult {
            fold: f,
            test_size: test.len(),
            recall_all: routed_mean(&test, &table, Metric::Recall),
            ndcg: routed_mean(&test, &table, Metric::Ndcg),
            table,
        });
    }

    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.recall_all).sum::<f64>() / n;
    let var = results
        .iter()
        .map(|r| (r.recall_all - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);

    let full_data_table =
        derive_route_table(&retrieval, candidates, derive_metric, "derived-full")?;
    let full_data_recall_all = routed_mean(&retrieval, &full_data_table, Metric::Recall);

    let stability = QueryType::RETRIEVAL
        .iter()
        .map(|&q| {
            let mut counts = [0usize; 5];
            for r in &results {
                counts[r.table.routes[&q].index()] += 1;
            }
            // First maximum in cost order.
            let modal = Pipeline::ALL
                .into_iter()
                .fold(Pipeline::BaselineFts, |best, p| {
                    if counts[p.index()] > counts[best.index()] {
                        p
                    } else {
                        best
                    }
                });
            (
                q,
                RouteStability {
                    modal,
                    agreeing: counts[modal.index()],
                    folds,
                },
            )
        })
        .collect();

    Ok(CvReport {
        folds: results,
        mean,
        std: var.sqrt(),
        full_data_recall_all,
        full_data_table,
        stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(counts: &[(QueryType, usize)]) -> Vec<(String, QueryType)> {
        counts
            .iter()
            .flat_map(|&(q, n)| (0..n).map(move |i| (format!("{q}-{i:03}"), q)))
            .collect()
    }

    fn as_refs(v: &[(String, QueryType)]) -> Vec<(&str, QueryType)> {
        v.iter().map(|(s, q)| (s.as_str(), *q)).collect()
    }

    #[test]
    fn round_robin_sizes_for_small_type() {
        let mut c: Vec<_> = QueryType::RETRIEVAL.iter().map(|&q| (q, 5)).collect();
        c[0].1 = 6;
        let v = items(&c);
        let folds = stratified_kfold(&as_refs(&v), 5, 1).unwrap();
        let mut sizes: Vec<usize> = folds
            .iter()
            .map(|f| {
                f.test
                    .iter()
                    .filter(|id| id.starts_with("knowledge-update"))
                    .count()
            })
            .collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [1, 1, 1, 1, 2]);
    }

    #[test]
    fn disjoint_and_complete() {
        let v = items(
            &QueryType::RETRIEVAL
                .iter()
                .map(|&q| (q, 7))
                .collect::<Vec<_>>(),
        );
        let folds = stratified_kfold(&as_refs(&v), 3, 11).unwrap();
        let mut all: Vec<&String> = folds.iter().flat_map(|f| &f.test).collect();
        all.sort();
        let before = all.len();
        all.dedup();
        assert_eq!(before, all.len());
        assert_eq!(all.len(), v.len());
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), v.len());
        }
    }

    #[test]
    fn too_few_instances() {
        let v = items(
            &QueryType::RETRIEVAL
                .iter()
                .map(|&q| (q, 4))
                .collect::<Vec<_>>(),
        );
        assert!(stratified_kfold(&as_refs(&v), 5, 0).is_err());
        assert!(stratified_kfold(&as_refs(&v), 1, 0).is_err());
    }

    #[test]
    fn identical_pipelines() {
        let scores: Vec<PipelineScores> = items(
            &QueryType::RETRIEVAL
                .iter()
                .map(|&q| (q, 5))
                .collect::<Vec<_>>(),
        )
        .into_iter()
        .map(|(id, qtype)| {
            let v = f64::from((qtype as u8).is_multiple_of(2));
            PipelineScores {
                id,
                qtype,
                recall: [v; 5],
                ndcg: [v; 5],
            }
        })
        .collect();
        let rep = cross_validate(&scores, 5, 3, &Pipeline::ALL, Metric::Recall).unwrap();
        assert_eq!(rep.full_data_recall_all, 0.5);
        assert_eq!(rep.mean, rep.full_data_recall_all);
        assert_eq!(rep.std, 0.0);
        for s in rep.stability.values() {
            assert_eq!(s.modal, Pipeline::BaselineFts);
            assert_eq!(s.agreeing, 5);
        }
    }
}

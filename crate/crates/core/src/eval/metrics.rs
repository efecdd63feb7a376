//! Binary-relevance metrics over the top `k` of a ranked list.
//!
//! An empty gold set (abstention) scores 0 on both metrics.

use std::collections::HashSet;

use crate::ranked::RankedList;

/// 1.0 iff every gold id is among the first `k` retrieved ids.
pub fn recall_all_at_k(retrieved: &RankedList, gold: &HashSet<String>, k: usize) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let top: HashSet<&str> = retrieved.ids().take(k).collect();
    if gold.iter().all(|g| top.contains(g.as_str())) {
        1.0
    } else {
        0.0
    }
}

/// NDCG with a `1 / log2(rank + 1)` discount and ideal DCG over
/// `min(|gold|, k)` positions.
pub fn ndcg_at_k(retrieved: &RankedList, gold: &HashSet<String>, k: usize) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = retrieved
        .ids()
        .take(k)
        .enumerate()
        .filter(|(_, id)| gold.contains(*id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=gold.len().min(k)).map(discount).sum();
    dcg / idcg
}

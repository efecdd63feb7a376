//! Reciprocal Rank Fusion: `RRF(d) = sum over lists containing d of
//! 1 / (k + rank(d))`. Only ranks matter; input scores are ignored and a
//! document missing from a list contributes nothing for it.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ranked::{RankedList, ScoredDoc};

pub const DEFAULT_RRF_K: usize = 60;

/// Candidate depth requested from each retriever before fusing to `k`.
pub fn fusion_depth(k: usize) -> usize {
    50.max(10 * k)
}

pub fn rrf_fuse(lists: &[RankedList], k_const: usize) -> Result<RankedList> {
    if lists.is_empty() {
        return Err(Error::InvalidArgument(
            "rrf_fuse needs at least one list".into(),
        ));
    }
    if k_const == 0 {
        return Err(Error::InvalidArgument(
            "RRF constant must be at least 1".into(),
        ));
    }
    let mut fused: HashMap<&str, f64> = HashMap::new();
    for list in lists {
        for (pos, doc) in list.items.iter().enumerate() {
            *fused.entry(doc.id.as_str()).or_default() += 1.0 / (k_const + pos + 1) as f64;
        }
    }
    let items: Vec<_> = fused
        .into_iter()
        .map(|(id, score)| ScoredDoc {
            id: id.to_owned(),
            score,
        })
        .collect();
    let n = items.len();
    Ok(RankedList::from_unsorted("rrf", items, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(ids: &[&str]) -> RankedList {
        RankedList {
            source: "t".into(),
            items: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredDoc {
                    id: (*id).into(),
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    #[test]
    fn single_list_rank_one() {
        let r = rrf_fuse(&[list(&["d1"])], 60).unwrap();
        assert!((r.items[0].score - 0.01639344262295082).abs() < 1e-15);
    }

    #[test]
    fn symmetric_tie_goes_to_lower_id() {
        let r = rrf_fuse(&[list(&["d1", "d2"]), list(&["d2", "d1"])], 60).unwrap();
        assert_eq!(r.items[0].id, "d1");
        assert_eq!(r.items[0].score, r.items[1].score);
        assert!((r.items[0].score - (1.0 / 61.0 + 1.0 / 62.0)).abs() < 1e-15);
    }

    #[test]
    fn absent_doc_contributes_nothing() {
        let r = rrf_fuse(&[list(&["a"]), list(&["b", "c", "d"])], 60).unwrap();
        let d = r.items.iter().find(|x| x.id == "d").unwrap();
        assert!((d.score - 1.0 / 63.0).abs() < 1e-15);
    }

    #[test]
    fn errors_and_empty_inputs() {
        assert!(rrf_fuse(&[], 60).is_err());
        assert!(rrf_fuse(&[list(&["a"])], 0).is_err());
        let r = rrf_fuse(&[list(&[]), list(&["a"])], 60).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn depth_rule() {
        assert_eq!(fusion_depth(1), 50);
        assert_eq!(fusion_depth(5), 50);
        assert_eq!(fusion_depth(8), 80);
    }
}

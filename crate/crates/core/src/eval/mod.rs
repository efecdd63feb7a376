//! Session-level retrieval evaluation.

pub mod bootstrap;
pub mod cv;
pub mod metrics;
pub mod report;

pub use bootstrap::{bootstrap_ci, paired_bootstrap_test, PairedTest};
pub use cv::{cross_validate, stratified_kfold, CvReport, Fold};
pub use metrics::{ndcg_at_k, recall_all_at_k};
pub use report::{evaluate_run, EvalReport};

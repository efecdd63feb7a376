//! Query-type routed retrieval over long-term conversational memory.
//!
//! Sessions are indexed twice lexically (raw, and raw plus storage-time
//! vocabulary enrichment) and once by embedding vector. Each query is
//! routed by its type to one of five pipelines. The `eval` module carries
//! the session-level metrics, bootstrap statistics and cross-validation
//! used to judge the routing.

pub mod benchmark;
pub mod classifier;
mod codec;
pub mod enrich;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod lexical;
pub mod ranked;
pub mod router;
pub mod runner;
pub mod store;
pub mod tokenize;
pub mod vector;

pub use classifier::{classify_query, effective_accuracy, ClassificationReport, RuleSet};
pub use enrich::{enrich, Vocabulary};
pub use error::{Error, Result};
pub use fusion::{rrf_fuse, DEFAULT_RRF_K};
pub use lexical::{Bm25Params, LexicalIndex};
pub use ranked::{RankedList, ScoredDoc};
pub use router::{derive_route_table, resolve_route, Pipeline, QueryType, RouteFamily, RouteTable};
pub use store::{build_store, open_store, Store};
pub use tokenize::tokenize;
pub use vector::{EmbeddingProvider, FileBackedProvider, HashedBagOfWords, VectorIndex};

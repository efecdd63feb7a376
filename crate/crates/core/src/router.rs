//! Query-type routing: which pipeline serves which kind of question, and
//! how a route table is derived from per-pipeline training scores.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fusion_depth, rrf_fuse, DEFAULT_RRF_K};
use crate::lexical::Bm25Params;
use crate::ranked::RankedList;
use crate::store::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryType {
    KnowledgeUpdate,
    MultiSession,
    SingleSessionAssistant,
    SingleSessionPreference,
    SingleSessionUser,
    TemporalReasoning,
    Abstention,
}

impl QueryType {
    /// The six types that route to a pipeline.
    pub const RETRIEVAL: [QueryType; 6] = [
        QueryType::KnowledgeUpdate,
        QueryType::MultiSession,
        QueryType::SingleSessionAssistant,
        QueryType::SingleSessionPreference,
        QueryType::SingleSessionUser,
        QueryType::TemporalReasoning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::KnowledgeUpdate => "knowledge-update",
            QueryType::MultiSession => "multi-session",
            QueryType::SingleSessionAssistant => "single-session-assistant",
            QueryType::SingleSessionPreference => "single-session-preference",
            QueryType::SingleSessionUser => "single-session-user",
            QueryType::TemporalReasoning => "temporal-reasoning",
            QueryType::Abstention => "abstention",
        }
    }

    pub fn is_retrieval(self) -> bool {
        self != QueryType::Abstention
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryType::RETRIEVAL
            .into_iter()
            .chain([QueryType::Abstention])
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown query type `{s}`")))
    }
}

/// Executable retrieval strategies, declared in cost order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    BaselineFts,
    EnrichedFts,
    Embeddings,
    Hybrid,
    EnrichedHybrid,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [
        Pipeline::BaselineFts,
        Pipeline::EnrichedFts,
        Pipeline::Embeddings,
        Pipeline::Hybrid,
        Pipeline::EnrichedHybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::BaselineFts => "baseline_fts",
            Pipeline::EnrichedFts => "enriched_fts",
            Pipeline::Embeddings => "embeddings",
            Pipeline::Hybrid => "hybrid",
            Pipeline::EnrichedHybrid => "enriched_hybrid",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn family(self) -> RouteFamily {
        match self {
            Pipeline::BaselineFts | Pipeline::EnrichedFts => RouteFamily::FtsBased,
            Pipeline::Embeddings => RouteFamily::EmbeddingBased,
            Pipeline::Hybrid | Pipeline::EnrichedHybrid => RouteFamily::HybridBased,
        }
    }

    pub fn needs_enriched_index(self) -> bool {
        matches!(self, Pipeline::EnrichedFts | Pipeline::EnrichedHybrid)
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(
            self,
            Pipeline::Embeddings | Pipeline::Hybrid | Pipeline::EnrichedHybrid
        )
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pipeline `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteFamily {
    FtsBased,
    EmbeddingBased,
    HybridBased,
}

/// The routing table shipped with the engine.
pub const DEFAULT_ROUTES: &str = include_str!("../resources/routes.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteTable {
    pub provenance: String,
    pub routes: BTreeMap<QueryType, Pipeline>,
}

impl RouteTable {
    pub fn new(
        provenance: impl Into<String>,
        routes: BTreeMap<QueryType, Pipeline>,
    ) -> Result<Self> {
        let table = Self {
            provenance: provenance.into(),
            routes,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_ROUTES).expect("shipped route table is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.routes.contains_key(&QueryType::Abstention) {
            return Err(Error::Config(
                "route table must not route abstention".into(),
            ));
        }
        if let Some(missing) = QueryType::RETRIEVAL
            .iter()
            .find(|t| !self.routes.contains_key(t))
        {
            return Err(Error::Config(format!(
                "route table has no route for {missing}"
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: RouteTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("route table: {e}")))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("route table serializes")
    }

    pub fn resolve(&self, qtype: QueryType) -> Result<Pipeline> {
        if qtype == QueryType::Abstention {
            return Err(Error::InvalidArgument(
                "abstention has no route; classify the query's surface type first".into(),
            ));
        }
        Ok(self.routes[&qtype])
    }
}

pub fn resolve_route(qtype: QueryType, table: &RouteTable) -> Result<Pipeline> {
    table.resolve(qtype)
}

/// Runs `pipeline` for `query` against `store`, returning at most `k` hits.
pub fn execute_pipeline(
    pipeline: Pipeline,
    query: &str,
    store: &Store,
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let params = Bm25Params::default();
    let cosine = |depth: usize| -> Result<RankedList> {
        let (Some(index), Some(provider)) = (store.vector_index(), store.provider()) else {
            let gap = if store.vector_index().is_none() {
                "store has no vector index (built lexical-only)"
            } else {
                "no embedding provider attached to the store"
            };
            return Err(Error::Config(format!(
                "pipeline {pipeline} needs embeddings: {gap}"
            )));
        };
        index.search(&provider.embed(query)?, depth)
    };
    let fused = |lexical: RankedList, vector: RankedList| -> Result<RankedList> {
        let mut out = rrf_fuse(&[lexical, vector], DEFAULT_RRF_K)?;
        out.truncate(k);
        Ok(out)
    };
    let depth = fusion_depth(k);
    match pipeline {
        Pipeline::BaselineFts => store.raw_index().search(query, k, params),
        Pipeline::EnrichedFts => store.enriched_index().search(query, k, params),
        Pipeline::Embeddings => cosine(k),
        Pipeline::Hybrid => {
            let v = cosine(depth)?;
            fused(store.raw_index().search(query, depth, params)?, v)
        }
        Pipeline::EnrichedHybrid => {
            let v = cosine(depth)?;
            fused(store.enriched_index().search(query, depth, params)?, v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Recall,
    Ndcg,
}

/// Per-pipeline scores of one benchmark instance, indexed by
/// [`Pipeline::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineScores {
    pub id: String,
    pub qtype: QueryType,
    pub recall: [f64; 5],
    pub ndcg: [f64; 5],
}

impl PipelineScores {
    pub fn score(&self, p: Pipeline, metric: Metric) -> f64 {
        match metric {
            Metric::Recall => self.recall[p.index()],
            Metric::Ndcg => self.ndcg[p.index()],
        }
    }
}

/// Per type, the candidate with the highest mean training score; ties go
/// to the cheaper pipeline. Abstention instances are ignored.
pub fn derive_route_table(
    train: &[&PipelineScores],
    candidates: &[Pipeline],
    metric: Metric,
    provenance: impl Into<String>,
) -> Result<RouteTable> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate pipelines".into()));
    }
    let mut candidates = candidates.to_vec();
    candidates.sort();
    candidates.dedup();
    let mut routes = BTreeMap::new();
    for qtype in QueryType::RETRIEVAL {
        let of_type: Vec<_> = train.iter().filter(|s| s.qtype == qtype).collect();
        if of_type.is_empty() {
            return Err(Error::Evaluation(format!(
                "no training instances of type {qtype}; check stratification"
            )));
        }
        let mean = |p: Pipeline| {
            of_type.iter().map(|s| s.score(p, metric)).sum::<f64>() / of_type.len() as f64
        };
        let mut best = (candidates[0], mean(candidates[0]));
        for &p in &candidates[1..] {
            let m = mean(p);
            if m > best.1 {
                best = (p, m);
            }
        }
        routes.insert(qtype, best.0);
    }
    RouteTable::new(provenance, routes)
}

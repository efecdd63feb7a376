//! Benchmark execution: ingesting per-instance stores, running a routing
//! mode over every instance, and scoring all pipelines for route derivation.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{Benchmark, BenchmarkInstance};
use crate::classifier::RuleSet;
use crate::enrich::Vocabulary;
use crate::error::{Error, Result};
use crate::eval::{ndcg_at_k, recall_all_at_k};
use crate::ranked::RankedList;
use crate::router::{execute_pipeline, Pipeline, PipelineScores, QueryType, RouteTable};
use crate::store::{instance_dir_name, BuildOptions, Store, StoreManifest};
use crate::vector::{EmbeddingProvider, ProviderSpec};

pub const INGEST_SUMMARY_FILE: &str = "ingest.json";

/// How each instance's pipeline is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Route by the dataset's question type.
    Oracle,
    /// Route by the classifier's prediction.
    Predicted,
    /// Same pipeline for every instance.
    Uniform(Pipeline),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Oracle => f.write_str("oracle"),
            Mode::Predicted => f.write_str("predicted"),
            Mode::Uniform(p) => write!(f, "uniform:{p}"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Mode::Oracle),
            "predicted" => Ok(Mode::Predicted),
            _ => match s.strip_prefix("uniform:") {
                Some(p) => Ok(Mode::Uniform(p.parse()?)),
                None => Err(Error::InvalidArgument(format!(
                    "unknown mode `{s}` (expected oracle, predicted or uniform:<pipeline>)"
                ))),
            },
        }
    }
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub qtype: QueryType,
    /// The type the route was looked up with; absent in uniform mode.
    pub routed_type: Option<QueryType>,
    pub pipeline: Pipeline,
    pub results: RankedList,
}

pub fn write_run(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("run record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_run(path: &Path) -> Result<Vec<RunRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Results keyed by instance id, as consumed by `evaluate_run`.
pub fn results_by_id(records: &[RunRecord]) -> HashMap<String, RankedList> {
    records
        .iter()
        .map(|r| (r.instance_id.clone(), r.results.clone()))
        .collect()
}

/// Where each instance's store comes from.
pub trait StoreSource: Sync {
    fn store_for(&self, instance: &BenchmarkInstance) -> Result<Store>;
}

/// Stores previously written by [`ingest`] under a root directory.
pub struct DiskStores {
    root: PathBuf,
    provider: Option<Arc<dyn EmbeddingProvider>>,
}

impl DiskStores {
    /// `provider` is attached to every opened store that has vectors;
    /// stores built with the hashed provider carry their own.
    pub fn new(root: impl Into<PathBuf>, provider: Option<Arc<dyn EmbeddingProvider>>) -> Self {
        Self {
            root: root.into(),
            provider,
        }
    }

    pub fn path_for(&self, instance_id: &str) -> PathBuf {
        self.root.join(instance_dir_name(instance_id))
    }

    /// Instance ids whose store directory is missing.
    pub fn missing<'a>(&self, instances: &'a [BenchmarkInstance]) -> Vec<&'a str> {
        instances
            .iter()
            .filter(|i| !self.path_for(&i.id).is_dir())
            .map(|i| i.id.as_str())
            .collect()
    }
}

impl StoreSource for DiskStores {
    fn store_for(&self, instance: &BenchmarkInstance) -> Result<Store> {
        let mut store = Store::open(&self.path_for(&instance.id))?;
        if let (Some(p), Some(_)) = (&self.provider, store.vector_index()) {
            store.attach_provider(p.clone())?;
        }
        Ok(store)
    }
}

/// Builds stores in memory from a loaded benchmark.
pub struct MemoryStores<'a> {
    haystacks: HashMap<&'a str, &'a [crate::benchmark::Session]>,
    vocab: &'a Vocabulary,
    provider: Option<Arc<dyn EmbeddingProvider>>,
    options: BuildOptions,
}

impl<'a> MemoryStores<'a> {
    pub fn new(
        bench: &'a Benchmark,
        vocab: &'a Vocabulary,
        provider: Option<Arc<dyn EmbeddingProvider>>,
        options: BuildOptions,
    ) -> Self {
        let haystacks = bench
            .instances
            .iter()
            .zip(&bench.haystacks)
            .map(|(i, h)| (i.id.as_str(), h.as_slice()))
            .collect();
        Self {
            haystacks,
            vocab,
            provider,
            options,
        }
    }
}

impl StoreSource for MemoryStores<'_> {
    fn store_for(&self, instance: &BenchmarkInstance) -> Result<Store> {
        let sessions = self
            .haystacks
            .get(instance.id.as_str())
            .ok_or_else(|| Error::Data(format!("no haystack for instance `{}`", instance.id)))?;
        Store::build(sessions, self.vocab, self.provider.clone(), self.options)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub instances: usize,
    pub retrieval: usize,
    pub abstention: usize,
    pub sessions: usize,
    pub vocabulary_version: String,
    pub provider: Option<ProviderSpec>,
}

/// Builds one store per instance under `root`. Refuses an existing,
/// non-empty root unless `force`, in which case instance stores are
/// replaced.
pub fn ingest(
    bench: &Benchmark,
    root: &Path,
    vocab: &Vocabulary,
    provider: Option<Arc<dyn EmbeddingProvider>>,
    options: BuildOptions,
    force: bool,
) -> Result<IngestSummary> {
    let occupied = root.is_dir()
        && fs::read_dir(root)
            .map_err(|e| Error::io(root, e))?
            .next()
            .is_some();
    if occupied && !force {
        return Err(Error::Config(format!(
            "{} is not empty; pass --force to rebuild",
            root.display()
        )));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let manifests: Vec<StoreManifest> = bench
        .instances
        .par_iter()
        .zip(&bench.haystacks)
        .map(|(inst, sessions)| {
            let dir = root.join(instance_dir_name(&inst.id));
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            Store::build(sessions, vocab, provider.clone(), options)?.save(&dir, Some(&inst.id))
        })
        .collect::<Result<_>>()?;
    let summary = IngestSummary {
        instances: bench.instances.len(),
        retrieval: bench.retrieval_count(),
        abstention: bench.abstention_count(),
        sessions: manifests.iter().map(|m| m.counts.sessions).sum(),
        vocabulary_version: vocab.version.clone(),
        provider: provider.map(|p| p.spec()),
    };
    let path = root.join(INGEST_SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// Picks the pipeline for one instance.
pub fn choose_pipeline(
    instance: &BenchmarkInstance,
    mode: Mode,
    table: &RouteTable,
    rules: &RuleSet,
) -> Result<(Option<QueryType>, Pipeline)> {
    match mode {
        Mode::Uniform(p) => Ok((None, p)),
        Mode::Oracle => {
            let t = instance.routing_type();
            Ok((Some(t), table.resolve(t)?))
        }
        Mode::Predicted => {
            let t = rules.classify(&instance.question);
            Ok((Some(t), table.resolve(t)?))
        }
    }
}

/// Runs every instance under `mode`. Records come back in input order.
pub fn run_benchmark(
    instances: &[BenchmarkInstance],
    stores: &dyn StoreSource,
    mode: Mode,
    table: &RouteTable,
    rules: &RuleSet,
    k: usize,
) -> Result<Vec<RunRecord>> {
    instances
        .par_iter()
        .map(|inst| {
            let (routed_type, pipeline) = choose_pipeline(inst, mode, table, rules)?;
            let store = stores.store_for(inst)?;
            let results = execute_pipeline(pipeline, &inst.question, &store, k)?;
            Ok(RunRecord {
                instance_id: inst.id.clone(),
                qtype: inst.qtype,
                routed_type,
                pipeline,
                results,
            })
        })
        .collect()
}

/// Scores all five pipelines on every retrieval instance.
pub fn score_pipelines(
    instances: &[BenchmarkInstance],
    stores: &dyn StoreSource,
    k: usize,
) -> Result<Vec<PipelineScores>> {
    instances
        .par_iter()
        .filter(|i| i.qtype.is_retrieval())
        .map(|inst| {
            let store = stores.store_for(inst)?;
            let mut recall = [0.0; 5];
            let mut ndcg = [0.0; 5];
            for p in Pipeline::ALL {
                let list = execute_pipeline(p, &inst.question, &store, k)?;
                recall[p.index()] = recall_all_at_k(&list, &inst.gold, k);
                ndcg[p.index()] = ndcg_at_k(&list, &inst.gold, k);
            }
            Ok(PipelineScores {
                id: inst.id.clone(),
                qtype: inst.qtype,
                recall,
                ndcg,
            })
        })
        .collect()
}

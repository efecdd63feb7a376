use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use memroute::benchmark::{load_benchmark, BenchmarkInstance};
use memroute::eval::{
    bootstrap_ci, cross_validate, evaluate_run, paired_bootstrap_test, EvalReport,
};
use memroute::router::{execute_pipeline, Metric};
use memroute::runner::{
    ingest, read_run, results_by_id, run_benchmark, score_pipelines, write_run, DiskStores, Mode,
};
use memroute::store::{BuildOptions, Store};
use memroute::vector::{
    content_digest, digest_hex, parse_digest, truncate_for_embedding, EmbeddingSidecar,
    DEFAULT_HASHED_DIMENSION,
};
use memroute::{
    effective_accuracy, EmbeddingProvider, Error, FileBackedProvider, HashedBagOfWords, Pipeline,
    QueryType, Result, RouteTable, RuleSet, Vocabulary,
};

#[derive(Parser)]
#[command(
    name = "memroute",
    version,
    about = "Query-type routed retrieval over conversational memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one store per benchmark instance.
    Ingest(IngestArgs),
    /// Query a single store.
    Search(SearchArgs),
    /// Run a routing mode over a benchmark and score it.
    Bench(BenchArgs),
    /// Paired bootstrap comparison of two run files.
    Compare(CompareArgs),
    /// Classify one question, or score the classifier on a benchmark.
    Classify(ClassifyArgs),
    /// Derive a route table from all retrieval instances.
    DeriveRoutes(DeriveArgs),
    /// Stratified k-fold cross-validation of route derivation.
    Cv(CvArgs),
    /// Write the texts an external model must embed, keyed by digest.
    ExportTexts(ExportArgs),
    /// Convert JSONL embeddings into a sidecar file.
    ImportEmbeddings(ImportArgs),
}

#[derive(Args)]
struct StoreRootArg {
    /// Directory holding one store per instance.
    #[arg(long, env = "MEMROUTE_STORE_ROOT")]
    store_root: PathBuf,
}

#[derive(Args)]
struct QueryConfig {
    /// Route table (TOML); defaults to the shipped table.
    #[arg(long)]
    routes: Option<PathBuf>,
    /// Classifier rules; defaults to the shipped rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Embeddings sidecar used to embed queries for stores built from one.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
}

impl QueryConfig {
    fn routes(&self) -> Result<RouteTable> {
        self.routes
            .as_deref()
            .map_or_else(|| Ok(RouteTable::shipped()), RouteTable::load)
    }

    fn rules(&self) -> Result<RuleSet> {
        self.rules
            .as_deref()
            .map_or_else(|| Ok(RuleSet::shipped()), RuleSet::load)
    }

    fn provider(&self) -> Result<Option<Arc<dyn EmbeddingProvider>>> {
        match &self.embeddings {
            None => Ok(None),
            Some(p) => Ok(Some(Arc::new(FileBackedProvider::open(
                sidecar_name(p),
                p,
            )?))),
        }
    }

    fn k(&self) -> Result<usize> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(self.k)
    }
}

fn sidecar_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map_or("sidecar".into(), |s| s.to_string_lossy());
    format!("sidecar:{stem}")
}

#[derive(Args)]
struct IngestArgs {
    benchmark: PathBuf,
    #[command(flatten)]
    root: StoreRootArg,
    /// Enrichment vocabulary; defaults to the shipped one.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Build the enriched index with no enrichment.
    #[arg(long, conflicts_with = "vocab")]
    no_enrichment: bool,
    /// `hashed`, `hashed:<dim>`, `sidecar:<path>` or `none` (lexical-only).
    #[arg(long, default_value = "hashed")]
    provider: String,
    /// Leave session timestamps out of the lexical indices.
    #[arg(long)]
    no_dates: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace stores under a non-empty root.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SearchArgs {
    query: String,
    /// Store directory.
    #[arg(long)]
    store: PathBuf,
    /// Query type used for routing, or `auto` to classify the query.
    #[arg(long = "type", default_value = "auto")]
    qtype: String,
    /// Run this pipeline regardless of routing.
    #[arg(long)]
    pipeline: Option<Pipeline>,
    #[command(flatten)]
    config: QueryConfig,
}

#[derive(Args)]
struct BenchArgs {
    benchmark: PathBuf,
    #[command(flatten)]
    root: StoreRootArg,
    /// `oracle`, `predicted` or `uniform:<pipeline>`.
    #[arg(long, default_value = "oracle")]
    mode: Mode,
    /// Output directory for run.jsonl and report.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[command(flatten)]
    config: QueryConfig,
}

#[derive(Args)]
struct CompareArgs {
    benchmark: PathBuf,
    run_a: PathBuf,
    run_b: PathBuf,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    /// Also write the comparison as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Benchmark to score the classifier on.
    #[arg(required_unless_present = "question")]
    benchmark: Option<PathBuf>,
    /// Classify a single question instead.
    #[arg(long, conflicts_with = "benchmark")]
    question: Option<String>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    routes: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeriveArgs {
    benchmark: PathBuf,
    #[command(flatten)]
    root: StoreRootArg,
    /// Metric maximised per type: `recall` or `ndcg`.
    #[arg(long, default_value = "recall")]
    metric: String,
    /// Where to write the derived table; printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: QueryConfig,
}

#[derive(Args)]
struct CvArgs {
    benchmark: PathBuf,
    #[command(flatten)]
    root: StoreRootArg,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "recall")]
    metric: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: QueryConfig,
}

#[derive(Args)]
struct ExportArgs {
    benchmark: PathBuf,
    /// JSONL output: one {"digest", "text"} object per distinct session or
    /// question text.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    /// JSONL input: one {"digest", "vector"} object per line.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct TextLine {
    digest: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct VectorLine {
    digest: String,
    vector: Vec<f32>,
}

fn parse_metric(s: &str) -> Result<Metric> {
    match s {
        "recall" => Ok(Metric::Recall),
        "ndcg" => Ok(Metric::Ndcg),
        _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn open_stores(
    root: &Path,
    instances: &[BenchmarkInstance],
    config: &QueryConfig,
) -> Result<DiskStores> {
    let stores = DiskStores::new(root, config.provider()?);
    let missing = stores.missing(instances);
    if !missing.is_empty() {
        let shown: Vec<_> = missing.iter().take(10).collect();
        return Err(Error::Config(format!(
            "{} store(s) missing under {}: {:?}{}",
            missing.len(),
            root.display(),
            shown,
            if missing.len() > 10 { " ..." } else { "" }
        )));
    }
    Ok(stores)
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let bench = load_benchmark(&a.benchmark)?;
    let vocab = match (&a.vocab, a.no_enrichment) {
        (_, true) => Vocabulary::empty(),
        (Some(p), false) => Vocabulary::load(p)?,
        (None, false) => Vocabulary::shipped(),
    };
    let provider: Option<Arc<dyn EmbeddingProvider>> = match a.provider.as_str() {
        "none" => None,
        "hashed" => Some(Arc::new(HashedBagOfWords::new(DEFAULT_HASHED_DIMENSION)?)),
        s => {
            if let Some(d) = s.strip_prefix("hashed:") {
                let d = d
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad dimension in `{s}`")))?;
                Some(Arc::new(HashedBagOfWords::new(d)?))
            } else if let Some(p) = s.strip_prefix("sidecar:") {
                let p = Path::new(p);
                Some(Arc::new(FileBackedProvider::open(sidecar_name(p), p)?))
            } else {
                return Err(Error::InvalidArgument(format!("unknown provider `{s}`")));
            }
        }
    };
    let options = BuildOptions {
        include_dates: !a.no_dates,
        seed: a.seed,
    };
    eprintln!(
        "ingesting {} instances into {}",
        bench.instances.len(),
        a.root.store_root.display()
    );
    let s = ingest(
        &bench,
        &a.root.store_root,
        &vocab,
        provider,
        options,
        a.force,
    )?;
    println!(
        "{} stores, {} sessions, {} retrieval / {} abstention, vocabulary {}",
        s.instances, s.sessions, s.retrieval, s.abstention, s.vocabulary_version
    );
    Ok(())
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let k = a.config.k()?;
    let mut store = Store::open(&a.store)?;
    if let (Some(p), Some(_)) = (a.config.provider()?, store.vector_index()) {
        store.attach_provider(p)?;
    }
    let (qtype, pipeline) = match a.pipeline {
        Some(p) => (None, p),
        None => {
            let qtype = if a.qtype == "auto" {
                a.config.rules()?.classify(&a.query)
            } else {
                a.qtype.parse::<QueryType>()?
            };
            (Some(qtype), a.config.routes()?.resolve(qtype)?)
        }
    };
    let results = execute_pipeline(pipeline, &a.query, &store, k)?;
    match qtype {
        Some(t) => println!("type: {t}"),
        None => println!("type: (override)"),
    }
    println!("pipeline: {pipeline}");
    for (i, hit) in results.items.iter().enumerate() {
        println!("{:>3}  {:<24} {:.6}", i + 1, hit.id, hit.score);
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchReport<'a> {
    mode: String,
    seed: u64,
    resamples: usize,
    recall_all_ci95: (f64, f64),
    ndcg_ci95: (f64, f64),
    pipelines: BTreeMap<Pipeline, usize>,
    report: &'a EvalReport,
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let k = a.config.k()?;
    let bench = load_benchmark(&a.benchmark)?;
    let stores = open_stores(&a.root.store_root, &bench.instances, &a.config)?;
    let records = run_benchmark(
        &bench.instances,
        &stores,
        a.mode,
        &a.config.routes()?,
        &a.config.rules()?,
        k,
    )?;
    let report = evaluate_run(&bench.instances, &results_by_id(&records), k)?;
    let mut pipelines = BTreeMap::new();
    for r in &records {
        *pipelines.entry(r.pipeline).or_insert(0) += 1;
    }
    let out = BenchReport {
        mode: a.mode.to_string(),
        seed: a.seed,
        resamples: a.resamples,
        recall_all_ci95: bootstrap_ci(&report.recall_scores(), a.resamples, 0.05, a.seed)?,
        ndcg_ci95: bootstrap_ci(&report.ndcg_scores(), a.resamples, 0.05, a.seed)?,
        pipelines,
        report: &report,
    };
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    write_run(&a.out.join("run.jsonl"), &records)?;
    write_json(&a.out.join("report.json"), &out)?;
    println!("mode: {}", a.mode);
    print!("{}", report.to_table());
    println!(
        "Ra@{k} 95% CI [{:.3}, {:.3}]   NDCG@{k} 95% CI [{:.3}, {:.3}]",
        out.recall_all_ci95.0, out.recall_all_ci95.1, out.ndcg_ci95.0, out.ndcg_ci95.1
    );
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    metric: &'static str,
    a: f64,
    b: f64,
    mean_delta: f64,
    p_value: f64,
    resamples: usize,
    seed: u64,
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let bench = load_benchmark(&a.benchmark)?;
    let ra = evaluate_run(&bench.instances, &results_by_id(&read_run(&a.run_a)?), a.k)?;
    let rb = evaluate_run(&bench.instances, &results_by_id(&read_run(&a.run_b)?), a.k)?;
    let mut rows = Vec::new();
    for (metric, xa, xb) in [
        ("recall_all", ra.recall_scores(), rb.recall_scores()),
        ("ndcg", ra.ndcg_scores(), rb.ndcg_scores()),
    ] {
        let t = paired_bootstrap_test(&xb, &xa, a.resamples, a.seed)?;
        rows.push(Comparison {
            metric,
            a: if metric == "ndcg" {
                ra.ndcg
            } else {
                ra.recall_all
            },
            b: if metric == "ndcg" {
                rb.ndcg
            } else {
                rb.recall_all
            },
            mean_delta: t.mean_delta,
            p_value: t.p_value,
            resamples: a.resamples,
            seed: a.seed,
        });
    }
    println!("metric        A        B        B-A      p(B<=A)");
    for r in &rows {
        println!(
            "{:<12} {:.4}   {:.4}   {:+.4}   {:.4}",
            r.metric, r.a, r.b, r.mean_delta, r.p_value
        );
    }
    if let Some(out) = &a.out {
        write_json(out, &rows)?;
    }
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let rules = a
        .rules
        .as_deref()
        .map_or_else(|| Ok(RuleSet::shipped()), RuleSet::load)?;
    if let Some(q) = &a.question {
        println!("{}", rules.classify(q));
        return Ok(());
    }
    let table = a
        .routes
        .as_deref()
        .map_or_else(|| Ok(RouteTable::shipped()), RouteTable::load)?;
    let bench = load_benchmark(a.benchmark.as_deref().expect("clap requires one"))?;
    let retrieval: Vec<_> = bench
        .instances
        .iter()
        .filter(|i| i.qtype.is_retrieval())
        .collect();
    let gold: Vec<_> = retrieval.iter().map(|i| i.qtype).collect();
    let predicted: Vec<_> = retrieval
        .iter()
        .map(|i| rules.classify(&i.question))
        .collect();
    let report = effective_accuracy(&gold, &predicted, &table)?;
    println!("{:<28} {:>5} {:>8}", "type", "n", "accuracy");
    for (t, acc) in &report.per_type {
        println!("{:<28} {:>5} {:>8.3}", t.as_str(), acc.n, acc.accuracy);
    }
    println!("{:<28} {:>5} {:>8.3}", "overall", report.n, report.accuracy);
    println!(
        "{:<28} {:>5} {:>8.3}",
        "effective", report.n, report.effective_accuracy
    );
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn cmd_derive(a: DeriveArgs) -> Result<()> {
    let k = a.config.k()?;
    let metric = parse_metric(&a.metric)?;
    let bench = load_benchmark(&a.benchmark)?;
    let stores = open_stores(&a.root.store_root, &bench.instances, &a.config)?;
    let scores = score_pipelines(&bench.instances, &stores, k)?;
    let refs: Vec<_> = scores.iter().collect();
    let provenance = format!(
        "derived from {} ({} instances)",
        a.benchmark.display(),
        refs.len()
    );
    let table = memroute::derive_route_table(&refs, &Pipeline::ALL, metric, provenance)?;
    let text = table.to_toml();
    match &a.out {
        Some(p) => fs::write(p, &text).map_err(io_err(p))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_cv(a: CvArgs) -> Result<()> {
    let k = a.config.k()?;
    let metric = parse_metric(&a.metric)?;
    let bench = load_benchmark(&a.benchmark)?;
    let stores = open_stores(&a.root.store_root, &bench.instances, &a.config)?;
    let scores = score_pipelines(&bench.instances, &stores, k)?;
    let report = cross_validate(&scores, a.folds, a.seed, &Pipeline::ALL, metric)?;
    println!("fold  n     Ra@{k}    NDCG@{k}");
    for f in &report.folds {
        println!(
            "{:<5} {:<5} {:.4}   {:.4}",
            f.fold, f.test_size, f.recall_all, f.ndcg
        );
    }
    println!("CV mean {:.4} +/- {:.4}", report.mean, report.std);
    println!("full-data {:.4}", report.full_data_recall_all);
    println!("{:<28} {:<16} agreeing", "type", "modal route");
    for (t, s) in &report.stability {
        println!(
            "{:<28} {:<16} {}/{}",
            t.as_str(),
            s.modal.as_str(),
            s.agreeing,
            s.folds
        );
    }
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let bench = load_benchmark(&a.benchmark)?;
    let file = fs::File::create(&a.out).map_err(io_err(&a.out))?;
    let mut w = BufWriter::new(file);
    let mut seen = HashSet::new();
    let sessions = bench.haystacks.iter().flatten().map(|s| s.content());
    let questions = bench.instances.iter().map(|i| i.question.clone());
    for content in sessions.chain(questions) {
        let text = truncate_for_embedding(&content);
        let digest = digest_hex(&content_digest(text));
        if seen.insert(digest.clone()) {
            let line = TextLine {
                digest,
                text: text.to_owned(),
            };
            let json = serde_json::to_string(&line).expect("line serializes");
            writeln!(w, "{json}").map_err(io_err(&a.out))?;
        }
    }
    w.flush().map_err(io_err(&a.out))?;
    println!("{} distinct texts", seen.len());
    Ok(())
}

fn cmd_import(a: ImportArgs) -> Result<()> {
    let file = fs::File::open(&a.input).map_err(io_err(&a.input))?;
    let mut sidecar: Option<EmbeddingSidecar> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&a.input))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: a.input.display().to_string(),
            line: i + 1,
            msg,
        };
        let v: VectorLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let digest = parse_digest(&v.digest).map_err(|e| parse_err(e.to_string()))?;
        sidecar
            .get_or_insert_with(|| EmbeddingSidecar::new(v.vector.len()))
            .insert(digest, v.vector)
            .map_err(|e| parse_err(e.to_string()))?;
    }
    let sidecar =
        sidecar.ok_or_else(|| Error::Data(format!("{} has no vectors", a.input.display())))?;
    sidecar.save(&a.out)?;
    println!(
        "{} vectors of dimension {}",
        sidecar.len(),
        sidecar.dimension()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Search(a) => cmd_search(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Classify(a) => cmd_classify(a),
        Command::DeriveRoutes(a) => cmd_derive(a),
        Command::Cv(a) => cmd_cv(a),
        Command::ExportTexts(a) => cmd_export(a),
        Command::ImportEmbeddings(a) => cmd_import(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! C ABI over the memroute engine.
//!
//! Every fallible call returns an [`MrStatus`]; on failure the message is
//! available from [`mr_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings passed
//! in must be NUL-terminated UTF-8.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use memroute::eval::{ndcg_at_k, recall_all_at_k};
use memroute::router::execute_pipeline;
use memroute::{
    Error, FileBackedProvider, Pipeline, QueryType, RankedList, RouteTable, RuleSet, ScoredDoc,
    Store,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Corrupt = 5,
    Config = 6,
    NotFound = 7,
    Data = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrPipeline {
    BaselineFts = 0,
    EnrichedFts = 1,
    Embeddings = 2,
    Hybrid = 3,
    EnrichedHybrid = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrQueryType {
    KnowledgeUpdate = 0,
    MultiSession = 1,
    SingleSessionAssistant = 2,
    SingleSessionPreference = 3,
    SingleSessionUser = 4,
    TemporalReasoning = 5,
    Abstention = 6,
}

impl From<MrPipeline> for Pipeline {
    fn from(p: MrPipeline) -> Self {
        Pipeline::ALL[p as usize]
    }
}

impl From<Pipeline> for MrPipeline {
    fn from(p: Pipeline) -> Self {
        match p {
            Pipeline::BaselineFts => MrPipeline::BaselineFts,
            Pipeline::EnrichedFts => MrPipeline::EnrichedFts,
            Pipeline::Embeddings => MrPipeline::Embeddings,
            Pipeline::Hybrid => MrPipeline::Hybrid,
            Pipeline::EnrichedHybrid => MrPipeline::EnrichedHybrid,
        }
    }
}

impl From<MrQueryType> for QueryType {
    fn from(q: MrQueryType) -> Self {
        match q {
            MrQueryType::KnowledgeUpdate => QueryType::KnowledgeUpdate,
            MrQueryType::MultiSession => QueryType::MultiSession,
            MrQueryType::SingleSessionAssistant => QueryType::SingleSessionAssistant,
            MrQueryType::SingleSessionPreference => QueryType::SingleSessionPreference,
            MrQueryType::SingleSessionUser => QueryType::SingleSessionUser,
            MrQueryType::TemporalReasoning => QueryType::TemporalReasoning,
            MrQueryType::Abstention => QueryType::Abstention,
        }
    }
}

impl From<QueryType> for MrQueryType {
    fn from(q: QueryType) -> Self {
        match q {
            QueryType::KnowledgeUpdate => MrQueryType::KnowledgeUpdate,
            QueryType::MultiSession => MrQueryType::MultiSession,
            QueryType::SingleSessionAssistant => MrQueryType::SingleSessionAssistant,
            QueryType::SingleSessionPreference => MrQueryType::SingleSessionPreference,
            QueryType::SingleSessionUser => MrQueryType::SingleSessionUser,
            QueryType::TemporalReasoning => MrQueryType::TemporalReasoning,
            QueryType::Abstention => MrQueryType::Abstention,
        }
    }
}

/// An opened store.
pub struct MrStore {
    store: Store,
}

/// A route table.
pub struct MrRouteTable {
    table: RouteTable,
}

/// Search results; ids stay valid until the handle is freed.
pub struct MrResults {
    items: Vec<(CString, f64)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MrStatus {
    match e {
        Error::Io { .. } => MrStatus::Io,
        Error::Corrupt { .. } | Error::Version { .. } => MrStatus::Corrupt,
        Error::Config(_) => MrStatus::Config,
        Error::MissingEmbedding(_) => MrStatus::NotFound,
        Error::Embedding { source, .. } => status_of(source),
        Error::Parse { .. } | Error::Vocabulary { .. } | Error::Schema { .. } | Error::Data(_) => {
            MrStatus::Data
        }
        Error::DuplicateDoc(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidArgument(_)
        | Error::Evaluation(_) => MrStatus::InvalidArgument,
    }
}

struct Fail(MrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MrStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MrStatus::NullArgument, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and NUL-terminated per the caller's contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(MrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to `n` valid NUL-terminated strings.
unsafe fn texts<'a>(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<&'a str>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: `p` points to `n` elements per the caller's contract.
    let ptrs = unsafe { std::slice::from_raw_parts(p, n) };
    ptrs.iter().map(|&s| unsafe { text(s, what) }).collect()
}

fn out_ptr<T>(out: *mut T) -> Result<&'static mut T, Fail> {
    // SAFETY: non-null out-parameters are writable per each function's contract.
    unsafe { out.as_mut() }.ok_or_else(|| null("output pointer"))
}

fn into_results(list: RankedList) -> Result<Box<MrResults>, Fail> {
    let items = list
        .items
        .into_iter()
        .map(|d| {
            CString::new(d.id)
                .map(|c| (c, d.score))
                .map_err(|_| Fail(MrStatus::Data, "session id contains NUL".into()))
        })
        .collect::<Result<_, _>>()?;
    Ok(Box::new(MrResults { items }))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Opens a store directory, verifying checksums.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_store_open(path: *const c_char, out: *mut *mut MrStore) -> MrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let path = unsafe { text(path, "path") }?;
        let store = Store::open(Path::new(path))?;
        *out = Box::into_raw(Box::new(MrStore { store }));
        Ok(())
    })
}

/// Attaches an embeddings sidecar used to embed queries.
///
/// # Safety
/// `store` must come from [`mr_store_open`]; `sidecar_path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mr_store_attach_embeddings(
    store: *mut MrStore,
    sidecar_path: *const c_char,
) -> MrStatus {
    guard(|| {
        let store = unsafe { store.as_mut() }.ok_or_else(|| null("store"))?;
        let path = unsafe { text(sidecar_path, "sidecar_path") }?;
        let provider = FileBackedProvider::open(format!("sidecar:{path}"), Path::new(path))?;
        store.store.attach_provider(Arc::new(provider))?;
        Ok(())
    })
}

/// Number of sessions in the store, or 0 for a null handle.
///
/// # Safety
/// `store` must be null or come from [`mr_store_open`].
#[no_mangle]
pub unsafe extern "C" fn mr_store_session_count(store: *const MrStore) -> usize {
    unsafe { store.as_ref() }.map_or(0, |s| s.store.session_count())
}

/// # Safety
/// `store` must be null or come from [`mr_store_open`], and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mr_store_free(store: *mut MrStore) {
    if !store.is_null() {
        drop(unsafe { Box::from_raw(store) });
    }
}

/// Runs one pipeline and returns at most `k` results.
///
/// # Safety
/// `store` must come from [`mr_store_open`]; `query` must be a NUL-terminated
/// string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_search(
    store: *const MrStore,
    pipeline: MrPipeline,
    query: *const c_char,
    k: usize,
    out: *mut *mut MrResults,
) -> MrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let store = unsafe { store.as_ref() }.ok_or_else(|| null("store"))?;
        let query = unsafe { text(query, "query") }?;
        let list = execute_pipeline(pipeline.into(), query, &store.store, k)?;
        *out = Box::into_raw(into_results(list)?);
        Ok(())
    })
}

/// Routes by `query_type` through `table` (the shipped table when null),
/// then searches. The chosen pipeline is written to `out_pipeline` when it
/// is non-null.
///
/// # Safety
/// As [`mr_search`]; `table` must be null or a live route table handle.
#[no_mangle]
pub unsafe extern "C" fn mr_search_routed(
    store: *const MrStore,
    table: *const MrRouteTable,
    query_type: MrQueryType,
    query: *const c_char,
    k: usize,
    out_pipeline: *mut MrPipeline,
    out: *mut *mut MrResults,
) -> MrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let store = unsafe { store.as_ref() }.ok_or_else(|| null("store"))?;
        let query = unsafe { text(query, "query") }?;
        let shipped;
        let table = match unsafe { table.as_ref() } {
            Some(t) => &t.table,
            None => {
                shipped = RouteTable::shipped();
                &shipped
            }
        };
        let pipeline = table.resolve(query_type.into())?;
        let list = execute_pipeline(pipeline, query, &store.store, k)?;
        if let Some(p) = unsafe { out_pipeline.as_mut() } {
            *p = pipeline.into();
        }
        *out = Box::into_raw(into_results(list)?);
        Ok(())
    })
}

/// # Safety
/// `results` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn mr_results_len(results: *const MrResults) -> usize {
    unsafe { results.as_ref() }.map_or(0, |r| r.items.len())
}

/// Session id at 0-based `index`, or null when out of range. Owned by the
/// results handle.
///
/// # Safety
/// `results` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn mr_results_id(results: *const MrResults, index: usize) -> *const c_char {
    unsafe { results.as_ref() }
        .and_then(|r| r.items.get(index))
        .map_or(ptr::null(), |(id, _)| id.as_ptr())
}

/// Score at 0-based `index`, or NaN when out of range.
///
/// # Safety
/// `results` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn mr_results_score(results: *const MrResults, index: usize) -> f64 {
    unsafe { results.as_ref() }
        .and_then(|r| r.items.get(index))
        .map_or(f64::NAN, |(_, s)| *s)
}

/// # Safety
/// `results` must be null or a live results handle, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mr_results_free(results: *mut MrResults) {
    if !results.is_null() {
        drop(unsafe { Box::from_raw(results) });
    }
}

/// The shipped route table.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_route_table_shipped(out: *mut *mut MrRouteTable) -> MrStatus {
    guard(|| {
        *out_ptr(out)? = Box::into_raw(Box::new(MrRouteTable {
            table: RouteTable::shipped(),
        }));
        Ok(())
    })
}

/// Loads a route table from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_route_table_load(
    path: *const c_char,
    out: *mut *mut MrRouteTable,
) -> MrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let path = unsafe { text(path, "path") }?;
        let table = RouteTable::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(MrRouteTable { table }));
        Ok(())
    })
}

/// # Safety
/// `table` must be a live route table handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_route_table_resolve(
    table: *const MrRouteTable,
    query_type: MrQueryType,
    out: *mut MrPipeline,
) -> MrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let table = unsafe { table.as_ref() }.ok_or_else(|| null("table"))?;
        *out = table.table.resolve(query_type.into())?.into();
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a live route table handle, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mr_route_table_free(table: *mut MrRouteTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// Classifies a query with the shipped rules.
///
/// # Safety
/// `query` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_classify(query: *const c_char, out: *mut MrQueryType) -> MrStatus {
    thread_local! {
        static RULES: RuleSet = RuleSet::shipped();
    }
    guard(|| {
        let out = out_ptr(out)?;
        let query = unsafe { text(query, "query") }?;
        *out = RULES.with(|r| r.classify(query)).into();
        Ok(())
    })
}

fn ranked(ids: &[&str]) -> RankedList {
    RankedList {
        source: "ffi".into(),
        items: ids
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredDoc {
                id: (*id).to_owned(),
                score: -(i as f64),
            })
            .collect(),
    }
}

type MetricFn = fn(&RankedList, &HashSet<String>, usize) -> f64;

/// # Safety
/// See [`mr_recall_all_at_k`].
unsafe fn metric(
    f: MetricFn,
    retrieved: *const *const c_char,
    n_retrieved: usize,
    gold: *const *const c_char,
    n_gold: usize,
    k: usize,
    out: *mut f64,
) -> MrStatus {
    guard(|| {
        let out = out_ptr(out)?;
        if k == 0 {
            return Err(Fail(
                MrStatus::InvalidArgument,
                "k must be at least 1".into(),
            ));
        }
        let retrieved = unsafe { texts(retrieved, n_retrieved, "retrieved") }?;
        let gold: HashSet<String> = unsafe { texts(gold, n_gold, "gold") }?
            .into_iter()
            .map(str::to_owned)
            .collect();
        *out = f(&ranked(&retrieved), &gold, k);
        Ok(())
    })
}

/// All-or-nothing recall at `k` of a ranked id list against a gold set.
///
/// # Safety
/// `retrieved` and `gold` must point to `n_retrieved` and `n_gold`
/// NUL-terminated strings (either may be null when its count is 0); `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mr_recall_all_at_k(
    retrieved: *const *const c_char,
    n_retrieved: usize,
    gold: *const *const c_char,
    n_gold: usize,
    k: usize,
    out: *mut f64,
) -> MrStatus {
    unsafe {
        metric(
            recall_all_at_k,
            retrieved,
            n_retrieved,
            gold,
            n_gold,
            k,
            out,
        )
    }
}

/// Binary-relevance NDCG at `k`.
///
/// # Safety
/// As [`mr_recall_all_at_k`].
#[no_mangle]
pub unsafe extern "C" fn mr_ndcg_at_k(
    retrieved: *const *const c_char,
    n_retrieved: usize,
    gold: *const *const c_char,
    n_gold: usize,
    k: usize,
    out: *mut f64,
) -> MrStatus {
    unsafe { metric(ndcg_at_k, retrieved, n_retrieved, gold, n_gold, k, out) }
}

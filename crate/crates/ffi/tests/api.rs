use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use memroute::benchmark::{Session, Turn};
use memroute::store::BuildOptions;
use memroute::{EmbeddingProvider, HashedBagOfWords, Store, Vocabulary};
use memroute_ffi::*;

fn session(id: &str, text: &str) -> Session {
    Session {
        id: id.into(),
        date: None,
        turns: vec![Turn {
            role: "user".into(),
            content: text.into(),
        }],
    }
}

fn build(dir: &Path) -> CString {
    let sessions = [
        session("s1", "I took a cocktail-making class last weekend"),
        session("s2", "My dog needs a new collar"),
        session("s3", "Filing taxes is tedious"),
    ];
    let provider: Arc<dyn EmbeddingProvider> = Arc::new(HashedBagOfWords::new(64).unwrap());
    let path = dir.join("store");
    Store::build(
        &sessions,
        &Vocabulary::shipped(),
        Some(provider),
        BuildOptions::default(),
    )
    .unwrap()
    .save(&path, None)
    .unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = mr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn ids(r: *const MrResults) -> Vec<String> {
    (0..mr_results_len(r))
        .map(|i| {
            CStr::from_ptr(mr_results_id(r, i))
                .to_str()
                .unwrap()
                .to_owned()
        })
        .collect()
}

#[test]
fn open_search_free() {
    let dir = tempfile::tempdir().unwrap();
    let path = build(dir.path());
    unsafe {
        let mut store = ptr::null_mut();
        assert_eq!(mr_store_open(path.as_ptr(), &mut store), MrStatus::Ok);
        assert_eq!(mr_store_session_count(store), 3);

        let q = CString::new("beverage").unwrap();
        let mut res = ptr::null_mut();
        assert_eq!(
            mr_search(store, MrPipeline::BaselineFts, q.as_ptr(), 5, &mut res),
            MrStatus::Ok
        );
        assert_eq!(mr_results_len(res), 0);
        mr_results_free(res);

        assert_eq!(
            mr_search(store, MrPipeline::EnrichedFts, q.as_ptr(), 5, &mut res),
            MrStatus::Ok
        );
        assert_eq!(ids(res), ["s1"]);
        assert!(mr_results_score(res, 0) > 0.0);
        assert!(mr_results_score(res, 1).is_nan());
        assert!(mr_results_id(res, 1).is_null());
        mr_results_free(res);

        let mut chosen = MrPipeline::BaselineFts;
        assert_eq!(
            mr_search_routed(
                store,
                ptr::null(),
                MrQueryType::MultiSession,
                q.as_ptr(),
                2,
                &mut chosen,
                &mut res
            ),
            MrStatus::Ok
        );
        assert_eq!(chosen, MrPipeline::EnrichedHybrid);
        assert!(mr_results_len(res) <= 2);
        mr_results_free(res);

        assert_eq!(
            mr_search_routed(
                store,
                ptr::null(),
                MrQueryType::Abstention,
                q.as_ptr(),
                2,
                &mut chosen,
                &mut res
            ),
            MrStatus::InvalidArgument
        );
        assert!(res.is_null());
        mr_store_free(store);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut store = ptr::null_mut();
        let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
        assert_eq!(mr_store_open(missing.as_ptr(), &mut store), MrStatus::Io);
        assert!(store.is_null());
        assert!(last_error().contains("nope"));

        assert_eq!(
            mr_store_open(ptr::null(), &mut store),
            MrStatus::NullArgument
        );
        assert_eq!(
            mr_store_open(missing.as_ptr(), ptr::null_mut()),
            MrStatus::NullArgument
        );

        let bad = [0xffu8, 0];
        assert_eq!(
            mr_store_open(bad.as_ptr() as *const c_char, &mut store),
            MrStatus::InvalidUtf8
        );

        let path = build(dir.path());
        let raw = dir.path().join("store/raw.lex");
        let bytes = std::fs::read(&raw).unwrap();
        std::fs::write(&raw, &bytes[..10]).unwrap();
        assert_eq!(mr_store_open(path.as_ptr(), &mut store), MrStatus::Corrupt);
        assert!(last_error().contains("raw.lex"));

        let q = CString::new("x").unwrap();
        let mut res = ptr::null_mut();
        assert_eq!(
            mr_search(ptr::null(), MrPipeline::Hybrid, q.as_ptr(), 5, &mut res),
            MrStatus::NullArgument
        );
    }
}

#[test]
fn route_tables_and_classifier() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(mr_route_table_shipped(&mut t), MrStatus::Ok);
        let mut p = MrPipeline::BaselineFts;
        assert_eq!(
            mr_route_table_resolve(t, MrQueryType::TemporalReasoning, &mut p),
            MrStatus::Ok
        );
        assert_eq!(p, MrPipeline::Hybrid);
        assert_eq!(
            mr_route_table_resolve(t, MrQueryType::Abstention, &mut p),
            MrStatus::InvalidArgument
        );
        mr_route_table_free(t);

        let bad = CString::new("/definitely/missing.toml").unwrap();
        assert_eq!(mr_route_table_load(bad.as_ptr(), &mut t), MrStatus::Io);

        let q = CString::new("When did I last visit the dentist?").unwrap();
        let mut qt = MrQueryType::Abstention;
        assert_eq!(mr_classify(q.as_ptr(), &mut qt), MrStatus::Ok);
        assert_eq!(qt, MrQueryType::TemporalReasoning);
    }
}

#[test]
fn metrics() {
    let owned: Vec<CString> = ["a", "x", "b", "y"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let retrieved: Vec<*const c_char> = owned.iter().map(|c| c.as_ptr()).collect();
    let gold = [retrieved[0], retrieved[2]];
    let mut v = 0.0;
    unsafe {
        assert_eq!(
            mr_ndcg_at_k(retrieved.as_ptr(), 4, gold.as_ptr(), 2, 5, &mut v),
            MrStatus::Ok
        );
        assert!((v - 0.9197207891481876).abs() < 1e-12);
        assert_eq!(
            mr_recall_all_at_k(retrieved.as_ptr(), 4, gold.as_ptr(), 2, 5, &mut v),
            MrStatus::Ok
        );
        assert_eq!(v, 1.0);
        assert_eq!(
            mr_recall_all_at_k(retrieved.as_ptr(), 4, gold.as_ptr(), 2, 2, &mut v),
            MrStatus::Ok
        );
        assert_eq!(v, 0.0);
        assert_eq!(
            mr_recall_all_at_k(retrieved.as_ptr(), 4, ptr::null(), 0, 5, &mut v),
            MrStatus::Ok
        );
        assert_eq!(v, 0.0);
        assert_eq!(
            mr_ndcg_at_k(retrieved.as_ptr(), 4, gold.as_ptr(), 2, 0, &mut v),
            MrStatus::InvalidArgument
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

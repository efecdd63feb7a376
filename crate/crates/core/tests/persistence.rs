use std::collections::HashSet;
use std::fs;
use std::sync::Arc;

use memroute::benchmark::{load_benchmark, parse_benchmark, write_benchmark, Session, Turn};
use memroute::store::{
    BuildOptions, Store, ENRICHED_INDEX_FILE, RAW_INDEX_FILE, VECTOR_INDEX_FILE,
};
use memroute::{EmbeddingProvider, Error, HashedBagOfWords, Vocabulary};

fn cocktail_session() -> Session {
    let turns = [
        ("user", "I took a cocktail-making class last weekend"),
        (
            "assistant",
            "That sounds fun! What cocktails did you learn to make?",
        ),
        ("user", "We made mojitos and old fashioneds"),
    ];
    Session {
        id: "s1".into(),
        date: Some("2023/05/20 (Sat) 02:21".into()),
        turns: turns
            .iter()
            .map(|(r, c)| Turn {
                role: (*r).into(),
                content: (*c).into(),
            })
            .collect(),
    }
}

fn hashed() -> Option<Arc<dyn EmbeddingProvider>> {
    Some(Arc::new(HashedBagOfWords::new(128).unwrap()))
}

#[test]
fn worked_example_enriched_tokens() {
    let store = Store::build(
        &[cocktail_session()],
        &Vocabulary::shipped(),
        hashed(),
        BuildOptions::default(),
    )
    .unwrap();
    let enriched = store.enriched_index();
    let raw = store.raw_index();
    for t in [
        "beverage",
        "mixed_drink",
        "food_dining",
        "lesson",
        "workshop",
        "old_fashioned",
        "cocktail_recipe",
        "preparing",
        "cuisine",
        "ingredients",
    ] {
        assert!(
            enriched.term_frequency(t, "s1") > 0,
            "{t} missing from enriched index"
        );
        assert_eq!(raw.term_frequency(t, "s1"), 0, "{t} leaked into raw index");
    }
    // Raw tokens keep their counts; "cocktail" gains enrichment mentions.
    assert_eq!(
        raw.term_frequency("mojitos", "s1"),
        enriched.term_frequency("mojitos", "s1")
    );
    assert!(enriched.term_frequency("cocktail", "s1") > raw.term_frequency("cocktail", "s1"));
}

#[test]
fn raw_indices_hold_no_enrichment_only_terms() {
    let vocab = Vocabulary::parse(
        "@version T\n[hypernyms]\nalpha -> zzbridge, zzother\n[rooms]\nzzroom | alpha, beta | zzroomterm\n",
        "test",
    )
    .unwrap();
    let sessions = [
        Session {
            id: "a".into(),
            date: None,
            turns: vec![Turn {
                role: "user".into(),
                content: "alpha beta gamma".into(),
            }],
        },
        Session {
            id: "b".into(),
            date: None,
            turns: vec![Turn {
                role: "user".into(),
                content: "delta alpha".into(),
            }],
        },
    ];
    let store = Store::build(&sessions, &vocab, hashed(), BuildOptions::default()).unwrap();
    let enrichment_only: HashSet<&str> = ["zzbridge", "zzother", "zzroom", "zzroomterm"].into();
    let raw_terms: HashSet<&str> = store.raw_index().terms().collect();
    assert!(raw_terms.is_disjoint(&enrichment_only));
    let enriched_terms: HashSet<&str> = store.enriched_index().terms().collect();
    assert!(enrichment_only.is_subset(&enriched_terms));

    // Vectors embed raw content only.
    let p = HashedBagOfWords::new(128).unwrap();
    let raw_vec = p.embed("user: alpha beta gamma").unwrap();
    assert_eq!(
        store.vector_index().unwrap().get("a").unwrap(),
        raw_vec.as_slice()
    );
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sessions = [cocktail_session()];
    for name in ["one", "two"] {
        Store::build(
            &sessions,
            &Vocabulary::shipped(),
            hashed(),
            BuildOptions::default(),
        )
        .unwrap()
        .save(&dir.path().join(name), Some("q"))
        .unwrap();
    }
    for f in [RAW_INDEX_FILE, ENRICHED_INDEX_FILE, VECTOR_INDEX_FILE] {
        assert_eq!(
            fs::read(dir.path().join("one").join(f)).unwrap(),
            fs::read(dir.path().join("two").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tampered_byte_is_detected_in_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s");
    let built = Store::build(
        &[cocktail_session()],
        &Vocabulary::shipped(),
        hashed(),
        BuildOptions::default(),
    )
    .unwrap();
    let manifest = built.save(&path, None).unwrap();
    for name in manifest.files.keys() {
        let f = path.join(name);
        let orig = fs::read(&f).unwrap();
        let mut bad = orig.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        fs::write(&f, &bad).unwrap();
        assert!(
            matches!(Store::open(&path), Err(Error::Corrupt { .. })),
            "{name}"
        );
        fs::write(&f, &orig).unwrap();
    }
    Store::open(&path).unwrap();
}

#[test]
fn missing_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Store::open(dir.path()), Err(Error::Io { .. })));
}

#[test]
fn shipped_fixture_round_trips() {
    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_benchmark.json");
    let b = load_benchmark(&path).unwrap();
    assert_eq!(b.instances.len(), 1);
    assert_eq!(b.retrieval_count(), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.json");
    write_benchmark(&out, &b).unwrap();
    let again = load_benchmark(&out).unwrap();
    assert_eq!(again.instances, b.instances);
    assert_eq!(again.haystacks, b.haystacks);
}

#[test]
fn schema_errors_name_instance_and_field() {
    let text = r#"[{"question_id": "q7", "question_type": "multi-session", "question": "x",
        "haystack_session_ids": ["a"], "haystack_sessions": [[{"role": "user"}]],
        "answer_session_ids": ["a"]}]"#;
    match parse_benchmark(text) {
        Err(Error::Schema {
            instance, field, ..
        }) => {
            assert_eq!(instance, "q7");
            assert!(field.contains("haystack_sessions"), "{field}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let text = r#"[{"question_id": "q8", "question_type": "multi-session", "question": "x",
        "haystack_session_ids": ["a"], "haystack_sessions": [[]], "answer_session_ids": ["zz"]}]"#;
    assert!(matches!(parse_benchmark(text), Err(Error::Data(m)) if m.contains("zz")));
}

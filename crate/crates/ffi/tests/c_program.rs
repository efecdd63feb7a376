//! Compiles a small C program against the generated header and the static
//! library, then runs it against a freshly built store.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use memroute::benchmark::{Session, Turn};
use memroute::store::BuildOptions;
use memroute::{EmbeddingProvider, HashedBagOfWords, Store, Vocabulary};

const PROGRAM: &str = r#"
#include <stdio.h>
#include "memroute.h"

int main(int argc, char **argv) {
    MrStore *store = NULL;
    MrResults *res = NULL;
    MrPipeline chosen;
    if (argc < 2) return 10;
    if (mr_store_open(argv[1], &store) != MR_STATUS_OK) {
        fprintf(stderr, "%s\n", mr_last_error_message());
        return 11;
    }
    if (mr_search_routed(store, NULL, MR_QUERY_TYPE_KNOWLEDGE_UPDATE, "beverage", 5, &chosen, &res) != MR_STATUS_OK)
        return 12;
    printf("pipeline %d\n", (int)chosen);
    for (size_t i = 0; i < mr_results_len(res); i++)
        printf("%s %.6f\n", mr_results_id(res, i), mr_results_score(res, i));
    mr_results_free(res);
    if (mr_store_open("/no/such/store", &store) != MR_STATUS_IO) return 13;
    mr_store_free(store);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let lib = target_dir().join("libmemroute_ffi.a");
    assert!(lib.is_file(), "static library missing at {}", lib.display());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("demo.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("demo");
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let sessions = [
        Session {
            id: "s1".into(),
            date: None,
            turns: vec![Turn {
                role: "user".into(),
                content: "I took a cocktail-making class".into(),
            }],
        },
        Session {
            id: "s2".into(),
            date: None,
            turns: vec![Turn {
                role: "user".into(),
                content: "My dog needs a collar".into(),
            }],
        },
    ];
    let provider: Arc<dyn EmbeddingProvider> = Arc::new(HashedBagOfWords::new(32).unwrap());
    let store = dir.path().join("store");
    Store::build(
        &sessions,
        &Vocabulary::shipped(),
        Some(provider),
        BuildOptions::default(),
    )
    .unwrap()
    .save(&store, None)
    .unwrap();

    let run = Command::new(&exe).arg(&store).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("pipeline 1"));
    assert!(lines.next().unwrap().starts_with("s1 "));
    assert_eq!(lines.next(), None);
}

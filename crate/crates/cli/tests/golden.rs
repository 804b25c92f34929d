//! `ctx query --format json` and `GET /relate` must both produce the checked-in
//! bytes (with `elapsed_ms` zeroed). Set `CTXSCOPE_UPDATE_GOLDEN=1` to rewrite
//! the files after an intended output change.

mod support;

use std::path::PathBuf;

use ctxscope_cli::{run_ingest, run_query, Format, IngestArgs, QueryArgs};
use ctxscope_core::fixtures;
use support::{encode, strip_elapsed, Server};

const CASES: [(&str, &str); 3] = [
    ("svm", "tiny_svm.json"),
    ("child care", "tiny_child_care.json"),
    ("[author:van grondelle r] [journal:0005-2728]", "tiny_van_grondelle.json"),
];

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn cli_and_server_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tiny.jsonl");
    std::fs::write(&input, fixtures::tiny_corpus_jsonl()).unwrap();
    let index = dir.path().join("tiny.ctx");
    let args = IngestArgs {
        input,
        out: index.clone(),
        dims: 64,
        max_terms: 1_000_000,
        seed: 42,
        stopwords: None,
        background_sample: 10_000,
    };
    run_ingest(&args, &mut Vec::new()).unwrap();
    let server = Server::start(Some(&index), |_| {});

    let update = std::env::var_os("CTXSCOPE_UPDATE_GOLDEN").is_some();
    for (text, file) in CASES {
        let mut out = Vec::new();
        let q = QueryArgs { text: text.into(), index: index.clone(), types: None, k: 20, format: Format::Json };
        run_query(&q, &mut out).unwrap();
        let cli = strip_elapsed(String::from_utf8(out).unwrap().trim_end());
        let (status, body) = server.get(&format!("/relate?input={}", encode(text)));
        assert_eq!(status, 200);
        let http = strip_elapsed(&body);

        if update {
            std::fs::write(golden(file), format!("{cli}\n")).unwrap();
        }
        let expected = std::fs::read_to_string(golden(file)).unwrap();
        assert_eq!(cli, expected.trim_end(), "CLI output for {text:?} differs from {file}");
        assert_eq!(http, expected.trim_end(), "HTTP output for {text:?} differs from {file}");
    }
}

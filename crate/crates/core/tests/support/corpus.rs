//! Loading the bundled 40-advisory corpus and its scripted oracle.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use vulnchunk_core::ingest::{ingest_record, load_osv_dir, Candidate, Fetcher};
use vulnchunk_core::labeler::LabeledSample;
use vulnchunk_core::oracle::{MockBackend, OracleBackend, OracleClient, RetryPolicy};

pub fn corpus40() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/corpus40")
        .canonicalize()
        .expect("corpus40 fixture present")
}

pub fn candidates() -> Vec<Candidate> {
    let dir = corpus40();
    let (records, errors) = load_osv_dir(&dir.join("osv")).unwrap();
    assert!(errors.is_empty());
    let fetcher = Fetcher::local(dir.join("cache"));
    records.iter().flat_map(|r| ingest_record(r, &fetcher).candidates).collect()
}

pub fn mock_backend() -> Arc<dyn OracleBackend> {
    Arc::new(MockBackend::from_jsonl(&corpus40().join("oracle.jsonl")).unwrap())
}

pub fn client(backend: Arc<dyn OracleBackend>) -> OracleClient {
    OracleClient::new(
        backend,
        RetryPolicy {
            max_attempts: 3,
            backoff: Duration::ZERO,
        },
    )
}

/// CVE id to answer policy (`hit`, `miss`, `none`, ...).
pub fn policies() -> BTreeMap<String, String> {
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(corpus40().join("manifest.json")).unwrap()).unwrap();
    serde_json::from_value(m["policies"].clone()).unwrap()
}

pub fn to_jsonl(samples: &[LabeledSample]) -> String {
    samples
        .iter()
        .map(|s| serde_json::to_string(s).unwrap() + "\n")
        .collect()
}

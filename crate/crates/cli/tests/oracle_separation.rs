//! Library and binary sources must never read the expected-results files.

use std::path::Path;

fn scan(dir: &Path, hits: &mut Vec<String>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            scan(&p, hits);
        } else if p.extension().is_some_and(|e| e == "rs") {
            let text = std::fs::read_to_string(&p).unwrap();
            for (i, line) in text.lines().enumerate() {
                if line.contains("fixtures/oracle") || line.contains("manifest.json") {
                    hits.push(format!("{}:{}", p.display(), i + 1));
                }
            }
        }
    }
}

#[test]
fn sources_do_not_reference_expected_results() {
    let crates = Path::new(env!("CARGO_MANIFEST_DIR")).join("..");
    let mut hits = Vec::new();
    for c in std::fs::read_dir(&crates).unwrap() {
        let src = c.unwrap().path().join("src");
        if src.is_dir() {
            scan(&src, &mut hits);
        }
    }
    assert!(hits.is_empty(), "{hits:?}");
}

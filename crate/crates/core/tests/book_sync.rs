//! Every guide chapter must be wired into the doc-tests and listed in the
//! table of contents.

use std::path::{Path, PathBuf};

fn chapters(dir: &Path, out: &mut Vec<PathBuf>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            chapters(&p, out);
        } else if p.extension().is_some_and(|x| x == "md") && !p.ends_with("SUMMARY.md") {
            out.push(p);
        }
    }
}

#[test]
fn chapters_are_doc_tested_and_listed() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let src = root.join("../../book/src");
    let lib = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let summary = std::fs::read_to_string(src.join("SUMMARY.md")).unwrap();
    let mut found = Vec::new();
    chapters(&src, &mut found);
    assert!(!found.is_empty());
    for p in found {
        let rel = p
            .strip_prefix(&src)
            .unwrap()
            .to_string_lossy()
            .replace('\\', "/");
        assert!(
            lib.contains(&format!("book/src/{rel}\"")),
            "{rel} is not doc-tested"
        );
        assert!(
            summary.contains(&format!("({rel})")),
            "{rel} is not in SUMMARY.md"
        );
    }
}

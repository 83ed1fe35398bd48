use std::path::PathBuf;

use confdep::ecosystem::compile_ecosystem;
use confdep::ir::{execute, ExecConfig, IrProgram, Outcome, Value};
use confdep::taint::{analyze, load_user_input, AnalysisInput, ParamId, TaintOptions};

fn fixture() -> (AnalysisInput, IrProgram) {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/minifs");
    let input = load_user_input(&root.join("input.json")).unwrap();
    let prog = compile_ecosystem(&input, &root.join("src")).unwrap();
    (input, prog)
}

fn p(c: &str, n: &str) -> ParamId {
    ParamId::new(c, n)
}

#[test]
fn input_has_four_components_and_twelve_params() {
    let (input, _) = fixture();
    assert_eq!(input.components.len(), 4);
    assert_eq!(input.params().count(), 12);
}

#[test]
fn mkfs_blocksize_1024_writes_log_block_size_zero() {
    let (input, prog) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExecConfig {
        defaults: input.exec_defaults("mini-mkfs"),
        ..Default::default()
    };
    let argv = vec![
        ("blocksize".to_string(), "1024".to_string()),
        ("cluster_size".to_string(), "1024".to_string()),
    ];
    let r = execute(&prog, "mini-mkfs", &argv, dir.path(), &cfg);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    let img = r.image_after.unwrap();
    assert_eq!(img.get("s_log_block_size"), Some(&Value::Int(0)));
    assert!(dir.path().join("fs.img").exists());
}

#[test]
fn mkfs_blocksize_1000_is_not_a_power_of_two() {
    let (input, prog) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExecConfig {
        defaults: input.exec_defaults("mini-mkfs"),
        ..Default::default()
    };
    let argv = vec![("blocksize".to_string(), "1000".to_string())];
    let r = execute(&prog, "mini-mkfs", &argv, dir.path(), &cfg);
    assert_eq!(r.exit_code, 1);
    assert_eq!(r.outcome, Outcome::Completed);
    assert!(r.stderr.contains("blocksize must be a power of 2"));
}

#[test]
fn blocksize_trace_writes_log_block_size_once() {
    let (input, prog) = fixture();
    let a = analyze(&prog, &input, &TaintOptions::default()).unwrap();
    let t = &a.traces[&p("mini-mkfs", "blocksize")];
    let writes: Vec<&str> = t
        .sb_writes
        .iter()
        .filter(|w| w.field == "s_log_block_size")
        .map(|w| w.field.as_str())
        .collect();
    assert_eq!(writes.len(), 1);
}

#[test]
fn inode_size_reaches_fsck_branch() {
    let (input, prog) = fixture();
    let a = analyze(&prog, &input, &TaintOptions::default()).unwrap();
    let t = &a.traces[&p("mini-mkfs", "inode_size")];
    assert!(t.sb_writes.iter().any(|w| w.field == "s_inode_size"));
    assert!(t
        .branch_sites
        .iter()
        .any(|s| s.instr.component == "mini-fsck"));
    let entry = &a.field_map.fields["s_inode_size"];
    assert!(entry.writers.contains_key(&p("mini-mkfs", "inode_size")));
    assert!(entry.readers.iter().any(|(c, _)| c == "mini-fsck"));
}

#[test]
fn unread_field_has_no_readers() {
    let (input, prog) = fixture();
    let a = analyze(&prog, &input, &TaintOptions::default()).unwrap();
    assert!(a.field_map.fields["s_log_cluster_size"].readers.is_empty());
}

//! Cross-module properties checked on the bundled ecosystem and on small
//! hand-written programs.

mod common;

use std::collections::BTreeSet;

use common::{fixture, fixture_dir};
use confdep::frontend::ast::Stmt;
use confdep::frontend::{lower_unit_counted, parse_unit, SourceUnit};
use confdep::ir::{execute, ExecConfig};
use proptest::prelude::*;

fn count_stmts(body: &[Stmt]) -> usize {
    body.iter()
        .map(|s| {
            1 + match s {
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => count_stmts(then_body) + else_body.as_deref().map_or(0, count_stmts),
                Stmt::While { body, .. } => count_stmts(body),
                _ => 0,
            }
        })
        .sum()
}

#[test]
fn lowering_visits_every_statement() {
    for entry in std::fs::read_dir(fixture_dir().join("src")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let ast = parse_unit(&SourceUnit::new("c", path.display().to_string(), text)).unwrap();
        let (_, visited) = lower_unit_counted(&ast).unwrap();
        let total: usize = ast.functions.iter().map(|f| count_stmts(&f.body)).sum();
        assert_eq!(visited, total, "{}", path.display());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identical_runs_give_identical_results(
        b in prop::sample::select(vec![512i64, 1000, 1024, 2048, 4096, 65536, 70000]),
        c in prop::sample::select(vec![1024i64, 2048, 8192]),
        bigalloc in any::<bool>(),
    ) {
        let f = fixture();
        let argv = vec![
            ("blocksize".to_string(), b.to_string()),
            ("cluster_size".to_string(), c.to_string()),
            ("bigalloc".to_string(), if bigalloc { "on" } else { "off" }.to_string()),
        ];
        let config = ExecConfig {
            defaults: f.input.exec_defaults("mini-mkfs"),
            ..ExecConfig::default()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let one = execute(&f.prog, "mini-mkfs", &argv, a.path(), &config);
        let two = execute(&f.prog, "mini-mkfs", &argv, b.path(), &config);
        prop_assert_eq!(one, two);
    }
}

const TWO_PARAMS: &str = r#"{
  "ecosystem": "demo",
  "components": {
    "demo": {
      "source": "demo.confc",
      "entry_function": "main",
      "superblock_variable": "sb",
      "parameters": [
        { "name": "a", "kind": "int", "default": 1 },
        { "name": "b", "kind": "int", "default": 2 }
      ]
    }
  },
  "scenario": [{ "component": "demo" }]
}"#;

const HELPER: &str = r#"
@superblock
record Superblock {
    s_a: int,
    s_b: int,
}

global sb: Superblock;

fn twice(v: int) -> int {
    return v + v;
}

fn main() {
    a = param_int("a");
    b = param_int("b");
    x = twice(a);
    y = twice(b);
    sb.s_a = x;
    sb.s_b = y;
    store_image("fs.img", sb);
}
"#;

fn analyze_demo(src: &str) -> confdep::taint::Analysis {
    use confdep::frontend::compile_unit;
    use confdep::ir::IrProgram;
    use confdep::taint::{analyze, parse_input, TaintOptions};
    let input = parse_input(TWO_PARAMS).unwrap();
    let (_, fns) = compile_unit(&SourceUnit::new("demo", "demo.confc", src)).unwrap();
    let prog = IrProgram::assemble(vec![("demo".to_string(), fns)]).unwrap();
    analyze(&prog, &input, &TaintOptions::default()).unwrap()
}

fn demo(name: &str) -> confdep::taint::ParamId {
    confdep::taint::ParamId::new("demo", name)
}

#[test]
fn helper_calls_are_kept_apart_by_context() {
    let an = analyze_demo(HELPER);
    let in_helper = |p: &str| -> BTreeSet<_> {
        an.traces[&demo(p)]
            .sites
            .iter()
            .filter(|s| s.instr.function == "twice")
            .map(|s| s.context.clone())
            .collect()
    };
    let (ca, cb) = (in_helper("a"), in_helper("b"));
    assert_eq!(ca.len(), 1);
    assert_eq!(cb.len(), 1);
    assert_ne!(ca, cb);
    let fields = |p: &str| -> Vec<String> {
        an.traces[&demo(p)]
            .sb_writes
            .iter()
            .map(|w| w.field.clone())
            .collect()
    };
    assert_eq!(fields("a"), ["s_a"]);
    assert_eq!(fields("b"), ["s_b"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Appending copies of a tainted value at the end of `main` keeps every
    /// earlier site.
    #[test]
    fn extra_copies_never_remove_sites(
        copies in prop::collection::vec(prop::sample::select(vec!["a", "b", "x", "y"]), 1..4)
    ) {
        let base = analyze_demo(HELPER);
        let extra: String = copies
            .iter()
            .enumerate()
            .map(|(i, v)| format!("    c{i} = {v};\n"))
            .collect();
        let src = HELPER.replacen("    store_image(\"fs.img\", sb);\n", &format!("    store_image(\"fs.img\", sb);\n{extra}"), 1);
        let more = analyze_demo(&src);
        for p in ["a", "b"] {
            let before: BTreeSet<_> = base.traces[&demo(p)].sites.iter().cloned().collect();
            let after: BTreeSet<_> = more.traces[&demo(p)].sites.iter().cloned().collect();
            prop_assert!(before.is_subset(&after));
        }
    }
}

#[test]
fn dependencies_are_pairwise_and_anchored() {
    use confdep::deps::{extract, DepSource, ExtractOptions};
    use confdep::taint::Site;
    let f = fixture();
    let (_, an) = extract(&f.prog, &f.input, &ExtractOptions::default()).unwrap();
    for d in &f.doc.dependencies {
        assert!((1..=2).contains(&d.participants.len()), "{}", d.id);
        if d.source != DepSource::ExtractedTaint {
            continue;
        }
        for e in &d.evidence {
            let site = Site {
                context: e.context.clone(),
                instr: e.instr.clone(),
            };
            let labels = an.sites.get(&site).map(|t| t.all()).unwrap_or_default();
            let missing: Vec<_> = d
                .participants
                .iter()
                .filter(|p| !labels.contains(p))
                .collect();
            assert!(
                missing.is_empty(),
                "{} at {}: {missing:?} not tainting",
                d.id,
                e.loc
            );
        }
    }
}

/// Running the scenario under all four settings of a control dependency's
/// flags fails exactly where the polarity says it should.
#[test]
fn control_polarity_matches_execution() {
    use confdep::deps::{Constraint, Polarity};
    use confdep::ir::DEFAULT_STEP_BUDGET;
    use confdep::scenario::{args_from_assignment, run_scenario};
    use confdep::stategen::assignment_from_pairs;
    use confdep::taint::ParamValue;
    let f = fixture();
    let mut checked = 0;
    for d in &f.doc.dependencies {
        let Constraint::Control { polarity } = d.constraint else {
            continue;
        };
        for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
            let a = assignment_from_pairs([
                (d.participants[0].clone(), ParamValue::Flag(x)),
                (d.participants[1].clone(), ParamValue::Flag(y)),
            ]);
            let dir = tempfile::tempdir().unwrap();
            let run = run_scenario(
                &f.prog,
                &f.input,
                &args_from_assignment(&a),
                dir.path(),
                DEFAULT_STEP_BUDGET,
                None,
            );
            let should_fail = match polarity {
                Polarity::Requires => x && !y,
                Polarity::Conflicts => x && y,
            };
            assert_eq!(
                run.first_failure().is_some(),
                should_fail,
                "{} with ({x}, {y})",
                d.id
            );
        }
        checked += 1;
    }
    assert_eq!(checked, 4);
}

fn fixture_scripts() -> Vec<confdep::plugins::TestScript> {
    use confdep::plugins::parse_script;
    let dir = fixture_dir().join("tests");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .iter()
        .filter_map(|p| {
            let name = p.file_name().unwrap();
            parse_script(
                std::path::Path::new(name),
                &std::fs::read_to_string(p).unwrap(),
                &fixture().input,
            )
            .ok()
        })
        .collect()
}

#[test]
fn rewrites_touch_only_invocations_and_append_adds_no_violation() {
    use confdep::plugins::{existing_assignment, rewrite_tests, RewriteMode};
    use confdep::stategen::{build_tree, validate_state, Policy, TreeOptions};
    let f = fixture();
    let states = build_tree(&f.doc, &f.input, Policy::Following, &TreeOptions::default()).nodes;
    let scripts = fixture_scripts();
    assert_eq!(scripts.len(), 5);
    for script in &scripts {
        let sites: BTreeSet<usize> = script.sites.iter().map(|s| s.line).collect();
        let base = existing_assignment(script, &f.input);
        let before: BTreeSet<String> = validate_state(&base, &f.doc, &f.input)
            .violated()
            .iter()
            .cloned()
            .collect();
        for mode in [RewriteMode::Replace, RewriteMode::Append] {
            for out in rewrite_tests(script, &states, mode, &f.doc, &f.input).unwrap() {
                let lines: Vec<&str> = out.text.lines().collect();
                assert!(lines[0].starts_with("# confdep: state "));
                assert_eq!(lines.len() - 1, script.lines.len());
                for (i, (new, old)) in lines[1..].iter().zip(&script.lines).enumerate() {
                    assert!(
                        new == old || sites.contains(&i),
                        "{} line {i}",
                        out.file_name()
                    );
                }
                if mode == RewriteMode::Append {
                    let reparsed =
                        confdep::plugins::parse_script(&script.path, &out.text, &f.input).unwrap();
                    let union = existing_assignment(&reparsed, &f.input);
                    let after = validate_state(&union, &f.doc, &f.input);
                    assert!(
                        after.violated().iter().all(|id| before.contains(id)),
                        "{}",
                        out.file_name()
                    );
                }
            }
        }
    }
}

#[test]
fn campaign_reports_do_not_depend_on_order() {
    use confdep::ir::DEFAULT_STEP_BUDGET;
    use confdep::plugins::{run_handling_campaign, Reaction};
    use confdep::stategen::{build_tree, Policy, TreeOptions};
    let f = fixture();
    let states = build_tree(&f.doc, &f.input, Policy::Violating, &TreeOptions::default()).nodes;
    let mut reversed = states.clone();
    reversed.reverse();
    let forward =
        run_handling_campaign(&states, &f.doc, &f.input, &f.prog, DEFAULT_STEP_BUDGET).unwrap();
    let mut backward =
        run_handling_campaign(&reversed, &f.doc, &f.input, &f.prog, DEFAULT_STEP_BUDGET).unwrap();
    backward.sort_by_key(|r| states.iter().position(|s| s.id == r.state));
    assert_eq!(forward, backward);
    for r in &forward {
        assert!(Reaction::ALL.contains(&r.reaction));
        if r.reaction == Reaction::PartialReport {
            assert!(r.violated.len() >= 2, "{}", r.state);
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use confdep::deps::{
    emit_dependency_doc, extract, extract_declarative, load_decl_table, load_dependency_doc,
    DependencyDocument, ExtractOptions, Level,
};
use confdep::ecosystem::compile_ecosystem;
use confdep::ir::{execute, ExecConfig, IrProgram};
use confdep::plugins::{
    check_spec, load_doc_corpus, parse_script, rewrite_tests, run_handling_campaign, run_script,
    Keywords, RewriteMode, TestScript,
};
use confdep::scenario::step_budget_from_env;
use confdep::stategen::{
    build_tree, naive_baseline, parse_argv, render_commands, Policy, StateTree, TreeOptions,
    NAIVE_SLOTS,
};
use confdep::taint::{load_user_input, AnalysisInput, ParamId, TaintOptions};

use crate::{Command, ModeArg, PolicyArg};

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_input(path: &Path) -> Result<AnalysisInput> {
    Ok(load_user_input(path)?)
}

fn load_deps(path: &Path) -> Result<DependencyDocument> {
    load_dependency_doc(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn compile(input: &AnalysisInput, src: &Path) -> Result<IrProgram> {
    Ok(compile_ecosystem(input, src)?)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// `name` or `component.name`; a bare name must be unique.
fn resolve_param(input: &AnalysisInput, text: &str) -> Result<ParamId> {
    if let Some((c, n)) = text.split_once('.') {
        let p = ParamId::new(c, n);
        if input.param(&p).is_some() {
            return Ok(p);
        }
    }
    let hits: Vec<ParamId> = input
        .params()
        .filter(|m| m.name == text)
        .map(|m| m.id())
        .collect();
    match hits.as_slice() {
        [p] => Ok(p.clone()),
        [] => bail!("unknown parameter {text}"),
        _ => bail!("parameter name {text} is ambiguous; use component.name"),
    }
}

fn parse_level(text: &str) -> Result<Level> {
    Ok(match text.to_ascii_uppercase().as_str() {
        "SD" => Level::SD,
        "CPD" => Level::CPD,
        "CCD" => Level::CCD,
        _ => bail!("unknown dependency kind {text}; expected SD, CPD or CCD"),
    })
}

fn load_states(path: &Path) -> Result<StateTree> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("loading states from {}", path.display()))
}

pub fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Extract {
            input,
            src,
            output,
            dump_traces,
            context_depth,
            flag_data_types,
        } => {
            let input = load_input(&input)?;
            let prog = compile(&input, &src)?;
            let opts = ExtractOptions {
                taint: TaintOptions { context_depth },
                flag_data_types,
                step_budget: step_budget_from_env(),
            };
            let (deps, analysis) = extract(&prog, &input, &opts)?;
            for w in &analysis.warnings {
                log::warn!("{w}");
            }
            if let Some(p) = dump_traces {
                write_out(Some(&p), &analysis.dump_traces())?;
            }
            let doc = emit_dependency_doc(&input.ecosystem, deps, &now());
            write_out(output.as_deref(), &doc.to_json())?;
            eprintln!("{} dependencies", doc.dependencies.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenStates {
            deps,
            input,
            policy,
            depth,
            params,
            dep_kinds,
            output,
            render,
            naive,
        } => {
            let input = load_input(&input)?;
            let doc = load_deps(&deps)?;
            let mut opts = TreeOptions {
                depth,
                params: params
                    .iter()
                    .map(|p| resolve_param(&input, p))
                    .collect::<Result<_>>()?,
                ..TreeOptions::default()
            };
            if !dep_kinds.is_empty() {
                opts.dep_kinds = dep_kinds
                    .iter()
                    .map(|k| parse_level(k))
                    .collect::<Result<_>>()?;
            }
            let policy = match policy {
                PolicyArg::Following => Policy::Following,
                PolicyArg::Violating => Policy::Violating,
            };
            let tree = build_tree(&doc, &input, policy, &opts);
            write_out(output.as_deref(), &serde_json::to_string_pretty(&tree)?)?;
            if render {
                for s in &tree.nodes {
                    let plan = render_commands(&s.assignments, &input)?;
                    println!("{}: {}", s.id, plan.lines().join(" ; "));
                }
            }
            eprintln!("{} states", tree.nodes.len());
            if naive {
                let seeds = if opts.params.is_empty() {
                    input.params().map(|m| m.id()).collect()
                } else {
                    opts.params.clone()
                };
                let r = naive_baseline(&doc, &input, &seeds, NAIVE_SLOTS);
                println!(
                    "naive baseline: {} states, {} duplicates ({:.1}%), {} invalid ({:.1}%)",
                    r.total,
                    r.duplicates,
                    r.duplicate_pct(),
                    r.invalid,
                    r.invalid_pct()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckSpec { deps, docs, output } => {
            let doc = load_deps(&deps)?;
            let corpus = load_doc_corpus(&docs)?;
            let found = check_spec(&doc, &corpus, &Keywords::default())?;
            for m in &found {
                eprintln!(
                    "{:<24} {:<28} {}",
                    format!("{:?}", m.kind),
                    format!("{}.{}", m.component, m.param),
                    m.detail
                );
            }
            write_out(output.as_deref(), &serde_json::to_string_pretty(&found)?)?;
            Ok(if found.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::CheckHandling {
            deps,
            input,
            src,
            states,
            output,
        } => {
            let input = load_input(&input)?;
            let doc = load_deps(&deps)?;
            let prog = compile(&input, &src)?;
            let tree = match states {
                Some(p) => load_states(&p)?,
                None => build_tree(&doc, &input, Policy::Violating, &TreeOptions::default()),
            };
            if tree.policy != Policy::Violating {
                bail!("handling checks need violating states");
            }
            let reports =
                run_handling_campaign(&tree.nodes, &doc, &input, &prog, step_budget_from_env())?;
            for r in &reports {
                eprintln!(
                    "{:<5} {:<20} {}",
                    r.state,
                    r.reaction.as_str(),
                    r.violated.join(", ")
                );
            }
            write_out(output.as_deref(), &serde_json::to_string_pretty(&reports)?)?;
            let bad = reports.iter().any(|r| r.reaction.is_bad());
            Ok(if bad {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::RewriteTests {
            tests,
            states,
            mode,
            input,
            deps,
            output,
            verify_src,
        } => rewrite(
            &tests,
            &states,
            mode,
            &input,
            &deps,
            &output,
            verify_src.as_deref(),
        ),
        Command::ExtractDecl { table, output } => {
            let t = load_decl_table(&read(&table)?)?;
            let deps = extract_declarative(&t)?;
            let doc = emit_dependency_doc(&t.component, deps, &now());
            write_out(output.as_deref(), &doc.to_json())?;
            eprintln!("{} dependencies", doc.dependencies.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            src,
            input,
            component,
            workdir,
            args,
        } => {
            let input = load_input(&input)?;
            let prog = compile(&input, &src)?;
            let argv = parse_argv(&input, &component, &args)?;
            let config = ExecConfig {
                step_budget: step_budget_from_env(),
                defaults: input.exec_defaults(&component),
            };
            let r = execute(&prog, &component, &argv, &workdir, &config);
            print!("{}", r.stdout);
            eprint!("{}", r.stderr);
            Ok(ExitCode::from(r.exit_code.clamp(0, 255) as u8))
        }
    }
}

fn script_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    Ok(paths)
}

fn rewrite(
    tests: &Path,
    states: &Path,
    mode: ModeArg,
    input: &Path,
    deps: &Path,
    output: &Path,
    verify_src: Option<&Path>,
) -> Result<ExitCode> {
    let input = load_input(input)?;
    let doc = load_deps(deps)?;
    let tree = load_states(states)?;
    let mode = match mode {
        ModeArg::Replace => RewriteMode::Replace,
        ModeArg::Append => RewriteMode::Append,
    };
    let prog = verify_src.map(|s| compile(&input, s)).transpose()?;
    let budget = step_budget_from_env();
    let passes = |script: &TestScript| -> Result<bool> {
        let Some(prog) = &prog else { return Ok(true) };
        let dir = tempfile::tempdir()?;
        Ok(run_script(script, prog, &input, dir.path(), budget).passed)
    };
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    let (mut written, mut skipped, mut caused) = (0, 0, 0);
    for path in script_paths(tests)? {
        let text = read(&path)?;
        let rel = path.strip_prefix(tests).unwrap_or(&path);
        let script = match parse_script(rel, &text, &input) {
            Ok(s) => s,
            Err(e) => {
                println!("skipped {e}");
                skipped += 1;
                continue;
            }
        };
        let source_ok = passes(&script)?;
        for out in rewrite_tests(&script, &tree.nodes, mode, &doc, &input)? {
            let dest = output.join(out.file_name());
            fs::write(&dest, &out.text).with_context(|| format!("writing {}", dest.display()))?;
            written += 1;
            if prog.is_some() && source_ok {
                let parsed = parse_script(&dest, &out.text, &input)?;
                if !passes(&parsed)? {
                    println!("plugin-caused failure: {}", dest.display());
                    caused += 1;
                }
            }
        }
    }
    eprintln!("{written} scripts written, {skipped} skipped");
    if prog.is_some() {
        eprintln!("{caused} plugin-caused failures");
    }
    Ok(if caused > 0 || skipped > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

//! Pairwise dependencies: common (context, instruction) sites between two
//! traces, then classification by the guards those sites feed.

use std::collections::{BTreeMap, BTreeSet};

use super::guard::{comparison, labels_at, negate_cmp, sink_from, sink_message, store_from};
use super::model::{Constraint, DepSource, Dependency, Evidence, Level, Polarity, RelOp};
use crate::ir::{BinOp, InstrRef, IrProgram, Op};
use crate::scenario::{args_from_assignment, run_scenario};
use crate::taint::{Analysis, AnalysisInput, ParamId, ParamKind, ParamValue, Site, TaintTrace};

pub const INCOMPLETE_NOTE: &str = "classification-incomplete";

/// Two parameters whose traces meet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub a: ParamId,
    pub b: ParamId,
    pub level: Level,
    pub shared: Vec<Site>,
}

/// Sites common to both traces. Field-sourced taint is already part of each
/// trace, so cross-component links show up here as well.
pub fn derive_pairwise(ta: &TaintTrace, tb: &TaintTrace) -> Option<Candidate> {
    if ta.param == tb.param {
        return None;
    }
    let b: BTreeSet<&Site> = tb.sites.iter().collect();
    let shared: Vec<Site> = ta.sites.iter().filter(|s| b.contains(s)).cloned().collect();
    if shared.is_empty() {
        return None;
    }
    let (a, b) = if ta.param <= tb.param {
        (ta.param.clone(), tb.param.clone())
    } else {
        (tb.param.clone(), ta.param.clone())
    };
    let level = if a.component == b.component {
        Level::CPD
    } else {
        Level::CCD
    };
    Some(Candidate {
        a,
        b,
        level,
        shared,
    })
}

/// What classification needs besides the candidate.
pub struct Classifier<'a> {
    pub prog: &'a IrProgram,
    pub input: &'a AnalysisInput,
    pub analysis: &'a Analysis,
    pub step_budget: u64,
}

fn rel(op: BinOp) -> Option<RelOp> {
    match op {
        BinOp::Ge => Some(RelOp::Ge),
        BinOp::Gt => Some(RelOp::Gt),
        BinOp::Le => Some(RelOp::Le),
        BinOp::Lt => Some(RelOp::Lt),
        _ => None,
    }
}

struct Guard<'p> {
    site: &'p Site,
    sink: Option<InstrRef>,
    message: Option<String>,
    /// Value template `(p1, op, p2)` if the guard is a relational compare
    /// between one value of each parameter.
    template: Option<(ParamId, RelOp, ParamId)>,
}

impl<'a> Classifier<'a> {
    fn is_flag(&self, p: &ParamId) -> bool {
        self.input
            .param(p)
            .is_some_and(|m| m.kind == ParamKind::Flag)
    }

    fn evidence(&self, s: &Site) -> Evidence {
        Evidence {
            context: s.context.clone(),
            instr: s.instr.clone(),
            loc: s
                .instr
                .resolve(self.prog)
                .map(|i| i.loc.to_string())
                .unwrap_or_default(),
        }
    }

    /// Branch sites among the shared ones that guard a sink or a store.
    fn guards<'s>(&self, c: &'s Candidate) -> (Vec<Guard<'s>>, Vec<Guard<'s>>) {
        let mut errors = Vec::new();
        let mut stores = Vec::new();
        for site in &c.shared {
            let Some(fs) = self.prog.components.get(&site.instr.component) else {
                continue;
            };
            let Some(f) = fs.function(&site.instr.function) else {
                continue;
            };
            let Some(br) = f.instr(site.instr.block, site.instr.index) else {
                continue;
            };
            let Op::BrCond {
                then_block,
                else_block,
            } = br.op
            else {
                continue;
            };
            let Some(cin) = self.input.component(&site.instr.component) else {
                continue;
            };
            let template_for = |guarded_when_true: bool| {
                let cmp = comparison(f, &br.operands[0])?;
                let l = labels_at(self.analysis, site, &site.instr.component, f, cmp.def, 0);
                let r = labels_at(self.analysis, site, &site.instr.component, f, cmp.def, 1);
                let only = |labels: &BTreeSet<ParamId>, p: &ParamId| {
                    labels.len() == 1 && labels.contains(p)
                };
                let op = if guarded_when_true {
                    negate_cmp(cmp.op)
                } else {
                    cmp.op
                };
                let op = rel(op)?;
                let (p1, op, p2) = if only(&l, &c.a) && only(&r, &c.b) {
                    (c.a.clone(), op, c.b.clone())
                } else if only(&l, &c.b) && only(&r, &c.a) {
                    (c.b.clone(), op, c.a.clone())
                } else {
                    return None;
                };
                Some(match op {
                    RelOp::Le | RelOp::Lt => (p2, op.flip(), p1),
                    _ => (p1, op, p2),
                })
            };
            let sink_ref = |ins: &crate::ir::Instruction| InstrRef {
                component: site.instr.component.clone(),
                function: f.name.clone(),
                block: ins.block,
                index: ins.index,
            };
            let then_sink = sink_from(f, then_block, &cin.error_sinks);
            let else_sink = sink_from(f, else_block, &cin.error_sinks);
            if let Some((sink, when_true)) = then_sink
                .map(|s| (s, true))
                .or(else_sink.map(|s| (s, false)))
            {
                errors.push(Guard {
                    site,
                    sink: Some(sink_ref(sink)),
                    message: sink_message(sink),
                    template: template_for(when_true),
                });
                continue;
            }
            let sb = &cin.superblock_variable;
            let when_true = if store_from(f, then_block, sb).is_some() {
                Some(true)
            } else if store_from(f, else_block, sb).is_some() {
                Some(false)
            } else {
                None
            };
            if let Some(t) = when_true {
                stores.push(Guard {
                    site,
                    sink: None,
                    message: None,
                    template: template_for(t),
                });
            }
        }
        (errors, stores)
    }

    /// Whether `sink` is reached when running the scenario with the two
    /// flags set as given and everything else at its default.
    fn reaches(
        &self,
        a: &ParamId,
        va: bool,
        b: &ParamId,
        vb: bool,
        sink: &InstrRef,
    ) -> Option<bool> {
        let last = [&a.component, &b.component, &sink.component]
            .iter()
            .map(|c| self.input.step_of(c))
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .max()?;
        let assign = BTreeMap::from([
            (a.clone(), ParamValue::Flag(va)),
            (b.clone(), ParamValue::Flag(vb)),
        ]);
        let dir = tempfile::tempdir().ok()?;
        let run = run_scenario(
            self.prog,
            self.input,
            &args_from_assignment(&assign),
            dir.path(),
            self.step_budget,
            Some(last + 1),
        );
        Some(
            run.steps
                .iter()
                .any(|s| s.result.exit_site.as_ref() == Some(sink)),
        )
    }

    /// Polarity from the flag combinations that reach the sink.
    fn polarity(&self, c: &Candidate, sink: &InstrRef) -> Option<(Polarity, ParamId, ParamId)> {
        let mut hit = Vec::new();
        for (va, vb) in [(true, true), (true, false), (false, true), (false, false)] {
            if self.reaches(&c.a, va, &c.b, vb, sink)? {
                hit.push((va, vb));
            }
        }
        match hit.as_slice() {
            [(true, true)] => Some((Polarity::Conflicts, c.a.clone(), c.b.clone())),
            [(true, false)] => Some((Polarity::Requires, c.a.clone(), c.b.clone())),
            [(false, true)] => Some((Polarity::Requires, c.b.clone(), c.a.clone())),
            _ => None,
        }
    }

    /// Subkind and constraint for a candidate. Error-guarded evidence wins
    /// over store-guarded evidence, which wins over plain shared computation.
    /// Returns `None` when the traces only meet at branch conditions.
    pub fn classify(&self, c: &Candidate) -> Option<Dependency> {
        let evidence: Vec<Evidence> = c.shared.iter().map(|s| self.evidence(s)).collect();
        let finish = |mut d: Dependency, message: Option<String>, note: Option<&str>| {
            d.evidence = evidence.clone();
            d.message = message;
            d.note = note.map(str::to_string);
            Some(d)
        };
        let (errors, stores) = self.guards(c);
        let mut incomplete = false;
        if self.is_flag(&c.a) && self.is_flag(&c.b) {
            for g in &errors {
                let Some(sink) = &g.sink else { continue };
                match self.polarity(c, sink) {
                    Some((polarity, p1, p2)) => {
                        let d = Dependency::new(
                            vec![p1, p2],
                            Constraint::Control { polarity },
                            DepSource::ExtractedTaint,
                        );
                        return finish(d, g.message.clone(), None);
                    }
                    None => {
                        log::debug!("{}: no polarity for {} / {}", g.site, c.a, c.b);
                        incomplete = true;
                    }
                }
            }
        }
        for g in errors.iter().chain(stores.iter()) {
            if let Some((p1, op, p2)) = &g.template {
                let d = Dependency::new(
                    vec![p1.clone(), p2.clone()],
                    Constraint::Value { op: *op },
                    DepSource::ExtractedTaint,
                );
                return finish(d, g.message.clone(), None);
            }
        }
        let consequential = c.shared.iter().any(|s| {
            s.instr
                .resolve(self.prog)
                .is_some_and(|i| !matches!(i.op, Op::BrCond { .. }))
        });
        if !consequential {
            return None;
        }
        let d = Dependency::new(
            vec![c.a.clone(), c.b.clone()],
            Constraint::Behavioral,
            DepSource::ExtractedTaint,
        );
        finish(d, None, incomplete.then_some(INCOMPLETE_NOTE))
    }
}

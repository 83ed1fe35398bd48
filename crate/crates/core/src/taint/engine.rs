//! Worklist taint propagation over the IR.
//!
//! Labels are sets of parameter ids. Contexts are call strings of call-site
//! instructions, k-limited. The superblock variable is field-sensitive: each
//! field carries the labels of every value stored into it, in any component,
//! and loads of that field yield those labels. That shared field map is what
//! links one component's parameters into another component's code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::input::{AnalysisInput, ComponentInput, ParamId};
use crate::ir::{Function, FunctionSet, InstrRef, Instruction, IrProgram, Op, Operand};

pub type Labels = BTreeSet<ParamId>;

/// Call string, outermost call site first.
pub type Context = Vec<InstrRef>;

pub const DEFAULT_CONTEXT_DEPTH: usize = 8;

/// An instruction under a calling context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub context: Context,
    pub instr: InstrRef,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.context.is_empty() {
            let ctx: Vec<String> = self.context.iter().map(|c| c.to_string()).collect();
            write!(f, "[{}] ", ctx.join(" > "))?;
        }
        write!(f, "{}", self.instr)
    }
}

/// Labels seen at one site: per operand, and on the result.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteTaint {
    pub operands: Vec<Labels>,
    pub result: Labels,
}

impl SiteTaint {
    pub fn all(&self) -> Labels {
        let mut l = self.result.clone();
        for o in &self.operands {
            l.extend(o.iter().cloned());
        }
        l
    }

    fn join(&mut self, other: &SiteTaint) -> bool {
        let mut grew = false;
        if self.operands.len() < other.operands.len() {
            self.operands.resize(other.operands.len(), Labels::new());
        }
        for (a, b) in self.operands.iter_mut().zip(&other.operands) {
            grew |= join(a, b);
        }
        grew | join(&mut self.result, &other.result)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldAccess {
    pub field: String,
    pub site: Site,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintTrace {
    pub param: ParamId,
    pub sites: Vec<Site>,
    pub sb_writes: Vec<FieldAccess>,
    pub sb_reads: Vec<FieldAccess>,
    pub branch_sites: Vec<Site>,
}

impl TaintTrace {
    fn empty(param: ParamId) -> Self {
        Self {
            param,
            sites: Vec::new(),
            sb_writes: Vec::new(),
            sb_reads: Vec::new(),
            branch_sites: Vec::new(),
        }
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.binary_search(site).is_ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub writers: BTreeMap<ParamId, Vec<Site>>,
    pub readers: Vec<(String, Site)>,
}

/// Superblock field to writer parameters and reader sites.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMap {
    pub fields: BTreeMap<String, FieldEntry>,
}

impl FieldMap {
    pub fn writers(&self, field: &str) -> impl Iterator<Item = &ParamId> {
        self.fields
            .get(field)
            .into_iter()
            .flat_map(|e| e.writers.keys())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintOptions {
    pub context_depth: usize,
}

impl Default for TaintOptions {
    fn default() -> Self {
        Self {
            context_depth: DEFAULT_CONTEXT_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaintError {
    #[error("component {0} is not in the program")]
    UnknownComponent(String),
    #[error("component {0} has no analysis input")]
    NoInput(String),
    #[error("component {component}: entry function {function} does not exist")]
    MissingEntry { component: String, function: String },
}

/// Result of analysing a whole ecosystem.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Analysis {
    pub traces: BTreeMap<ParamId, TaintTrace>,
    pub field_map: FieldMap,
    #[serde(skip)]
    pub sites: BTreeMap<Site, SiteTaint>,
    #[serde(skip)]
    pub field_labels: BTreeMap<String, Labels>,
    pub warnings: Vec<String>,
}

impl Analysis {
    pub fn site(&self, s: &Site) -> Option<&SiteTaint> {
        self.sites.get(s)
    }

    /// Labels carried by the operand of `site`, empty if untainted.
    pub fn operand_labels(&self, s: &Site, i: usize) -> Labels {
        self.sites
            .get(s)
            .and_then(|t| t.operands.get(i).cloned())
            .unwrap_or_default()
    }

    /// Traces as pretty JSON, for `--dump-traces`.
    pub fn dump_traces(&self) -> String {
        let list: Vec<&TaintTrace> = self.traces.values().collect();
        serde_json::to_string_pretty(&list).expect("traces serialize") + "\n"
    }
}

fn join(into: &mut Labels, from: &Labels) -> bool {
    let before = into.len();
    into.extend(from.iter().cloned());
    into.len() != before
}

fn join_vars(into: &mut BTreeMap<String, Labels>, from: &BTreeMap<String, Labels>) -> bool {
    let mut grew = false;
    for (k, v) in from {
        grew |= join(into.entry(k.clone()).or_default(), v);
    }
    grew
}

#[derive(Default, Clone)]
struct FrameState {
    args: Vec<Labels>,
    ret: Labels,
    block_in: BTreeMap<u32, BTreeMap<String, Labels>>,
    temps: BTreeMap<u32, Labels>,
}

type FrameKey = (String, Context);

struct Pass<'a> {
    component: &'a str,
    fs: &'a FunctionSet,
    cin: &'a ComponentInput,
    depth: usize,
    field_in: &'a BTreeMap<String, Labels>,
    field_out: BTreeMap<String, Labels>,
    globals: BTreeMap<String, Labels>,
    sites: BTreeMap<Site, SiteTaint>,
    frames: BTreeMap<FrameKey, FrameState>,
    active: BTreeSet<FrameKey>,
    done: BTreeSet<FrameKey>,
    changed: bool,
    truncated: bool,
}

impl<'a> Pass<'a> {
    fn is_sb(&self, o: &Operand) -> bool {
        matches!(o, Operand::Var(n) | Operand::Global(n) if *n == self.cin.superblock_variable)
    }

    fn labels(&self, frame: &FrameState, vars: &BTreeMap<String, Labels>, o: &Operand) -> Labels {
        if self.is_sb(o) {
            return Labels::new();
        }
        match o {
            Operand::Temp(t) => frame.temps.get(t).cloned().unwrap_or_default(),
            Operand::Var(v) => vars
                .get(v)
                .or_else(|| self.globals.get(v))
                .cloned()
                .unwrap_or_default(),
            Operand::Global(g) => self.globals.get(g).cloned().unwrap_or_default(),
            Operand::Int(_) | Operand::Str(_) => Labels::new(),
        }
    }

    fn assign(
        &mut self,
        frame: &mut FrameState,
        vars: &mut BTreeMap<String, Labels>,
        o: &Operand,
        l: &Labels,
    ) {
        if self.is_sb(o) {
            return;
        }
        match o {
            Operand::Temp(t) => {
                join(frame.temps.entry(*t).or_default(), l);
            }
            Operand::Var(v) if !vars.contains_key(v) && self.fs.is_global(v) => {
                self.changed |= join(self.globals.entry(v.clone()).or_default(), l);
            }
            Operand::Var(v) => {
                join(vars.entry(v.clone()).or_default(), l);
            }
            Operand::Global(g) => {
                self.changed |= join(self.globals.entry(g.clone()).or_default(), l);
            }
            Operand::Int(_) | Operand::Str(_) => {}
        }
    }

    fn push_context(&mut self, ctx: &Context, site: InstrRef) -> Context {
        let mut c = ctx.clone();
        c.push(site);
        if c.len() > self.depth {
            self.truncated = true;
            c.remove(0);
        }
        c
    }

    fn function(&self, name: &str) -> Option<&'a Function> {
        self.fs.function(name)
    }

    fn analyze(&mut self, f: &'a Function, ctx: Context, args: Vec<Labels>) -> Labels {
        let key = (f.name.clone(), ctx.clone());
        let mut st = self.frames.remove(&key).unwrap_or_default();
        let mut args_grew = st.args.len() < args.len();
        st.args.resize(args.len().max(st.args.len()), Labels::new());
        for (a, b) in st.args.iter_mut().zip(&args) {
            args_grew |= join(a, b);
        }
        if self.active.contains(&key) || (self.done.contains(&key) && !args_grew) {
            let ret = st.ret.clone();
            self.frames.insert(key, st);
            return ret;
        }
        self.active.insert(key.clone());
        self.changed |= args_grew;

        let entry: BTreeMap<String, Labels> = f
            .params
            .iter()
            .cloned()
            .zip(st.args.iter().cloned())
            .collect();
        join_vars(st.block_in.entry(0).or_default(), &entry);
        let mut work: BTreeSet<u32> = BTreeSet::from([0]);
        let mut visited = BTreeSet::new();
        while let Some(b) = work.pop_first() {
            visited.insert(b);
            let Some(block) = f.blocks.get(b as usize) else {
                continue;
            };
            let mut vars = st.block_in.get(&b).cloned().unwrap_or_default();
            for ins in &block.instrs {
                self.transfer(f, &ctx, &mut st, &mut vars, ins);
            }
            for s in block.successors() {
                let grew = join_vars(st.block_in.entry(s).or_default(), &vars);
                if grew || !visited.contains(&s) {
                    work.insert(s);
                }
            }
        }
        self.active.remove(&key);
        self.done.insert(key.clone());
        let ret = st.ret.clone();
        self.frames.insert(key, st);
        ret
    }

    fn transfer(
        &mut self,
        f: &'a Function,
        ctx: &Context,
        st: &mut FrameState,
        vars: &mut BTreeMap<String, Labels>,
        ins: &Instruction,
    ) {
        let site_ref = InstrRef {
            component: self.component.to_string(),
            function: f.name.clone(),
            block: ins.block,
            index: ins.index,
        };
        let ops: Vec<Labels> = ins
            .operands
            .iter()
            .map(|o| self.labels(st, vars, o))
            .collect();
        let union = || {
            ops.iter().fold(Labels::new(), |mut acc, l| {
                acc.extend(l.iter().cloned());
                acc
            })
        };
        let result: Labels = match &ins.op {
            Op::Const | Op::Copy | Op::Binop { .. } | Op::Unop { .. } => union(),
            Op::LoadField { field } if self.is_sb(&ins.operands[0]) => {
                let mut l = self.field_in.get(field).cloned().unwrap_or_default();
                if let Some(local) = self.field_out.get(field) {
                    l.extend(local.iter().cloned());
                }
                l
            }
            Op::LoadField { .. } => union(),
            Op::StoreField { field } => {
                if self.is_sb(&ins.operands[0]) {
                    self.changed |= join(self.field_out.entry(field.clone()).or_default(), &ops[1]);
                } else {
                    let base = ins.operands[0].clone();
                    self.assign(st, vars, &base, &ops[1]);
                }
                Labels::new()
            }
            Op::Call { callee } if self.cin.error_sinks.contains(callee) => Labels::new(),
            Op::Call { callee } => match self.function(callee) {
                Some(g) => {
                    let inner = self.push_context(ctx, site_ref.clone());
                    self.analyze(g, inner, ops.clone())
                }
                None => union(),
            },
            Op::Builtin { name } if name.starts_with("param_") => match ins.operands.first() {
                Some(Operand::Str(p)) => Labels::from([ParamId::new(self.component, p.clone())]),
                _ => Labels::new(),
            },
            Op::Builtin { name } if name == "load_image" => Labels::new(),
            Op::Builtin { .. } => union(),
            Op::Ret => {
                self.changed |= join(&mut st.ret, &union());
                Labels::new()
            }
            Op::BrCond { .. } | Op::Jump { .. } | Op::ErrorSink { .. } => Labels::new(),
        };
        if let Some(dst) = &ins.result {
            self.assign(st, vars, dst, &result);
        }
        if ops.iter().any(|l| !l.is_empty()) || !result.is_empty() {
            let t = SiteTaint {
                operands: ops,
                result,
            };
            let site = Site {
                context: ctx.clone(),
                instr: site_ref,
            };
            let entry = self.sites.entry(site).or_default();
            self.changed |= entry.join(&t);
        }
    }
}

struct PassOutput {
    sites: BTreeMap<Site, SiteTaint>,
    field_out: BTreeMap<String, Labels>,
    truncated: bool,
}

fn run_component(
    prog: &IrProgram,
    input: &AnalysisInput,
    component: &str,
    field_in: &BTreeMap<String, Labels>,
    opts: &TaintOptions,
) -> Result<PassOutput, TaintError> {
    let fs = prog
        .components
        .get(component)
        .ok_or_else(|| TaintError::UnknownComponent(component.to_string()))?;
    let cin = input
        .component(component)
        .ok_or_else(|| TaintError::NoInput(component.to_string()))?;
    let entry = fs
        .function(&cin.entry_function)
        .ok_or_else(|| TaintError::MissingEntry {
            component: component.to_string(),
            function: cin.entry_function.clone(),
        })?;
    let mut pass = Pass {
        component,
        fs,
        cin,
        depth: opts.context_depth.max(1),
        field_in,
        field_out: BTreeMap::new(),
        globals: BTreeMap::new(),
        sites: BTreeMap::new(),
        frames: BTreeMap::new(),
        active: BTreeSet::new(),
        done: BTreeSet::new(),
        changed: true,
        truncated: false,
    };
    while pass.changed {
        pass.changed = false;
        pass.done.clear();
        pass.analyze(entry, Vec::new(), Vec::new());
    }
    Ok(PassOutput {
        sites: pass.sites,
        field_out: pass.field_out,
        truncated: pass.truncated,
    })
}

fn build_traces(
    prog: &IrProgram,
    input: &AnalysisInput,
    sites: &BTreeMap<Site, SiteTaint>,
    params: impl Iterator<Item = ParamId>,
) -> BTreeMap<ParamId, TaintTrace> {
    let mut traces: BTreeMap<ParamId, TaintTrace> =
        params.map(|p| (p.clone(), TaintTrace::empty(p))).collect();
    for (site, taint) in sites {
        let Some(ins) = site.instr.resolve(prog) else {
            continue;
        };
        let sb = input
            .component(&site.instr.component)
            .map(|c| c.superblock_variable.as_str())
            .unwrap_or("");
        let on_sb =
            matches!(ins.operands.first(), Some(Operand::Var(n) | Operand::Global(n)) if n == sb);
        for p in taint.all() {
            let Some(t) = traces.get_mut(&p) else {
                continue;
            };
            t.sites.push(site.clone());
            match &ins.op {
                Op::StoreField { field }
                    if on_sb && taint.operands.get(1).is_some_and(|l| l.contains(&p)) =>
                {
                    t.sb_writes.push(FieldAccess {
                        field: field.clone(),
                        site: site.clone(),
                    })
                }
                Op::LoadField { field } if on_sb && taint.result.contains(&p) => {
                    t.sb_reads.push(FieldAccess {
                        field: field.clone(),
                        site: site.clone(),
                    })
                }
                Op::BrCond { .. } if taint.operands.first().is_some_and(|l| l.contains(&p)) => {
                    t.branch_sites.push(site.clone())
                }
                _ => {}
            }
        }
    }
    traces
}

/// Propagate the parameters of one component through its own code only.
pub fn seed_and_propagate(
    prog: &IrProgram,
    input: &AnalysisInput,
    component: &str,
    opts: &TaintOptions,
) -> Result<Vec<TaintTrace>, TaintError> {
    let out = run_component(prog, input, component, &BTreeMap::new(), opts)?;
    let params = input
        .component(component)
        .into_iter()
        .flat_map(|c| c.parameters.iter().map(|p| p.id()));
    Ok(build_traces(prog, input, &out.sites, params)
        .into_values()
        .collect())
}

/// Field map from the superblock accesses recorded in `traces`.
pub fn link_cross_component(traces: &[TaintTrace]) -> FieldMap {
    let mut map = FieldMap::default();
    for t in traces {
        for w in &t.sb_writes {
            map.fields
                .entry(w.field.clone())
                .or_default()
                .writers
                .entry(t.param.clone())
                .or_default()
                .push(w.site.clone());
        }
        for r in &t.sb_reads {
            let readers = &mut map.fields.entry(r.field.clone()).or_default().readers;
            let entry = (r.site.instr.component.clone(), r.site.clone());
            if !readers.contains(&entry) {
                readers.push(entry);
            }
        }
    }
    for e in map.fields.values_mut() {
        for sites in e.writers.values_mut() {
            sites.sort();
            sites.dedup();
        }
        e.readers.sort();
    }
    map
}

/// Analyse every component, re-propagating until the superblock field
/// labels stop growing.
pub fn analyze(
    prog: &IrProgram,
    input: &AnalysisInput,
    opts: &TaintOptions,
) -> Result<Analysis, TaintError> {
    let mut field_labels: BTreeMap<String, Labels> = BTreeMap::new();
    let mut warnings = Vec::new();
    let components: Vec<&String> = input.components.keys().collect();
    loop {
        let mut sites = BTreeMap::new();
        let mut next = field_labels.clone();
        let mut truncated = false;
        for c in &components {
            let out = run_component(prog, input, c, &field_labels, opts)?;
            truncated |= out.truncated;
            for (k, v) in out.field_out {
                join(next.entry(k).or_default(), &v);
            }
            sites.extend(out.sites);
        }
        if next == field_labels {
            if truncated {
                let w = format!(
                    "call strings deeper than {} were truncated; deeper calls share contexts",
                    opts.context_depth
                );
                log::warn!("{w}");
                warnings.push(w);
            }
            let traces = build_traces(prog, input, &sites, input.params().map(|p| p.id()));
            let list: Vec<TaintTrace> = traces.values().cloned().collect();
            return Ok(Analysis {
                field_map: link_cross_component(&list),
                traces,
                sites,
                field_labels,
                warnings,
            });
        }
        field_labels = next;
    }
}

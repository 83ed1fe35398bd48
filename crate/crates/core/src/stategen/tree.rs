//! Dependency-guided state trees.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::state::{canonicalize, Assignment, CanonicalKey, ConfigState, Mark, Provenance};
use super::validate::{effective, violates};
use super::violating;
use crate::deps::{Constraint, Dependency, DependencyDocument, Level, Polarity};
use crate::taint::{AnalysisInput, ParamId, ParamKind, ParamMeta, ParamValue};

pub const DEFAULT_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Following,
    Violating,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeOptions {
    pub depth: usize,
    /// Seed parameters modified directly under the root. Empty means all
    /// of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamId>,
    /// Dependency levels taken into account.
    pub dep_kinds: Vec<Level>,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH,
            params: Vec::new(),
            dep_kinds: vec![Level::SD, Level::CPD, Level::CCD],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTree {
    pub policy: Policy,
    pub options: TreeOptions,
    pub root: ConfigState,
    pub nodes: Vec<ConfigState>,
    pub edges: Vec<Edge>,
}

impl StateTree {
    pub fn keys(&self) -> Vec<CanonicalKey> {
        self.nodes
            .iter()
            .map(|s| canonicalize(&s.assignments))
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|s| s.depth).max().unwrap_or(0)
    }
}

/// Shared view of the inputs while building either policy.
pub(super) struct Ctx<'a> {
    pub input: &'a AnalysisInput,
    /// Dependencies that pass the kind filter, in document order.
    pub deps: Vec<&'a Dependency>,
    /// Seed parameters.
    pub subset: Vec<&'a ParamMeta>,
}

impl<'a> Ctx<'a> {
    pub fn new(
        doc: &'a DependencyDocument,
        input: &'a AnalysisInput,
        options: &TreeOptions,
    ) -> Self {
        let deps = doc
            .dependencies
            .iter()
            .filter(|d| options.dep_kinds.contains(&d.level))
            .collect();
        let subset = input
            .params()
            .filter(|m| options.params.is_empty() || options.params.contains(&m.id()))
            .collect();
        Self {
            input,
            deps,
            subset,
        }
    }

    pub fn in_subset(&self, p: &ParamId) -> bool {
        self.subset.iter().any(|m| &m.id() == p)
    }

    pub fn meta(&self, p: &ParamId) -> Option<&'a ParamMeta> {
        self.input.param(p)
    }

    pub fn violated(&self, a: &Assignment) -> Vec<&'a Dependency> {
        self.deps
            .iter()
            .copied()
            .filter(|d| violates(d, a, self.input))
            .collect()
    }

    /// Following-policy values for a parameter.
    pub fn values(&self, m: &ParamMeta) -> Vec<ParamValue> {
        let mut out = Vec::new();
        match m.kind {
            ParamKind::Flag => out.extend([ParamValue::Flag(true), ParamValue::Flag(false)]),
            ParamKind::Int => {
                let d = m.domain.as_ref();
                for v in [
                    d.and_then(|d| d.min),
                    m.default.as_ref().and_then(|v| v.as_int()),
                    d.and_then(|d| d.max),
                ]
                .into_iter()
                .flatten()
                {
                    if !out.contains(&ParamValue::Int(v)) {
                        out.push(ParamValue::Int(v));
                    }
                }
            }
            ParamKind::String | ParamKind::Enum => {
                if let Some(d) = &m.domain {
                    out.extend(d.choices.iter().cloned().map(ParamValue::Text));
                }
            }
        }
        out
    }

    /// Parameters sharing a dependency with `p`, in dependency-document
    /// order.
    pub fn linked(&self, p: &ParamId) -> Vec<&'a ParamMeta> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for d in &self.deps {
            let Some(q) = d.partner(p) else { continue };
            if let Some(m) = self.meta(q) {
                if seen.insert(q.clone()) {
                    out.push(m);
                }
            }
        }
        out
    }

    /// Provenance for an assignment: every filtered dependency touching a
    /// modified parameter, marked followed unless it is in `broken`.
    pub fn provenance(&self, a: &Assignment, broken: &[&Dependency]) -> Vec<Provenance> {
        self.deps
            .iter()
            .filter(|d| d.participants.iter().any(|p| a.contains_key(p)))
            .map(|d| Provenance {
                dependency: d.id.clone(),
                mark: if broken.iter().any(|b| b.id == d.id) {
                    Mark::Violated
                } else {
                    Mark::Followed
                },
            })
            .collect()
    }

    /// Pin control-dependency partners so that turning a flag on does not
    /// by itself break a requires or conflicts edge. Required partners are
    /// always set explicitly; conflicting ones only when actually on.
    fn close(&self, a: &mut Assignment, changed: &ParamId) {
        let mut work = vec![changed.clone()];
        let mut pinned = HashSet::new();
        while let Some(p) = work.pop() {
            if effective(a, self.input, &p) != Some(ParamValue::Flag(true)) {
                continue;
            }
            for d in &self.deps {
                let Constraint::Control { polarity } = d.constraint else {
                    continue;
                };
                let (want, other) = match (polarity, d.participants.as_slice()) {
                    (Polarity::Requires, [x, y]) if x == &p => (true, y),
                    (Polarity::Conflicts, [x, y]) if x == &p => (false, y),
                    (Polarity::Conflicts, [y, x]) if x == &p => (false, y),
                    _ => continue,
                };
                if other == changed || pinned.contains(other) {
                    continue;
                }
                let needed = if want {
                    a.get(other) != Some(&ParamValue::Flag(true))
                } else {
                    effective(a, self.input, other) == Some(ParamValue::Flag(true))
                };
                if needed {
                    a.insert(other.clone(), ParamValue::Flag(want));
                    pinned.insert(other.clone());
                    work.push(other.clone());
                }
            }
        }
    }
}

struct Following<'c, 'a> {
    ctx: &'c Ctx<'a>,
    depth: usize,
    /// Best remaining depth a (state, last param) pair was expanded with.
    memo: HashMap<(CanonicalKey, ParamId), usize>,
    emitted: HashSet<CanonicalKey>,
    nodes: Vec<ConfigState>,
    edges: Vec<Edge>,
}

impl Following<'_, '_> {
    fn visit(&mut self, a: &Assignment, parent: &str, last: Option<&ParamId>, depth: usize) {
        if depth >= self.depth {
            return;
        }
        let candidates = match last {
            None => self.ctx.subset.clone(),
            Some(p) => self.ctx.linked(p),
        };
        for m in candidates {
            let q = m.id();
            for v in self.ctx.values(m) {
                if effective(a, self.ctx.input, &q).as_ref() == Some(&v) {
                    continue;
                }
                let mut child = a.clone();
                child.insert(q.clone(), v);
                self.ctx.close(&mut child, &q);
                let key = canonicalize(&child);
                let remaining = self.depth - depth - 1;
                match self.memo.get(&(key.clone(), q.clone())) {
                    Some(r) if *r >= remaining => continue,
                    _ => {
                        self.memo.insert((key.clone(), q.clone()), remaining);
                    }
                }
                let mut here = parent.to_string();
                if !self.emitted.contains(&key) && self.ctx.violated(&child).is_empty() {
                    self.emitted.insert(key);
                    let id = format!("s{}", self.nodes.len() + 1);
                    self.edges.push(Edge {
                        from: parent.to_string(),
                        to: id.clone(),
                    });
                    self.nodes.push(ConfigState {
                        id: id.clone(),
                        provenance: self.ctx.provenance(&child, &[]),
                        assignments: child.clone(),
                        parent: Some(parent.to_string()),
                        depth: depth + 1,
                        entangled: false,
                    });
                    here = id;
                }
                self.visit(&child, &here, Some(&q), depth + 1);
            }
        }
    }
}

/// Build the state tree for `policy`. Following explores by depth-first
/// search from the defaults; violating emits one state per targeted
/// dependency witness, as children of the root.
pub fn build_tree(
    doc: &DependencyDocument,
    input: &AnalysisInput,
    policy: Policy,
    options: &TreeOptions,
) -> StateTree {
    let ctx = Ctx::new(doc, input, options);
    let (nodes, edges) = match policy {
        Policy::Following => {
            let mut f = Following {
                ctx: &ctx,
                depth: options.depth,
                memo: HashMap::new(),
                emitted: HashSet::new(),
                nodes: Vec::new(),
                edges: Vec::new(),
            };
            f.visit(&Assignment::new(), "s0", None, 0);
            (f.nodes, f.edges)
        }
        Policy::Violating => violating::generate(&ctx, options.depth),
    };
    StateTree {
        policy,
        options: options.clone(),
        root: ConfigState::root(),
        nodes,
        edges,
    }
}

//! Violating policy: one state per witness of each targeted dependency.

use std::collections::HashSet;

use super::state::{canonicalize, Assignment, ConfigState};
use super::tree::{Ctx, Edge};
use super::validate::effective;
use crate::deps::{Constraint, Dependency, Polarity};
use crate::taint::{ParamKind, ParamValue};

fn flag(on: bool) -> ParamValue {
    ParamValue::Flag(on)
}

/// Assignments that break `d` on their own, before any repair.
fn witnesses(ctx: &Ctx, d: &Dependency) -> Vec<Assignment> {
    let one = |v: ParamValue| Assignment::from([(d.participants[0].clone(), v)]);
    match &d.constraint {
        Constraint::DataType { kind } => match kind {
            ParamKind::Int => vec![one(ParamValue::Text("4k".into()))],
            ParamKind::Flag => vec![one(ParamValue::Text("maybe".into()))],
            ParamKind::String | ParamKind::Enum => Vec::new(),
        },
        Constraint::ValueRange {
            min,
            max,
            excluded,
            power_of_two,
            choices,
        } => {
            let mut vals = Vec::new();
            vals.extend(min.map(|m| m.saturating_sub(1)));
            vals.extend(max.map(|m| m.saturating_add(1)));
            if *power_of_two {
                let lo = min.unwrap_or(1).max(1);
                let hi = max.unwrap_or(i64::MAX);
                vals.extend((lo..=hi).take(1 << 20).find(|v| v & (v - 1) != 0));
            }
            vals.extend(excluded.iter().copied());
            let mut out: Vec<Assignment> = Vec::new();
            for v in vals {
                let a = one(ParamValue::Int(v));
                if !out.contains(&a) {
                    out.push(a);
                }
            }
            if !choices.is_empty() {
                out.push(one(ParamValue::Text("bogus".into())));
            }
            out
        }
        Constraint::Control { polarity } => {
            let (a, b) = (&d.participants[0], &d.participants[1]);
            let on_b = matches!(polarity, Polarity::Conflicts);
            vec![Assignment::from([
                (a.clone(), flag(true)),
                (b.clone(), flag(on_b)),
            ])]
        }
        Constraint::Value { .. } => value_witness(ctx, d).into_iter().collect(),
        Constraint::Behavioral => Vec::new(),
    }
}

/// Smallest change from the defaults that breaks a value template and
/// nothing else, trying one parameter at a time before pairs.
fn value_witness(ctx: &Ctx, d: &Dependency) -> Option<Assignment> {
    let metas: Vec<_> = d.participants.iter().filter_map(|p| ctx.meta(p)).collect();
    let mut singles = Vec::new();
    for m in &metas {
        for v in ctx.values(m) {
            singles.push(Assignment::from([(m.id(), v)]));
        }
    }
    let mut pairs = Vec::new();
    if let [m1, m2] = metas.as_slice() {
        for v1 in ctx.values(m1) {
            for v2 in ctx.values(m2) {
                pairs.push(Assignment::from([(m1.id(), v1.clone()), (m2.id(), v2)]));
            }
        }
    }
    let breaks_only = |a: &Assignment| {
        let v = ctx.violated(a);
        v.len() == 1 && v[0].id == d.id
    };
    let breaks = |a: &Assignment| ctx.violated(a).iter().any(|x| x.id == d.id);
    singles
        .iter()
        .chain(&pairs)
        .find(|a| breaks_only(a))
        .or_else(|| singles.iter().chain(&pairs).find(|a| breaks(a)))
        .cloned()
}

/// Greedily fix every other broken dependency by changing one of its
/// parameters that the target does not involve. `None` if some extra
/// violation resists.
fn repair(ctx: &Ctx, target: &Dependency, mut a: Assignment) -> Option<Assignment> {
    for _ in 0..ctx.deps.len() {
        let violated = ctx.violated(&a);
        let Some(extra) = violated.iter().find(|d| d.id != target.id) else {
            return Some(a);
        };
        let mut fixed = None;
        'search: for p in extra.participants.iter().filter(|p| !target.involves(p)) {
            let Some(m) = ctx.meta(p) else { continue };
            for v in ctx.values(m) {
                if effective(&a, ctx.input, p).as_ref() == Some(&v) {
                    continue;
                }
                let mut b = a.clone();
                b.insert(p.clone(), v);
                let after = ctx.violated(&b);
                if after.iter().any(|d| d.id == target.id) && after.len() < violated.len() {
                    fixed = Some(b);
                    break 'search;
                }
            }
        }
        a = fixed?;
    }
    None
}

pub(super) fn generate(ctx: &Ctx, depth: usize) -> (Vec<ConfigState>, Vec<Edge>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let targets = ctx
        .deps
        .iter()
        .filter(|d| d.constraint != Constraint::Behavioral)
        .filter(|d| d.participants.iter().any(|p| ctx.in_subset(p)));
    for target in targets {
        for w in witnesses(ctx, target) {
            if !ctx.violated(&w).iter().any(|d| d.id == target.id) {
                continue;
            }
            let (a, entangled) = match repair(ctx, target, w.clone()) {
                Some(a) => (a, false),
                None => (w, true),
            };
            if a.len() > depth || !seen.insert(canonicalize(&a)) {
                continue;
            }
            let broken = ctx.violated(&a);
            let id = format!("s{}", nodes.len() + 1);
            edges.push(Edge {
                from: "s0".into(),
                to: id.clone(),
            });
            let mut provenance = ctx.provenance(&a, &broken);
            // The target goes first so consumers can read it off directly.
            if let Some(i) = provenance.iter().position(|p| p.dependency == target.id) {
                let t = provenance.remove(i);
                provenance.insert(0, t);
            }
            nodes.push(ConfigState {
                id,
                depth: a.len(),
                assignments: a,
                provenance,
                parent: Some("s0".into()),
                entangled,
            });
        }
    }
    (nodes, edges)
}

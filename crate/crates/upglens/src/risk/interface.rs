//! Interface and selector collision detection across callee versions and
//! between caller and callee dispatch tables.

use serde::{Deserialize, Serialize};

use crate::bytecode::{extract_selectors, DispatchTable, ExecConfig, FunctionEntry};
use crate::diag::{Diagnostic, DiagnosticKind};
use crate::ingest::{AbiEntry, AbiKind};
use crate::primitives::{Selector, Word};

/// Whether a finding came from full ABI documents or only from
/// bytecode-recovered dispatch tables (outputs are not recoverable from
/// bytecode, so OutputChanged implies Full).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Full,
    SelectorOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterfaceKind {
    RemovedAbi {
        selector: Selector,
        signature: String,
    },
    OutputChanged {
        selector: Selector,
        signature: String,
        old_outputs: Vec<String>,
        new_outputs: Vec<String>,
    },
    SelectorShadowed {
        selector: Selector,
        caller_function: Option<String>,
        callee_function: Option<String>,
    },
}

/// Which chain and version pair a finding belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VersionContext {
    pub chain_id: Word,
    pub from_version: u32,
    pub to_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceFinding {
    pub chain_id: Word,
    pub from_version: u32,
    pub to_version: u32,
    #[serde(flatten)]
    pub kind: InterfaceKind,
    pub confidence: Confidence,
}

/// ABI-level diff between two callee versions: a RemovedAbi per function
/// selector that disappeared, an OutputChanged per selector whose canonical
/// output list changed. Additions are the safe path and produce nothing.
pub fn diff_abis(ctx: VersionContext, old: &[AbiEntry], new: &[AbiEntry]) -> Vec<InterfaceFinding> {
    let functions = |entries: &[AbiEntry]| -> Vec<AbiEntry> {
        entries.iter().filter(|e| e.kind == AbiKind::Function).cloned().collect()
    };
    let old_fns = functions(old);
    let new_fns = functions(new);

    let mut findings = Vec::new();
    for f in &old_fns {
        let Some(selector) = f.selector else { continue };
        match new_fns.iter().find(|n| n.selector == Some(selector)) {
            None => findings.push(InterfaceFinding {
                chain_id: ctx.chain_id,
                from_version: ctx.from_version,
                to_version: ctx.to_version,
                kind: InterfaceKind::RemovedAbi { selector, signature: f.signature() },
                confidence: Confidence::Full,
            }),
            Some(n) if n.outputs != f.outputs => findings.push(InterfaceFinding {
                chain_id: ctx.chain_id,
                from_version: ctx.from_version,
                to_version: ctx.to_version,
                kind: InterfaceKind::OutputChanged {
                    selector,
                    signature: f.signature(),
                    old_outputs: f.outputs.clone(),
                    new_outputs: n.outputs.clone(),
                },
                confidence: Confidence::Full,
            }),
            Some(_) => {}
        }
    }
    findings.sort_by(|a, b| format!("{:?}", a.kind).cmp(&format!("{:?}", b.kind)));
    findings
}

/// State-mutability changes across versions are informational, not
/// findings: one note per selector whose declared mutability moved.
pub fn state_mutability_notes(old: &[AbiEntry], new: &[AbiEntry]) -> Vec<String> {
    let mut notes = Vec::new();
    for f in old.iter().filter(|e| e.kind == AbiKind::Function) {
        let Some(selector) = f.selector else { continue };
        let Some(n) = new.iter().find(|n| n.selector == Some(selector)) else { continue };
        if let (Some(before), Some(after)) = (&f.state_mutability, &n.state_mutability) {
            if before != after {
                notes.push(format!(
                    "{} ({selector}): state mutability changed {before} -> {after}",
                    f.signature()
                ));
            }
        }
    }
    notes.sort();
    notes
}

/// Degraded removal diff when source ABIs are unavailable: compare
/// bytecode-recovered dispatch tables. SelectorOnly confidence, no output
/// analysis possible.
pub fn selector_diff_from_bytecode(
    ctx: VersionContext,
    old_code: &[u8],
    new_code: &[u8],
    exec: ExecConfig,
) -> (Vec<InterfaceFinding>, Vec<Diagnostic>) {
    let old_table = extract_selectors(old_code, exec);
    let new_table = extract_selectors(new_code, exec);
    let mut diagnostics = Vec::new();
    for (side, table) in [("old", &old_table), ("new", &new_table)] {
        if table.diagnostics.iter().any(|d| d.kind == DiagnosticKind::NoDispatcher) {
            diagnostics.push(Diagnostic::new(
                DiagnosticKind::NoDispatcher,
                format!("{side} version has no recognizable dispatch table"),
            ));
        }
    }
    if !diagnostics.is_empty() {
        return (Vec::new(), diagnostics);
    }

    let new_selectors: Vec<Selector> = new_table.selectors().collect();
    let mut findings: Vec<InterfaceFinding> = old_table
        .selectors()
        .filter(|s| !new_selectors.contains(s))
        .map(|selector| InterfaceFinding {
            chain_id: ctx.chain_id,
            from_version: ctx.from_version,
            to_version: ctx.to_version,
            kind: InterfaceKind::RemovedAbi { selector, signature: selector.to_string() },
            confidence: Confidence::SelectorOnly,
        })
        .collect();
    findings.sort_by_key(|f| match f.kind {
        InterfaceKind::RemovedAbi { selector, .. } => selector,
        _ => Selector::default(),
    });
    (findings, diagnostics)
}

/// Selector collisions between a caller's and a callee's dispatch tables:
/// any shared selector means the caller shadows the callee's function.
/// Standard fallback-only proxies have no dispatched selectors and collide
/// with nothing.
pub fn detect_selector_collision(
    ctx: VersionContext,
    caller_entries: &[FunctionEntry],
    callee_entries: &[FunctionEntry],
) -> Vec<InterfaceFinding> {
    let mut findings = Vec::new();
    for caller_fn in caller_entries {
        let Some(selector) = caller_fn.selector else { continue };
        if callee_entries.iter().any(|e| e.selector == Some(selector)) {
            findings.push(InterfaceFinding {
                chain_id: ctx.chain_id,
                from_version: ctx.from_version,
                to_version: ctx.to_version,
                kind: InterfaceKind::SelectorShadowed {
                    selector,
                    caller_function: None,
                    callee_function: None,
                },
                confidence: Confidence::SelectorOnly,
            });
        }
    }
    findings.sort_by_key(|f| match f.kind {
        InterfaceKind::SelectorShadowed { selector, .. } => selector,
        _ => Selector::default(),
    });
    findings
}

/// Convenience over [`detect_selector_collision`] for whole tables.
pub fn detect_selector_collision_tables(
    ctx: VersionContext,
    caller: &DispatchTable,
    callee: &DispatchTable,
) -> Vec<InterfaceFinding> {
    detect_selector_collision(ctx, &caller.entries, &callee.entries)
}

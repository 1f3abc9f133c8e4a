//! Function dispatch-table recovery.
//!
//! Walks the code from offset 0 with the symbolic executor and reads the
//! selector comparisons off JUMPI conditions: the solc `PUSH4 / EQ / JUMPI`
//! chain, its `SUB`/`XOR` equality variants, and `DIV`- or `SHR`-based
//! selector extraction all reduce to "a branch whose condition compares a
//! small constant with a calldata-derived value".

use crate::diag::{Diagnostic, DiagnosticKind};
use crate::opcode as op;
use crate::primitives::{keccak256, Selector, Word};

use super::exec::{ExecConfig, Executor};
use super::FunctionEntry;

#[derive(Debug, Clone, Default)]
pub struct DispatchTable {
    pub entries: Vec<FunctionEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

impl DispatchTable {
    pub fn selectors(&self) -> impl Iterator<Item = Selector> + '_ {
        self.entries.iter().filter_map(|e| e.selector)
    }

    pub fn entry(&self, selector: Selector) -> Option<&FunctionEntry> {
        self.entries.iter().find(|e| e.selector == Some(selector))
    }

    pub fn fallback(&self) -> Option<&FunctionEntry> {
        self.entries.iter().find(|e| e.selector.is_none())
    }
}

/// Recovers every (selector, entry offset) pair reachable from the
/// dispatcher, plus a no-selector fallback entry when one exists. Code with
/// no recognizable dispatch table yields an empty table with a
/// `NoDispatcher` diagnostic, never a failure.
pub fn extract_selectors(code: &[u8], config: ExecConfig) -> DispatchTable {
    let mut table = DispatchTable::default();
    if code.is_empty() {
        table.diagnostics.push(Diagnostic::new(DiagnosticKind::NoDispatcher, "empty code"));
        return table;
    }

    let outcome = Executor::new(code, config).run(0);

    // (selector, body entry, jumpi site) in code order
    let mut raw: Vec<(Selector, usize, usize)> = Vec::new();
    for obs in &outcome.jumpi_sites {
        let Some((selector, eq_when_jumping)) = selector_comparison(&obs.cond) else {
            continue;
        };
        let body = if eq_when_jumping {
            match obs.dest {
                Some(d) => d,
                None => continue,
            }
        } else {
            // equal falls through; the jump goes to the next comparison
            obs.site + 1
        };
        raw.push((selector, body, obs.site));
    }
    raw.sort_by_key(|&(sel, _, site)| (site, sel));

    let mut seen = std::collections::BTreeSet::new();
    let mut last_site = None;
    for (selector, body, site) in &raw {
        if seen.insert(*selector) {
            let (_, body_hash) = function_body(code, *body, config);
            table.entries.push(FunctionEntry {
                selector: Some(*selector),
                entry_offset: *body,
                body_hash,
            });
            last_site = Some((*site, *body));
        }
    }

    if table.entries.is_empty() {
        table.diagnostics.push(Diagnostic::new(
            DiagnosticKind::NoDispatcher,
            "no selector comparisons reachable from offset 0",
        ));
        return table;
    }

    // The no-match continuation of the final comparison is the fallback
    // body, unless it is a plain revert stub.
    if let Some((site, body)) = last_site {
        let fallthrough = if body == site + 1 {
            // equal-falls-through style: no-match path is the jump target,
            // already consumed as the next comparison; the chain end is not
            // recoverable this way
            None
        } else {
            Some(site + 1)
        };
        if let Some(fb) = fallthrough {
            let (offsets, body_hash) = function_body(code, fb, config);
            if has_effectful_op(code, &offsets) {
                table.entries.push(FunctionEntry {
                    selector: None,
                    entry_offset: fb,
                    body_hash,
                });
            }
        }
    }

    table.entries.sort_by_key(|e| (e.selector.is_none(), e.selector, e.entry_offset));
    table
}

/// Instructions reachable from `entry` (sorted offsets) and the hash of the
/// normalized body: PUSH immediates that point at a JUMPDEST are zeroed
/// before hashing so two compilations differing only in layout still match.
pub fn function_body(code: &[u8], entry: usize, config: ExecConfig) -> (Vec<usize>, Word) {
    let outcome = Executor::new(code, config).run(entry);
    let offsets: Vec<usize> = outcome.visited_offsets.iter().copied().collect();

    let mut normalized = Vec::new();
    for &o in &offsets {
        let opcode = code[o];
        normalized.push(opcode);
        let imm_len = op::immediate_len(opcode);
        if imm_len > 0 {
            let mut imm = vec![0u8; imm_len];
            let avail = (code.len() - o - 1).min(imm_len);
            imm[..avail].copy_from_slice(&code[o + 1..o + 1 + avail]);
            if is_jumpdest_ref(code, &imm) {
                imm.iter_mut().for_each(|b| *b = 0);
            }
            normalized.extend_from_slice(&imm);
        }
    }
    (offsets, Word::from_be_bytes(&keccak256(&normalized)))
}

fn is_jumpdest_ref(code: &[u8], immediate: &[u8]) -> bool {
    if immediate.len() > 4 {
        return false;
    }
    let v = Word::from_be_slice(immediate);
    match v.as_u64() {
        Some(t) if (t as usize) < code.len() => code[t as usize] == op::JUMPDEST,
        _ => false,
    }
}

/// True when a body does anything beyond reverting: a revert stub is the
/// compiler's "no fallback exists" path, not a function.
fn has_effectful_op(code: &[u8], offsets: &[usize]) -> bool {
    offsets.iter().any(|&o| {
        matches!(
            code[o],
            op::RETURN
                | op::STOP
                | op::SSTORE
                | op::CALL
                | op::CALLCODE
                | op::DELEGATECALL
                | op::STATICCALL
                | op::CREATE
                | op::CREATE2
                | op::SELFDESTRUCT
                | op::LOG0..=op::LOG4
        )
    })
}

/// Reads a selector comparison out of a JUMPI condition.
///
/// Returns the selector and whether the *jump-taken* branch is the
/// equal-branch. Handles EQ, SUB and XOR cores under any number of ISZERO
/// wrappers.
fn selector_comparison(cond: &super::SymbolicValue) -> Option<(Selector, bool)> {
    use super::SymbolicValue as V;
    let mut inverted = false;
    let mut cur = cond;
    while let V::Computed { op: "ISZERO", operands } = cur {
        inverted = !inverted;
        cur = operands.first()?;
    }
    let (core_eq, a, b) = match cur {
        V::Computed { op: "EQ", operands } if operands.len() == 2 => {
            (true, &operands[0], &operands[1])
        }
        V::Computed { op: "SUB", operands } | V::Computed { op: "XOR", operands }
            if operands.len() == 2 =>
        {
            (false, &operands[0], &operands[1])
        }
        _ => return None,
    };
    let (konst, other) = match (a.as_constant(), b.as_constant()) {
        (Some(k), None) => (k, b),
        (None, Some(k)) => (k, a),
        _ => return None,
    };
    if !other.contains_calldata() {
        return None;
    }
    let selector = selector_of_constant(konst)?;
    // EQ: jump means equal. SUB/XOR: nonzero means different, so the jump
    // means not-equal. Each ISZERO wrapper flips the sense.
    let eq_when_jumping = if core_eq { !inverted } else { inverted };
    Some((selector, eq_when_jumping))
}

/// A plausible selector constant: either a right-aligned 4-byte value or a
/// left-aligned `sel << 224` form.
fn selector_of_constant(w: Word) -> Option<Selector> {
    if let Some(v) = w.as_u64() {
        if v <= u32::MAX as u64 && v > 0 {
            return Some(Selector((v as u32).to_be_bytes()));
        }
        return None;
    }
    let shifted = w.shr(Word::from_u64(224));
    if w == shifted.shl(Word::from_u64(224)) {
        let v = shifted.as_u64()? as u32;
        return Some(Selector(v.to_be_bytes()));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::asm::Asm;
    use crate::bytecode::SymbolicValue;

    /// PUSH4/EQ dispatcher for the given selectors, each body a distinct
    /// SSTORE so bodies differ, fallback reverting.
    pub(crate) fn dispatcher(selectors: &[[u8; 4]]) -> Vec<u8> {
        let mut a = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .push(224u64)
            .op(op::SHR);
        for (i, sel) in selectors.iter().enumerate() {
            a = a
                .op(op::DUP1)
                .push_bytes(sel)
                .op(op::EQ)
                .push_label(&format!("f{i}"))
                .op(op::JUMPI);
        }
        a = a.push(0u64).push(0u64).op(op::REVERT);
        for (i, _) in selectors.iter().enumerate() {
            a = a
                .label(&format!("f{i}"))
                .push((i + 1) as u64)
                .push(i as u64)
                .op(op::SSTORE)
                .op(op::STOP);
        }
        a.build()
    }

    #[test]
    fn single_selector_dispatcher() {
        let code = dispatcher(&[[0xa9, 0x05, 0x9c, 0xbb]]);
        let table = extract_selectors(&code, ExecConfig::default());
        let sels: Vec<_> = table.selectors().collect();
        assert_eq!(sels, vec![Selector([0xa9, 0x05, 0x9c, 0xbb])]);
        // Fallback path is a bare revert stub: no fallback entry.
        assert!(table.fallback().is_none());
    }

    #[test]
    fn two_selector_dispatcher_recovers_both() {
        let code = dispatcher(&[[0x42, 0x96, 0x6c, 0x68], [0xa9, 0x05, 0x9c, 0xbb]]);
        let table = extract_selectors(&code, ExecConfig::default());
        let mut sels: Vec<String> = table.selectors().map(|s| s.to_string()).collect();
        sels.sort();
        assert_eq!(sels, vec!["0x42966c68", "0xa9059cbb"]);
    }

    #[test]
    fn no_push4_comparisons_yield_empty_set() {
        let code = Asm::new().push(1u64).push(2u64).op(op::ADD).op(op::STOP).build();
        let table = extract_selectors(&code, ExecConfig::default());
        assert!(table.entries.is_empty());
        assert!(table.diagnostics.iter().any(|d| d.kind == DiagnosticKind::NoDispatcher));
    }

    #[test]
    fn div_based_selector_extraction() {
        // pre-SHR compilers divide calldataload(0) by 2^224:
        // CALLDATALOAD; PUSH 2^224; SWAP1; DIV -> selector word
        let div224 = Word::from_u64(1).shl(Word::from_u64(224));
        let code = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .push32(div224)
            .op(op::SWAP1)
            .op(op::DIV)
            .op(op::DUP1)
            .push_bytes(&[0xaa, 0xbb, 0xcc, 0xdd])
            .op(op::EQ)
            .push_label("f")
            .op(op::JUMPI)
            .push(0u64)
            .push(0u64)
            .op(op::REVERT)
            .label("f")
            .push(0xbeefu64)
            .push(0u64)
            .op(op::SSTORE)
            .op(op::STOP)
            .build();
        let table = extract_selectors(&code, ExecConfig::default());
        assert_eq!(table.selectors().collect::<Vec<_>>(), vec![Selector([0xaa, 0xbb, 0xcc, 0xdd])]);
    }

    #[test]
    fn split_dispatcher_reaches_both_leaves() {
        // binary-search shape: a GT split first, EQ leaves on both sides
        let code = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .push(224u64)
            .op(op::SHR)
            .op(op::DUP1)
            .push_bytes(&[0x80, 0x00, 0x00, 0x00])
            .op(op::GT) // 0x80000000 > sel ?
            .push_label("low")
            .op(op::JUMPI)
            .op(op::DUP1)
            .push_bytes(&[0xf0, 0x00, 0x00, 0x01])
            .op(op::EQ)
            .push_label("fhigh")
            .op(op::JUMPI)
            .push(0u64)
            .push(0u64)
            .op(op::REVERT)
            .label("low")
            .op(op::DUP1)
            .push_bytes(&[0x10, 0x00, 0x00, 0x02])
            .op(op::EQ)
            .push_label("flow")
            .op(op::JUMPI)
            .push(0u64)
            .push(0u64)
            .op(op::REVERT)
            .label("fhigh")
            .push(1u64)
            .push(0u64)
            .op(op::SSTORE)
            .op(op::STOP)
            .label("flow")
            .push(2u64)
            .push(0u64)
            .op(op::SSTORE)
            .op(op::STOP)
            .build();
        let table = extract_selectors(&code, ExecConfig::default());
        let mut sels: Vec<Selector> = table.selectors().collect();
        sels.sort();
        assert_eq!(sels, vec![Selector([0x10, 0x00, 0x00, 0x02]), Selector([0xf0, 0x00, 0x00, 0x01])]);
    }

    #[test]
    fn real_fallback_body_is_reported() {
        // dispatcher whose no-match path delegates (a proxy with one
        // dispatched function): fallback entry expected
        let code = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .push(224u64)
            .op(op::SHR)
            .push_bytes(&[0x11, 0x22, 0x33, 0x44])
            .op(op::EQ)
            .push_label("f")
            .op(op::JUMPI)
            // fallback: delegatecall through slot 0
            .push(0u64)
            .push(0u64)
            .op(op::CALLDATASIZE)
            .push(0u64)
            .push(0u64)
            .op(op::SLOAD)
            .op(op::GAS)
            .op(op::DELEGATECALL)
            .op(op::STOP)
            .label("f")
            .push(0xbeefu64)
            .push(0u64)
            .op(op::SSTORE)
            .op(op::STOP)
            .build();
        let table = extract_selectors(&code, ExecConfig::default());
        assert_eq!(table.selectors().count(), 1);
        let fallback = table.fallback().expect("delegating fallback must be reported");
        assert!(fallback.selector.is_none());
    }

    #[test]
    fn sub_style_equality_recovers_selector() {
        // jump-if-different to the revert; equal falls through to the body
        let code = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .push(224u64)
            .op(op::SHR)
            .push_bytes(&[0x11, 0x22, 0x33, 0x44])
            .op(op::SUB)
            .push_label("nomatch")
            .op(op::JUMPI)
            .push(7u64)
            .push(0u64)
            .op(op::SSTORE)
            .op(op::STOP)
            .label("nomatch")
            .push(0u64)
            .push(0u64)
            .op(op::REVERT)
            .build();
        let table = extract_selectors(&code, ExecConfig::default());
        let sels: Vec<_> = table.selectors().collect();
        assert_eq!(sels, vec![Selector([0x11, 0x22, 0x33, 0x44])]);
    }

    #[test]
    fn selector_comparison_parses_iszero_wrapping() {
        let sel_expr = SymbolicValue::Computed {
            op: "SHR",
            operands: vec![
                SymbolicValue::constant(Word::from_u64(224)),
                SymbolicValue::CalldataLoad,
            ],
        };
        let eq = SymbolicValue::Computed {
            op: "EQ",
            operands: vec![
                SymbolicValue::constant(Word::from_u64(0xa9059cbb)),
                sel_expr.clone(),
            ],
        };
        assert_eq!(
            selector_comparison(&eq),
            Some((Selector([0xa9, 0x05, 0x9c, 0xbb]), true))
        );
        let wrapped = SymbolicValue::Computed { op: "ISZERO", operands: vec![eq] };
        assert_eq!(
            selector_comparison(&wrapped),
            Some((Selector([0xa9, 0x05, 0x9c, 0xbb]), false))
        );
    }

    #[test]
    fn body_hash_ignores_jumpdest_relocation() {
        // Same body assembled at two different offsets: a leading JUMPDEST
        // pad shifts everything, internal jump immediates differ, hashes
        // must not.
        fn body_at(pad: usize) -> (Vec<u8>, usize) {
            let mut a = Asm::new();
            for _ in 0..pad {
                a = a.op(op::JUMPDEST);
            }
            let entry = pad;
            // data constants sit above any code offset so normalization
            // can never mistake them for jump destinations
            let a = a
                .label("entry")
                .push(0xbeefu64)
                .push_label("tail")
                .op(op::JUMP)
                .label("tail")
                .push(0xcafeu64)
                .op(op::SSTORE)
                .op(op::STOP);
            (a.build(), entry)
        }
        let (code_a, entry_a) = body_at(0);
        let (code_b, entry_b) = body_at(7);
        let (_, hash_a) = function_body(&code_a, entry_a, ExecConfig::default());
        let (_, hash_b) = function_body(&code_b, entry_b, ExecConfig::default());
        assert_eq!(hash_a, hash_b);
    }
}

//! DELEGATECALL target provenance: resolve each site's address operand to
//! storage (with slot locators), a hardcoded constant, calldata, a storage
//! mapping, or unknown — and from that decide upgradeability.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diag::{Diagnostic, DiagnosticKind};
use crate::primitives::{Address, Word, EIP1822_PROXIABLE_SLOT, EIP1967_IMPL_SLOT};

use super::exec::{ExecConfig, ExecOutcome, Executor};
use super::{ProvenanceClass, SlotLocator, SymbolicValue};

/// Classification of one DELEGATECALL site together with the distinct
/// symbolic targets that reached it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteClassification {
    pub site: usize,
    pub class: ProvenanceClass,
}

/// Full per-contract answer: the upgradeable flag, the union of concrete
/// target locators, per-site provenance and accumulated diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeabilityReport {
    pub upgradeable: bool,
    pub locators: Vec<SlotLocator>,
    pub sites: Vec<SiteClassification>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Explorer-deception shape: the standard slot explorers display is not a
/// DELEGATECALL target, while the real target lives in a custom slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeceptionFinding {
    /// The standard slot the code touches but never delegates through.
    pub decoy_slot: Word,
    pub decoy_standard: DecoyStandard,
    /// The non-standard slots the targets actually come from.
    pub actual_locators: Vec<SlotLocator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyStandard {
    Eip1967Implementation,
    Eip1822Proxiable,
}

/// Classifies the target provenance of every DELEGATECALL site in the
/// code. Sites no resolvable path reaches (dead code, unresolved jumps,
/// exhausted budget) classify Unknown, so the map is total over the
/// disassembly's DELEGATECALL instructions. Pure function of the code
/// bytes.
pub fn classify_delegatecall_targets(
    code: &[u8],
    config: ExecConfig,
) -> (BTreeMap<usize, ProvenanceClass>, Vec<Diagnostic>) {
    let outcome = Executor::new(code, config).run(0);
    classify_from_outcome(code, &outcome)
}

fn classify_from_outcome(
    code: &[u8],
    outcome: &ExecOutcome,
) -> (BTreeMap<usize, ProvenanceClass>, Vec<Diagnostic>) {
    let mut diagnostics: Vec<Diagnostic> = outcome.diagnostics.clone();
    let mut map = BTreeMap::new();
    for (&site, targets) in &outcome.delegatecall_targets {
        let mut classes = Vec::new();
        for t in targets {
            let (class, mut diags) = classify_target_value(t);
            classes.push(class);
            diagnostics.append(&mut diags);
        }
        map.insert(site, merge_classes(site, classes, &mut diagnostics));
    }
    for insn in super::disassemble(code) {
        if insn.opcode == crate::opcode::DELEGATECALL {
            map.entry(insn.offset).or_insert(ProvenanceClass::Unknown);
        }
    }
    (map, diagnostics)
}

/// Resolves one symbolic target value. Exposed separately so fixtures can
/// assert on the value-level classification.
pub fn classify_target_value(value: &SymbolicValue) -> (ProvenanceClass, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let stripped = strip_extraction(value);

    let class = match &stripped.core {
        SymbolicValue::Constant { value, .. } => {
            ProvenanceClass::ConstantTarget { address: value.address_at(0) }
        }
        SymbolicValue::StorageLoad(slot) => match slot.as_constant() {
            Some(slot_word) => {
                let folded = matches!(**slot, SymbolicValue::Constant { folded: true, .. });
                let byte_offset = match stripped.byte_offset() {
                    Some(off) if !stripped.low_confidence => off,
                    _ => {
                        if stripped.low_confidence || stripped.bit_offset != 0 {
                            diagnostics.push(Diagnostic::new(
                                DiagnosticKind::LowConfidenceOffset,
                                format!(
                                    "non-standard extraction over slot {slot_word}; offset defaulted to 0"
                                ),
                            ));
                        }
                        0
                    }
                };
                let locator = if folded {
                    SlotLocator::folded(slot_word, byte_offset)
                } else {
                    SlotLocator::direct(slot_word, byte_offset)
                };
                ProvenanceClass::Storage { locators: vec![locator] }
            }
            None => {
                if slot.contains_calldata() || slot.contains_unfolded_sha3() {
                    ProvenanceClass::MappingDependent { slot_expr: slot.to_string() }
                } else {
                    ProvenanceClass::Unknown
                }
            }
        },
        SymbolicValue::CalldataLoad => ProvenanceClass::Calldata,
        _ => ProvenanceClass::Unknown,
    };
    (class, diagnostics)
}

struct Stripped {
    core: SymbolicValue,
    /// Net right-shift applied to the core before use as an address.
    bit_offset: i64,
    low_confidence: bool,
}

impl Stripped {
    fn byte_offset(&self) -> Option<u8> {
        if self.bit_offset >= 0 && self.bit_offset % 8 == 0 {
            let b = self.bit_offset / 8;
            (b <= 12).then_some(b as u8)
        } else {
            None
        }
    }
}

const ADDRESS_MASK_BITS: u32 = 160;

fn address_mask() -> Word {
    Word::from_u64(1).shl(Word::from_u64(ADDRESS_MASK_BITS as u64)).wrapping_sub(Word::from_u64(1))
}

/// Peels masking and shifting off an address expression, accumulating the
/// net bit offset: AND with the 160-bit mask, SHR/SHL pairs, DIV by a power
/// of two. Unrecognized masks mark the result low-confidence.
fn strip_extraction(value: &SymbolicValue) -> Stripped {
    let mut cur = value.clone();
    let mut bit_offset: i64 = 0;
    let mut low_confidence = false;

    loop {
        match cur {
            SymbolicValue::Computed { op: "AND", ref operands } if operands.len() == 2 => {
                let (mask, other) = match (operands[0].as_constant(), operands[1].as_constant()) {
                    (Some(m), None) => (m, operands[1].clone()),
                    (None, Some(m)) => (m, operands[0].clone()),
                    _ => break,
                };
                if mask != address_mask() {
                    low_confidence = true;
                }
                cur = other;
            }
            SymbolicValue::Computed { op: "SHR", ref operands } if operands.len() == 2 => {
                match operands[0].as_constant().and_then(|w| w.as_u64()) {
                    Some(shift) => {
                        bit_offset += shift as i64;
                        cur = operands[1].clone();
                    }
                    None => break,
                }
            }
            SymbolicValue::Computed { op: "SHL", ref operands } if operands.len() == 2 => {
                match operands[0].as_constant().and_then(|w| w.as_u64()) {
                    Some(shift) => {
                        bit_offset -= shift as i64;
                        cur = operands[1].clone();
                    }
                    None => break,
                }
            }
            SymbolicValue::Computed { op: "DIV", ref operands } if operands.len() == 2 => {
                match operands[1].as_constant().and_then(|w| w.power_of_two_exponent()) {
                    Some(exp) => {
                        bit_offset += exp as i64;
                        cur = operands[0].clone();
                    }
                    None => break,
                }
            }
            _ => break,
        }
    }
    Stripped { core: cur, bit_offset, low_confidence }
}

/// Merge rule across paths reaching one site: storage provenance wins and
/// locators union; otherwise the most informative class is kept.
fn merge_classes(
    site: usize,
    classes: Vec<ProvenanceClass>,
    diagnostics: &mut Vec<Diagnostic>,
) -> ProvenanceClass {
    let mut locators: Vec<SlotLocator> = Vec::new();
    let mut saw_storage = false;
    let mut saw_other = false;
    for c in &classes {
        match c {
            ProvenanceClass::Storage { locators: l } => {
                saw_storage = true;
                for loc in l {
                    if !locators.contains(loc) {
                        locators.push(loc.clone());
                    }
                }
            }
            ProvenanceClass::Unknown => {}
            _ => saw_other = true,
        }
    }
    if saw_storage {
        if saw_other {
            diagnostics.push(Diagnostic::new(
                DiagnosticKind::MixedProvenance,
                format!("site {site} resolves to storage on some paths and elsewhere on others"),
            ));
        }
        locators.sort();
        return ProvenanceClass::Storage { locators };
    }
    for c in &classes {
        if matches!(c, ProvenanceClass::MappingDependent { .. }) {
            return c.clone();
        }
    }
    for c in &classes {
        if matches!(c, ProvenanceClass::Calldata) {
            return c.clone();
        }
    }
    let mut constants: Vec<Address> = classes
        .iter()
        .filter_map(|c| match c {
            ProvenanceClass::ConstantTarget { address } => Some(*address),
            _ => None,
        })
        .collect();
    constants.sort();
    constants.dedup();
    if constants.len() > 1 {
        diagnostics.push(Diagnostic::new(
            DiagnosticKind::MixedProvenance,
            format!("site {site} has {} distinct constant targets", constants.len()),
        ));
    }
    if let Some(addr) = constants.first() {
        return ProvenanceClass::ConstantTarget { address: *addr };
    }
    ProvenanceClass::Unknown
}

/// A contract is upgradeable iff at least one DELEGATECALL target resolves
/// to storage behind a concrete (direct or folded) slot locator.
pub fn is_upgradeable(code: &[u8], config: ExecConfig) -> UpgradeabilityReport {
    let (map, mut diagnostics) = classify_delegatecall_targets(code, config);

    let mut locators: Vec<SlotLocator> = Vec::new();
    let mut mapping_only_sites = 0usize;
    for class in map.values() {
        match class {
            ProvenanceClass::Storage { locators: l } => {
                for loc in l {
                    if loc.concrete_slot().is_some() && !locators.contains(loc) {
                        locators.push(loc.clone());
                    }
                }
            }
            ProvenanceClass::MappingDependent { .. } => mapping_only_sites += 1,
            _ => {}
        }
    }
    locators.sort();
    let upgradeable = !locators.is_empty();
    if !upgradeable && mapping_only_sites > 0 {
        diagnostics.push(Diagnostic::new(
            DiagnosticKind::MappingDependentOnly,
            format!(
                "{mapping_only_sites} DELEGATECALL site(s) resolve only through storage mappings; \
                 slots cannot be enumerated statically"
            ),
        ));
    }

    let sites = map
        .into_iter()
        .map(|(site, class)| SiteClassification { site, class })
        .collect();
    UpgradeabilityReport { upgradeable, locators, sites, diagnostics }
}

/// Fig-6-style deception: the code touches an EIP-1967/EIP-1822 standard
/// slot (which explorers display) while its DELEGATECALL targets live in a
/// non-standard slot.
pub fn detect_slot_deception(code: &[u8], config: ExecConfig) -> Option<DeceptionFinding> {
    let outcome = Executor::new(code, config).run(0);
    let (map, _) = classify_from_outcome(code, &outcome);

    let mut target_slots: Vec<Word> = Vec::new();
    let mut actual_locators: Vec<SlotLocator> = Vec::new();
    for class in map.values() {
        for loc in class.storage_locators() {
            if let Some(w) = loc.concrete_slot() {
                target_slots.push(w);
                if !is_standard_slot(w) && !actual_locators.contains(loc) {
                    actual_locators.push(loc.clone());
                }
            }
        }
    }
    if actual_locators.is_empty() {
        return None; // no non-standard target slot: nothing to hide
    }

    let mut touched: Vec<Word> = outcome
        .storage_accesses
        .iter()
        .filter_map(|a| a.slot.as_constant())
        .collect();
    touched.sort();
    touched.dedup();

    for (slot, standard) in [
        (EIP1967_IMPL_SLOT, DecoyStandard::Eip1967Implementation),
        (EIP1822_PROXIABLE_SLOT, DecoyStandard::Eip1822Proxiable),
    ] {
        if touched.contains(&slot) && !target_slots.contains(&slot) {
            actual_locators.sort();
            return Some(DeceptionFinding {
                decoy_slot: slot,
                decoy_standard: standard,
                actual_locators,
            });
        }
    }
    None
}

fn is_standard_slot(w: Word) -> bool {
    w == EIP1967_IMPL_SLOT || w == EIP1822_PROXIABLE_SLOT
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::asm::Asm;
    use crate::bytecode::SlotRef;
    use crate::opcode as op;

    /// delegatecall(gas, <target already on stack>, 0, calldatasize, 0, 0)
    fn delegatecall_tail(a: Asm) -> Asm {
        a.op(op::GAS).op(op::DELEGATECALL).op(op::STOP)
    }

    fn call_prologue() -> Asm {
        Asm::new().push(0u64).push(0u64).op(op::CALLDATASIZE).push(0u64)
    }

    #[test]
    fn direct_slot_proxy() {
        let code = delegatecall_tail(call_prologue().push(0u64).op(op::SLOAD)).build();
        let (map, _) = classify_delegatecall_targets(&code, ExecConfig::default());
        let class = map.values().next().unwrap();
        assert_eq!(
            class,
            &ProvenanceClass::Storage { locators: vec![SlotLocator::direct(Word::ZERO, 0)] }
        );
    }

    #[test]
    fn hardcoded_target_is_constant() {
        let addr = [0xaa; 20];
        let code = delegatecall_tail(call_prologue().push_bytes(&addr)).build();
        let (map, _) = classify_delegatecall_targets(&code, ExecConfig::default());
        assert_eq!(
            map.values().next().unwrap(),
            &ProvenanceClass::ConstantTarget { address: Address(addr) }
        );
    }

    #[test]
    fn calldata_forwarder() {
        let code = delegatecall_tail(call_prologue().push(0u64).op(op::CALLDATALOAD)).build();
        let report = is_upgradeable(&code, ExecConfig::default());
        assert!(!report.upgradeable);
        assert!(report.locators.is_empty());
        assert_eq!(report.sites[0].class, ProvenanceClass::Calldata);
    }

    #[test]
    fn unreached_delegatecall_sites_classify_unknown() {
        // a DELEGATECALL behind an unresolvable jump still appears in the
        // map, as Unknown
        let reachable = delegatecall_tail(call_prologue().push(3u64).op(op::SLOAD)).build();
        let mut code = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .op(op::JUMP) // dynamic target: path ends here
            .build();
        let dead_site = code.len() + reachable.len() - 2; // DELEGATECALL is second-to-last
        code.extend(&reachable);
        let (map, _) = classify_delegatecall_targets(&code, ExecConfig::default());
        assert_eq!(map.len(), 1);
        assert_eq!(map.get(&dead_site), Some(&ProvenanceClass::Unknown));
    }

    #[test]
    fn packed_offset_recovered_via_shr_and_mask() {
        for offset in 0u8..=12 {
            let code = delegatecall_tail(
                call_prologue()
                    .push(5u64)
                    .op(op::SLOAD)
                    .push((offset as u64) * 8)
                    .op(op::SHR)
                    .push32(address_mask())
                    .op(op::AND),
            )
            .build();
            let (map, diags) = classify_delegatecall_targets(&code, ExecConfig::default());
            assert_eq!(
                map.values().next().unwrap(),
                &ProvenanceClass::Storage {
                    locators: vec![SlotLocator::direct(Word::from_u64(5), offset)]
                },
                "offset {offset}"
            );
            assert!(diags.iter().all(|d| d.kind != DiagnosticKind::LowConfidenceOffset));
        }
    }

    #[test]
    fn nonstandard_mask_defaults_to_zero_with_diagnostic() {
        let odd_mask = Word::from_u64(1)
            .shl(Word::from_u64(120))
            .wrapping_sub(Word::from_u64(1));
        let code = delegatecall_tail(
            call_prologue().push(5u64).op(op::SLOAD).push(8u64).op(op::SHR).push32(odd_mask).op(op::AND),
        )
        .build();
        let (map, diags) = classify_delegatecall_targets(&code, ExecConfig::default());
        assert_eq!(
            map.values().next().unwrap(),
            &ProvenanceClass::Storage { locators: vec![SlotLocator::direct(Word::from_u64(5), 0)] }
        );
        assert!(diags.iter().any(|d| d.kind == DiagnosticKind::LowConfidenceOffset));
    }

    #[test]
    fn mapping_dependent_is_not_upgradeable() {
        let code = delegatecall_tail(
            call_prologue()
                .push(4u64)
                .op(op::CALLDATALOAD)
                .push(0u64)
                .op(op::MSTORE)
                .push(2u64)
                .push(0x20u64)
                .op(op::MSTORE)
                .push(0x40u64)
                .push(0u64)
                .op(op::SHA3)
                .op(op::SLOAD),
        )
        .build();
        let report = is_upgradeable(&code, ExecConfig::default());
        assert!(!report.upgradeable);
        assert!(matches!(report.sites[0].class, ProvenanceClass::MappingDependent { .. }));
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::MappingDependentOnly));
    }

    #[test]
    fn two_path_targets_union_at_one_site() {
        // calldata chooses which slot feeds the single DELEGATECALL
        let code = Asm::new()
            .push(0u64)
            .op(op::CALLDATALOAD)
            .push_label("alt")
            .op(op::JUMPI)
            .push(3u64)
            .op(op::SLOAD)
            .push_label("dc")
            .op(op::JUMP)
            .label("alt")
            .push(4u64)
            .op(op::SLOAD)
            .push_label("dc")
            .op(op::JUMP)
            .label("dc")
            // stack: [target]; build the call args around it
            .push(0u64)
            .push(0u64)
            .op(op::CALLDATASIZE)
            .push(0u64)
            .op(op::DUP1 + 4)
            .op(op::GAS)
            .op(op::DELEGATECALL)
            .op(op::STOP)
            .build();
        let (map, _) = classify_delegatecall_targets(&code, ExecConfig::default());
        assert_eq!(map.len(), 1);
        let class = map.values().next().unwrap();
        assert_eq!(
            class,
            &ProvenanceClass::Storage {
                locators: vec![
                    SlotLocator::direct(Word::from_u64(3), 0),
                    SlotLocator::direct(Word::from_u64(4), 0),
                ]
            }
        );
    }

    #[test]
    fn runtime_folded_slot_is_folded_constant() {
        // sload(keccak256("LOGIC") - 1) computed at runtime
        let mut a = call_prologue();
        for (i, b) in b"LOGIC".iter().enumerate() {
            a = a.push(*b as u64).push(i as u64).op(op::MSTORE8);
        }
        let code = delegatecall_tail(
            a.push(5u64).push(0u64).op(op::SHA3).push(1u64).op(op::SWAP1).op(op::SUB).op(op::SLOAD),
        )
        .build();
        let report = is_upgradeable(&code, ExecConfig::default());
        assert!(report.upgradeable);
        let expected =
            Word::from_be_bytes(&crate::primitives::keccak256(b"LOGIC")).wrapping_sub(Word::from_u64(1));
        assert_eq!(report.locators, vec![SlotLocator { slot: SlotRef::Folded(expected), byte_offset: 0 }]);
    }

    #[test]
    fn no_delegatecall_is_not_upgradeable() {
        let code = Asm::new().push(1u64).push(0u64).op(op::SSTORE).op(op::STOP).build();
        let report = is_upgradeable(&code, ExecConfig::default());
        assert!(!report.upgradeable);
        assert!(report.sites.is_empty());
    }

    #[test]
    fn deception_requires_the_decoy() {
        // custom folded slot target, EIP-1967 slot written but never delegated
        let mut a = call_prologue();
        for (i, b) in b"LOGIC".iter().enumerate() {
            a = a.push(*b as u64).push(i as u64).op(op::MSTORE8);
        }
        let deceptive = Asm::new()
            .push(1u64)
            .push32(EIP1967_IMPL_SLOT)
            .op(op::SSTORE)
            .raw(&delegatecall_tail(
                a.push(5u64).push(0u64).op(op::SHA3).push(1u64).op(op::SWAP1).op(op::SUB).op(op::SLOAD),
            )
            .build())
            .build();
        let finding = detect_slot_deception(&deceptive, ExecConfig::default()).unwrap();
        assert_eq!(finding.decoy_slot, EIP1967_IMPL_SLOT);
        assert_eq!(finding.decoy_standard, DecoyStandard::Eip1967Implementation);

        // plain EIP-1967 proxy: no finding
        let plain = delegatecall_tail(call_prologue().push32(EIP1967_IMPL_SLOT).op(op::SLOAD)).build();
        assert!(detect_slot_deception(&plain, ExecConfig::default()).is_none());

        // custom slot only, standard slots untouched: no finding
        let custom = delegatecall_tail(call_prologue().push(9u64).op(op::SLOAD)).build();
        assert!(detect_slot_deception(&custom, ExecConfig::default()).is_none());
    }
}

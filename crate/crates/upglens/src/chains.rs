//! Upgrade detection over storage-write history, chain construction and
//! dedup, slot-usage classification, and upgrade-hygiene issues.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bytecode::SlotLocator;
use crate::diag::{Diagnostic, DiagnosticKind};
use crate::ingest::StorageWrite;
use crate::primitives::{
    keccak256, Address, TxHash, Word, EIP1822_PROXIABLE_SLOT, EIP1967_IMPL_SLOT,
};

/// One change of a DELEGATECALL target slot's address. A write that only
/// sets the slot from zero is initialization and produces no event; a write
/// that only touches other packed bytes of the slot produces no event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeEvent {
    pub caller: Address,
    pub locator: SlotLocator,
    pub block: u64,
    pub tx_hash: TxHash,
    /// Intra-transaction sequence number of the underlying write.
    pub order: u32,
    pub old_callee: Address,
    pub new_callee: Address,
}

/// The ordered callee sequence of one or more callers, deduplicated by
/// content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeChain {
    pub chain_id: Word,
    pub callees: Vec<Address>,
    pub callers: BTreeSet<Address>,
}

/// keccak-256 over the concatenated callee addresses, in order.
pub fn chain_id(callees: &[Address]) -> Word {
    let mut bytes = Vec::with_capacity(callees.len() * 20);
    for c in callees {
        bytes.extend_from_slice(c.as_bytes());
    }
    Word::from_be_bytes(&keccak256(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStandard {
    Eip1967,
    Eip1822,
    Other,
}

/// The slot-usage taxonomy over a contract's locator set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SlotUsageClass {
    SimpleKey,
    ComplexKey { standard: SlotStandard },
    MultipleSlots,
    SlotWithOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HygieneKind {
    Redundant,
    Invalid,
    ZeroAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HygieneIssue {
    pub kind: HygieneKind,
    pub event: UpgradeEvent,
    pub detail: String,
}

/// Answers "did this address hold executable code at this block", from
/// ingested bytecode records. `None` means the dataset has no data for the
/// address.
pub trait CodePresence {
    fn has_code(&self, address: &Address, block: u64) -> Option<bool>;
}

impl<F: Fn(&Address, u64) -> Option<bool>> CodePresence for F {
    fn has_code(&self, address: &Address, block: u64) -> Option<bool> {
        self(address, block)
    }
}

/// Extracts upgrade events from a write stream: for every write hitting a
/// caller's locator slot, compare the packed address bytes of the old and
/// new word and emit an event iff they differ (zero-to-nonzero is
/// initialization, not an upgrade). Events come back ordered by
/// (block, intra-tx order).
pub fn detect_upgrades(
    locators_by_caller: &BTreeMap<Address, Vec<SlotLocator>>,
    writes: impl IntoIterator<Item = StorageWrite>,
) -> Vec<UpgradeEvent> {
    let mut events = Vec::new();
    for write in writes {
        let Some(locators) = locators_by_caller.get(&write.contract) else { continue };
        for locator in locators {
            if locator.concrete_slot() != Some(write.slot) {
                continue;
            }
            let old_callee = write.old_value.address_at(locator.byte_offset);
            let new_callee = write.new_value.address_at(locator.byte_offset);
            if old_callee == new_callee || old_callee.is_zero() {
                continue;
            }
            events.push(UpgradeEvent {
                caller: write.contract,
                locator: locator.clone(),
                block: write.block,
                tx_hash: write.tx_hash,
                order: write.order,
                old_callee,
                new_callee,
            });
        }
    }
    events.sort_by(|a, b| {
        (a.block, a.order, a.caller, &a.locator).cmp(&(b.block, b.order, b.caller, &b.locator))
    });
    events
}

/// Builds one chain per caller from its ordered events and deduplicates
/// callers sharing an identical callee sequence. A gap between consecutive
/// events (previous new_callee ≠ next old_callee) still contributes both
/// addresses and flags an `InconsistentHistory` diagnostic.
pub fn build_chains(events: &[UpgradeEvent]) -> (Vec<UpgradeChain>, Vec<Diagnostic>) {
    let mut by_caller: BTreeMap<Address, Vec<&UpgradeEvent>> = BTreeMap::new();
    for e in events {
        by_caller.entry(e.caller).or_default().push(e);
    }

    let mut diagnostics = Vec::new();
    let mut dedup: BTreeMap<Vec<Address>, BTreeSet<Address>> = BTreeMap::new();
    for (caller, evs) in by_caller {
        let mut callees = vec![evs[0].old_callee];
        for e in &evs {
            let last = *callees.last().expect("chain head present");
            if last != e.old_callee {
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::InconsistentHistory,
                    format!(
                        "caller {caller}: event at block {} starts from {} but chain ends at {}",
                        e.block, e.old_callee, last
                    ),
                ));
                callees.push(e.old_callee);
            }
            callees.push(e.new_callee);
        }
        dedup.entry(callees).or_default().insert(caller);
    }

    let mut chains: Vec<UpgradeChain> = dedup
        .into_iter()
        .map(|(callees, callers)| UpgradeChain { chain_id: chain_id(&callees), callees, callers })
        .collect();
    chains.sort_by_key(|a| a.chain_id);
    (chains, diagnostics)
}

/// Classifies a non-empty locator set. Precedence:
/// MultipleSlots > SlotWithOffset > ComplexKey > SimpleKey.
pub fn classify_slot_usage(
    locators: &[SlotLocator],
    simple_key_threshold: u64,
) -> Option<SlotUsageClass> {
    let mut distinct: Vec<&SlotLocator> = Vec::new();
    for l in locators {
        if !distinct.contains(&l) {
            distinct.push(l);
        }
    }
    let first = distinct.first()?;
    if distinct.len() > 1 {
        return Some(SlotUsageClass::MultipleSlots);
    }
    if first.byte_offset > 0 {
        return Some(SlotUsageClass::SlotWithOffset);
    }
    let slot = match first.concrete_slot() {
        Some(w) => w,
        // mapping expressions are hash-derived keys by construction
        None => return Some(SlotUsageClass::ComplexKey { standard: SlotStandard::Other }),
    };
    let simple = slot.as_u64().map(|v| v < simple_key_threshold).unwrap_or(false);
    if simple {
        Some(SlotUsageClass::SimpleKey)
    } else if slot == EIP1967_IMPL_SLOT {
        Some(SlotUsageClass::ComplexKey { standard: SlotStandard::Eip1967 })
    } else if slot == EIP1822_PROXIABLE_SLOT {
        Some(SlotUsageClass::ComplexKey { standard: SlotStandard::Eip1822 })
    } else {
        Some(SlotUsageClass::ComplexKey { standard: SlotStandard::Other })
    }
}

/// Hygiene issues over one caller's ordered event sequence: redundant
/// re-use of any earlier chain element, upgrades to the zero address, and
/// upgrades to addresses without code. Addresses the code-presence oracle
/// cannot answer skip the Invalid check with a diagnostic.
pub fn detect_upgrade_issues(
    events: &[UpgradeEvent],
    presence: &dyn CodePresence,
) -> (Vec<HygieneIssue>, Vec<Diagnostic>) {
    let mut issues = Vec::new();
    let mut diagnostics = Vec::new();
    let Some(first) = events.first() else {
        return (issues, diagnostics);
    };
    let mut seen: Vec<Address> = vec![first.old_callee];
    for e in events {
        if seen.contains(&e.new_callee) {
            // both readings of "previous" reported: any-historical is the
            // finding, the detail says whether the reuse rolls back to the
            // element right before the current one
            let immediate = seen.len() >= 2 && seen[seen.len() - 2] == e.new_callee;
            let detail = if immediate {
                "rolls back to the immediately previous callee".to_string()
            } else {
                "reuses an earlier callee".to_string()
            };
            issues.push(HygieneIssue { kind: HygieneKind::Redundant, event: e.clone(), detail });
        }
        if e.new_callee.is_zero() {
            issues.push(HygieneIssue {
                kind: HygieneKind::ZeroAddress,
                event: e.clone(),
                detail: "target slot set to the zero address".into(),
            });
        } else {
            match presence.has_code(&e.new_callee, e.block) {
                Some(false) => issues.push(HygieneIssue {
                    kind: HygieneKind::Invalid,
                    event: e.clone(),
                    detail: format!("{} has no code at block {}", e.new_callee, e.block),
                }),
                Some(true) => {}
                None => diagnostics.push(Diagnostic::new(
                    DiagnosticKind::UnknownCodePresence,
                    format!("no code record for {}; Invalid check skipped", e.new_callee),
                )),
            }
        }
        if !seen.contains(&e.new_callee) {
            seen.push(e.new_callee);
        }
    }
    (issues, diagnostics)
}

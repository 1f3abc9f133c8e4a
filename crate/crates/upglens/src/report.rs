//! Report rendering: per-category summary counts, chain CSV, and the
//! NDJSON finding stream. All functions are pure over slices so they can
//! be tested without a dataset on disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::chains::{HygieneKind, SlotStandard, SlotUsageClass, UpgradeChain, UpgradeEvent};
use crate::primitives::Address;
use crate::risk::{InitKind, InjectionClass, InterfaceKind, RiskFinding, RiskPayload};
use crate::store::ScanRecord;

/// Counts shaped like the slot-usage and issue tables: one row per slot
/// class plus per-category finding totals. All counts are of the local
/// dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub slot_usage: Vec<SlotUsageRow>,
    pub hygiene_redundant: u64,
    pub hygiene_invalid: u64,
    pub hygiene_zero_address: u64,
    pub init_no_admin: u64,
    pub init_delayed: u64,
    pub interface_removed: u64,
    pub interface_output_changed: u64,
    pub interface_shadowed: u64,
    pub injection_transfer: u64,
    pub injection_set: u64,
    pub deception: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotUsageRow {
    pub class: String,
    pub upgradeable: u64,
    pub upgraded: u64,
    pub chains: u64,
    /// upgraded / upgradeable, None when upgradeable is zero.
    pub upgrade_rate: Option<f64>,
}

pub fn slot_class_label(class: &SlotUsageClass) -> &'static str {
    match class {
        SlotUsageClass::SimpleKey => "simple-key",
        SlotUsageClass::ComplexKey { standard: SlotStandard::Eip1967 } => "complex-key/eip1967",
        SlotUsageClass::ComplexKey { standard: SlotStandard::Eip1822 } => "complex-key/eip1822",
        SlotUsageClass::ComplexKey { standard: SlotStandard::Other } => "complex-key/other",
        SlotUsageClass::MultipleSlots => "multiple-slots",
        SlotUsageClass::SlotWithOffset => "slot-with-offset",
    }
}

const CLASS_ORDER: [&str; 6] = [
    "simple-key",
    "complex-key/eip1967",
    "complex-key/eip1822",
    "complex-key/other",
    "multiple-slots",
    "slot-with-offset",
];

pub fn summarize(
    scans: &[ScanRecord],
    events: &[UpgradeEvent],
    chains: &[UpgradeChain],
    findings: &[RiskFinding],
) -> Summary {
    let mut upgradeable: BTreeMap<&str, u64> = BTreeMap::new();
    let mut class_of: BTreeMap<Address, &str> = BTreeMap::new();
    for s in scans {
        if let Some(class) = &s.slot_usage {
            let label = slot_class_label(class);
            if s.upgradeable {
                *upgradeable.entry(label).or_default() += 1;
                class_of.insert(s.address, label);
            }
        }
    }

    let mut upgraded_callers: BTreeMap<&str, Vec<Address>> = BTreeMap::new();
    for e in events {
        if let Some(label) = class_of.get(&e.caller) {
            let list = upgraded_callers.entry(label).or_default();
            if !list.contains(&e.caller) {
                list.push(e.caller);
            }
        }
    }

    let mut chains_per_class: BTreeMap<&str, u64> = BTreeMap::new();
    for chain in chains {
        // a chain's class comes from its callers; identical sequences from
        // differently-classed callers count once per class
        let mut seen: Vec<&str> = Vec::new();
        for caller in &chain.callers {
            if let Some(label) = class_of.get(caller) {
                if !seen.contains(label) {
                    seen.push(label);
                }
            }
        }
        for label in seen {
            *chains_per_class.entry(label).or_default() += 1;
        }
    }

    let mut summary = Summary::default();
    for label in CLASS_ORDER {
        let up = upgradeable.get(label).copied().unwrap_or(0);
        let upgraded = upgraded_callers.get(label).map(|v| v.len() as u64).unwrap_or(0);
        summary.slot_usage.push(SlotUsageRow {
            class: label.to_string(),
            upgradeable: up,
            upgraded,
            chains: chains_per_class.get(label).copied().unwrap_or(0),
            upgrade_rate: (up > 0).then(|| upgraded as f64 / up as f64),
        });
    }

    for f in findings {
        match &f.payload {
            RiskPayload::Hygiene(issue) => match issue.kind {
                HygieneKind::Redundant => summary.hygiene_redundant += 1,
                HygieneKind::Invalid => summary.hygiene_invalid += 1,
                HygieneKind::ZeroAddress => summary.hygiene_zero_address += 1,
            },
            RiskPayload::Init(init) => match init.kind {
                InitKind::NoAdmin => summary.init_no_admin += 1,
                InitKind::DelayedInit { .. } => summary.init_delayed += 1,
            },
            RiskPayload::Interface(i) => match i.kind {
                InterfaceKind::RemovedAbi { .. } => summary.interface_removed += 1,
                InterfaceKind::OutputChanged { .. } => summary.interface_output_changed += 1,
                InterfaceKind::SelectorShadowed { .. } => summary.interface_shadowed += 1,
            },
            RiskPayload::Injection(inj) => match inj.injection.classification {
                InjectionClass::AuthorizedTransfer => summary.injection_transfer += 1,
                InjectionClass::AuthorizedSet => summary.injection_set += 1,
            },
            RiskPayload::Deception { .. } => summary.deception += 1,
        }
    }
    summary
}

pub fn render_summary(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "slot usage            upgradeable  upgraded  chains  upgrade-rate");
    for row in &s.slot_usage {
        let rate = row.upgrade_rate.map(|r| format!("{:.2}%", r * 100.0)).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<22}{:>11}{:>10}{:>8}  {}",
            row.class, row.upgradeable, row.upgraded, row.chains, rate
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "hygiene               redundant={} invalid={} zero-address={}",
        s.hygiene_redundant, s.hygiene_invalid, s.hygiene_zero_address
    );
    let _ = writeln!(out, "initialization        no-admin={} delayed-init={}", s.init_no_admin, s.init_delayed);
    let _ = writeln!(
        out,
        "interface collision   abi-removal={} output-change={} selector-shadowed={}",
        s.interface_removed, s.interface_output_changed, s.interface_shadowed
    );
    let _ = writeln!(
        out,
        "code injection        authorized-transfer={} authorized-set={}",
        s.injection_transfer, s.injection_set
    );
    let _ = writeln!(out, "slot deception        findings={}", s.deception);
    out
}

/// Chain CSV: one row per chain position per caller, with the event that
/// introduced the callee and any hygiene issue kinds attached to it.
pub fn chains_to_csv(
    chains: &[UpgradeChain],
    events: &[UpgradeEvent],
    findings: &[RiskFinding],
) -> String {
    let mut out = String::from("caller,chain_id,position,callee,block,tx,issues\n");
    for chain in chains {
        for caller in &chain.callers {
            let caller_events: Vec<&UpgradeEvent> =
                events.iter().filter(|e| e.caller == *caller).collect();
            for (pos, callee) in chain.callees.iter().enumerate() {
                let event = pos.checked_sub(1).and_then(|i| caller_events.get(i).copied());
                let (block, tx) = match event {
                    Some(e) => (e.block.to_string(), e.tx_hash.to_string()),
                    None => (String::new(), String::new()),
                };
                let issues = match event {
                    Some(e) => issue_kinds_for(findings, e),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "{caller},{},{pos},{callee},{block},{tx},{issues}",
                    chain.chain_id
                );
            }
        }
    }
    out
}

fn issue_kinds_for(findings: &[RiskFinding], event: &UpgradeEvent) -> String {
    let mut kinds: Vec<&str> = Vec::new();
    for f in findings {
        if let RiskPayload::Hygiene(issue) = &f.payload {
            if issue.event == *event {
                let k = match issue.kind {
                    HygieneKind::Redundant => "redundant",
                    HygieneKind::Invalid => "invalid",
                    HygieneKind::ZeroAddress => "zero-address",
                };
                if !kinds.contains(&k) {
                    kinds.push(k);
                }
            }
        }
    }
    kinds.join("+")
}

/// Serializes findings one JSON object per line, already-sorted input
/// preserved.
pub fn findings_to_ndjson(findings: &[RiskFinding]) -> String {
    let mut out = String::new();
    for f in findings {
        out.push_str(&serde_json::to_string(f).expect("finding serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::SlotLocator;
    use crate::chains::{chain_id, HygieneIssue};
    use crate::primitives::{TxHash, Word};
    use std::collections::BTreeSet;

    fn addr(b: u8) -> Address {
        Address([b; 20])
    }

    fn scan(address: Address, class: SlotUsageClass) -> ScanRecord {
        ScanRecord {
            address,
            upgradeable: true,
            locators: vec![SlotLocator::direct(Word::ZERO, 0)],
            sites: vec![],
            slot_usage: Some(class),
            diagnostics: vec![],
        }
    }

    fn event(caller: Address, old: u8, new: u8, block: u64) -> UpgradeEvent {
        UpgradeEvent {
            caller,
            locator: SlotLocator::direct(Word::ZERO, 0),
            block,
            tx_hash: TxHash([block as u8; 32]),
            order: 0,
            old_callee: addr(old),
            new_callee: addr(new),
        }
    }

    #[test]
    fn upgrade_rate_matches_brute_force() {
        // 3 upgradeable simple-key contracts, 2 of them upgraded
        let scans: Vec<ScanRecord> =
            (1u8..=3).map(|i| scan(addr(i), SlotUsageClass::SimpleKey)).collect();
        let events =
            vec![event(addr(1), 0xb, 0xc, 10), event(addr(2), 0xb, 0xc, 11), event(addr(1), 0xc, 0xd, 12)];
        let chains = vec![UpgradeChain {
            chain_id: chain_id(&[addr(0xb), addr(0xc)]),
            callees: vec![addr(0xb), addr(0xc)],
            callers: BTreeSet::from([addr(1), addr(2)]),
        }];
        let s = summarize(&scans, &events, &chains, &[]);
        let row = s.slot_usage.iter().find(|r| r.class == "simple-key").unwrap();
        assert_eq!(row.upgradeable, 3);
        assert_eq!(row.upgraded, 2);
        assert_eq!(row.chains, 1);
        assert!((row.upgrade_rate.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_summary_is_all_zero() {
        let s = summarize(&[], &[], &[], &[]);
        assert!(s.slot_usage.iter().all(|r| r.upgradeable == 0 && r.upgraded == 0));
        assert_eq!(s.hygiene_redundant + s.init_no_admin + s.injection_transfer, 0);
        let text = render_summary(&s);
        assert!(text.contains("simple-key"));
    }

    #[test]
    fn csv_rows_per_position_with_issue_kinds() {
        let e1 = event(addr(1), 0xb, 0xc, 10);
        let e2 = event(addr(1), 0xc, 0xb, 20);
        let chains = vec![UpgradeChain {
            chain_id: chain_id(&[addr(0xb), addr(0xc), addr(0xb)]),
            callees: vec![addr(0xb), addr(0xc), addr(0xb)],
            callers: BTreeSet::from([addr(1)]),
        }];
        let findings = vec![crate::risk::RiskFinding::new(RiskPayload::Hygiene(HygieneIssue {
            kind: HygieneKind::Redundant,
            event: e2.clone(),
            detail: "".into(),
        }))];
        let csv = chains_to_csv(&chains, &[e1, e2], &findings);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4); // header + 3 positions
        assert!(lines[3].contains("redundant"));
        assert!(lines[1].ends_with(",,")); // head row has no event
    }
}

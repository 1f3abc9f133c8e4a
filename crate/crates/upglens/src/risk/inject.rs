//! Suspicious-code detection over upgrade pairs: per-selector body diffing
//! to delimit introduced code, then constraint / profit / authority
//! pattern matching over the new bodies.
//!
//! The patterns are deliberately narrow: executors checked against
//! constants or directly-stored values (benign access control tends to sit
//! behind storage mappings instead), beneficiaries pinned to constants,
//! stored addresses or msg.sender, and profit statements that move native
//! value or call transfer/transferFrom. Matches are suspicious, not proven
//! malicious; every finding carries its atom evidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bytecode::{
    disassemble, extract_selectors, EnvValue, ExecConfig, ExecOutcome, Executor,
    StorageOp, SymbolicValue,
};
use crate::diag::Diagnostic;
use crate::opcode;
use crate::primitives::{keccak256, Address, Selector, TxHash, Word};

const SEL_TRANSFER: Selector = Selector([0xa9, 0x05, 0x9c, 0xbb]);
const SEL_TRANSFER_FROM: Selector = Selector([0x23, 0xb8, 0x72, 0xdd]);
const SEL_BALANCE_OF: Selector = Selector([0x70, 0xa0, 0x82, 0x31]);
const SEL_ALLOWANCE: Selector = Selector([0xdd, 0x62, 0xed, 0x3e]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorSubject {
    Caller,
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparedTo {
    Constant,
    StorageLoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeneficiaryTarget {
    Constant,
    StorageLoad,
    CallerEnv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfitAsset {
    Native,
    TokenTransfer,
    TokenTransferFrom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmountSource {
    FullNativeBalance,
    TokenBalanceOf,
    TokenAllowance,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "atom", rename_all = "snake_case")]
pub enum AtomKind {
    ExecutorConstraint { executor: ExecutorSubject, compared_to: ComparedTo },
    BeneficiaryConstraint { target: BeneficiaryTarget },
    Profit { asset: ProfitAsset, amount_source: AmountSource },
    AuthoritySet { slot_expr: String },
}

/// One matched pattern, anchored to the instruction offset it fired on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternAtom {
    pub offset: usize,
    #[serde(flatten)]
    pub kind: AtomKind,
}

impl PatternAtom {
    /// Decompiled-style one-liner for evidence output.
    pub fn describe(&self) -> String {
        let text = match &self.kind {
            AtomKind::ExecutorConstraint { executor, compared_to } => {
                let subject = match executor {
                    ExecutorSubject::Caller => "msg.sender",
                    ExecutorSubject::Origin => "tx.origin",
                };
                let rhs = match compared_to {
                    ComparedTo::Constant => "a hardcoded address",
                    ComparedTo::StorageLoad => "a directly-stored address",
                };
                format!("require({subject} == {rhs})")
            }
            AtomKind::BeneficiaryConstraint { target } => {
                let to = match target {
                    BeneficiaryTarget::Constant => "a hardcoded address",
                    BeneficiaryTarget::StorageLoad => "a stored address",
                    BeneficiaryTarget::CallerEnv => "msg.sender",
                };
                format!("profit recipient pinned to {to}")
            }
            AtomKind::Profit { asset, amount_source } => {
                let what = match asset {
                    ProfitAsset::Native => "call{value: ...}",
                    ProfitAsset::TokenTransfer => "token.transfer(...)",
                    ProfitAsset::TokenTransferFrom => "token.transferFrom(...)",
                };
                let amount = match amount_source {
                    AmountSource::FullNativeBalance => "the full native balance",
                    AmountSource::TokenBalanceOf => "a balanceOf() read",
                    AmountSource::TokenAllowance => "an allowance() read",
                    AmountSource::Other => "an unresolved amount",
                };
                format!("{what} moving {amount}")
            }
            AtomKind::AuthoritySet { slot_expr } => {
                format!("guarded mapping store to {slot_expr}")
            }
        };
        format!("@{:#06x}: {text}", self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffStatus {
    Added,
    Removed,
    ChangedBody,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDiff {
    /// None marks the fallback entry (or the whole-code pseudo-function
    /// when no dispatch table exists).
    pub selector: Option<Selector>,
    pub status: DiffStatus,
    pub old_body_hash: Option<Word>,
    pub new_body_hash: Option<Word>,
    #[serde(skip)]
    pub old_entry: Option<usize>,
    #[serde(skip)]
    pub new_entry: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub functions: Vec<FunctionDiff>,
    /// No function body survived the upgrade unchanged.
    pub total_replacement: bool,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntroducedBy {
    NewFunction,
    ChangedFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionClass {
    AuthorizedTransfer,
    AuthorizedSet,
}

/// One suspicious function found in introduced code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeInjection {
    pub selector: Option<Selector>,
    pub classification: InjectionClass,
    pub introduced_by: IntroducedBy,
    pub atoms: Vec<PatternAtom>,
}

/// A [`CodeInjection`] tied to the upgrade event that introduced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionFinding {
    pub caller: Address,
    pub upgrade_block: u64,
    pub upgrade_tx: TxHash,
    pub old_callee: Address,
    pub new_callee: Address,
    pub total_replacement: bool,
    #[serde(flatten)]
    pub injection: CodeInjection,
}

/// Per-selector diff between two code versions. Body hashes are
/// relocation-normalized; when either side has no recognizable dispatch
/// table the two codes compare as one whole-code pseudo-function.
pub fn diff_functions(old_code: &[u8], new_code: &[u8], exec: ExecConfig) -> DiffReport {
    let old_table = extract_selectors(old_code, exec);
    let new_table = extract_selectors(new_code, exec);
    let mut diagnostics = Vec::new();

    let has_dispatch =
        |t: &crate::bytecode::DispatchTable| t.entries.iter().any(|e| e.selector.is_some());
    if !has_dispatch(&old_table) || !has_dispatch(&new_table) {
        diagnostics.extend(old_table.diagnostics);
        diagnostics.extend(new_table.diagnostics);
        let old_hash = normalized_code_hash(old_code);
        let new_hash = normalized_code_hash(new_code);
        let status = if old_hash == new_hash { DiffStatus::Unchanged } else { DiffStatus::ChangedBody };
        return DiffReport {
            total_replacement: status != DiffStatus::Unchanged,
            functions: vec![FunctionDiff {
                selector: None,
                status,
                old_body_hash: Some(old_hash),
                new_body_hash: Some(new_hash),
                old_entry: Some(0),
                new_entry: Some(0),
            }],
            diagnostics,
        };
    }

    let mut keys: Vec<Option<Selector>> =
        old_table.entries.iter().chain(&new_table.entries).map(|e| e.selector).collect();
    keys.sort();
    keys.dedup();

    let mut functions = Vec::new();
    for key in keys {
        let old_e = old_table.entries.iter().find(|e| e.selector == key);
        let new_e = new_table.entries.iter().find(|e| e.selector == key);
        let status = match (old_e, new_e) {
            (None, Some(_)) => DiffStatus::Added,
            (Some(_), None) => DiffStatus::Removed,
            (Some(o), Some(n)) if o.body_hash == n.body_hash => DiffStatus::Unchanged,
            (Some(_), Some(_)) => DiffStatus::ChangedBody,
            (None, None) => unreachable!("key came from one of the tables"),
        };
        functions.push(FunctionDiff {
            selector: key,
            status,
            old_body_hash: old_e.map(|e| e.body_hash),
            new_body_hash: new_e.map(|e| e.body_hash),
            old_entry: old_e.map(|e| e.entry_offset),
            new_entry: new_e.map(|e| e.entry_offset),
        });
    }
    let total_replacement = functions.iter().all(|f| f.status != DiffStatus::Unchanged);
    DiffReport { functions, total_replacement, diagnostics }
}

/// Normalized hash of the full instruction stream (the no-dispatcher
/// comparison fallback): PUSH immediates that are jump destinations zero
/// out, like per-function body hashing.
fn normalized_code_hash(code: &[u8]) -> Word {
    let mut normalized = Vec::with_capacity(code.len());
    for insn in disassemble(code) {
        normalized.push(insn.opcode);
        if let Some(imm) = &insn.immediate {
            let is_dest = imm.len() <= 4
                && Word::from_be_slice(imm)
                    .as_u64()
                    .map(|t| (t as usize) < code.len() && code[t as usize] == opcode::JUMPDEST)
                    .unwrap_or(false);
            if is_dest {
                normalized.extend(std::iter::repeat_n(0, imm.len()));
            } else {
                normalized.extend_from_slice(imm);
            }
        }
    }
    Word::from_be_bytes(&keccak256(&normalized))
}

/// Symbolic sweep of one function body, the shared input of the `match_*`
/// pattern matchers.
pub fn analyze_body(code: &[u8], entry: usize, exec: ExecConfig) -> ExecOutcome {
    Executor::new(code, exec).run(entry)
}

/// Unwraps address-style masking (AND against a constant mask).
fn strip_masks(v: &SymbolicValue) -> &SymbolicValue {
    let mut cur = v;
    loop {
        match cur {
            SymbolicValue::Computed { op: "AND", operands } if operands.len() == 2 => {
                cur = match (operands[0].is_constant(), operands[1].is_constant()) {
                    (true, false) => &operands[1],
                    (false, true) => &operands[0],
                    _ => return cur,
                };
            }
            _ => return cur,
        }
    }
}

/// EQ comparisons of msg.sender / tx.origin against a constant or a
/// directly-addressed storage value. Mapping-keyed storage loads (slot
/// depends on calldata or a runtime hash) are benign-style access control
/// and excluded.
pub fn match_executor_constraint(outcome: &ExecOutcome) -> Vec<PatternAtom> {
    let mut atoms = Vec::new();
    for obs in &outcome.eq_sites {
        let lhs = strip_masks(&obs.lhs);
        let rhs = strip_masks(&obs.rhs);
        for (env_side, other) in [(lhs, rhs), (rhs, lhs)] {
            let executor = match env_side {
                SymbolicValue::Env(EnvValue::Caller) => ExecutorSubject::Caller,
                SymbolicValue::Env(EnvValue::Origin) => ExecutorSubject::Origin,
                _ => continue,
            };
            let compared_to = match other {
                SymbolicValue::Constant { .. } => ComparedTo::Constant,
                SymbolicValue::StorageLoad(slot) => {
                    if slot.as_constant().is_some() {
                        ComparedTo::StorageLoad
                    } else {
                        continue; // mapping-keyed or unresolved slot
                    }
                }
                _ => continue,
            };
            atoms.push(PatternAtom {
                offset: obs.site,
                kind: AtomKind::ExecutorConstraint { executor, compared_to },
            });
            break;
        }
    }
    atoms.sort();
    atoms.dedup();
    atoms
}

/// Profit statements: CALLs moving nonzero native value, and CALLs whose
/// input is an ERC-20 transfer/transferFrom. Amount provenance resolves to
/// the whole native balance, a balanceOf read, or an allowance read when
/// the symbolic trail supports it.
pub fn match_profit(outcome: &ExecOutcome) -> Vec<PatternAtom> {
    let mut atoms = Vec::new();
    for site in &outcome.call_sites {
        if site.opcode != opcode::CALL {
            continue;
        }
        if let Some(value) = &site.value {
            if value.as_constant() != Some(Word::ZERO) {
                let amount_source = if mentions_self_balance(value) {
                    AmountSource::FullNativeBalance
                } else {
                    AmountSource::Other
                };
                atoms.push(PatternAtom {
                    offset: site.site,
                    kind: AtomKind::Profit { asset: ProfitAsset::Native, amount_source },
                });
            }
        }
        let (asset, amount) = match site.input_selector {
            Some(SEL_TRANSFER) => (ProfitAsset::TokenTransfer, site.args.get(1)),
            Some(SEL_TRANSFER_FROM) => (ProfitAsset::TokenTransferFrom, site.args.get(2)),
            _ => continue,
        };
        let amount_source = match amount {
            Some(a) if returns_of_selector(a, SEL_BALANCE_OF) => AmountSource::TokenBalanceOf,
            Some(a) if returns_of_selector(a, SEL_ALLOWANCE) => AmountSource::TokenAllowance,
            _ => AmountSource::Other,
        };
        atoms.push(PatternAtom { offset: site.site, kind: AtomKind::Profit { asset, amount_source } });
    }
    atoms.sort();
    atoms.dedup();
    atoms
}

fn mentions_self_balance(v: &SymbolicValue) -> bool {
    v.contains(&|x| match x {
        SymbolicValue::Env(EnvValue::SelfBalance) => true,
        SymbolicValue::Computed { op: "BALANCE", operands } => {
            operands.iter().any(|o| o.contains_env(EnvValue::Address))
        }
        _ => false,
    })
}

/// True when the value is rooted in the return data of a call whose input
/// selector was `sel`.
fn returns_of_selector(v: &SymbolicValue, sel: Selector) -> bool {
    let sel_word = Word::from_be_slice(&sel.0);
    v.contains(&|x| match x {
        SymbolicValue::Computed { op, operands }
            if matches!(*op, "CALL" | "STATICCALL" | "CALLCODE" | "DELEGATECALL") =>
        {
            operands.first().and_then(|o| o.as_constant()) == Some(sel_word)
        }
        _ => false,
    })
}

/// Constraints on who receives the profit: the recipient operand of each
/// profit statement pinned to a constant, a stored address, or msg.sender.
pub fn match_beneficiary_constraint(
    outcome: &ExecOutcome,
    profit_atoms: &[PatternAtom],
) -> Vec<PatternAtom> {
    let mut atoms = Vec::new();
    for atom in profit_atoms {
        let AtomKind::Profit { asset, .. } = &atom.kind else { continue };
        let Some(site) = outcome.call_sites.iter().find(|c| c.site == atom.offset) else {
            continue;
        };
        let recipient = match asset {
            ProfitAsset::Native => Some(&site.target),
            ProfitAsset::TokenTransfer => site.args.first(),
            ProfitAsset::TokenTransferFrom => site.args.get(1),
        };
        let Some(recipient) = recipient else { continue };
        let target = match strip_masks(recipient) {
            SymbolicValue::Constant { .. } => BeneficiaryTarget::Constant,
            SymbolicValue::StorageLoad(_) => BeneficiaryTarget::StorageLoad,
            SymbolicValue::Env(EnvValue::Caller) => BeneficiaryTarget::CallerEnv,
            _ => continue,
        };
        atoms.push(PatternAtom {
            offset: atom.offset,
            kind: AtomKind::BeneficiaryConstraint { target },
        });
    }
    atoms.sort();
    atoms.dedup();
    atoms
}

/// Authority operations: SSTOREs to mapping-derived slots (keccak over a
/// calldata-dependent key) inside a body that also constrains its
/// executor. Plain config writes to constant slots do not qualify.
pub fn match_authority_set(
    outcome: &ExecOutcome,
    executor_atoms: &[PatternAtom],
) -> Vec<PatternAtom> {
    if executor_atoms.is_empty() {
        return Vec::new();
    }
    let mut atoms = Vec::new();
    for access in &outcome.storage_accesses {
        if access.op != StorageOp::Store {
            continue;
        }
        if access.slot.contains_unfolded_sha3() && access.slot.contains_calldata() {
            atoms.push(PatternAtom {
                offset: access.site,
                kind: AtomKind::AuthoritySet { slot_expr: access.slot.to_string() },
            });
        }
    }
    atoms.sort();
    atoms.dedup();
    atoms
}

/// The classification rule over per-function atoms:
/// AuthorizedTransfer = (executor ∨ beneficiary) ∧ profit;
/// AuthorizedSet = executor ∧ authority ∧ ¬profit.
pub fn classify_injection(
    report: &DiffReport,
    atoms_by_function: &BTreeMap<Option<Selector>, Vec<PatternAtom>>,
) -> Vec<CodeInjection> {
    let mut findings = Vec::new();
    for f in &report.functions {
        let introduced_by = match f.status {
            DiffStatus::Added => IntroducedBy::NewFunction,
            DiffStatus::ChangedBody => IntroducedBy::ChangedFunction,
            _ => continue,
        };
        let Some(atoms) = atoms_by_function.get(&f.selector) else { continue };
        let has = |pred: &dyn Fn(&AtomKind) -> bool| atoms.iter().any(|a| pred(&a.kind));
        let executor = has(&|k| matches!(k, AtomKind::ExecutorConstraint { .. }));
        let beneficiary = has(&|k| matches!(k, AtomKind::BeneficiaryConstraint { .. }));
        let profit = has(&|k| matches!(k, AtomKind::Profit { .. }));
        let authority = has(&|k| matches!(k, AtomKind::AuthoritySet { .. }));

        let classification = if (executor || beneficiary) && profit {
            Some(InjectionClass::AuthorizedTransfer)
        } else if executor && authority && !profit {
            Some(InjectionClass::AuthorizedSet)
        } else {
            None
        };
        if let Some(classification) = classification {
            findings.push(CodeInjection {
                selector: f.selector,
                classification,
                introduced_by,
                atoms: atoms.clone(),
            });
        }
    }
    findings
}

/// Full injection scan of one upgrade pair: diff the dispatch tables, run
/// the matchers over every Added/ChangedBody body in the new version,
/// classify.
pub fn scan_upgrade(
    old_code: &[u8],
    new_code: &[u8],
    exec: ExecConfig,
) -> (Vec<CodeInjection>, DiffReport) {
    let report = diff_functions(old_code, new_code, exec);
    let mut atoms_by_function = BTreeMap::new();
    for f in &report.functions {
        if !matches!(f.status, DiffStatus::Added | DiffStatus::ChangedBody) {
            continue;
        }
        let Some(entry) = f.new_entry else { continue };
        let outcome = analyze_body(new_code, entry, exec);
        let executor = match_executor_constraint(&outcome);
        let profit = match_profit(&outcome);
        let beneficiary = match_beneficiary_constraint(&outcome, &profit);
        let authority = match_authority_set(&outcome, &executor);
        let mut atoms = executor;
        atoms.extend(beneficiary);
        atoms.extend(profit);
        atoms.extend(authority);
        atoms.sort();
        atoms_by_function.insert(f.selector, atoms);
    }
    let findings = classify_injection(&report, &atoms_by_function);
    (findings, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::asm::Asm;
    use crate::opcode as op;

    #[test]
    fn erc20_selector_constants_match_keccak() {
        assert_eq!(SEL_TRANSFER, Selector::of_signature("transfer(address,uint256)"));
        assert_eq!(
            SEL_TRANSFER_FROM,
            Selector::of_signature("transferFrom(address,address,uint256)")
        );
        assert_eq!(SEL_BALANCE_OF, Selector::of_signature("balanceOf(address)"));
        assert_eq!(SEL_ALLOWANCE, Selector::of_signature("allowance(address,address)"));
    }

    fn analyze(code: &[u8]) -> ExecOutcome {
        analyze_body(code, 0, ExecConfig::default())
    }

    #[test]
    fn require_caller_eq_constant_is_executor_atom() {
        // require(msg.sender == 0x45..ec)
        let code = Asm::new()
            .op(op::CALLER)
            .push_bytes(&[0x45; 20])
            .op(op::EQ)
            .push_label("ok")
            .op(op::JUMPI)
            .push(0u64)
            .push(0u64)
            .op(op::REVERT)
            .label("ok")
            .op(op::STOP)
            .build();
        let atoms = match_executor_constraint(&analyze(&code));
        assert_eq!(atoms.len(), 1);
        assert_eq!(
            atoms[0].kind,
            AtomKind::ExecutorConstraint {
                executor: ExecutorSubject::Caller,
                compared_to: ComparedTo::Constant
            }
        );
    }

    #[test]
    fn origin_eq_constant_is_executor_atom() {
        // address(0xcb..25) == tx.origin
        let code = Asm::new()
            .push_bytes(&[0xcb; 20])
            .op(op::ORIGIN)
            .op(op::EQ)
            .op(op::POP)
            .op(op::STOP)
            .build();
        let atoms = match_executor_constraint(&analyze(&code));
        assert_eq!(atoms.len(), 1);
        assert_eq!(
            atoms[0].kind,
            AtomKind::ExecutorConstraint {
                executor: ExecutorSubject::Origin,
                compared_to: ComparedTo::Constant
            }
        );
    }

    #[test]
    fn caller_vs_stored_owner_is_executor_atom() {
        // require(msg.sender == owner), owner at slot 0, both masked
        let mask = Word::from_u64(1).shl(Word::from_u64(160)).wrapping_sub(Word::from_u64(1));
        let code = Asm::new()
            .op(op::CALLER)
            .push32(mask)
            .op(op::AND)
            .push(0u64)
            .op(op::SLOAD)
            .push32(mask)
            .op(op::AND)
            .op(op::EQ)
            .op(op::POP)
            .op(op::STOP)
            .build();
        let atoms = match_executor_constraint(&analyze(&code));
        assert_eq!(atoms.len(), 1);
        assert_eq!(
            atoms[0].kind,
            AtomKind::ExecutorConstraint {
                executor: ExecutorSubject::Caller,
                compared_to: ComparedTo::StorageLoad
            }
        );
    }

    #[test]
    fn caller_vs_calldata_is_not_an_atom() {
        let code = Asm::new()
            .op(op::CALLER)
            .push(4u64)
            .op(op::CALLDATALOAD)
            .op(op::EQ)
            .op(op::POP)
            .op(op::STOP)
            .build();
        assert!(match_executor_constraint(&analyze(&code)).is_empty());
    }

    #[test]
    fn caller_vs_mapping_load_is_excluded() {
        // whitelist[msg.sender]-style guard: sload of a hashed slot
        let code = Asm::new()
            .op(op::CALLER)
            .push(0u64)
            .op(op::MSTORE)
            .push(3u64)
            .push(0x20u64)
            .op(op::MSTORE)
            .push(0x40u64)
            .push(0u64)
            .op(op::SHA3)
            .op(op::SLOAD)
            .op(op::CALLER)
            .op(op::EQ)
            .op(op::POP)
            .op(op::STOP)
            .build();
        assert!(match_executor_constraint(&analyze(&code)).is_empty());
    }

    /// call(gas, <target on stack already>, selfbalance, 0, 0, 0, 0)
    fn native_drain_to(target: Asm) -> Vec<u8> {
        target
            .push(0u64) // retLen
            .op(op::SWAP1)
            .push(0u64) // retOff
            .op(op::SWAP1)
            .push(0u64) // argsLen
            .op(op::SWAP1)
            .push(0u64) // argsOff
            .op(op::SWAP1)
            .op(op::SELFBALANCE)
            .op(op::SWAP1)
            .op(op::GAS)
            .op(op::CALL)
            .op(op::STOP)
            .build()
    }

    #[test]
    fn native_value_call_with_selfbalance_is_full_balance_profit() {
        // msg.sender.call{value: selfbalance()}("")
        let code = native_drain_to(Asm::new().op(op::CALLER));
        let outcome = analyze(&code);
        let profit = match_profit(&outcome);
        assert_eq!(profit.len(), 1);
        assert_eq!(
            profit[0].kind,
            AtomKind::Profit {
                asset: ProfitAsset::Native,
                amount_source: AmountSource::FullNativeBalance
            }
        );
        let benef = match_beneficiary_constraint(&outcome, &profit);
        assert_eq!(benef.len(), 1);
        assert_eq!(
            benef[0].kind,
            AtomKind::BeneficiaryConstraint { target: BeneficiaryTarget::CallerEnv }
        );
    }

    #[test]
    fn constant_recipient_native_call_is_constant_beneficiary() {
        let code = native_drain_to(Asm::new().push_bytes(&[0x36; 20]));
        let outcome = analyze(&code);
        let profit = match_profit(&outcome);
        let benef = match_beneficiary_constraint(&outcome, &profit);
        assert_eq!(
            benef[0].kind,
            AtomKind::BeneficiaryConstraint { target: BeneficiaryTarget::Constant }
        );
    }

    #[test]
    fn staticcall_only_body_has_no_profit() {
        let code = Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push_bytes(&[0x22; 20])
            .op(op::GAS)
            .op(op::STATICCALL)
            .op(op::POP)
            .op(op::STOP)
            .build();
        assert!(match_profit(&analyze(&code)).is_empty());
    }

    /// token.transfer(msg.sender, token.balanceOf(address(this)))
    fn transfer_full_token_balance() -> Vec<u8> {
        let token = [0x33u8; 20];
        let balance_of = Word::from_be_slice(&SEL_BALANCE_OF.0).shl(Word::from_u64(224));
        let transfer = Word::from_be_slice(&SEL_TRANSFER.0).shl(Word::from_u64(224));
        Asm::new()
            // staticcall token.balanceOf(this) -> word at 0x80
            .push32(balance_of)
            .push(0u64)
            .op(op::MSTORE)
            .op(op::ADDRESS)
            .push(4u64)
            .op(op::MSTORE)
            .push(0x20u64) // retLen
            .push(0x80u64) // retOff
            .push(36u64) // argsLen
            .push(0u64) // argsOff
            .push_bytes(&token)
            .op(op::GAS)
            .op(op::STATICCALL)
            .op(op::POP)
            // call token.transfer(caller, balance)
            .push32(transfer)
            .push(0u64)
            .op(op::MSTORE)
            .op(op::CALLER)
            .push(4u64)
            .op(op::MSTORE)
            .push(0x80u64)
            .op(op::MLOAD)
            .push(36u64)
            .op(op::MSTORE)
            .push(0u64) // retLen
            .push(0u64) // retOff
            .push(68u64) // argsLen
            .push(0u64) // argsOff
            .push(0u64) // value
            .push_bytes(&token)
            .op(op::GAS)
            .op(op::CALL)
            .op(op::POP)
            .op(op::STOP)
            .build()
    }

    #[test]
    fn token_transfer_of_balance_to_caller() {
        let outcome = analyze(&transfer_full_token_balance());
        let profit = match_profit(&outcome);
        assert_eq!(profit.len(), 1);
        assert_eq!(
            profit[0].kind,
            AtomKind::Profit {
                asset: ProfitAsset::TokenTransfer,
                amount_source: AmountSource::TokenBalanceOf
            }
        );
        let benef = match_beneficiary_constraint(&outcome, &profit);
        assert_eq!(
            benef[0].kind,
            AtomKind::BeneficiaryConstraint { target: BeneficiaryTarget::CallerEnv }
        );
    }

    /// owner-gated blacklist setter: mapping store guarded by caller check
    fn blacklist_setter() -> Vec<u8> {
        Asm::new()
            .op(op::CALLER)
            .push(0u64)
            .op(op::SLOAD)
            .op(op::EQ)
            .push_label("ok")
            .op(op::JUMPI)
            .push(0u64)
            .push(0u64)
            .op(op::REVERT)
            .label("ok")
            // _isBlacklisted[account] = value
            .push(4u64)
            .op(op::CALLDATALOAD)
            .push(0u64)
            .op(op::MSTORE)
            .push(5u64)
            .push(0x20u64)
            .op(op::MSTORE)
            .push(36u64)
            .op(op::CALLDATALOAD)
            .push(0x40u64)
            .push(0u64)
            .op(op::SHA3)
            .op(op::SSTORE)
            .op(op::STOP)
            .build()
    }

    #[test]
    fn guarded_mapping_store_is_authority_set() {
        let outcome = analyze(&blacklist_setter());
        let executor = match_executor_constraint(&outcome);
        assert_eq!(executor.len(), 1);
        let authority = match_authority_set(&outcome, &executor);
        assert_eq!(authority.len(), 1);
        assert!(matches!(authority[0].kind, AtomKind::AuthoritySet { .. }));
        assert!(match_profit(&outcome).is_empty());
    }

    #[test]
    fn unguarded_mapping_store_is_not_authority() {
        // same store, no executor constraint
        let code = Asm::new()
            .push(4u64)
            .op(op::CALLDATALOAD)
            .push(0u64)
            .op(op::MSTORE)
            .push(5u64)
            .push(0x20u64)
            .op(op::MSTORE)
            .push(36u64)
            .op(op::CALLDATALOAD)
            .push(0x40u64)
            .push(0u64)
            .op(op::SHA3)
            .op(op::SSTORE)
            .op(op::STOP)
            .build();
        let outcome = analyze(&code);
        let executor = match_executor_constraint(&outcome);
        assert!(match_authority_set(&outcome, &executor).is_empty());
    }

    #[test]
    fn guarded_constant_slot_store_is_not_authority() {
        let code = Asm::new()
            .op(op::CALLER)
            .push_bytes(&[0x40; 20])
            .op(op::EQ)
            .op(op::POP)
            .push(7u64)
            .push(1u64)
            .op(op::SSTORE)
            .op(op::STOP)
            .build();
        let outcome = analyze(&code);
        let executor = match_executor_constraint(&outcome);
        assert_eq!(executor.len(), 1);
        assert!(match_authority_set(&outcome, &executor).is_empty());
    }

    fn dispatcher_with_bodies(bodies: &[([u8; 4], Vec<u8>)]) -> Vec<u8> {
        let mut a = Asm::new().push(0u64).op(op::CALLDATALOAD).push(224u64).op(op::SHR);
        for (i, (sel, _)) in bodies.iter().enumerate() {
            a = a.op(op::DUP1).push_bytes(sel).op(op::EQ).push_label(&format!("f{i}")).op(op::JUMPI);
        }
        a = a.push(0u64).push(0u64).op(op::REVERT);
        for (i, (_, body)) in bodies.iter().enumerate() {
            a = a.label(&format!("f{i}")).raw(body);
        }
        a.build()
    }

    #[test]
    fn identical_codes_diff_unchanged() {
        let code = dispatcher_with_bodies(&[(
            [0x11, 0x11, 0x11, 0x11],
            Asm::new().push(1u64).push(0u64).op(op::SSTORE).op(op::STOP).build(),
        )]);
        let report = diff_functions(&code, &code, ExecConfig::default());
        assert!(report.functions.iter().all(|f| f.status == DiffStatus::Unchanged));
        assert!(!report.total_replacement);
    }

    #[test]
    fn added_selector_reports_added() {
        let store_body = Asm::new().push(1u64).push(0u64).op(op::SSTORE).op(op::STOP).build();
        let old = dispatcher_with_bodies(&[([0x11, 0x11, 0x11, 0x11], store_body.clone())]);
        let new = dispatcher_with_bodies(&[
            ([0x11, 0x11, 0x11, 0x11], store_body.clone()),
            ([0x22, 0x22, 0x22, 0x22], store_body),
        ]);
        let report = diff_functions(&old, &new, ExecConfig::default());
        let added: Vec<_> =
            report.functions.iter().filter(|f| f.status == DiffStatus::Added).collect();
        assert_eq!(added.len(), 1);
        assert_eq!(added[0].selector, Some(Selector([0x22, 0x22, 0x22, 0x22])));
        assert!(!report.total_replacement);
    }

    #[test]
    fn disjoint_versions_flag_total_replacement() {
        let old = dispatcher_with_bodies(&[(
            [0x11, 0x11, 0x11, 0x11],
            Asm::new().push(1u64).push(0u64).op(op::SSTORE).op(op::STOP).build(),
        )]);
        let new = dispatcher_with_bodies(&[(
            [0x22, 0x22, 0x22, 0x22],
            Asm::new().push(2u64).push(1u64).op(op::SSTORE).op(op::STOP).build(),
        )]);
        let report = diff_functions(&old, &new, ExecConfig::default());
        assert!(report.total_replacement);
    }

    /// require(msg.sender == const); msg.sender.call{value: selfbalance}()
    fn gated_drain_body() -> Vec<u8> {
        Asm::new()
            .op(op::CALLER)
            .push_bytes(&[0x40; 20])
            .op(op::EQ)
            .op(op::POP)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .op(op::SELFBALANCE)
            .op(op::CALLER)
            .op(op::GAS)
            .op(op::CALL)
            .op(op::STOP)
            .build()
    }

    #[test]
    fn injected_drain_function_classifies_authorized_transfer() {
        let benign_body = Asm::new().push(1u64).push(0u64).op(op::SSTORE).op(op::STOP).build();
        let drain = gated_drain_body();
        let old = dispatcher_with_bodies(&[([0x11, 0x11, 0x11, 0x11], benign_body.clone())]);
        let new = dispatcher_with_bodies(&[
            ([0x11, 0x11, 0x11, 0x11], benign_body),
            ([0x27, 0x94, 0x1c, 0x5b], drain),
        ]);
        let (findings, _) = scan_upgrade(&old, &new, ExecConfig::default());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].classification, InjectionClass::AuthorizedTransfer);
        assert_eq!(findings[0].introduced_by, IntroducedBy::NewFunction);
        assert_eq!(findings[0].selector, Some(Selector([0x27, 0x94, 0x1c, 0x5b])));
    }

    #[test]
    fn pattern_semantics_are_monotone() {
        let benign = Asm::new().push(1u64).push(0u64).op(op::SSTORE).op(op::STOP).build();
        let old = dispatcher_with_bodies(&[([0x11, 0x11, 0x11, 0x11], benign.clone())]);

        // profit to a calldata-chosen recipient with no constraint: the
        // profit atom alone must not classify
        let unconstrained_drain = Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .op(op::SELFBALANCE)
            .push(4u64)
            .op(op::CALLDATALOAD)
            .op(op::GAS)
            .op(op::CALL)
            .op(op::STOP)
            .build();
        let new = dispatcher_with_bodies(&[
            ([0x11, 0x11, 0x11, 0x11], benign.clone()),
            ([0x22, 0x22, 0x22, 0x22], unconstrained_drain),
        ]);
        let (findings, _) = scan_upgrade(&old, &new, ExecConfig::default());
        assert!(findings.is_empty(), "profit without any constraint must not classify");

        // the same drain gated on the caller classifies; dropping the gate
        // removed the finding above, dropping the profit removes it below
        let gate_only = Asm::new()
            .op(op::CALLER)
            .push_bytes(&[0x40; 20])
            .op(op::EQ)
            .op(op::POP)
            .op(op::STOP)
            .build();
        let new = dispatcher_with_bodies(&[
            ([0x11, 0x11, 0x11, 0x11], benign),
            ([0x22, 0x22, 0x22, 0x22], gate_only),
        ]);
        let (findings, _) = scan_upgrade(&old, &new, ExecConfig::default());
        assert!(findings.is_empty(), "constraint without profit must not classify");
    }

    #[test]
    fn same_pattern_in_unchanged_function_is_not_flagged() {
        let code = dispatcher_with_bodies(&[([0x27, 0x94, 0x1c, 0x5b], gated_drain_body())]);
        let (findings, report) = scan_upgrade(&code, &code, ExecConfig::default());
        assert!(findings.is_empty());
        assert!(report.functions.iter().all(|f| f.status == DiffStatus::Unchanged));
    }
}

//! Bytecode analysis: disassembly, dispatch-table extraction, and symbolic
//! tracing of DELEGATECALL target provenance.
//!
//! The provenance question this module answers is the one that decides
//! upgradeability: does the address a DELEGATECALL jumps through come from
//! the contract's own storage (mutable and controllable), from the code
//! itself (immutable), from calldata (a forwarder), or from somewhere we
//! cannot pin down.

pub mod asm;
mod disasm;
mod dispatch;
mod exec;
mod provenance;

pub use disasm::disassemble;
pub use dispatch::{extract_selectors, function_body, DispatchTable};
pub use exec::{
    CallSiteInfo, EqObservation, ExecConfig, ExecOutcome, Executor, JumpiObservation,
    StorageAccess, StorageOp,
};
pub use provenance::{
    classify_delegatecall_targets, classify_target_value, detect_slot_deception, is_upgradeable,
    DeceptionFinding, DecoyStandard, SiteClassification, UpgradeabilityReport,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::opcode;
use crate::primitives::{keccak256, Address, Selector, Word};

/// A contract account's deployed code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bytecode {
    pub address: Address,
    pub code: crate::primitives::HexBytes,
    pub code_hash: Word,
}

impl Bytecode {
    /// Empty code (EOA or destroyed contract) is permitted.
    pub fn new(address: Address, code: Vec<u8>) -> Self {
        let code_hash = Word::from_be_bytes(&keccak256(&code));
        Self { address, code: crate::primitives::HexBytes(code), code_hash }
    }

    pub fn code(&self) -> &[u8] {
        &self.code.0
    }
}

/// One decoded instruction. `immediate` is present only for PUSH1..PUSH32
/// and is zero-padded when the code ends mid-immediate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: u8,
    pub immediate: Option<Vec<u8>>,
}

impl Instruction {
    pub fn mnemonic(&self) -> String {
        opcode::mnemonic(self.opcode)
    }

    /// Encoded length in the original byte stream (may be shorter than
    /// 1 + immediate width for a truncated trailing PUSH).
    pub fn encoded_len(&self, code_len: usize) -> usize {
        let full = 1 + opcode::immediate_len(self.opcode);
        full.min(code_len - self.offset)
    }

    pub fn push_value(&self) -> Option<Word> {
        self.immediate.as_deref().map(Word::from_be_slice)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.immediate {
            Some(imm) => write!(f, "{} 0x{}", self.mnemonic(), hex::encode(imm)),
            None => write!(f, "{}", self.mnemonic()),
        }
    }
}

/// Which environment atom a stack value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvValue {
    Caller,
    Origin,
    Address,
    SelfBalance,
    CallValue,
}

/// Abstract EVM stack value: the def-use lattice the provenance analysis
/// walks.
///
/// `Constant` keeps a `folded` bit distinguishing a literal PUSH from a
/// value produced by constant folding — the bit feeds the locator's
/// DirectConstant / FoldedConstant derivation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolicValue {
    Constant { value: Word, folded: bool },
    StorageLoad(Box<SymbolicValue>),
    CalldataLoad,
    Env(EnvValue),
    Computed { op: &'static str, operands: Vec<SymbolicValue> },
    Unknown,
}

impl SymbolicValue {
    pub fn constant(value: Word) -> Self {
        SymbolicValue::Constant { value, folded: false }
    }

    pub fn folded(value: Word) -> Self {
        SymbolicValue::Constant { value, folded: true }
    }

    pub fn as_constant(&self) -> Option<Word> {
        match self {
            SymbolicValue::Constant { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SymbolicValue::Constant { .. })
    }

    /// Depth-first test for any atom matching `pred`.
    pub fn contains(&self, pred: &dyn Fn(&SymbolicValue) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            SymbolicValue::StorageLoad(slot) => slot.contains(pred),
            SymbolicValue::Computed { operands, .. } => operands.iter().any(|o| o.contains(pred)),
            _ => false,
        }
    }

    pub fn contains_calldata(&self) -> bool {
        self.contains(&|v| matches!(v, SymbolicValue::CalldataLoad))
    }

    pub fn contains_unfolded_sha3(&self) -> bool {
        self.contains(&|v| matches!(v, SymbolicValue::Computed { op: "SHA3", .. }))
    }

    pub fn contains_env(&self, env: EnvValue) -> bool {
        self.contains(&|v| matches!(v, SymbolicValue::Env(e) if *e == env))
    }
}

impl fmt::Display for SymbolicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolicValue::Constant { value, .. } => {
                // short form for small constants, full form otherwise
                match value.as_u64() {
                    Some(v) => write!(f, "0x{v:x}"),
                    None => write!(f, "{value}"),
                }
            }
            SymbolicValue::StorageLoad(slot) => write!(f, "sload({slot})"),
            SymbolicValue::CalldataLoad => write!(f, "calldata"),
            SymbolicValue::Env(EnvValue::Caller) => write!(f, "caller"),
            SymbolicValue::Env(EnvValue::Origin) => write!(f, "origin"),
            SymbolicValue::Env(EnvValue::Address) => write!(f, "address"),
            SymbolicValue::Env(EnvValue::SelfBalance) => write!(f, "selfbalance"),
            SymbolicValue::Env(EnvValue::CallValue) => write!(f, "callvalue"),
            SymbolicValue::Computed { op, operands } => {
                write!(f, "{}(", op.to_lowercase())?;
                for (i, o) in operands.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{o}")?;
                }
                write!(f, ")")
            }
            SymbolicValue::Unknown => write!(f, "?"),
        }
    }
}

/// Where a DELEGATECALL target's slot index comes from.
///
/// Direct and Folded carry a concrete slot; Mapping carries the rendered
/// unresolved slot expression instead.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotRef {
    Direct(Word),
    Folded(Word),
    Mapping(String),
}

impl SlotRef {
    pub fn concrete(&self) -> Option<Word> {
        match self {
            SlotRef::Direct(w) | SlotRef::Folded(w) => Some(*w),
            SlotRef::Mapping(_) => None,
        }
    }
}

/// (slot index, byte offset) locating a 20-byte callee address in storage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotLocator {
    pub slot: SlotRef,
    /// Position of the address inside the 32-byte slot, counted in bytes
    /// from the low end; byte_offset + 20 <= 32.
    pub byte_offset: u8,
}

impl SlotLocator {
    pub fn direct(slot: Word, byte_offset: u8) -> Self {
        debug_assert!(byte_offset <= 12);
        Self { slot: SlotRef::Direct(slot), byte_offset }
    }

    pub fn folded(slot: Word, byte_offset: u8) -> Self {
        debug_assert!(byte_offset <= 12);
        Self { slot: SlotRef::Folded(slot), byte_offset }
    }

    pub fn concrete_slot(&self) -> Option<Word> {
        self.slot.concrete()
    }

    fn derivation_name(&self) -> &'static str {
        match self.slot {
            SlotRef::Direct(_) => "direct_constant",
            SlotRef::Folded(_) => "folded_constant",
            SlotRef::Mapping(_) => "mapping_dependent",
        }
    }
}

impl Serialize for SlotLocator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SlotLocator", 3)?;
        match &self.slot {
            SlotRef::Direct(w) | SlotRef::Folded(w) => st.serialize_field("slot", &w.to_string())?,
            SlotRef::Mapping(expr) => st.serialize_field("slot", expr)?,
        }
        st.serialize_field("byte_offset", &self.byte_offset)?;
        st.serialize_field("derivation", self.derivation_name())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SlotLocator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            slot: String,
            byte_offset: u8,
            derivation: String,
        }
        let raw = Raw::deserialize(d)?;
        let slot = match raw.derivation.as_str() {
            "direct_constant" => {
                SlotRef::Direct(raw.slot.parse().map_err(serde::de::Error::custom)?)
            }
            "folded_constant" => {
                SlotRef::Folded(raw.slot.parse().map_err(serde::de::Error::custom)?)
            }
            "mapping_dependent" => SlotRef::Mapping(raw.slot),
            other => return Err(serde::de::Error::custom(format!("unknown derivation {other}"))),
        };
        Ok(SlotLocator { slot, byte_offset: raw.byte_offset })
    }
}

/// Resolved provenance of one DELEGATECALL site's target address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ProvenanceClass {
    Storage { locators: Vec<SlotLocator> },
    ConstantTarget { address: Address },
    Calldata,
    MappingDependent { slot_expr: String },
    Unknown,
}

impl ProvenanceClass {
    pub fn storage_locators(&self) -> &[SlotLocator] {
        match self {
            ProvenanceClass::Storage { locators } => locators,
            _ => &[],
        }
    }
}

/// One recovered dispatch-table entry. `selector: None` marks the
/// fallback entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionEntry {
    pub selector: Option<Selector>,
    pub entry_offset: usize,
    pub body_hash: Word,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytecode_hash_is_keccak_of_code() {
        let b = Bytecode::new(Address::ZERO, vec![]);
        // keccak256 of the empty string
        assert_eq!(
            b.code_hash.to_string(),
            "0xc5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
    }

    #[test]
    fn symbolic_value_rendering() {
        let v = SymbolicValue::StorageLoad(Box::new(SymbolicValue::Computed {
            op: "SHA3",
            operands: vec![SymbolicValue::CalldataLoad, SymbolicValue::constant(Word::from_u64(5))],
        }));
        assert_eq!(v.to_string(), "sload(sha3(calldata,0x5))");
        assert!(v.contains_calldata());
        assert!(v.contains_unfolded_sha3());
    }

    #[test]
    fn slot_locator_serde_roundtrip() {
        let l = SlotLocator::direct(Word::from_u64(0), 0);
        let json = serde_json::to_string(&l).unwrap();
        assert!(json.contains("direct_constant"));
        let back: SlotLocator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l);

        let m = SlotLocator { slot: SlotRef::Mapping("sha3(calldata,0x2)".into()), byte_offset: 0 };
        let json = serde_json::to_string(&m).unwrap();
        let back: SlotLocator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}

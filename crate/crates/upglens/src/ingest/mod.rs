//! Canonical input records — transaction call frames, storage diffs,
//! contract metadata, ABI entries — and the readers that stream them from
//! NDJSON files or an RPC endpoint.
//!
//! Record field names below are the wire format: one JSON object per line,
//! addresses lowercase 0x-hex, words full-width hex (short hex accepted on
//! input and left-padded).

mod abi;
mod aggregate;
mod ndjson;
pub mod rpc;

pub use abi::{canonical_signature, read_abi, read_abi_value, AbiEntry, AbiKind};
pub use aggregate::aggregate_delegatecalls;
pub use ndjson::NdjsonReader;
pub use rpc::{RpcClient, RpcError};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::primitives::{Address, HexBytes, TxHash, Word};

/// One call frame from a transaction trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallFrame {
    #[serde(rename = "tx")]
    pub tx_hash: TxHash,
    pub block: u64,
    #[serde(rename = "kind")]
    pub call_kind: CallKind,
    #[serde(rename = "from")]
    pub caller: Address,
    #[serde(rename = "to")]
    pub callee: Address,
    pub input: HexBytes,
    pub depth: u32,
    pub value: Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CallKind {
    #[serde(rename = "CALL")]
    Call,
    #[serde(rename = "DELEGATECALL")]
    DelegateCall,
    #[serde(rename = "STATICCALL")]
    StaticCall,
    #[serde(rename = "CALLCODE")]
    CallCode,
    #[serde(rename = "CREATE")]
    Create,
    #[serde(rename = "CREATE2")]
    Create2,
}

/// One storage-slot write from a transaction's state diff. No-op writes
/// (old == new) are preserved as seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageWrite {
    #[serde(rename = "tx")]
    pub tx_hash: TxHash,
    pub block: u64,
    pub contract: Address,
    pub slot: Word,
    #[serde(rename = "old")]
    pub old_value: Word,
    #[serde(rename = "new")]
    pub new_value: Word,
    /// Intra-transaction sequence number.
    pub order: u32,
}

/// Deployment metadata for one contract account.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractMeta {
    pub address: Address,
    pub deploy_block: u64,
    pub deploy_tx: TxHash,
    pub code_hash: Word,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("not a contract-ABI JSON document: {0}")]
    NotAbiJson(String),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.display().to_string(), source }
    }
}

/// Streams call frames from an NDJSON trace file. Malformed lines surface
/// as per-line `Err` items; the stream continues past them.
pub fn read_trace_file(path: impl AsRef<Path>) -> Result<NdjsonReader<CallFrame>, IngestError> {
    NdjsonReader::open(path.as_ref())
}

/// Streams storage writes from an NDJSON state-diff file, same error
/// contract as [`read_trace_file`].
pub fn read_state_diff(path: impl AsRef<Path>) -> Result<NdjsonReader<StorageWrite>, IngestError> {
    NdjsonReader::open(path.as_ref())
}

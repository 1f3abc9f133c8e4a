//! Non-fatal analysis diagnostics. Analyses never abort on degraded input;
//! they record one of these and keep going.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// Path exploration exceeded the configured block budget.
    AnalysisBudgetExceeded,
    /// Packed-address mask did not match a known pattern; offset defaulted to 0.
    LowConfidenceOffset,
    /// A DELEGATECALL target only ever resolves through a storage mapping.
    MappingDependentOnly,
    /// Different paths gave one site both storage and non-storage provenance.
    MixedProvenance,
    /// A jump target could not be resolved statically; the path was dropped.
    UnresolvedJump,
    /// Consecutive upgrade events do not chain (missing state diff).
    InconsistentHistory,
    /// The code-presence oracle had no data for an address.
    UnknownCodePresence,
    /// Trace input carries no revert status; all frames were included.
    AssumedSuccessful,
    /// An ABI entry was skipped because its types did not parse.
    SkippedAbiEntry,
    /// No dispatch table was recognized in the bytecode.
    NoDispatcher,
    /// Deployment transaction could not be recovered from the RPC endpoint.
    DeployTxNotFound,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

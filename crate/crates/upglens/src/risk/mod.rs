//! Risk findings: the unified envelope over the taxonomy's detector
//! outputs, plus the per-category detectors in [`init`], [`interface`] and
//! [`inject`].

pub mod init;
pub mod inject;
pub mod interface;

pub use init::{check_admin_init, InitError, InitFinding, InitKind};
pub use inject::{
    analyze_body, classify_injection, diff_functions, match_authority_set,
    match_beneficiary_constraint, match_executor_constraint, match_profit, scan_upgrade,
    AmountSource, AtomKind, BeneficiaryTarget, CodeInjection, ComparedTo, DiffReport, DiffStatus,
    ExecutorSubject, FunctionDiff, InjectionClass, InjectionFinding, IntroducedBy, PatternAtom,
    ProfitAsset,
};
pub use interface::{
    detect_selector_collision, diff_abis, selector_diff_from_bytecode, state_mutability_notes,
    Confidence, InterfaceFinding, InterfaceKind, VersionContext,
};

use serde::{Deserialize, Serialize};

use crate::bytecode::DeceptionFinding;
use crate::chains::{HygieneIssue, HygieneKind};
use crate::primitives::{keccak256, Address};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warn,
    High,
}

impl std::str::FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "info" => Ok(Severity::Info),
            "warn" | "warning" => Ok(Severity::Warn),
            "high" => Ok(Severity::High),
            other => Err(format!("unknown severity {other}")),
        }
    }
}

/// Category-tagged payload; the envelope's category and payload cannot
/// disagree because the category *is* the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "category", content = "payload", rename_all = "snake_case")]
pub enum RiskPayload {
    Hygiene(HygieneIssue),
    Init(InitFinding),
    Interface(InterfaceFinding),
    Injection(InjectionFinding),
    Deception { contract: Address, finding: DeceptionFinding },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFinding {
    pub id: String,
    pub severity: Severity,
    #[serde(flatten)]
    pub payload: RiskPayload,
}

impl RiskFinding {
    /// Wraps a payload with its default severity and a deterministic
    /// content-derived id.
    pub fn new(payload: RiskPayload) -> Self {
        let severity = default_severity(&payload);
        let serialized = serde_json::to_string(&payload).expect("payload serializes");
        let id = hex::encode(&keccak256(serialized.as_bytes())[..8]);
        Self { id, severity, payload }
    }

    pub fn category(&self) -> &'static str {
        match self.payload {
            RiskPayload::Hygiene(_) => "hygiene",
            RiskPayload::Init(_) => "init",
            RiskPayload::Interface(_) => "interface",
            RiskPayload::Injection(_) => "injection",
            RiskPayload::Deception { .. } => "deception",
        }
    }
}

fn default_severity(payload: &RiskPayload) -> Severity {
    match payload {
        RiskPayload::Hygiene(issue) => match issue.kind {
            HygieneKind::Redundant => Severity::Info,
            HygieneKind::Invalid | HygieneKind::ZeroAddress => Severity::Warn,
        },
        RiskPayload::Init(_) => Severity::Warn,
        RiskPayload::Interface(f) => match f.kind {
            InterfaceKind::SelectorShadowed { .. } => Severity::High,
            _ => Severity::Warn,
        },
        RiskPayload::Injection(_) => Severity::High,
        RiskPayload::Deception { .. } => Severity::High,
    }
}

//! upglens: find DELEGATECALL-based upgradeable contracts from bytecode,
//! reconstruct their upgrade histories from traces and storage diffs, and
//! audit upgrades for risk.
//!
//! Pipeline stages, each usable on its own:
//!
//! - [`ingest`]: trace / state-diff / ABI / bytecode readers and
//!   DELEGATECALL aggregation;
//! - [`bytecode`]: disassembly, dispatch-table extraction and symbolic
//!   provenance of DELEGATECALL targets (the upgradeability decision);
//! - [`chains`]: upgrade-event detection from storage writes, chain
//!   building and dedup, slot-usage classification, hygiene issues;
//! - [`risk`]: the detectors — caller initialization, interface and
//!   selector collisions, suspicious injected code;
//! - [`store`]: a content-addressed NDJSON dataset plus the pipeline
//!   orchestration the CLI exposes;
//! - [`report`]: NDJSON / CSV / summary rendering.

pub mod bytecode;
pub mod chains;
pub mod config;
pub mod diag;
pub mod ingest;
pub mod opcode;
pub mod primitives;
pub mod report;
pub mod risk;
pub mod store;

pub use diag::{Diagnostic, DiagnosticKind};
pub use primitives::{Address, HexBytes, Selector, TxHash, Word};

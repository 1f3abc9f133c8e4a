//! Tunable analysis knobs, with the defaults the rest of the crate assumes.

use serde::{Deserialize, Serialize};

/// Everything configurable about an analysis run. Flags override a config
/// file, which overrides environment defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Visited-block budget for the symbolic sweep.
    pub max_blocks: usize,
    /// Revisit cap per block entry (loops collapse past this).
    pub max_revisits: u32,
    /// Slot values below this classify as SimpleKey (sequential
    /// compiler-assigned slots); at or above, ComplexKey.
    pub simple_key_threshold: u64,
    /// Worker threads for per-contract fan-out. 0 = rayon default.
    pub jobs: usize,
    /// JSON-RPC endpoint; `UPGLENS_RPC_URL` seeds this.
    pub rpc_url: Option<String>,
    /// Attempts per RPC request (bounded exponential backoff between them).
    pub rpc_attempts: u32,
    /// Maximum concurrent in-flight RPC requests.
    pub rpc_in_flight: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            max_blocks: 10_000,
            max_revisits: 2,
            simple_key_threshold: 1 << 16,
            jobs: 0,
            rpc_url: std::env::var("UPGLENS_RPC_URL").ok(),
            rpc_attempts: 3,
            rpc_in_flight: 8,
        }
    }
}

impl AnalysisConfig {
    pub fn exploration(&self) -> crate::bytecode::ExecConfig {
        crate::bytecode::ExecConfig { max_blocks: self.max_blocks, max_revisits: self.max_revisits }
    }
}

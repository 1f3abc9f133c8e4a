//! JSON-RPC client. All network access in the crate lives behind this one
//! type; every other test surface is file- or value-driven and runs
//! offline.
//!
//! Requests retry with bounded exponential backoff (default 3 attempts)
//! and an in-flight cap makes the client safe to share across worker
//! threads.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use crate::bytecode::Bytecode;
use crate::diag::{Diagnostic, DiagnosticKind};
use crate::primitives::{keccak256, Address, HexBytes, TxHash, Word};

use super::{CallFrame, CallKind, ContractMeta};

#[derive(Debug, thiserror::Error)]
pub enum RpcError {
    #[error("network error: {0}")]
    Network(String),
    #[error("rpc error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("malformed rpc response: {0}")]
    BadResponse(String),
}

pub struct RpcClient {
    url: String,
    agent: ureq::Agent,
    attempts: u32,
    backoff_base: Duration,
    permits: Arc<Gate>,
}

impl RpcClient {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_limits(url, 3, 8)
    }

    pub fn with_limits(url: impl Into<String>, attempts: u32, in_flight: usize) -> Self {
        Self {
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build(),
            attempts: attempts.max(1),
            backoff_base: Duration::from_millis(100),
            permits: Arc::new(Gate::new(in_flight.max(1))),
        }
    }

    #[cfg(test)]
    fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    fn request(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        let _permit = self.permits.acquire();
        let body = json!({"jsonrpc": "2.0", "id": 1, "method": method, "params": params});
        let mut last_err = RpcError::Network("no attempt made".into());
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * (1 << (attempt - 1)));
            }
            match self.agent.post(&self.url).send_json(&body) {
                Err(e) => last_err = RpcError::Network(e.to_string()),
                Ok(resp) => {
                    let parsed: Value = resp
                        .into_json()
                        .map_err(|e| RpcError::BadResponse(e.to_string()))?;
                    if let Some(err) = parsed.get("error").filter(|e| !e.is_null()) {
                        last_err = RpcError::Rpc {
                            code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                            message: err
                                .get("message")
                                .and_then(Value::as_str)
                                .unwrap_or("unknown")
                                .to_string(),
                        };
                        continue;
                    }
                    return parsed
                        .get("result")
                        .cloned()
                        .ok_or_else(|| RpcError::BadResponse("missing result".into()));
                }
            }
        }
        Err(last_err)
    }

    /// eth_getCode at a block (None = latest), normalized to a [`Bytecode`].
    pub fn get_code(&self, address: Address, block: Option<u64>) -> Result<Bytecode, RpcError> {
        let tag = block.map(|b| format!("0x{b:x}")).unwrap_or_else(|| "latest".into());
        let result = self.request("eth_getCode", json!([address.to_string(), tag]))?;
        let hex = result.as_str().ok_or_else(|| RpcError::BadResponse("code not a string".into()))?;
        let code: HexBytes = hex.parse().map_err(|e| RpcError::BadResponse(format!("{e}")))?;
        Ok(Bytecode::new(address, code.0))
    }

    /// debug_traceTransaction with the call tracer, flattened into frames.
    pub fn trace_transaction(&self, tx: TxHash) -> Result<Vec<CallFrame>, RpcError> {
        let tx_info = self.request("eth_getTransactionByHash", json!([tx.to_string()]))?;
        let block = tx_info
            .get("blockNumber")
            .and_then(Value::as_str)
            .and_then(parse_quantity)
            .ok_or_else(|| RpcError::BadResponse("transaction has no blockNumber".into()))?;
        let trace = self.request(
            "debug_traceTransaction",
            json!([tx.to_string(), {"tracer": "callTracer"}]),
        )?;
        Ok(normalize_call_tracer(tx, block, &trace))
    }

    /// Deployment metadata: binary-search eth_getCode for the deploy block,
    /// then scan that block's receipts for the creating transaction.
    pub fn deploy_meta(
        &self,
        address: Address,
    ) -> Result<(ContractMeta, Vec<Diagnostic>), RpcError> {
        let latest = self
            .request("eth_blockNumber", json!([]))?
            .as_str()
            .and_then(parse_quantity)
            .ok_or_else(|| RpcError::BadResponse("bad blockNumber".into()))?;
        let code = self.get_code(address, Some(latest))?;
        if code.code().is_empty() {
            return Err(RpcError::BadResponse(format!("{address} has no code at block {latest}")));
        }

        let mut lo = 0u64; // no code
        let mut hi = latest; // code present
        while lo + 1 < hi {
            let mid = lo + (hi - lo) / 2;
            if self.get_code(address, Some(mid))?.code().is_empty() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let deploy_block = hi;

        let mut diagnostics = Vec::new();
        let deploy_tx = self.find_creating_tx(address, deploy_block)?.unwrap_or_else(|| {
            diagnostics.push(Diagnostic::new(
                DiagnosticKind::DeployTxNotFound,
                format!("no external creation tx for {address} in block {deploy_block}"),
            ));
            TxHash::ZERO
        });

        Ok((
            ContractMeta {
                address,
                deploy_block,
                deploy_tx,
                code_hash: Word::from_be_bytes(&keccak256(code.code())),
            },
            diagnostics,
        ))
    }

    fn find_creating_tx(
        &self,
        address: Address,
        block: u64,
    ) -> Result<Option<TxHash>, RpcError> {
        let block_info =
            self.request("eth_getBlockByNumber", json!([format!("0x{block:x}"), true]))?;
        let txs = match block_info.get("transactions").and_then(Value::as_array) {
            Some(t) => t,
            None => return Ok(None),
        };
        for tx in txs {
            if !tx.get("to").map(Value::is_null).unwrap_or(false) {
                continue;
            }
            let Some(hash) = tx.get("hash").and_then(Value::as_str) else { continue };
            let receipt = self.request("eth_getTransactionReceipt", json!([hash]))?;
            let created = receipt
                .get("contractAddress")
                .and_then(Value::as_str)
                .and_then(|a| a.parse::<Address>().ok());
            if created == Some(address) {
                return Ok(hash.parse().ok());
            }
        }
        Ok(None)
    }
}

fn parse_quantity(s: &str) -> Option<u64> {
    u64::from_str_radix(s.trim_start_matches("0x"), 16).ok()
}

/// Flattens a call-tracer tree into depth-annotated frames. Subtrees whose
/// root carries an `error` field reverted and are dropped.
pub fn normalize_call_tracer(tx: TxHash, block: u64, root: &Value) -> Vec<CallFrame> {
    let mut out = Vec::new();
    walk(tx, block, root, 0, &mut out);
    out
}

fn walk(tx: TxHash, block: u64, node: &Value, depth: u32, out: &mut Vec<CallFrame>) {
    if node.get("error").map(|e| !e.is_null()).unwrap_or(false) {
        return;
    }
    let kind = match node.get("type").and_then(Value::as_str) {
        Some("CALL") => Some(CallKind::Call),
        Some("DELEGATECALL") => Some(CallKind::DelegateCall),
        Some("STATICCALL") => Some(CallKind::StaticCall),
        Some("CALLCODE") => Some(CallKind::CallCode),
        Some("CREATE") => Some(CallKind::Create),
        Some("CREATE2") => Some(CallKind::Create2),
        _ => None,
    };
    if let Some(kind) = kind {
        let addr = |key: &str| {
            node.get(key)
                .and_then(Value::as_str)
                .and_then(|s| s.parse::<Address>().ok())
                .unwrap_or(Address::ZERO)
        };
        let input = node
            .get("input")
            .and_then(Value::as_str)
            .and_then(|s| s.parse::<HexBytes>().ok())
            .unwrap_or_default();
        let value = node
            .get("value")
            .and_then(Value::as_str)
            .and_then(|s| s.parse::<Word>().ok())
            .unwrap_or(Word::ZERO);
        out.push(CallFrame {
            tx_hash: tx,
            block,
            call_kind: kind,
            caller: addr("from"),
            callee: addr("to"),
            input,
            depth,
            value,
        });
    }
    if let Some(children) = node.get("calls").and_then(Value::as_array) {
        for c in children {
            walk(tx, block, c, depth + 1, out);
        }
    }
}

/// Counting gate bounding concurrent requests.
struct Gate {
    state: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self { state: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.state.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.state.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

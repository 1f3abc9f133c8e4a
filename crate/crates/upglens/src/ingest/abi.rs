//! Contract-ABI JSON parsing with canonical signature and selector
//! computation. Tuple types expand to their component lists, since
//! selector identity depends on the canonical form.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diag::{Diagnostic, DiagnosticKind};
use crate::primitives::Selector;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbiKind {
    Function,
    Event,
    Constructor,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbiEntry {
    pub kind: AbiKind,
    pub name: String,
    /// Canonical input types.
    pub inputs: Vec<String>,
    /// Canonical output types.
    pub outputs: Vec<String>,
    /// Present for functions only.
    pub selector: Option<Selector>,
    /// view / pure / nonpayable / payable, when the document carries it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_mutability: Option<String>,
}

impl AbiEntry {
    pub fn signature(&self) -> String {
        canonical_signature(&self.name, &self.inputs)
    }
}

pub fn canonical_signature(name: &str, inputs: &[String]) -> String {
    format!("{}({})", name, inputs.join(","))
}

/// Reads a standard contract-ABI JSON document (a bare array, or an object
/// with an `abi` array as explorers emit). Entries whose types fail to
/// parse are skipped with a diagnostic.
pub fn read_abi(path: impl AsRef<Path>) -> Result<(Vec<AbiEntry>, Vec<Diagnostic>), IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| IngestError::NotAbiJson(e.to_string()))?;
    read_abi_value(&value)
}

/// Same as [`read_abi`] over an already-parsed JSON value.
pub fn read_abi_value(value: &Value) -> Result<(Vec<AbiEntry>, Vec<Diagnostic>), IngestError> {
    let array = match value {
        Value::Array(a) => a,
        Value::Object(o) => match o.get("abi") {
            Some(Value::Array(a)) => a,
            _ => return Err(IngestError::NotAbiJson("expected a JSON array of entries".into())),
        },
        _ => return Err(IngestError::NotAbiJson("expected a JSON array of entries".into())),
    };

    let mut entries = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, raw) in array.iter().enumerate() {
        let kind = match raw.get("type").and_then(Value::as_str).unwrap_or("function") {
            "function" => AbiKind::Function,
            "event" => AbiKind::Event,
            "constructor" => AbiKind::Constructor,
            "fallback" | "receive" => AbiKind::Fallback,
            // errors and other entry kinds play no role in collision analysis
            _ => continue,
        };
        let name = raw.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
        let inputs = match param_types(raw.get("inputs")) {
            Ok(t) => t,
            Err(reason) => {
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::SkippedAbiEntry,
                    format!("entry {i} ({name}): {reason}"),
                ));
                continue;
            }
        };
        let outputs = match param_types(raw.get("outputs")) {
            Ok(t) => t,
            Err(reason) => {
                diagnostics.push(Diagnostic::new(
                    DiagnosticKind::SkippedAbiEntry,
                    format!("entry {i} ({name}): {reason}"),
                ));
                continue;
            }
        };
        let selector = (kind == AbiKind::Function)
            .then(|| Selector::of_signature(&canonical_signature(&name, &inputs)));
        let state_mutability =
            raw.get("stateMutability").and_then(Value::as_str).map(str::to_string);
        entries.push(AbiEntry { kind, name, inputs, outputs, selector, state_mutability });
    }
    Ok((entries, diagnostics))
}

fn param_types(params: Option<&Value>) -> Result<Vec<String>, String> {
    match params {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items.iter().map(canonical_type).collect(),
        Some(other) => Err(format!("parameter list is not an array: {other}")),
    }
}

/// Canonical type of one parameter: tuples expand to their components,
/// array suffixes carry over, and the shorthand integer aliases normalize.
fn canonical_type(param: &Value) -> Result<String, String> {
    let raw = param
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| "parameter without a type".to_string())?;
    if raw.is_empty() {
        return Err("empty type".into());
    }
    let (base, suffix) = split_array_suffix(raw)?;
    if base == "tuple" {
        let comps = match param.get("components") {
            Some(Value::Array(c)) => c,
            _ => return Err("tuple without components".into()),
        };
        let inner: Result<Vec<String>, String> = comps.iter().map(canonical_type).collect();
        return Ok(format!("({}){}", inner?.join(","), suffix));
    }
    let base = match base {
        "uint" => "uint256",
        "int" => "int256",
        "byte" => "bytes1",
        other => other,
    };
    Ok(format!("{base}{suffix}"))
}

fn split_array_suffix(t: &str) -> Result<(&str, &str), String> {
    match t.find('[') {
        None => Ok((t, "")),
        Some(i) => {
            let suffix = &t[i..];
            if !suffix.ends_with(']') {
                return Err(format!("malformed array suffix in {t}"));
            }
            Ok((&t[..i], suffix))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn transfer_selector_is_a9059cbb() {
        let (entries, diags) = read_abi_value(&json!([
            {"type":"function","name":"transfer","inputs":[
                {"name":"to","type":"address"},{"name":"value","type":"uint256"}],
             "outputs":[{"type":"bool"}]}
        ]))
        .unwrap();
        assert!(diags.is_empty());
        assert_eq!(entries[0].selector.unwrap().to_string(), "0xa9059cbb");
        assert_eq!(entries[0].signature(), "transfer(address,uint256)");
    }

    #[test]
    fn burn_selector_is_42966c68() {
        let (entries, _) = read_abi_value(&json!([
            {"type":"function","name":"burn","inputs":[{"type":"uint256"}],"outputs":[]}
        ]))
        .unwrap();
        assert_eq!(entries[0].selector.unwrap().to_string(), "0x42966c68");
    }

    #[test]
    fn empty_array_is_empty_list() {
        let (entries, diags) = read_abi_value(&json!([])).unwrap();
        assert!(entries.is_empty());
        assert!(diags.is_empty());
    }

    #[test]
    fn tuples_expand_and_aliases_normalize() {
        let (entries, _) = read_abi_value(&json!([
            {"type":"function","name":"f","inputs":[
                {"type":"tuple","components":[{"type":"address"},{"type":"uint"}]},
                {"type":"tuple[2]","components":[{"type":"bytes32"}]}
            ],"outputs":[]}
        ]))
        .unwrap();
        assert_eq!(entries[0].signature(), "f((address,uint256),(bytes32)[2])");
    }

    #[test]
    fn bad_entries_skip_with_diagnostic_good_ones_stay() {
        let (entries, diags) = read_abi_value(&json!([
            {"type":"function","name":"broken","inputs":[{"name":"x"}],"outputs":[]},
            {"type":"function","name":"ok","inputs":[],"outputs":[]}
        ]))
        .unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].name, "ok");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::SkippedAbiEntry);
    }

    #[test]
    fn non_array_document_is_rejected() {
        assert!(matches!(read_abi_value(&json!({"not":"abi"})), Err(IngestError::NotAbiJson(_))));
        // explorer wrapper form is accepted
        let (entries, _) = read_abi_value(&json!({"abi":[
            {"type":"function","name":"g","inputs":[],"outputs":[]}
        ]}))
        .unwrap();
        assert_eq!(entries.len(), 1);
    }
}

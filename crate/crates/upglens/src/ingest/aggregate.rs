//! DELEGATECALL aggregation: the first pipeline filter. Only actual
//! DELEGATECALL invocations count, and only callers that reached two or
//! more distinct callees stay — one fixed target shows no upgrade
//! behavior.

use std::collections::{BTreeMap, BTreeSet};

use crate::primitives::Address;

use super::{CallFrame, CallKind};

pub fn aggregate_delegatecalls(
    frames: impl IntoIterator<Item = CallFrame>,
) -> BTreeMap<Address, BTreeSet<Address>> {
    let mut by_caller: BTreeMap<Address, BTreeSet<Address>> = BTreeMap::new();
    for frame in frames {
        if frame.call_kind == CallKind::DelegateCall {
            by_caller.entry(frame.caller).or_default().insert(frame.callee);
        }
    }
    by_caller.retain(|_, callees| callees.len() >= 2);
    by_caller
}

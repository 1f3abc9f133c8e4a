//! Bounded symbolic stack execution.
//!
//! The executor sweeps bytecode from an entry offset, carrying an abstract
//! stack of [`SymbolicValue`]s and a small concrete-offset memory model
//! through every path it can resolve. Jumps to PUSH-constant targets are
//! followed; a per-block revisit cap collapses loops and a global
//! visited-block budget bounds the sweep. Paths never abort on garbage
//! code — they just end.
//!
//! Everything downstream (provenance classification, dispatch-table
//! extraction, injection pattern matching) consumes the recorded
//! [`ExecOutcome`] events rather than re-walking the code.

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::{Diagnostic, DiagnosticKind};
use crate::opcode as op;
use crate::primitives::{keccak256, Selector, Word};

use super::{EnvValue, SymbolicValue};

/// Exploration bounds. Defaults: 10,000 visited blocks, 2 visits per block.
#[derive(Debug, Clone, Copy)]
pub struct ExecConfig {
    pub max_blocks: usize,
    pub max_revisits: u32,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self { max_blocks: 10_000, max_revisits: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StorageOp {
    Load,
    Store,
}

/// One SLOAD/SSTORE observation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StorageAccess {
    pub site: usize,
    pub op: StorageOp,
    pub slot: SymbolicValue,
    /// Stored value (SSTORE only).
    pub value: Option<SymbolicValue>,
}

/// One EQ observation: the raw operands as popped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EqObservation {
    pub site: usize,
    pub lhs: SymbolicValue,
    pub rhs: SymbolicValue,
}

/// One JUMPI observation: condition value and the statically-resolved
/// target, when there is one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct JumpiObservation {
    pub site: usize,
    pub cond: SymbolicValue,
    pub dest: Option<usize>,
}

/// One external-call observation (CALL / CALLCODE / DELEGATECALL /
/// STATICCALL) with whatever the memory model could decode of its input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallSiteInfo {
    pub site: usize,
    pub opcode: u8,
    pub target: SymbolicValue,
    /// Wei value operand (CALL / CALLCODE only).
    pub value: Option<SymbolicValue>,
    /// First four bytes of the call input, when the input region resolved.
    pub input_selector: Option<Selector>,
    /// ABI argument words following the selector, as far as they resolved.
    pub args: Vec<SymbolicValue>,
}

#[derive(Debug, Default)]
pub struct ExecOutcome {
    pub entry: usize,
    /// Distinct symbolic targets seen at each DELEGATECALL site.
    pub delegatecall_targets: BTreeMap<usize, Vec<SymbolicValue>>,
    pub storage_accesses: BTreeSet<StorageAccess>,
    pub eq_sites: BTreeSet<EqObservation>,
    pub jumpi_sites: BTreeSet<JumpiObservation>,
    pub call_sites: BTreeSet<CallSiteInfo>,
    /// Offsets of every instruction executed on some explored path.
    pub visited_offsets: BTreeSet<usize>,
    pub blocks_executed: usize,
    pub budget_exhausted: bool,
    pub diagnostics: Vec<Diagnostic>,
}

// -- memory model -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum MemData {
    /// 32-byte MSTORE.
    Word(SymbolicValue),
    /// 1-byte MSTORE8.
    Byte(SymbolicValue),
    /// Concrete bytes (CODECOPY with constant operands).
    Bytes(Vec<u8>),
    /// A region whose content is summarized by one value
    /// (CALLDATACOPY, RETURNDATACOPY, call output).
    Opaque { len: u64, value: SymbolicValue },
}

impl MemData {
    fn len(&self) -> u64 {
        match self {
            MemData::Word(_) => 32,
            MemData::Byte(_) => 1,
            MemData::Bytes(b) => b.len() as u64,
            MemData::Opaque { len, .. } => *len,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MemWrite {
    offset: u64,
    data: MemData,
}

/// Write-list memory model over concrete offsets. Writes at symbolic
/// offsets are dropped; reads fall back to `None` and the caller degrades
/// to a Computed value.
#[derive(Debug, Clone, Default, PartialEq)]
struct SymMemory {
    writes: Vec<MemWrite>,
}

impl SymMemory {
    fn store(&mut self, offset: u64, data: MemData) {
        self.writes.push(MemWrite { offset, data });
    }

    /// Latest write whose span covers byte `pos`.
    fn covering(&self, pos: u64) -> Option<&MemWrite> {
        self.writes.iter().rev().find(|w| pos >= w.offset && pos < w.offset + w.data.len())
    }

    /// A 32-byte read. An exact-offset word write wins even when symbolic,
    /// provided nothing later shadows the region; otherwise the region must
    /// materialize to concrete bytes.
    fn read_word(&self, offset: u64) -> Option<SymbolicValue> {
        let latest_overlap = self
            .writes
            .iter()
            .rev()
            .find(|w| w.offset < offset + 32 && offset < w.offset + w.data.len());
        if let Some(w) = latest_overlap {
            if w.offset == offset {
                match &w.data {
                    MemData::Word(v) => return Some(v.clone()),
                    MemData::Opaque { len, value } if *len >= 32 => return Some(value.clone()),
                    _ => {}
                }
            }
        }
        self.read_concrete(offset, 32).map(|bytes| {
            let mut buf = [0u8; 32];
            buf.copy_from_slice(&bytes);
            SymbolicValue::folded(Word::from_be_bytes(&buf))
        })
    }

    /// Concrete bytes for a region, or None when any byte is symbolic.
    fn read_concrete(&self, offset: u64, len: u64) -> Option<Vec<u8>> {
        let mut out = Vec::with_capacity(len as usize);
        for pos in offset..offset + len {
            match self.covering(pos) {
                None => out.push(0),
                Some(w) => {
                    let rel = (pos - w.offset) as usize;
                    match &w.data {
                        MemData::Bytes(b) => out.push(b[rel]),
                        MemData::Word(v) => out.push(v.as_constant()?.to_be_bytes()[rel]),
                        MemData::Byte(v) => out.push(v.as_constant()?.to_be_bytes()[31]),
                        MemData::Opaque { .. } => return None,
                    }
                }
            }
        }
        Some(out)
    }

    /// Distinct value roots contributing to a region's content, for SHA3
    /// summaries when folding fails.
    fn region_roots(&self, offset: u64, len: u64) -> Vec<SymbolicValue> {
        let mut roots = Vec::new();
        let mut pos = offset;
        while pos < offset + len {
            let step = match self.covering(pos) {
                None => 1,
                Some(w) => {
                    match &w.data {
                        MemData::Word(v) | MemData::Byte(v) | MemData::Opaque { value: v, .. } => {
                            collect_roots(v, &mut roots)
                        }
                        MemData::Bytes(_) => {}
                    }
                    (w.offset + w.data.len()).saturating_sub(pos).max(1)
                }
            };
            pos += step;
        }
        dedup_roots(roots)
    }
}

/// Atoms of a value tree: calldata, env, storage loads, constants, unknown.
fn collect_roots(v: &SymbolicValue, out: &mut Vec<SymbolicValue>) {
    match v {
        SymbolicValue::Computed { operands, .. } => {
            for o in operands {
                collect_roots(o, out);
            }
        }
        other => out.push(other.clone()),
    }
}

/// Dedup, non-constants first, capped at the SHA3 operand arity of 2.
fn dedup_roots(roots: Vec<SymbolicValue>) -> Vec<SymbolicValue> {
    let mut seen = Vec::new();
    for r in roots {
        if !seen.contains(&r) {
            seen.push(r);
        }
    }
    seen.sort_by_key(|r| r.is_constant());
    seen.truncate(2);
    if seen.is_empty() {
        seen.push(SymbolicValue::Unknown);
    }
    seen
}

// -- executor ---------------------------------------------------------------

#[derive(Debug, Clone)]
struct Frame {
    pc: usize,
    stack: Vec<SymbolicValue>,
    memory: SymMemory,
    last_return: SymbolicValue,
}

impl Frame {
    fn at(pc: usize) -> Self {
        let mut memory = SymMemory::default();
        // Seed the solc free-memory-pointer convention so call-argument
        // regions built off mload(0x40) stay concrete.
        memory.store(0x40, MemData::Word(SymbolicValue::constant(Word::from_u64(0x80))));
        Frame { pc, stack: Vec::new(), memory, last_return: SymbolicValue::Unknown }
    }
}

pub struct Executor<'c> {
    code: &'c [u8],
    jumpdests: BTreeSet<usize>,
    config: ExecConfig,
}

impl<'c> Executor<'c> {
    pub fn new(code: &'c [u8], config: ExecConfig) -> Self {
        let jumpdests = super::disassemble(code)
            .iter()
            .filter(|i| i.opcode == op::JUMPDEST)
            .map(|i| i.offset)
            .collect();
        Self { code, jumpdests, config }
    }

    pub fn with_defaults(code: &'c [u8]) -> Self {
        Self::new(code, ExecConfig::default())
    }

    /// Sweeps all resolvable paths from `entry`.
    pub fn run(&self, entry: usize) -> ExecOutcome {
        let mut out = ExecOutcome { entry, ..Default::default() };
        if entry >= self.code.len() {
            return out;
        }
        let mut visits: BTreeMap<usize, u32> = BTreeMap::new();
        let mut worklist = vec![Frame::at(entry)];

        while let Some(frame) = worklist.pop() {
            let slot = visits.entry(frame.pc).or_insert(0);
            if *slot >= self.config.max_revisits {
                continue;
            }
            *slot += 1;
            out.blocks_executed += 1;
            if out.blocks_executed > self.config.max_blocks {
                out.budget_exhausted = true;
                out.diagnostics.push(Diagnostic::new(
                    DiagnosticKind::AnalysisBudgetExceeded,
                    format!("stopped after {} blocks", self.config.max_blocks),
                ));
                break;
            }
            self.run_block(frame, &mut worklist, &mut out);
        }
        out
    }

    /// Executes straight-line code until a control transfer or path end,
    /// queueing successor frames.
    fn run_block(&self, mut frame: Frame, worklist: &mut Vec<Frame>, out: &mut ExecOutcome) {
        loop {
            if frame.pc >= self.code.len() {
                return; // ran off the end: implicit STOP
            }
            let pc = frame.pc;
            let opcode = self.code[pc];
            out.visited_offsets.insert(pc);
            let imm_len = op::immediate_len(opcode);
            frame.pc = pc + 1 + imm_len;

            match opcode {
                op::JUMP => {
                    let dest = pop(&mut frame.stack);
                    match self.resolve_jumpdest(&dest) {
                        Some(d) => {
                            frame.pc = d;
                            worklist.push(frame);
                        }
                        None => {
                            out.diagnostics.push(Diagnostic::new(
                                DiagnosticKind::UnresolvedJump,
                                format!("JUMP at {pc} to {dest}"),
                            ));
                        }
                    }
                    return;
                }
                op::JUMPI => {
                    let dest = pop(&mut frame.stack);
                    let cond = pop(&mut frame.stack);
                    let resolved = self.resolve_jumpdest(&dest);
                    out.jumpi_sites.insert(JumpiObservation {
                        site: pc,
                        cond: cond.clone(),
                        dest: resolved,
                    });
                    match cond.as_constant() {
                        Some(c) if c.is_zero() => worklist.push(frame),
                        Some(_) => match resolved {
                            Some(d) => {
                                frame.pc = d;
                                worklist.push(frame);
                            }
                            None => out.diagnostics.push(Diagnostic::new(
                                DiagnosticKind::UnresolvedJump,
                                format!("JUMPI at {pc} to {dest}"),
                            )),
                        },
                        None => {
                            // fall through queued first, target explored first
                            worklist.push(frame.clone());
                            if let Some(d) = resolved {
                                frame.pc = d;
                                worklist.push(frame);
                            }
                        }
                    }
                    return;
                }
                _ if op::is_terminal(opcode) => {
                    if opcode == op::SELFDESTRUCT {
                        pop(&mut frame.stack);
                    } else if opcode == op::RETURN || opcode == op::REVERT {
                        pop(&mut frame.stack);
                        pop(&mut frame.stack);
                    }
                    return;
                }
                _ => self.step(opcode, pc, &mut frame, out),
            }
        }
    }

    fn resolve_jumpdest(&self, dest: &SymbolicValue) -> Option<usize> {
        let d = dest.as_constant()?.as_u64()? as usize;
        self.jumpdests.contains(&d).then_some(d)
    }

    /// One non-control-flow instruction.
    fn step(&self, opcode: u8, pc: usize, frame: &mut Frame, out: &mut ExecOutcome) {
        use SymbolicValue as V;
        let stack = &mut frame.stack;

        match opcode {
            op::PUSH0 => stack.push(V::constant(Word::ZERO)),
            _ if (op::PUSH1..=op::PUSH32).contains(&opcode) => {
                let n = op::immediate_len(opcode);
                let mut imm = vec![0u8; n];
                let avail = (self.code.len().saturating_sub(pc + 1)).min(n);
                imm[..avail].copy_from_slice(&self.code[pc + 1..pc + 1 + avail]);
                stack.push(V::constant(Word::from_be_slice(&imm)));
            }
            _ if (op::DUP1..=op::DUP16).contains(&opcode) => {
                let n = (opcode - op::DUP1 + 1) as usize;
                let v = if stack.len() >= n { stack[stack.len() - n].clone() } else { V::Unknown };
                stack.push(v);
            }
            _ if (op::SWAP1..=op::SWAP16).contains(&opcode) => {
                let n = (opcode - op::SWAP1 + 1) as usize;
                let len = stack.len();
                if len > n {
                    stack.swap(len - 1, len - 1 - n);
                } else {
                    // degraded swap against an exhausted stack
                    while stack.len() <= n {
                        stack.insert(0, V::Unknown);
                    }
                    let len = stack.len();
                    stack.swap(len - 1, len - 1 - n);
                }
            }
            op::POP => {
                pop(stack);
            }

            // binary ops, folded when both operands are constant
            op::ADD | op::SUB | op::MUL | op::DIV | op::AND | op::OR | op::XOR | op::SHL
            | op::SHR | op::EXP | op::LT | op::GT | op::EQ | op::MOD | op::SGT | op::SLT
            | op::SAR | op::BYTE | op::SIGNEXTEND | op::SMOD => {
                let a = pop(stack);
                let b = pop(stack);
                if opcode == op::EQ {
                    out.eq_sites.insert(EqObservation { site: pc, lhs: a.clone(), rhs: b.clone() });
                }
                stack.push(fold_binary(opcode, a, b));
            }
            op::ADDMOD | op::MULMOD => {
                let a = pop(stack);
                let b = pop(stack);
                let n = pop(stack);
                stack.push(V::Computed { op: mn(opcode), operands: vec![a, b, n] });
            }
            op::ISZERO | op::NOT => {
                let a = pop(stack);
                let v = match (opcode, a.as_constant()) {
                    (op::ISZERO, Some(c)) => {
                        V::folded(if c.is_zero() { Word::from_u64(1) } else { Word::ZERO })
                    }
                    (op::NOT, Some(c)) => V::folded(c.bitnot()),
                    _ => V::Computed { op: mn(opcode), operands: vec![a] },
                };
                stack.push(v);
            }

            // environment atoms
            op::CALLER => stack.push(V::Env(EnvValue::Caller)),
            op::ORIGIN => stack.push(V::Env(EnvValue::Origin)),
            op::ADDRESS => stack.push(V::Env(EnvValue::Address)),
            op::SELFBALANCE => stack.push(V::Env(EnvValue::SelfBalance)),
            op::CALLVALUE => stack.push(V::Env(EnvValue::CallValue)),
            op::CALLDATALOAD => {
                pop(stack);
                stack.push(V::CalldataLoad);
            }

            // zero-operand opaque environment reads
            op::CALLDATASIZE | op::CODESIZE | op::GASPRICE | op::RETURNDATASIZE | op::COINBASE
            | op::TIMESTAMP | op::NUMBER | op::PREVRANDAO | op::GASLIMIT | op::CHAINID
            | op::BASEFEE | op::MSIZE | op::GAS | 0x49 | 0x4a => {
                stack.push(V::Computed { op: mn(opcode), operands: vec![] });
            }
            op::PC => stack.push(V::constant(Word::from_u64(pc as u64))),

            op::BALANCE | op::EXTCODESIZE | op::EXTCODEHASH | op::BLOCKHASH => {
                let a = pop(stack);
                stack.push(V::Computed { op: mn(opcode), operands: vec![a] });
            }

            // storage
            op::SLOAD => {
                let slot = pop(stack);
                out.storage_accesses.insert(StorageAccess {
                    site: pc,
                    op: StorageOp::Load,
                    slot: slot.clone(),
                    value: None,
                });
                stack.push(V::StorageLoad(Box::new(slot)));
            }
            op::SSTORE => {
                let slot = pop(stack);
                let value = pop(stack);
                out.storage_accesses.insert(StorageAccess {
                    site: pc,
                    op: StorageOp::Store,
                    slot,
                    value: Some(value),
                });
            }
            op::TLOAD => {
                let slot = pop(stack);
                stack.push(V::Computed { op: mn(opcode), operands: vec![slot] });
            }
            op::TSTORE => {
                pop(stack);
                pop(stack);
            }

            // memory
            op::MLOAD => {
                let offset = pop(stack);
                let v = offset
                    .as_constant()
                    .and_then(|o| o.as_u64())
                    .and_then(|o| frame.memory.read_word(o))
                    .unwrap_or(V::Computed { op: mn(opcode), operands: vec![offset] });
                stack.push(v);
            }
            op::MSTORE => {
                let offset = pop(stack);
                let value = pop(stack);
                if let Some(o) = offset.as_constant().and_then(|o| o.as_u64()) {
                    frame.memory.store(o, MemData::Word(value));
                }
            }
            op::MSTORE8 => {
                let offset = pop(stack);
                let value = pop(stack);
                if let Some(o) = offset.as_constant().and_then(|o| o.as_u64()) {
                    frame.memory.store(o, MemData::Byte(value));
                }
            }
            op::CALLDATACOPY => {
                let dest = pop(stack);
                pop(stack);
                let len = pop(stack);
                if let (Some(d), Some(l)) = (const_u64(&dest), const_u64(&len)) {
                    frame.memory.store(d, MemData::Opaque { len: l, value: V::CalldataLoad });
                }
            }
            op::CODECOPY => {
                let dest = pop(stack);
                let src = pop(stack);
                let len = pop(stack);
                if let (Some(d), Some(s), Some(l)) =
                    (const_u64(&dest), const_u64(&src), const_u64(&len))
                {
                    // out-of-range code bytes read as zero
                    let mut bytes = vec![0u8; l as usize];
                    for (i, b) in bytes.iter_mut().enumerate() {
                        if let Some(&c) = self.code.get(s as usize + i) {
                            *b = c;
                        }
                    }
                    frame.memory.store(d, MemData::Bytes(bytes));
                }
            }
            op::RETURNDATACOPY => {
                let dest = pop(stack);
                pop(stack);
                let len = pop(stack);
                if let (Some(d), Some(l)) = (const_u64(&dest), const_u64(&len)) {
                    frame
                        .memory
                        .store(d, MemData::Opaque { len: l, value: frame.last_return.clone() });
                }
            }
            op::MCOPY => {
                let dest = pop(stack);
                let src = pop(stack);
                let len = pop(stack);
                if let (Some(d), Some(s), Some(l)) =
                    (const_u64(&dest), const_u64(&src), const_u64(&len))
                {
                    if let Some(bytes) = frame.memory.read_concrete(s, l) {
                        frame.memory.store(d, MemData::Bytes(bytes));
                    } else {
                        let roots = frame.memory.region_roots(s, l);
                        let value = roots.into_iter().next().unwrap_or(V::Unknown);
                        frame.memory.store(d, MemData::Opaque { len: l, value });
                    }
                }
            }
            op::EXTCODECOPY => {
                let _addr = pop(stack);
                let dest = pop(stack);
                pop(stack);
                let len = pop(stack);
                if let (Some(d), Some(l)) = (const_u64(&dest), const_u64(&len)) {
                    frame.memory.store(d, MemData::Opaque { len: l, value: V::Unknown });
                }
            }

            op::SHA3 => {
                let offset = pop(stack);
                let len = pop(stack);
                stack.push(self.sha3_value(&frame.memory, &offset, &len));
            }

            _ if (op::LOG0..=op::LOG4).contains(&opcode) => {
                let topics = (opcode - op::LOG0) as usize;
                for _ in 0..2 + topics {
                    pop(stack);
                }
            }

            op::CREATE | op::CREATE2 => {
                let value = pop(stack);
                pop(stack);
                pop(stack);
                if opcode == op::CREATE2 {
                    pop(stack);
                }
                stack.push(V::Computed { op: mn(opcode), operands: vec![value] });
            }

            op::CALL | op::CALLCODE | op::DELEGATECALL | op::STATICCALL => {
                self.do_call(opcode, pc, frame, out);
            }

            op::JUMPDEST => {}

            _ => {
                // any decoded-but-unmodeled opcode: treat as opaque unary
                stack.push(V::Unknown);
            }
        }
    }

    /// SHA3 folding: constant region -> folded constant; otherwise a
    /// Computed("SHA3") carrying up to two content roots.
    fn sha3_value(
        &self,
        memory: &SymMemory,
        offset: &SymbolicValue,
        len: &SymbolicValue,
    ) -> SymbolicValue {
        const MAX_HASH_REGION: u64 = 1 << 16;
        if let (Some(o), Some(l)) = (const_u64(offset), const_u64(len)) {
            if l <= MAX_HASH_REGION {
                if let Some(bytes) = memory.read_concrete(o, l) {
                    return SymbolicValue::folded(Word::from_be_bytes(&keccak256(&bytes)));
                }
            }
            let roots = memory.region_roots(o, l.min(MAX_HASH_REGION));
            return SymbolicValue::Computed { op: "SHA3", operands: roots };
        }
        let mut roots = Vec::new();
        collect_roots(offset, &mut roots);
        collect_roots(len, &mut roots);
        SymbolicValue::Computed { op: "SHA3", operands: dedup_roots(roots) }
    }

    fn do_call(&self, opcode: u8, pc: usize, frame: &mut Frame, out: &mut ExecOutcome) {
        let stack = &mut frame.stack;
        let _gas = pop(stack);
        let target = pop(stack);
        let value = if opcode == op::CALL || opcode == op::CALLCODE {
            Some(pop(stack))
        } else {
            None
        };
        let in_off = pop(stack);
        let _in_len = pop(stack);
        let out_off = pop(stack);
        let out_len = pop(stack);

        let mut input_selector = None;
        let mut args = Vec::new();
        if let Some(o) = const_u64(&in_off) {
            if let Some(head) = frame.memory.read_concrete(o, 4) {
                input_selector = Some(Selector([head[0], head[1], head[2], head[3]]));
            }
            for i in 0..4u64 {
                match frame.memory.read_word(o + 4 + 32 * i) {
                    Some(w) => args.push(w),
                    None => break,
                }
            }
        }

        if opcode == op::DELEGATECALL {
            let targets = out.delegatecall_targets.entry(pc).or_default();
            if !targets.contains(&target) {
                targets.push(target.clone());
            }
        }
        out.call_sites.insert(CallSiteInfo {
            site: pc,
            opcode,
            target: target.clone(),
            value,
            input_selector,
            args,
        });

        // Result marker: ret value and output region both trace back to the
        // call, keyed by the input selector so amount-source analysis can
        // recognize balanceOf/allowance reads.
        let sel_word = input_selector
            .map(|s| SymbolicValue::constant(Word::from_be_slice(&s.0)))
            .unwrap_or(SymbolicValue::Unknown);
        let marker = SymbolicValue::Computed { op: mn(opcode), operands: vec![sel_word, target] };
        if let (Some(o), Some(l)) = (const_u64(&out_off), const_u64(&out_len)) {
            if l > 0 {
                frame.memory.store(o, MemData::Opaque { len: l, value: marker.clone() });
            }
        }
        frame.last_return = marker.clone();
        frame.stack.push(marker);
    }
}

fn pop(stack: &mut Vec<SymbolicValue>) -> SymbolicValue {
    stack.pop().unwrap_or(SymbolicValue::Unknown)
}

fn const_u64(v: &SymbolicValue) -> Option<u64> {
    v.as_constant().and_then(|w| w.as_u64())
}

fn mn(opcode: u8) -> &'static str {
    match opcode {
        op::ADD => "ADD",
        op::SUB => "SUB",
        op::MUL => "MUL",
        op::DIV => "DIV",
        op::MOD => "MOD",
        op::SMOD => "SMOD",
        op::AND => "AND",
        op::OR => "OR",
        op::XOR => "XOR",
        op::NOT => "NOT",
        op::SHL => "SHL",
        op::SHR => "SHR",
        op::SAR => "SAR",
        op::EXP => "EXP",
        op::LT => "LT",
        op::GT => "GT",
        op::SLT => "SLT",
        op::SGT => "SGT",
        op::EQ => "EQ",
        op::ISZERO => "ISZERO",
        op::BYTE => "BYTE",
        op::SIGNEXTEND => "SIGNEXTEND",
        op::ADDMOD => "ADDMOD",
        op::MULMOD => "MULMOD",
        op::SHA3 => "SHA3",
        op::MLOAD => "MLOAD",
        op::TLOAD => "TLOAD",
        op::CALLDATASIZE => "CALLDATASIZE",
        op::CODESIZE => "CODESIZE",
        op::GASPRICE => "GASPRICE",
        op::RETURNDATASIZE => "RETURNDATASIZE",
        op::COINBASE => "COINBASE",
        op::TIMESTAMP => "TIMESTAMP",
        op::NUMBER => "NUMBER",
        op::PREVRANDAO => "PREVRANDAO",
        op::GASLIMIT => "GASLIMIT",
        op::CHAINID => "CHAINID",
        op::BASEFEE => "BASEFEE",
        op::MSIZE => "MSIZE",
        op::GAS => "GAS",
        0x49 => "BLOBHASH",
        0x4a => "BLOBBASEFEE",
        op::BALANCE => "BALANCE",
        op::EXTCODESIZE => "EXTCODESIZE",
        op::EXTCODEHASH => "EXTCODEHASH",
        op::BLOCKHASH => "BLOCKHASH",
        op::CREATE => "CREATE",
        op::CREATE2 => "CREATE2",
        op::CALL => "CALL",
        op::CALLCODE => "CALLCODE",
        op::DELEGATECALL => "DELEGATECALL",
        op::STATICCALL => "STATICCALL",
        _ => "OP",
    }
}

/// Constant folding for binary ops; everything else degrades to Computed.
/// Operand order is pop order: `a` is the top of stack.
fn fold_binary(opcode: u8, a: SymbolicValue, b: SymbolicValue) -> SymbolicValue {
    if let (Some(x), Some(y)) = (a.as_constant(), b.as_constant()) {
        let folded = match opcode {
            op::ADD => Some(x.wrapping_add(y)),
            op::SUB => Some(x.wrapping_sub(y)),
            op::MUL => Some(x.wrapping_mul(y)),
            op::DIV => Some(x.wrapping_div(y)),
            op::AND => Some(x.bitand(y)),
            op::OR => Some(x.bitor(y)),
            op::XOR => Some(x.bitxor(y)),
            // shift amount is the first operand popped
            op::SHL => Some(y.shl(x)),
            op::SHR => Some(y.shr(x)),
            op::EXP => Some(x.wrapping_pow(y)),
            op::LT => Some(Word::from_u64((x.0 < y.0) as u64)),
            op::GT => Some(Word::from_u64((x.0 > y.0) as u64)),
            op::EQ => Some(Word::from_u64((x == y) as u64)),
            _ => None,
        };
        if let Some(w) = folded {
            return SymbolicValue::folded(w);
        }
    }
    SymbolicValue::Computed { op: mn(opcode), operands: vec![a, b] }
}

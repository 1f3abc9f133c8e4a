//! Minimal EVM assembler: enough to hand-build runtime bytecode with
//! labeled jumps. Labels assemble as PUSH2 immediates patched at build
//! time.

use std::collections::HashMap;

use crate::opcode;
use crate::primitives::Word;

#[derive(Default)]
pub struct Asm {
    bytes: Vec<u8>,
    labels: HashMap<String, usize>,
    patches: Vec<(usize, String)>,
}

impl Asm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn op(mut self, opcode: u8) -> Self {
        self.bytes.push(opcode);
        self
    }

    /// PUSHn with exactly `data.len()` immediate bytes (1..=32).
    pub fn push_bytes(mut self, data: &[u8]) -> Self {
        assert!(!data.is_empty() && data.len() <= 32, "push width 1..=32");
        self.bytes.push(opcode::PUSH0 + data.len() as u8);
        self.bytes.extend_from_slice(data);
        self
    }

    /// Minimal-width PUSH of a word value (PUSH1 0x00 for zero).
    pub fn push(self, value: impl Into<Word>) -> Self {
        let bytes = value.into().to_be_bytes();
        let first = bytes.iter().position(|&b| b != 0).unwrap_or(31);
        self.push_bytes(&bytes[first..])
    }

    /// Full-width PUSH32.
    pub fn push32(self, value: Word) -> Self {
        self.push_bytes(&value.to_be_bytes())
    }

    pub fn push0(mut self) -> Self {
        self.bytes.push(opcode::PUSH0);
        self
    }

    /// Emits a JUMPDEST and binds `name` to its offset.
    pub fn label(mut self, name: &str) -> Self {
        self.labels.insert(name.to_string(), self.bytes.len());
        self.bytes.push(opcode::JUMPDEST);
        self
    }

    /// PUSH2 of a label's offset, patched in `build`.
    pub fn push_label(mut self, name: &str) -> Self {
        self.bytes.push(opcode::PUSH1 + 1);
        self.patches.push((self.bytes.len(), name.to_string()));
        self.bytes.extend_from_slice(&[0, 0]);
        self
    }

    pub fn raw(mut self, data: &[u8]) -> Self {
        self.bytes.extend_from_slice(data);
        self
    }

    pub fn build(mut self) -> Vec<u8> {
        for (at, name) in &self.patches {
            let target = *self.labels.get(name).unwrap_or_else(|| panic!("undefined label {name}"));
            assert!(target <= u16::MAX as usize, "label {name} out of PUSH2 range");
            self.bytes[*at..*at + 2].copy_from_slice(&(target as u16).to_be_bytes());
        }
        self.bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_patch_forward_and_backward() {
        let code = Asm::new()
            .push_label("end") // 0: PUSH2 end
            .op(opcode::JUMP) // 3
            .label("end") // 4: JUMPDEST
            .op(opcode::STOP) // 5
            .build();
        assert_eq!(code, vec![0x61, 0x00, 0x04, 0x56, 0x5b, 0x00]);
    }

    #[test]
    fn push_uses_minimal_width() {
        assert_eq!(Asm::new().push(0x01u64).build(), vec![0x60, 0x01]);
        assert_eq!(Asm::new().push(0u64).build(), vec![0x60, 0x00]);
        assert_eq!(Asm::new().push(0x1234u64).build(), vec![0x61, 0x12, 0x34]);
    }
}

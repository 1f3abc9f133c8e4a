//! Linear-sweep disassembler. Total: every byte of input is covered by
//! exactly one instruction, unknown opcodes come out as INVALID-class
//! instructions, and a PUSH whose immediate runs off the end of the code is
//! zero-padded to its declared width.

use crate::opcode;

use super::Instruction;

pub fn disassemble(code: &[u8]) -> Vec<Instruction> {
    let mut out = Vec::new();
    let mut pc = 0usize;
    while pc < code.len() {
        let op = code[pc];
        let imm_len = opcode::immediate_len(op);
        let immediate = if imm_len > 0 {
            let mut imm = vec![0u8; imm_len];
            let avail = (code.len() - pc - 1).min(imm_len);
            imm[..avail].copy_from_slice(&code[pc + 1..pc + 1 + avail]);
            Some(imm)
        } else {
            None
        };
        out.push(Instruction { offset: pc, opcode: op, immediate });
        pc += 1 + imm_len;
    }
    out
}

//! EVM opcode table: byte values, mnemonics, immediate widths, stack arity.

pub const STOP: u8 = 0x00;
pub const ADD: u8 = 0x01;
pub const MUL: u8 = 0x02;
pub const SUB: u8 = 0x03;
pub const DIV: u8 = 0x04;
pub const SDIV: u8 = 0x05;
pub const MOD: u8 = 0x06;
pub const SMOD: u8 = 0x07;
pub const ADDMOD: u8 = 0x08;
pub const MULMOD: u8 = 0x09;
pub const EXP: u8 = 0x0a;
pub const SIGNEXTEND: u8 = 0x0b;
pub const LT: u8 = 0x10;
pub const GT: u8 = 0x11;
pub const SLT: u8 = 0x12;
pub const SGT: u8 = 0x13;
pub const EQ: u8 = 0x14;
pub const ISZERO: u8 = 0x15;
pub const AND: u8 = 0x16;
pub const OR: u8 = 0x17;
pub const XOR: u8 = 0x18;
pub const NOT: u8 = 0x19;
pub const BYTE: u8 = 0x1a;
pub const SHL: u8 = 0x1b;
pub const SHR: u8 = 0x1c;
pub const SAR: u8 = 0x1d;
pub const SHA3: u8 = 0x20;
pub const ADDRESS: u8 = 0x30;
pub const BALANCE: u8 = 0x31;
pub const ORIGIN: u8 = 0x32;
pub const CALLER: u8 = 0x33;
pub const CALLVALUE: u8 = 0x34;
pub const CALLDATALOAD: u8 = 0x35;
pub const CALLDATASIZE: u8 = 0x36;
pub const CALLDATACOPY: u8 = 0x37;
pub const CODESIZE: u8 = 0x38;
pub const CODECOPY: u8 = 0x39;
pub const GASPRICE: u8 = 0x3a;
pub const EXTCODESIZE: u8 = 0x3b;
pub const EXTCODECOPY: u8 = 0x3c;
pub const RETURNDATASIZE: u8 = 0x3d;
pub const RETURNDATACOPY: u8 = 0x3e;
pub const EXTCODEHASH: u8 = 0x3f;
pub const BLOCKHASH: u8 = 0x40;
pub const COINBASE: u8 = 0x41;
pub const TIMESTAMP: u8 = 0x42;
pub const NUMBER: u8 = 0x43;
pub const PREVRANDAO: u8 = 0x44;
pub const GASLIMIT: u8 = 0x45;
pub const CHAINID: u8 = 0x46;
pub const SELFBALANCE: u8 = 0x47;
pub const BASEFEE: u8 = 0x48;
pub const POP: u8 = 0x50;
pub const MLOAD: u8 = 0x51;
pub const MSTORE: u8 = 0x52;
pub const MSTORE8: u8 = 0x53;
pub const SLOAD: u8 = 0x54;
pub const SSTORE: u8 = 0x55;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const PC: u8 = 0x58;
pub const MSIZE: u8 = 0x59;
pub const GAS: u8 = 0x5a;
pub const JUMPDEST: u8 = 0x5b;
pub const TLOAD: u8 = 0x5c;
pub const TSTORE: u8 = 0x5d;
pub const MCOPY: u8 = 0x5e;
pub const PUSH0: u8 = 0x5f;
pub const PUSH1: u8 = 0x60;
pub const PUSH4: u8 = 0x63;
pub const PUSH20: u8 = 0x73;
pub const PUSH32: u8 = 0x7f;
pub const DUP1: u8 = 0x80;
pub const DUP16: u8 = 0x8f;
pub const SWAP1: u8 = 0x90;
pub const SWAP16: u8 = 0x9f;
pub const LOG0: u8 = 0xa0;
pub const LOG4: u8 = 0xa4;
pub const CREATE: u8 = 0xf0;
pub const CALL: u8 = 0xf1;
pub const CALLCODE: u8 = 0xf2;
pub const RETURN: u8 = 0xf3;
pub const DELEGATECALL: u8 = 0xf4;
pub const CREATE2: u8 = 0xf5;
pub const STATICCALL: u8 = 0xfa;
pub const REVERT: u8 = 0xfd;
pub const INVALID: u8 = 0xfe;
pub const SELFDESTRUCT: u8 = 0xff;

/// Immediate width in bytes (nonzero only for PUSH1..PUSH32).
pub fn immediate_len(opcode: u8) -> usize {
    if (PUSH1..=PUSH32).contains(&opcode) {
        (opcode - PUSH0) as usize
    } else {
        0
    }
}

/// True for known opcodes of the mainnet instruction set.
pub fn is_known(opcode: u8) -> bool {
    matches!(opcode,
        STOP..=SIGNEXTEND
        | LT..=SAR
        | SHA3
        | ADDRESS..=BASEFEE
        | 0x49 | 0x4a             // BLOBHASH, BLOBBASEFEE
        | POP..=PUSH32            // includes TLOAD/TSTORE/MCOPY/PUSH0
        | DUP1..=SWAP16
        | LOG0..=LOG4
        | CREATE..=CREATE2
        | STATICCALL
        | REVERT | INVALID | SELFDESTRUCT)
}

/// Opcodes that end a control-flow path.
pub fn is_terminal(opcode: u8) -> bool {
    matches!(opcode, STOP | RETURN | REVERT | INVALID | SELFDESTRUCT) || !is_known(opcode)
}

pub fn mnemonic(opcode: u8) -> String {
    match opcode {
        STOP => "STOP".into(),
        ADD => "ADD".into(),
        MUL => "MUL".into(),
        SUB => "SUB".into(),
        DIV => "DIV".into(),
        SDIV => "SDIV".into(),
        MOD => "MOD".into(),
        SMOD => "SMOD".into(),
        ADDMOD => "ADDMOD".into(),
        MULMOD => "MULMOD".into(),
        EXP => "EXP".into(),
        SIGNEXTEND => "SIGNEXTEND".into(),
        LT => "LT".into(),
        GT => "GT".into(),
        SLT => "SLT".into(),
        SGT => "SGT".into(),
        EQ => "EQ".into(),
        ISZERO => "ISZERO".into(),
        AND => "AND".into(),
        OR => "OR".into(),
        XOR => "XOR".into(),
        NOT => "NOT".into(),
        BYTE => "BYTE".into(),
        SHL => "SHL".into(),
        SHR => "SHR".into(),
        SAR => "SAR".into(),
        SHA3 => "SHA3".into(),
        ADDRESS => "ADDRESS".into(),
        BALANCE => "BALANCE".into(),
        ORIGIN => "ORIGIN".into(),
        CALLER => "CALLER".into(),
        CALLVALUE => "CALLVALUE".into(),
        CALLDATALOAD => "CALLDATALOAD".into(),
        CALLDATASIZE => "CALLDATASIZE".into(),
        CALLDATACOPY => "CALLDATACOPY".into(),
        CODESIZE => "CODESIZE".into(),
        CODECOPY => "CODECOPY".into(),
        GASPRICE => "GASPRICE".into(),
        EXTCODESIZE => "EXTCODESIZE".into(),
        EXTCODECOPY => "EXTCODECOPY".into(),
        RETURNDATASIZE => "RETURNDATASIZE".into(),
        RETURNDATACOPY => "RETURNDATACOPY".into(),
        EXTCODEHASH => "EXTCODEHASH".into(),
        BLOCKHASH => "BLOCKHASH".into(),
        COINBASE => "COINBASE".into(),
        TIMESTAMP => "TIMESTAMP".into(),
        NUMBER => "NUMBER".into(),
        PREVRANDAO => "PREVRANDAO".into(),
        GASLIMIT => "GASLIMIT".into(),
        CHAINID => "CHAINID".into(),
        SELFBALANCE => "SELFBALANCE".into(),
        BASEFEE => "BASEFEE".into(),
        0x49 => "BLOBHASH".into(),
        0x4a => "BLOBBASEFEE".into(),
        POP => "POP".into(),
        MLOAD => "MLOAD".into(),
        MSTORE => "MSTORE".into(),
        MSTORE8 => "MSTORE8".into(),
        SLOAD => "SLOAD".into(),
        SSTORE => "SSTORE".into(),
        JUMP => "JUMP".into(),
        JUMPI => "JUMPI".into(),
        PC => "PC".into(),
        MSIZE => "MSIZE".into(),
        GAS => "GAS".into(),
        JUMPDEST => "JUMPDEST".into(),
        TLOAD => "TLOAD".into(),
        TSTORE => "TSTORE".into(),
        MCOPY => "MCOPY".into(),
        PUSH0 => "PUSH0".into(),
        n @ PUSH1..=PUSH32 => format!("PUSH{}", n - PUSH0),
        n @ DUP1..=DUP16 => format!("DUP{}", n - DUP1 + 1),
        n @ SWAP1..=SWAP16 => format!("SWAP{}", n - SWAP1 + 1),
        n @ LOG0..=LOG4 => format!("LOG{}", n - LOG0),
        CREATE => "CREATE".into(),
        CALL => "CALL".into(),
        CALLCODE => "CALLCODE".into(),
        RETURN => "RETURN".into(),
        DELEGATECALL => "DELEGATECALL".into(),
        CREATE2 => "CREATE2".into(),
        STATICCALL => "STATICCALL".into(),
        REVERT => "REVERT".into(),
        INVALID => "INVALID".into(),
        SELFDESTRUCT => "SELFDESTRUCT".into(),
        n => format!("UNKNOWN_0x{n:02x}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_immediate_widths() {
        assert_eq!(immediate_len(PUSH0), 0);
        assert_eq!(immediate_len(PUSH1), 1);
        assert_eq!(immediate_len(PUSH32), 32);
        assert_eq!(immediate_len(ADD), 0);
    }

    #[test]
    fn unknown_bytes_are_terminal() {
        assert!(is_terminal(0x0c));
        assert!(is_terminal(0xef));
        assert!(is_terminal(INVALID));
        assert!(!is_terminal(ADD));
        assert!(!is_terminal(DELEGATECALL));
    }

    #[test]
    fn mnemonics_for_ranges() {
        assert_eq!(mnemonic(PUSH4), "PUSH4");
        assert_eq!(mnemonic(DUP1), "DUP1");
        assert_eq!(mnemonic(0x9f), "SWAP16");
        assert_eq!(mnemonic(0x0c), "UNKNOWN_0x0c");
    }
}

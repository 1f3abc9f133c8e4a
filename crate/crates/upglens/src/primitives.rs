//! Core value types shared by every analysis stage: 20-byte account
//! addresses, 256-bit storage words, transaction hashes, 4-byte function
//! selectors and the keccak-256 helper they all hang off.
//!
//! Interchange rules are fixed here once: addresses are lowercase
//! 0x-prefixed 40-digit hex, words and hashes are full-width 64-digit hex,
//! and parsers accept shorter hex by left-padding with zeros (EVM word
//! convention).

use std::fmt;
use std::str::FromStr;

use primitive_types::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};

/// keccak-256 of `data`.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    out.copy_from_slice(&Keccak256::digest(data));
    out
}

// U256 limbs are little-endian u64s.

/// EIP-1967 implementation slot: keccak256("eip1967.proxy.implementation") - 1.
pub const EIP1967_IMPL_SLOT: Word = Word(U256([
    0x20a3ca505d382bbc,
    0xca3e2076cc3735a9,
    0x0667c828492db98d,
    0x360894a13ba1a321,
]));

/// EIP-1967 admin slot: keccak256("eip1967.proxy.admin") - 1.
pub const EIP1967_ADMIN_SLOT: Word = Word(U256([
    0xd6a717850b5d6103,
    0x243e63b6e8ee1178,
    0x73ae13b9f8a6016e,
    0xb53127684a568b31,
]));

/// EIP-1822 (UUPS) logic slot: keccak256("PROXIABLE").
pub const EIP1822_PROXIABLE_SLOT: Word = Word(U256([
    0x87d5876cf622bcf7,
    0x04798523bf8c9a3a,
    0x8a6947836d9850f5,
    0xc5f16f0fcc639fa4,
]));

fn strip_0x(s: &str) -> &str {
    s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s)
}

/// Error for any malformed hex value in interchange data.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid hex {kind}: {reason}")]
pub struct HexError {
    pub kind: &'static str,
    pub reason: String,
}

impl HexError {
    fn new(kind: &'static str, reason: impl Into<String>) -> Self {
        Self { kind, reason: reason.into() }
    }
}

fn decode_fixed<const N: usize>(kind: &'static str, s: &str) -> Result<[u8; N], HexError> {
    let h = strip_0x(s.trim());
    if h.len() != N * 2 {
        return Err(HexError::new(kind, format!("expected {} hex digits, got {}", N * 2, h.len())));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(h, &mut out).map_err(|e| HexError::new(kind, e.to_string()))?;
    Ok(out)
}

/// 20-byte account address, normalized to lowercase hex everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 20]
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl FromStr for Address {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_fixed::<20>("address", s).map(Address)
    }
}

/// 32-byte transaction hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TxHash(pub [u8; 32]);

impl TxHash {
    pub const ZERO: TxHash = TxHash([0u8; 32]);
}

impl fmt::Display for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl FromStr for TxHash {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_fixed::<32>("tx hash", s).map(TxHash)
    }
}

/// 4-byte function selector: first 4 bytes of keccak256 of the canonical
/// signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Selector(pub [u8; 4]);

impl Selector {
    pub fn of_signature(canonical: &str) -> Selector {
        let h = keccak256(canonical.as_bytes());
        Selector([h[0], h[1], h[2], h[3]])
    }

    pub fn as_u32(&self) -> u32 {
        u32::from_be_bytes(self.0)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl FromStr for Selector {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_fixed::<4>("selector", s).map(Selector)
    }
}

/// 256-bit EVM word: storage slot index, storage value, stack value.
///
/// Arithmetic wraps mod 2^256 like the EVM's. Method names follow the
/// opcode mnemonics rather than the std operator traits: the semantics
/// (wrapping, shift-by-256 yielding zero, division by zero yielding zero)
/// are the EVM's, not Rust's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub U256);

#[allow(clippy::should_implement_trait)]
impl Word {
    pub const ZERO: Word = Word(U256::zero());

    pub fn from_u64(v: u64) -> Word {
        Word(U256::from(v))
    }

    pub fn from_be_bytes(bytes: &[u8; 32]) -> Word {
        Word(U256::from_big_endian(bytes))
    }

    /// Builds a word from up to 32 big-endian bytes, left-padded with zeros.
    pub fn from_be_slice(bytes: &[u8]) -> Word {
        debug_assert!(bytes.len() <= 32);
        let mut buf = [0u8; 32];
        buf[32 - bytes.len()..].copy_from_slice(bytes);
        Word(U256::from_big_endian(&buf))
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.0.to_big_endian()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Low 64 bits, when the word fits.
    pub fn as_u64(&self) -> Option<u64> {
        if self.0 > U256::from(u64::MAX) {
            None
        } else {
            Some(self.0.low_u64())
        }
    }

    /// The 20-byte address packed at `byte_offset` counted from the low end
    /// of the word: `(word >> 8*byte_offset) & (2^160 - 1)`.
    pub fn address_at(&self, byte_offset: u8) -> Address {
        debug_assert!(byte_offset <= 12);
        let shifted = self.0 >> (8 * byte_offset as usize);
        let bytes = shifted.to_big_endian();
        let mut addr = [0u8; 20];
        addr.copy_from_slice(&bytes[12..]);
        Address(addr)
    }

    pub fn wrapping_add(self, rhs: Word) -> Word {
        Word(self.0.overflowing_add(rhs.0).0)
    }

    pub fn wrapping_sub(self, rhs: Word) -> Word {
        Word(self.0.overflowing_sub(rhs.0).0)
    }

    pub fn wrapping_mul(self, rhs: Word) -> Word {
        Word(self.0.overflowing_mul(rhs.0).0)
    }

    /// EVM EXP: wrapping exponentiation by squaring.
    pub fn wrapping_pow(self, exp: Word) -> Word {
        let mut result = Word(U256::one());
        let mut base = self;
        let mut e = exp.0;
        while !e.is_zero() {
            if e.bit(0) {
                result = result.wrapping_mul(base);
            }
            base = base.wrapping_mul(base);
            e >>= 1;
        }
        result
    }

    pub fn bitand(self, rhs: Word) -> Word {
        Word(self.0 & rhs.0)
    }

    pub fn bitor(self, rhs: Word) -> Word {
        Word(self.0 | rhs.0)
    }

    pub fn bitxor(self, rhs: Word) -> Word {
        Word(self.0 ^ rhs.0)
    }

    pub fn bitnot(self) -> Word {
        Word(!self.0)
    }

    /// EVM SHL: shifts of 256 or more produce zero.
    pub fn shl(self, bits: Word) -> Word {
        match bits.as_u64() {
            Some(b) if b < 256 => Word(self.0 << (b as usize)),
            _ => Word::ZERO,
        }
    }

    /// EVM SHR: shifts of 256 or more produce zero.
    pub fn shr(self, bits: Word) -> Word {
        match bits.as_u64() {
            Some(b) if b < 256 => Word(self.0 >> (b as usize)),
            _ => Word::ZERO,
        }
    }

    /// EVM DIV: division by zero yields zero.
    pub fn wrapping_div(self, rhs: Word) -> Word {
        if rhs.0.is_zero() {
            Word::ZERO
        } else {
            Word(self.0 / rhs.0)
        }
    }

    /// log2 when the value is an exact power of two.
    pub fn power_of_two_exponent(&self) -> Option<u32> {
        if self.0.is_zero() || !(self.0 & (self.0 - U256::one())).is_zero() {
            return None;
        }
        Some(255 - self.0.leading_zeros())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.to_be_bytes()))
    }
}

impl FromStr for Word {
    type Err = HexError;
    /// Accepts any 1..=64 digit hex string, left-padding short values.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let h = strip_0x(s.trim());
        if h.is_empty() || h.len() > 64 {
            return Err(HexError::new("word", format!("expected 1..=64 hex digits, got {}", h.len())));
        }
        let padded = if h.len() % 2 == 1 { format!("0{h}") } else { h.to_string() };
        let bytes = hex::decode(&padded).map_err(|e| HexError::new("word", e.to_string()))?;
        Ok(Word::from_be_slice(&bytes))
    }
}

impl From<u64> for Word {
    fn from(v: u64) -> Self {
        Word::from_u64(v)
    }
}

/// Variable-length byte string carried as 0x-hex in interchange records
/// (call input data, contract code).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct HexBytes(pub Vec<u8>);

impl fmt::Display for HexBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl FromStr for HexBytes {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let h = strip_0x(s.trim());
        hex::decode(h).map(HexBytes).map_err(|e| HexError::new("bytes", e.to_string()))
    }
}

/// Parses hex bytecode text: optional 0x prefix, whitespace anywhere.
pub fn parse_hex_code(text: &str) -> Result<Vec<u8>, HexError> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let h = strip_0x(&cleaned);
    hex::decode(h).map_err(|e| HexError::new("bytecode", e.to_string()))
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Address);
string_serde!(TxHash);
string_serde!(Selector);
string_serde!(Word);
string_serde!(HexBytes);

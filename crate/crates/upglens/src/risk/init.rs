//! Caller-contract initialization check: the admin slot should be set, and
//! set within the deployment transaction. The block gap between deployment
//! and the first admin assignment is the attack window.

use serde::{Deserialize, Serialize};

use crate::chains::{SlotStandard, SlotUsageClass};
use crate::ingest::{ContractMeta, StorageWrite};
use crate::primitives::{Address, EIP1967_ADMIN_SLOT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    NoAdmin,
    DelayedInit { gap_blocks: u64, gap_txs: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitFinding {
    pub contract: Address,
    #[serde(flatten)]
    pub kind: InitKind,
    pub deploy_block: u64,
    pub first_admin_block: Option<u64>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InitError {
    /// The check's scope is EIP-1967 callers; anything else is skipped.
    #[error("contract is not an EIP-1967 caller")]
    NotEip1967,
}

/// Checks one upgradeable EIP-1967 caller's admin-slot initialization.
///
/// `writes` is the contract's storage-write history (any slots; the check
/// filters). "Set" means the written word's low 20 bytes are nonzero —
/// zeroing the admin is not initialization. No finding when the first
/// admin assignment happens inside the deployment transaction.
pub fn check_admin_init(
    meta: &ContractMeta,
    slot_usage: SlotUsageClass,
    writes: &[StorageWrite],
) -> Result<Option<InitFinding>, InitError> {
    if slot_usage != (SlotUsageClass::ComplexKey { standard: SlotStandard::Eip1967 }) {
        return Err(InitError::NotEip1967);
    }

    let mut ordered: Vec<&StorageWrite> =
        writes.iter().filter(|w| w.contract == meta.address).collect();
    ordered.sort_by_key(|w| (w.block, w.order));

    let first_admin = ordered
        .iter()
        .find(|w| w.slot == EIP1967_ADMIN_SLOT && !w.new_value.address_at(0).is_zero());

    let Some(first) = first_admin else {
        return Ok(Some(InitFinding {
            contract: meta.address,
            kind: InitKind::NoAdmin,
            deploy_block: meta.deploy_block,
            first_admin_block: None,
        }));
    };

    if first.tx_hash == meta.deploy_tx {
        return Ok(None);
    }

    let gap_blocks = first.block.saturating_sub(meta.deploy_block);
    let mut between_txs: Vec<_> = ordered
        .iter()
        .take_while(|w| (w.block, w.order) < (first.block, first.order))
        .map(|w| w.tx_hash)
        .filter(|tx| *tx != meta.deploy_tx && *tx != first.tx_hash)
        .collect();
    between_txs.sort();
    between_txs.dedup();

    Ok(Some(InitFinding {
        contract: meta.address,
        kind: InitKind::DelayedInit { gap_blocks, gap_txs: between_txs.len() as u64 },
        deploy_block: meta.deploy_block,
        first_admin_block: Some(first.block),
    }))
}

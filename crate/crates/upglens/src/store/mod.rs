//! Content-addressed on-disk dataset and the pipeline stages over it.
//!
//! Layout under the dataset root:
//!
//! ```text
//! manifest.json        schema version, chain name, table counts, digests
//! traces.ndjson        CallFrame records, ingest order
//! writes.ndjson        StorageWrite records, (block, tx, order) sorted
//! contracts.ndjson     ContractMeta records, address sorted
//! code/<hash>.hex      bytecode, content-addressed by keccak code hash
//! code_index.ndjson    address -> code hash + availability block
//! abis/<chain>/<n>.json ABI documents per chain version
//! scan.ndjson          per-contract upgradeability records
//! events.ndjson        upgrade events
//! chains.ndjson        deduplicated upgrade chains
//! findings.ndjson      unified risk findings
//! LOCK                 single-writer guard
//! ```
//!
//! Derived tables (scan/events/chains/findings) are rewritten whole by
//! their stage, sorted, so identical inputs produce byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bytecode::{
    self, SiteClassification, SlotLocator,
};
use crate::chains::{
    build_chains, classify_slot_usage, detect_upgrade_issues, detect_upgrades, SlotStandard,
    SlotUsageClass, UpgradeChain, UpgradeEvent,
};
use crate::config::AnalysisConfig;
use crate::diag::{Diagnostic, DiagnosticKind};
use crate::ingest::{
    aggregate_delegatecalls, read_state_diff, read_trace_file, AbiEntry, CallFrame, ContractMeta,
    IngestError, StorageWrite,
};
use crate::primitives::{keccak256, parse_hex_code, Address, HexBytes, TxHash, Word};
use crate::risk::{
    check_admin_init, detect_selector_collision, diff_abis, scan_upgrade,
    selector_diff_from_bytecode, InitError, InjectionFinding, RiskFinding, RiskPayload,
    VersionContext,
};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is locked by another process ({0})")]
    Locked(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("corrupt dataset: {0}")]
    Corrupt(String),
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.display().to_string(), source }
}

/// Dataset-level description: schema gate for readers, table counts, and
/// the digests of already-ingested input files (the idempotency record).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub chain_name: String,
    pub block_range: Option<(u64, u64)>,
    pub counts: BTreeMap<String, u64>,
    pub chain_id_algorithm: String,
    pub ingested: BTreeSet<String>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            schema_version: 1,
            chain_name: "unspecified".into(),
            block_range: None,
            counts: BTreeMap::new(),
            chain_id_algorithm: "keccak256/callee-concat".into(),
            ingested: BTreeSet::new(),
        }
    }
}

/// Per-contract upgradeability record, the scan stage's output row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub address: Address,
    pub upgradeable: bool,
    pub locators: Vec<SlotLocator>,
    pub sites: Vec<SiteClassification>,
    pub slot_usage: Option<SlotUsageClass>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CodeIndexEntry {
    address: Address,
    code_hash: Word,
    /// Block from which the code is considered present (deploy block).
    from_block: u64,
}

/// Wire form for contracts.ndjson input: metadata with optional inline
/// code.
#[derive(Debug, Clone, Deserialize)]
struct ContractRecordIn {
    address: Address,
    #[serde(default)]
    deploy_block: u64,
    #[serde(default)]
    deploy_tx: Option<TxHash>,
    #[serde(default)]
    code: Option<HexBytes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskSelection {
    Init,
    Interface,
    Inject,
    All,
}

impl std::str::FromStr for RiskSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "init" => Ok(Self::Init),
            "interface" => Ok(Self::Interface),
            "inject" => Ok(Self::Inject),
            "all" => Ok(Self::All),
            other => Err(format!("unknown risk selection {other}")),
        }
    }
}

#[derive(Debug, Default)]
pub struct IngestInputs {
    pub traces: Vec<PathBuf>,
    pub diffs: Vec<PathBuf>,
    pub contracts: Vec<PathBuf>,
    pub code_dirs: Vec<PathBuf>,
    pub abi_dirs: Vec<PathBuf>,
}

#[derive(Debug, Default, Serialize)]
pub struct IngestSummary {
    pub frames_added: u64,
    pub writes_added: u64,
    pub contracts_added: u64,
    pub code_objects_added: u64,
    pub abi_files_added: u64,
    pub files_skipped: u64,
    pub malformed_lines: u64,
    pub diagnostics: Vec<Diagnostic>,
}

struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(path: PathBuf) -> Result<Self, StoreError> {
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                Err(StoreError::Locked(holder.trim().to_string()))
            }
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct Dataset {
    root: PathBuf,
    manifest: DatasetManifest,
    _lock: Option<LockFile>,
}

impl Dataset {
    /// Opens (creating if needed) a dataset for mutation; holds the lock
    /// until dropped.
    pub fn open_rw(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        let lock = LockFile::acquire(root.join("LOCK"))?;
        let manifest = Self::load_manifest(&root)?;
        Ok(Self { root, manifest, _lock: Some(lock) })
    }

    /// Read-only view; no lock taken.
    pub fn open_ro(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let manifest = Self::load_manifest(&root)?;
        Ok(Self { root, manifest, _lock: None })
    }

    fn load_manifest(root: &Path) -> Result<DatasetManifest, StoreError> {
        let path = root.join("manifest.json");
        if !path.exists() {
            return Ok(DatasetManifest::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if manifest.schema_version != 1 {
            return Err(StoreError::Corrupt(format!(
                "unsupported schema_version {}",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    /// Records which chain this dataset was collected from.
    pub fn set_chain_name(&mut self, name: impl Into<String>) -> Result<(), StoreError> {
        self.manifest.chain_name = name.into();
        self.save_manifest()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn save_manifest(&mut self) -> Result<(), StoreError> {
        for table in ["traces", "writes", "contracts", "code_index", "scan", "events", "chains", "findings"]
        {
            let count = self.count_lines(&format!("{table}.ndjson"))?;
            self.manifest.counts.insert(table.to_string(), count);
        }
        let mut range: Option<(u64, u64)> = None;
        for w in self.writes()? {
            range = Some(match range {
                None => (w.block, w.block),
                Some((lo, hi)) => (lo.min(w.block), hi.max(w.block)),
            });
        }
        for f in self.frames()? {
            range = Some(match range {
                None => (f.block, f.block),
                Some((lo, hi)) => (lo.min(f.block), hi.max(f.block)),
            });
        }
        self.manifest.block_range = range;
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    fn count_lines(&self, name: &str) -> Result<u64, StoreError> {
        let path = self.root.join(name);
        if !path.exists() {
            return Ok(0);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        Ok(text.lines().filter(|l| !l.trim().is_empty()).count() as u64)
    }

    // -- generic ndjson tables ------------------------------------------

    fn read_table<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<Vec<T>, StoreError> {
        let path = self.root.join(name);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for item in crate::ingest::NdjsonReader::<T>::open(&path)? {
            out.push(item?);
        }
        Ok(out)
    }

    fn write_table<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), StoreError> {
        let path = self.root.join(name);
        let mut text = String::new();
        for row in rows {
            text.push_str(&serde_json::to_string(row).expect("row serializes"));
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    fn append_table<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), StoreError> {
        if rows.is_empty() {
            return Ok(());
        }
        let path = self.root.join(name);
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        let mut text = String::new();
        for row in rows {
            text.push_str(&serde_json::to_string(row).expect("row serializes"));
            text.push('\n');
        }
        file.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))
    }

    pub fn frames(&self) -> Result<Vec<CallFrame>, StoreError> {
        self.read_table("traces.ndjson")
    }

    pub fn writes(&self) -> Result<Vec<StorageWrite>, StoreError> {
        self.read_table("writes.ndjson")
    }

    pub fn contracts(&self) -> Result<Vec<ContractMeta>, StoreError> {
        self.read_table("contracts.ndjson")
    }

    pub fn scan_records(&self) -> Result<Vec<ScanRecord>, StoreError> {
        self.read_table("scan.ndjson")
    }

    pub fn events(&self) -> Result<Vec<UpgradeEvent>, StoreError> {
        self.read_table("events.ndjson")
    }

    pub fn chains(&self) -> Result<Vec<UpgradeChain>, StoreError> {
        self.read_table("chains.ndjson")
    }

    pub fn findings(&self) -> Result<Vec<RiskFinding>, StoreError> {
        self.read_table("findings.ndjson")
    }

    // -- bytecode objects -------------------------------------------------

    fn code_index(&self) -> Result<Vec<CodeIndexEntry>, StoreError> {
        self.read_table("code_index.ndjson")
    }

    pub fn code_of(&self, address: &Address) -> Result<Option<Vec<u8>>, StoreError> {
        let index = self.code_index()?;
        let Some(entry) = index.iter().find(|e| e.address == *address) else {
            return Ok(None);
        };
        self.code_by_hash(&entry.code_hash)
    }

    fn code_by_hash(&self, hash: &Word) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.root.join("code").join(format!("{hash}.hex"));
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        parse_hex_code(&text).map(Some).map_err(|e| StoreError::Corrupt(e.to_string()))
    }

    fn store_code(&self, code: &[u8]) -> Result<Word, StoreError> {
        let hash = Word::from_be_bytes(&keccak256(code));
        let dir = self.root.join("code");
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let path = dir.join(format!("{hash}.hex"));
        if !path.exists() {
            fs::write(&path, format!("0x{}\n", hex::encode(code))).map_err(|e| io_err(&path, e))?;
        }
        Ok(hash)
    }

    /// The code-presence oracle the hygiene checks use: known address ->
    /// present-and-nonempty from its availability block on; unknown -> None.
    pub fn code_presence(&self) -> Result<impl Fn(&Address, u64) -> Option<bool>, StoreError> {
        let index = self.code_index()?;
        let mut nonempty: BTreeMap<Address, (u64, bool)> = BTreeMap::new();
        for entry in index {
            let code = self.code_by_hash(&entry.code_hash)?.unwrap_or_default();
            nonempty.insert(entry.address, (entry.from_block, !code.is_empty()));
        }
        Ok(move |addr: &Address, block: u64| {
            nonempty.get(addr).map(|(from, has)| *has && block >= *from)
        })
    }

    // -- ingest -----------------------------------------------------------

    /// Ingests input files. Re-ingesting a byte-identical file is a no-op:
    /// file digests are tracked in the manifest.
    pub fn ingest(&mut self, inputs: &IngestInputs) -> Result<IngestSummary, StoreError> {
        let mut summary = IngestSummary::default();

        for path in &inputs.traces {
            if !self.mark_ingested(path, &mut summary)? {
                continue;
            }
            let mut frames = Vec::new();
            for item in read_trace_file(path)? {
                match item {
                    Ok(frame) => frames.push(frame),
                    Err(e) => {
                        summary.malformed_lines += 1;
                        summary.diagnostics.push(Diagnostic::new(
                            DiagnosticKind::AssumedSuccessful,
                            format!("{}: {e}", path.display()),
                        ));
                    }
                }
            }
            summary.frames_added += frames.len() as u64;
            self.append_table("traces.ndjson", &frames)?;
        }
        if summary.frames_added > 0 {
            summary.diagnostics.push(Diagnostic::new(
                DiagnosticKind::AssumedSuccessful,
                "trace schema carries no revert status; all frames included",
            ));
        }

        let mut new_writes = Vec::new();
        for path in &inputs.diffs {
            if !self.mark_ingested(path, &mut summary)? {
                continue;
            }
            for item in read_state_diff(path)? {
                match item {
                    Ok(w) => new_writes.push(w),
                    Err(e) => {
                        summary.malformed_lines += 1;
                        summary.diagnostics.push(Diagnostic::new(
                            DiagnosticKind::AssumedSuccessful,
                            format!("{}: {e}", path.display()),
                        ));
                    }
                }
            }
        }
        if !new_writes.is_empty() {
            summary.writes_added = new_writes.len() as u64;
            let mut all = self.writes()?;
            all.append(&mut new_writes);
            all.sort_by_key(|w| (w.block, w.tx_hash, w.order, w.contract, w.slot));
            self.write_table("writes.ndjson", &all)?;
        }

        let mut metas: BTreeMap<Address, ContractMeta> =
            self.contracts()?.into_iter().map(|m| (m.address, m)).collect();
        let mut index: BTreeMap<Address, CodeIndexEntry> =
            self.code_index()?.into_iter().map(|e| (e.address, e)).collect();

        for path in &inputs.contracts {
            if !self.mark_ingested(path, &mut summary)? {
                continue;
            }
            for item in crate::ingest::NdjsonReader::<ContractRecordIn>::open(path)? {
                let rec = match item {
                    Ok(r) => r,
                    Err(e) => {
                        summary.malformed_lines += 1;
                        summary.diagnostics.push(Diagnostic::new(
                            DiagnosticKind::AssumedSuccessful,
                            format!("{}: {e}", path.display()),
                        ));
                        continue;
                    }
                };
                let code_hash = match &rec.code {
                    Some(code) => {
                        let hash = self.store_code(&code.0)?;
                        index.insert(
                            rec.address,
                            CodeIndexEntry {
                                address: rec.address,
                                code_hash: hash,
                                from_block: rec.deploy_block,
                            },
                        );
                        summary.code_objects_added += 1;
                        hash
                    }
                    None => index
                        .get(&rec.address)
                        .map(|e| e.code_hash)
                        .unwrap_or(Word::from_be_bytes(&keccak256(&[]))),
                };
                summary.contracts_added += 1;
                metas.insert(
                    rec.address,
                    ContractMeta {
                        address: rec.address,
                        deploy_block: rec.deploy_block,
                        deploy_tx: rec.deploy_tx.unwrap_or(TxHash::ZERO),
                        code_hash,
                    },
                );
            }
        }

        for dir in &inputs.code_dirs {
            let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "hex").unwrap_or(false))
                .collect();
            paths.sort();
            for path in paths {
                if !self.mark_ingested(&path, &mut summary)? {
                    continue;
                }
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let Ok(address) = stem.parse::<Address>() else {
                    summary.diagnostics.push(Diagnostic::new(
                        DiagnosticKind::AssumedSuccessful,
                        format!("{}: file name is not an address", path.display()),
                    ));
                    continue;
                };
                let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                let code = parse_hex_code(&text).map_err(|e| StoreError::Corrupt(e.to_string()))?;
                let hash = self.store_code(&code)?;
                summary.code_objects_added += 1;
                let from_block = metas.get(&address).map(|m| m.deploy_block).unwrap_or(0);
                index.insert(address, CodeIndexEntry { address, code_hash: hash, from_block });
                metas.entry(address).or_insert(ContractMeta {
                    address,
                    deploy_block: from_block,
                    deploy_tx: TxHash::ZERO,
                    code_hash: hash,
                });
            }
        }

        let metas_sorted: Vec<ContractMeta> = metas.into_values().collect();
        self.write_table("contracts.ndjson", &metas_sorted)?;
        let index_sorted: Vec<CodeIndexEntry> = index.into_values().collect();
        self.write_table("code_index.ndjson", &index_sorted)?;

        for dir in &inputs.abi_dirs {
            summary.abi_files_added += self.copy_abi_dir(dir)?;
        }

        self.save_manifest()?;
        Ok(summary)
    }

    /// Registers a file digest; false means this exact content was already
    /// ingested and the file must be skipped.
    fn mark_ingested(&mut self, path: &Path, summary: &mut IngestSummary) -> Result<bool, StoreError> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let digest = hex::encode(keccak256(&bytes));
        if self.manifest.ingested.contains(&digest) {
            summary.files_skipped += 1;
            return Ok(false);
        }
        self.manifest.ingested.insert(digest);
        Ok(true)
    }

    /// Copies `<dir>/<chain_id>/<version>.json` files into the dataset.
    fn copy_abi_dir(&self, dir: &Path) -> Result<u64, StoreError> {
        let mut copied = 0;
        let target_root = self.root.join("abis");
        let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
        for chain_dir in entries.filter_map(|e| e.ok().map(|e| e.path())) {
            if !chain_dir.is_dir() {
                continue;
            }
            let chain_name = chain_dir.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            let target = target_root.join(chain_name);
            fs::create_dir_all(&target).map_err(|e| io_err(&target, e))?;
            for f in fs::read_dir(&chain_dir).map_err(|e| io_err(&chain_dir, e))?.flatten() {
                let src = f.path();
                if src.extension().map(|x| x == "json").unwrap_or(false) {
                    let dst = target.join(src.file_name().expect("file name"));
                    fs::copy(&src, &dst).map_err(|e| io_err(&dst, e))?;
                    copied += 1;
                }
            }
        }
        Ok(copied)
    }

    /// ABI document for one chain version, if the operator supplied it.
    pub fn abi_for(&self, chain: Word, version: u32) -> Result<Option<Vec<AbiEntry>>, StoreError> {
        let path = self.root.join("abis").join(chain.to_string()).join(format!("{version}.json"));
        if !path.exists() {
            return Ok(None);
        }
        let (entries, _) = crate::ingest::read_abi(&path)?;
        Ok(Some(entries))
    }

    // -- pipeline stages ----------------------------------------------------

    /// Runs the bytecode analyzer over candidate contracts: the
    /// DELEGATECALL-aggregation candidates when trace frames exist (or
    /// every contract with code when none do, or when `all` is set).
    /// Rewrites scan.ndjson and the deception findings.
    pub fn scan(&mut self, cfg: &AnalysisConfig, all: bool) -> Result<Vec<ScanRecord>, StoreError> {
        let frames = self.frames()?;
        let index = self.code_index()?;
        let with_code: Vec<Address> = index.iter().map(|e| e.address).collect();
        let candidates: Vec<Address> = if all || frames.is_empty() {
            with_code
        } else {
            let aggregated = aggregate_delegatecalls(frames);
            aggregated.keys().filter(|a| with_code.contains(a)).copied().collect()
        };

        let codes: Vec<(Address, Vec<u8>)> = candidates
            .iter()
            .filter_map(|a| self.code_of(a).transpose().map(|c| c.map(|c| (*a, c))))
            .collect::<Result<Vec<_>, _>>()?;

        let exec = cfg.exploration();
        let threshold = cfg.simple_key_threshold;
        let run = || {
            codes
                .par_iter()
                .map(|(address, code)| {
                    let report = bytecode::is_upgradeable(code, exec);
                    let slot_usage = classify_slot_usage(&report.locators, threshold);
                    let deception = if report.upgradeable {
                        bytecode::detect_slot_deception(code, exec)
                    } else {
                        None
                    };
                    (
                        ScanRecord {
                            address: *address,
                            upgradeable: report.upgradeable,
                            locators: report.locators,
                            sites: report.sites,
                            slot_usage,
                            diagnostics: report.diagnostics,
                        },
                        deception.map(|finding| {
                            RiskFinding::new(RiskPayload::Deception { contract: *address, finding })
                        }),
                    )
                })
                .collect::<Vec<_>>()
        };
        let results = match cfg.jobs {
            0 => run(),
            n => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| StoreError::Corrupt(e.to_string()))?
                .install(run),
        };

        let mut records: Vec<ScanRecord> = Vec::new();
        let mut deceptions: Vec<RiskFinding> = Vec::new();
        for (record, deception) in results {
            records.push(record);
            deceptions.extend(deception);
        }
        records.sort_by_key(|r| r.address);
        self.write_table("scan.ndjson", &records)?;
        self.replace_findings(&["deception"], deceptions)?;
        self.save_manifest()?;
        Ok(records)
    }

    /// Detects upgrade events from the write history of scanned
    /// upgradeable callers, builds deduplicated chains, and flags hygiene
    /// issues. Rewrites events.ndjson, chains.ndjson and the hygiene
    /// findings.
    pub fn build_chains(&mut self) -> Result<(Vec<UpgradeChain>, Vec<Diagnostic>), StoreError> {
        let scans = self.scan_records()?;
        let locators: BTreeMap<Address, Vec<SlotLocator>> = scans
            .iter()
            .filter(|s| s.upgradeable)
            .map(|s| (s.address, s.locators.clone()))
            .collect();
        let events = detect_upgrades(&locators, self.writes()?);
        let (chains, mut diagnostics) = build_chains(&events);

        let presence = self.code_presence()?;
        let mut hygiene: Vec<RiskFinding> = Vec::new();
        let mut callers: Vec<Address> = events.iter().map(|e| e.caller).collect();
        callers.sort();
        callers.dedup();
        for caller in callers {
            let caller_events: Vec<UpgradeEvent> =
                events.iter().filter(|e| e.caller == caller).cloned().collect();
            let (issues, diags) = detect_upgrade_issues(&caller_events, &presence);
            diagnostics.extend(diags);
            hygiene.extend(issues.into_iter().map(|i| RiskFinding::new(RiskPayload::Hygiene(i))));
        }

        self.write_table("events.ndjson", &events)?;
        self.write_table("chains.ndjson", &chains)?;
        self.replace_findings(&["hygiene"], hygiene)?;
        self.save_manifest()?;
        Ok((chains, diagnostics))
    }

    /// Runs the selected risk detectors over the chained dataset and
    /// rewrites their finding categories. The jobs setting caps the
    /// per-code-pair fan-out of the injection scan.
    pub fn detect_risks(
        &mut self,
        cfg: &AnalysisConfig,
        which: RiskSelection,
    ) -> Result<Vec<RiskFinding>, StoreError> {
        let run = |ds: &Self| -> Result<(Vec<RiskFinding>, Vec<&'static str>), StoreError> {
            let mut new_findings: Vec<RiskFinding> = Vec::new();
            let mut replaced: Vec<&'static str> = Vec::new();
            if matches!(which, RiskSelection::Init | RiskSelection::All) {
                new_findings.extend(ds.init_findings()?);
                replaced.push("init");
            }
            if matches!(which, RiskSelection::Interface | RiskSelection::All) {
                new_findings.extend(ds.interface_findings(cfg)?);
                replaced.push("interface");
            }
            if matches!(which, RiskSelection::Inject | RiskSelection::All) {
                new_findings.extend(ds.inject_findings(cfg)?);
                replaced.push("injection");
            }
            Ok((new_findings, replaced))
        };
        let (new_findings, replaced) = match cfg.jobs {
            0 => run(self)?,
            n => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| StoreError::Corrupt(e.to_string()))?
                .install(|| run(self))?,
        };

        self.replace_findings(&replaced, new_findings.clone())?;
        self.save_manifest()?;
        Ok(new_findings)
    }

    fn init_findings(&self) -> Result<Vec<RiskFinding>, StoreError> {
        let scans = self.scan_records()?;
        let metas: BTreeMap<Address, ContractMeta> =
            self.contracts()?.into_iter().map(|m| (m.address, m)).collect();
        let writes = self.writes()?;
        let mut findings = Vec::new();
        for scan in scans.iter().filter(|s| s.upgradeable) {
            let Some(usage) = scan.slot_usage else { continue };
            let Some(meta) = metas.get(&scan.address) else { continue };
            let contract_writes: Vec<StorageWrite> =
                writes.iter().filter(|w| w.contract == scan.address).cloned().collect();
            match check_admin_init(meta, usage, &contract_writes) {
                Ok(Some(finding)) => {
                    findings.push(RiskFinding::new(RiskPayload::Init(finding)));
                }
                Ok(None) => {}
                Err(InitError::NotEip1967) => {} // outside the check's scope
            }
        }
        Ok(findings)
    }

    fn interface_findings(&self, cfg: &AnalysisConfig) -> Result<Vec<RiskFinding>, StoreError> {
        let chains = self.chains()?;
        let exec = cfg.exploration();
        let mut findings = Vec::new();
        for chain in &chains {
            // version-pair diffs along the chain
            for i in 0..chain.callees.len().saturating_sub(1) {
                let ctx = VersionContext {
                    chain_id: chain.chain_id,
                    from_version: i as u32,
                    to_version: i as u32 + 1,
                };
                let old_abi = self.abi_for(chain.chain_id, i as u32)?;
                let new_abi = self.abi_for(chain.chain_id, i as u32 + 1)?;
                match (old_abi, new_abi) {
                    (Some(old), Some(new)) => {
                        findings.extend(
                            diff_abis(ctx, &old, &new)
                                .into_iter()
                                .map(|f| RiskFinding::new(RiskPayload::Interface(f))),
                        );
                    }
                    _ => {
                        let old_code = self.code_of(&chain.callees[i])?;
                        let new_code = self.code_of(&chain.callees[i + 1])?;
                        if let (Some(old), Some(new)) = (old_code, new_code) {
                            let (fs, _) = selector_diff_from_bytecode(ctx, &old, &new, exec);
                            findings.extend(
                                fs.into_iter()
                                    .map(|f| RiskFinding::new(RiskPayload::Interface(f))),
                            );
                        }
                    }
                }
            }
            // caller-vs-callee selector collisions
            for caller in &chain.callers {
                let Some(caller_code) = self.code_of(caller)? else { continue };
                let caller_table = bytecode::extract_selectors(&caller_code, exec);
                for (version, callee) in chain.callees.iter().enumerate() {
                    let Some(callee_code) = self.code_of(callee)? else { continue };
                    let callee_table = bytecode::extract_selectors(&callee_code, exec);
                    let ctx = VersionContext {
                        chain_id: chain.chain_id,
                        from_version: version as u32,
                        to_version: version as u32,
                    };
                    findings.extend(
                        detect_selector_collision(ctx, &caller_table.entries, &callee_table.entries)
                            .into_iter()
                            .map(|f| RiskFinding::new(RiskPayload::Interface(f))),
                    );
                }
            }
        }
        dedup_by_id(&mut findings);
        Ok(findings)
    }

    fn inject_findings(&self, cfg: &AnalysisConfig) -> Result<Vec<RiskFinding>, StoreError> {
        let events = self.events()?;
        let exec = cfg.exploration();

        // analysis is per code pair; many callers share pairs
        let mut pair_codes: BTreeMap<(Word, Word), (Vec<u8>, Vec<u8>)> = BTreeMap::new();
        let mut event_pairs: Vec<(&UpgradeEvent, (Word, Word))> = Vec::new();
        for event in &events {
            let (Some(old), Some(new)) =
                (self.code_of(&event.old_callee)?, self.code_of(&event.new_callee)?)
            else {
                continue;
            };
            let key = (
                Word::from_be_bytes(&keccak256(&old)),
                Word::from_be_bytes(&keccak256(&new)),
            );
            pair_codes.entry(key).or_insert((old, new));
            event_pairs.push((event, key));
        }

        let scanned: BTreeMap<(Word, Word), _> = pair_codes
            .par_iter()
            .map(|(key, (old, new))| (*key, scan_upgrade(old, new, exec)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();

        let mut findings = Vec::new();
        for (event, key) in event_pairs {
            let (injections, report) = &scanned[&key];
            for injection in injections {
                findings.push(RiskFinding::new(RiskPayload::Injection(InjectionFinding {
                    caller: event.caller,
                    upgrade_block: event.block,
                    upgrade_tx: event.tx_hash,
                    old_callee: event.old_callee,
                    new_callee: event.new_callee,
                    total_replacement: report.total_replacement,
                    injection: injection.clone(),
                })));
            }
        }
        dedup_by_id(&mut findings);
        Ok(findings)
    }

    /// Replaces all findings of the given categories, keeping the rest,
    /// and rewrites the table in deterministic order.
    fn replace_findings(
        &self,
        categories: &[&str],
        new_findings: Vec<RiskFinding>,
    ) -> Result<(), StoreError> {
        let mut kept: Vec<RiskFinding> = self
            .findings()?
            .into_iter()
            .filter(|f| !categories.contains(&f.category()))
            .collect();
        kept.extend(new_findings);
        dedup_by_id(&mut kept);
        kept.sort_by_key(finding_sort_key);
        self.write_table("findings.ndjson", &kept)
    }
}

fn dedup_by_id(findings: &mut Vec<RiskFinding>) {
    let mut seen = BTreeSet::new();
    findings.retain(|f| seen.insert(f.id.clone()));
}

/// Deterministic output ordering: by subject address, then block, then id.
fn finding_sort_key(f: &RiskFinding) -> (Address, u64, String) {
    let (addr, block) = match &f.payload {
        RiskPayload::Hygiene(h) => (h.event.caller, h.event.block),
        RiskPayload::Init(i) => (i.contract, i.first_admin_block.unwrap_or(i.deploy_block)),
        RiskPayload::Interface(_) => (Address::ZERO, 0),
        RiskPayload::Injection(inj) => (inj.caller, inj.upgrade_block),
        RiskPayload::Deception { contract, .. } => (*contract, 0),
    };
    (addr, block, f.id.clone())
}

/// Convenience used by summaries: slot-usage class of EIP-1967 callers.
pub fn is_eip1967(usage: &SlotUsageClass) -> bool {
    matches!(usage, SlotUsageClass::ComplexKey { standard: SlotStandard::Eip1967 })
}

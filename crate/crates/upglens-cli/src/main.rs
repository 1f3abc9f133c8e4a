//! upglens CLI: ingest -> scan -> chains -> risks -> report over a
//! file-backed dataset.
//!
//! Exit codes: 0 ran clean (or findings at/below the --fail-on gate),
//! 1 findings above the gate, 2 usage error, 3 input error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use upglens::config::AnalysisConfig;
use upglens::ingest::RpcClient;
use upglens::report;
use upglens::risk::{RiskFinding, Severity};
use upglens::store::{Dataset, IngestInputs, RiskSelection};

#[derive(Parser)]
#[command(name = "upglens", version, about = "DELEGATECALL upgrade analyzer")]
struct Cli {
    /// Dataset directory.
    #[arg(long, global = true, default_value = "./dataset")]
    dataset: PathBuf,

    /// TOML config file (flags override it; it overrides environment).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Exit 1 when any finding reaches this severity (info|warn|high).
    #[arg(long, global = true)]
    fail_on: Option<Severity>,

    /// Worker threads for per-contract analysis (0 = default).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load trace/diff/contract/code/ABI files into the dataset.
    Ingest(IngestArgs),
    /// Classify upgradeability of candidate contracts from bytecode.
    Scan {
        /// Analyze every contract with code, not just aggregation candidates.
        #[arg(long)]
        all: bool,
    },
    /// Detect upgrade events, build chains, flag hygiene issues.
    Chains,
    /// Run risk detectors.
    Risks {
        /// init | interface | inject | all
        #[arg(long, default_value = "all")]
        which: RiskSelection,
        /// Attach per-atom instruction offsets and decompiled-style
        /// summaries to injection findings.
        #[arg(long)]
        evidence: bool,
    },
    /// Emit reports from the dataset.
    Report {
        /// ndjson | csv | summary
        #[arg(long, default_value = "summary")]
        format: ReportFormat,
        /// Write report files here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Trace NDJSON files ({tx, block, kind, from, to, input, depth, value}).
    #[arg(long = "traces")]
    traces: Vec<PathBuf>,
    /// State-diff NDJSON files ({tx, block, contract, slot, old, new, order}).
    #[arg(long = "diffs")]
    diffs: Vec<PathBuf>,
    /// Contract NDJSON files ({address, deploy_block, deploy_tx, code?}).
    #[arg(long = "contracts")]
    contracts: Vec<PathBuf>,
    /// Directories of <address>.hex bytecode files.
    #[arg(long = "code-dir")]
    code_dirs: Vec<PathBuf>,
    /// Directories laid out as <chain_id>/<version>.json ABI documents.
    #[arg(long = "abis")]
    abi_dirs: Vec<PathBuf>,
    /// Record the chain name in the dataset manifest.
    #[arg(long)]
    chain_name: Option<String>,
    /// Fetch code over RPC for trace addresses missing local bytecode.
    #[arg(long)]
    rpc_fetch_missing: bool,
    /// JSON-RPC endpoint (overrides config file and UPGLENS_RPC_URL).
    #[arg(long)]
    rpc_url: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ReportFormat {
    Ndjson,
    Csv,
    Summary,
}

/// Config-file shape: flat keys plus an [analysis] table.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    rpc_url: Option<String>,
    jobs: Option<usize>,
    fail_on: Option<String>,
    chain_name: Option<String>,
    #[serde(default)]
    analysis: AnalysisSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    max_blocks: Option<usize>,
    max_revisits: Option<u32>,
    simple_key_threshold: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file_config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<FileConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    // env (AnalysisConfig::default) < config file < flags
    let mut config = AnalysisConfig::default();
    if let Some(v) = file_config.analysis.max_blocks {
        config.max_blocks = v;
    }
    if let Some(v) = file_config.analysis.max_revisits {
        config.max_revisits = v;
    }
    if let Some(v) = file_config.analysis.simple_key_threshold {
        config.simple_key_threshold = v;
    }
    if let Some(v) = file_config.jobs {
        config.jobs = v;
    }
    if let Some(url) = &file_config.rpc_url {
        config.rpc_url = Some(url.clone());
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    let fail_on = match (cli.fail_on, &file_config.fail_on) {
        (Some(level), _) => Some(level),
        (None, Some(text)) => {
            Some(text.parse().map_err(|e: String| anyhow::anyhow!(e)).context("fail_on in config")?)
        }
        (None, None) => None,
    };

    let relevant: Vec<RiskFinding> = match cli.command {
        Command::Ingest(args) => {
            let mut dataset = Dataset::open_rw(&cli.dataset)?;
            if let Some(url) = &args.rpc_url {
                config.rpc_url = Some(url.clone());
            }
            if let Some(name) = args.chain_name.as_deref().or(file_config.chain_name.as_deref()) {
                dataset.set_chain_name(name)?;
            }
            let inputs = IngestInputs {
                traces: args.traces,
                diffs: args.diffs,
                contracts: args.contracts,
                code_dirs: args.code_dirs,
                abi_dirs: args.abi_dirs,
            };
            let summary = dataset.ingest(&inputs)?;
            eprintln!(
                "ingested: {} frames, {} writes, {} contracts, {} code objects, {} abi files \
                 ({} files skipped as already ingested, {} malformed lines)",
                summary.frames_added,
                summary.writes_added,
                summary.contracts_added,
                summary.code_objects_added,
                summary.abi_files_added,
                summary.files_skipped,
                summary.malformed_lines,
            );
            if args.rpc_fetch_missing {
                let url = config
                    .rpc_url
                    .clone()
                    .context("--rpc-fetch-missing needs --rpc-url, config rpc_url, or UPGLENS_RPC_URL")?;
                let fetched = fetch_missing_code(&mut dataset, &url, &config)?;
                eprintln!("fetched code for {fetched} addresses over rpc");
            }
            Vec::new()
        }
        Command::Scan { all } => {
            let mut dataset = Dataset::open_rw(&cli.dataset)?;
            let records = dataset.scan(&config, all)?;
            let upgradeable = records.iter().filter(|r| r.upgradeable).count();
            eprintln!("scanned {} contracts, {} upgradeable", records.len(), upgradeable);
            dataset.findings()?
        }
        Command::Chains => {
            let mut dataset = Dataset::open_rw(&cli.dataset)?;
            let (chains, diagnostics) = dataset.build_chains()?;
            eprintln!("built {} chains ({} diagnostics)", chains.len(), diagnostics.len());
            dataset.findings()?
        }
        Command::Risks { which, evidence } => {
            let mut dataset = Dataset::open_rw(&cli.dataset)?;
            let findings = dataset.detect_risks(&config, which)?;
            let mut stdout = std::io::stdout().lock();
            use std::io::Write as _;
            if evidence {
                for finding in &findings {
                    let mut value = serde_json::to_value(finding)?;
                    if let upglens::risk::RiskPayload::Injection(inj) = &finding.payload {
                        let lines: Vec<String> =
                            inj.injection.atoms.iter().map(|a| a.describe()).collect();
                        value["evidence"] = serde_json::to_value(lines)?;
                    }
                    writeln!(stdout, "{}", serde_json::to_string(&value)?)?;
                }
            } else {
                stdout.write_all(report::findings_to_ndjson(&findings).as_bytes())?;
            }
            eprintln!("{} findings", findings.len());
            findings
        }
        Command::Report { format, out } => {
            let dataset = Dataset::open_ro(&cli.dataset)?;
            let findings = dataset.findings()?;
            let text = match format {
                ReportFormat::Ndjson => report::findings_to_ndjson(&findings),
                ReportFormat::Csv => {
                    report::chains_to_csv(&dataset.chains()?, &dataset.events()?, &findings)
                }
                ReportFormat::Summary => report::render_summary(&report::summarize(
                    &dataset.scan_records()?,
                    &dataset.events()?,
                    &dataset.chains()?,
                    &findings,
                )),
            };
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let name = match format {
                        ReportFormat::Ndjson => "findings.ndjson",
                        ReportFormat::Csv => "chains.csv",
                        ReportFormat::Summary => "summary.txt",
                    };
                    std::fs::write(dir.join(name), text)?;
                }
                None => print!("{text}"),
            }
            findings
        }
    };

    if let Some(level) = fail_on {
        if relevant.iter().any(|f| f.severity >= level) {
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Pulls bytecode over RPC for every DELEGATECALL participant the dataset
/// has no code record for, then re-ingests it as a contracts file.
fn fetch_missing_code(
    dataset: &mut Dataset,
    url: &str,
    config: &AnalysisConfig,
) -> anyhow::Result<u64> {
    let client = RpcClient::with_limits(url, config.rpc_attempts, config.rpc_in_flight);
    let frames = dataset.frames()?;
    let mut addresses: Vec<upglens::Address> = frames
        .iter()
        .filter(|f| f.call_kind == upglens::ingest::CallKind::DelegateCall)
        .flat_map(|f| [f.caller, f.callee])
        .collect();
    addresses.sort();
    addresses.dedup();

    let mut rows = String::new();
    let mut fetched = 0u64;
    for addr in addresses {
        if dataset.code_of(&addr)?.is_some() {
            continue;
        }
        let code = client.get_code(addr, None)?;
        rows.push_str(&format!(r#"{{"address":"{}","code":"{}"}}"#, addr, code.code));
        rows.push('\n');
        fetched += 1;
    }
    if fetched > 0 {
        let tmp = tempfile_path(dataset)?;
        std::fs::write(&tmp, rows)?;
        dataset.ingest(&IngestInputs { contracts: vec![tmp.clone()], ..Default::default() })?;
        let _ = std::fs::remove_file(tmp);
    }
    Ok(fetched)
}

fn tempfile_path(dataset: &Dataset) -> anyhow::Result<PathBuf> {
    let dir = dataset.root().join("tmp");
    std::fs::create_dir_all(&dir)?;
    Ok(dir.join(format!("rpc-fetch-{}.ndjson", std::process::id())))
}

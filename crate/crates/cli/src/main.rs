//! `sdvtest`: command-line front end for the statechart-to-Gherkin test
//! pipeline.
//!
//! Subcommands mirror the pipeline stages (`extract`, `map`, `gen`, `run`)
//! plus `pipeline`, which chains all four and writes every intermediate
//! artifact for inspection.
//!
//! Exit codes, kept total for CI triage:
//!   0  success / all scenarios passed
//!   1  at least one scenario failed
//!   2  usage, I/O or parse error
//!   3  unmapped signals, clarifications, or unbound steps/requirements

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use sdvtest_core::broker::Broker;
use sdvtest_core::cpds::{Cpds, CpdsVariant};
use sdvtest_core::gherkin::{parse_feature, render_feature, Feature};
use sdvtest_core::mapper::{
    parse_overrides, ExternalBackend, GenBackend, MapOutcome, OfflineBackend, PromptSet,
};
use sdvtest_core::runner::{
    parse_script, run_feature, AliasTable, Binder, RunnerConfig, TestReport,
};
use sdvtest_core::statechart::{extract_signals, parse_statechart, StateChart};
use sdvtest_core::testgen::{
    emit_feature, emit_runner_script, parse_requirements, plan_scenarios, EmitConfig,
};
use sdvtest_core::vss_catalog::{load_catalog, Catalog, CatalogSource};

#[derive(Parser)]
#[command(name = "sdvtest", version, about = "Generate and execute signal-grounded Gherkin tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Offline,
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SutKind {
    Reference,
    #[value(name = "mutant-no-reset")]
    MutantNoReset,
}

impl SutKind {
    fn variant(self) -> CpdsVariant {
        match self {
            SutKind::Reference => CpdsVariant::Reference,
            SutKind::MutantNoReset => CpdsVariant::MutantNoReset,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// List raw signal names found in a statechart.
    Extract {
        #[arg(long)]
        chart: PathBuf,
        /// Also write the listing to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map extracted signal names onto catalog paths.
    Map {
        #[arg(long)]
        chart: PathBuf,
        /// Catalog file; repeat for overlays.
        #[arg(long = "catalog", required = true)]
        catalogs: Vec<PathBuf>,
        /// Manual `raw_name path` override table.
        #[arg(long)]
        overrides: Option<PathBuf>,
        /// Similarity threshold in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "offline")]
        backend: BackendKind,
        /// Endpoint for the external backend.
        #[arg(long, env = "SDVTEST_ENDPOINT")]
        endpoint: Option<String>,
        /// Write the machine-readable mapping table to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a feature from a chart, requirements and a mapping table.
    Gen {
        #[arg(long)]
        chart: PathBuf,
        #[arg(long)]
        reqs: PathBuf,
        /// Mapping table as written by `map --out`.
        #[arg(long)]
        mappings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit the declarative runner script (requires --catalog).
        #[arg(long)]
        script_out: Option<PathBuf>,
        /// Catalog file for script binding; repeat for overlays.
        #[arg(long = "catalog")]
        catalogs: Vec<PathBuf>,
        /// Catalog path treated as the acknowledgment signal.
        #[arg(long, default_value = sdvtest_core::runner::DEFAULT_ACK_PATH)]
        ack_path: String,
    },
    /// Execute feature files against the simulated vehicle.
    Run {
        #[arg(long = "feature", required = true)]
        features: Vec<PathBuf>,
        #[arg(long = "catalog", required = true)]
        catalogs: Vec<PathBuf>,
        /// Alias table file; defaults to the built-in table.
        #[arg(long)]
        aliases: Option<PathBuf>,
        /// Simulated delay before a delayed acknowledgment, seconds.
        #[arg(long, default_value_t = 60)]
        ack_delay: u64,
        #[arg(long, default_value = sdvtest_core::runner::DEFAULT_ACK_PATH)]
        ack_path: String,
        /// System under test variant (test hook).
        #[arg(long, value_enum, default_value = "reference")]
        sut: SutKind,
        /// Scenario-level parallelism: 1 sequential, 0 one worker per core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the structured report to a file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat inputs as declarative runner scripts instead of features.
        #[arg(long)]
        script: bool,
    },
    /// Chain extract, map, gen and run, writing every artifact.
    Pipeline {
        #[arg(long)]
        chart: PathBuf,
        #[arg(long)]
        reqs: PathBuf,
        #[arg(long = "catalog", required = true)]
        catalogs: Vec<PathBuf>,
        #[arg(long)]
        overrides: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 60)]
        ack_delay: u64,
        #[arg(long, default_value = sdvtest_core::runner::DEFAULT_ACK_PATH)]
        ack_path: String,
        #[arg(long, value_enum, default_value = "reference")]
        sut: SutKind,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for signals.txt, mappings.txt, generated.feature and
        /// report.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_UNRESOLVED: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Extract { chart, out } => cmd_extract(&chart, out.as_deref()),
        Command::Map { chart, catalogs, overrides, threshold, backend, endpoint, out } => {
            cmd_map(&chart, &catalogs, overrides.as_deref(), threshold, backend, endpoint, out.as_deref())
        }
        Command::Gen { chart, reqs, mappings, out, script_out, catalogs, ack_path } => {
            cmd_gen(&chart, &reqs, &mappings, out.as_deref(), script_out.as_deref(), &catalogs, &ack_path)
        }
        Command::Run { features, catalogs, aliases, ack_delay, ack_path, sut, jobs, out, script } => cmd_run(
            &features,
            &catalogs,
            aliases.as_deref(),
            ack_delay,
            &ack_path,
            sut,
            jobs,
            out.as_deref(),
            script,
        ),
        Command::Pipeline {
            chart,
            reqs,
            catalogs,
            overrides,
            threshold,
            ack_delay,
            ack_path,
            sut,
            jobs,
            out_dir,
        } => cmd_pipeline(
            &chart,
            &reqs,
            &catalogs,
            overrides.as_deref(),
            threshold,
            ack_delay,
            &ack_path,
            sut,
            jobs,
            &out_dir,
        ),
    };
    ExitCode::from(code)
}

fn usage_error(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn unresolved_error(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    EXIT_UNRESOLVED
}

fn read(path: &Path) -> Result<String, u8> {
    fs::read_to_string(path).map_err(|e| usage_error(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, content: &str) -> Result<(), u8> {
    fs::write(path, content).map_err(|e| usage_error(format!("{}: {e}", path.display())))
}

fn load_chart(path: &Path) -> Result<StateChart, u8> {
    let text = read(path)?;
    parse_statechart(&text).map_err(|e| usage_error(format!("{}: {e}", path.display())))
}

fn load_catalogs(paths: &[PathBuf]) -> Result<Arc<Catalog>, u8> {
    let mut sources = Vec::new();
    for path in paths {
        sources.push(CatalogSource::new(path.display().to_string(), read(path)?));
    }
    let catalog =
        load_catalog(&sources).map_err(|e| usage_error(format!("catalog: {e}")))?;
    Ok(Arc::new(catalog))
}

fn extract_listing(chart: &StateChart) -> (Vec<String>, String) {
    let signals = extract_signals(chart);
    let mut text = String::new();
    let mut names = Vec::new();
    for signal in &signals {
        text.push_str(&format!("{} {}\n", signal.name, signal.occurrences.len()));
        names.push(signal.name.clone());
    }
    (names, text)
}

fn cmd_extract(chart_path: &Path, out: Option<&Path>) -> u8 {
    let chart = match load_chart(chart_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (_, listing) = extract_listing(&chart);
    print!("{listing}");
    if let Some(path) = out {
        if let Err(code) = write_out(path, &listing) {
            return code;
        }
    }
    EXIT_OK
}

/// Machine-readable mapping table: `raw path score method` lines, mapped
/// entries only.
fn mappings_table(outcomes: &[MapOutcome]) -> String {
    let mut out = String::new();
    for outcome in outcomes {
        if let MapOutcome::Mapped(m) = outcome {
            out.push_str(&format!(
                "{} {} {:.6} {}\n",
                m.raw_name,
                m.path,
                m.score,
                m.method.as_str()
            ));
        }
    }
    out
}

fn parse_mappings_table(text: &str, path: &Path) -> Result<BTreeMap<String, String>, u8> {
    let mut table = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut words = line.split_whitespace();
        match (words.next(), words.next()) {
            (Some(name), Some(target)) => {
                table.insert(name.to_string(), target.to_string());
            }
            _ => {
                return Err(usage_error(format!(
                    "{}:{}: expected `raw path [score method]`",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(table)
}

fn run_mapping(
    chart: &StateChart,
    catalog: &Catalog,
    overrides_path: Option<&Path>,
    threshold: f64,
    backend: BackendKind,
    endpoint: Option<&str>,
) -> Result<Vec<MapOutcome>, u8> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(usage_error(format!("threshold {threshold} outside (0, 1]")));
    }
    let overrides = match overrides_path {
        Some(path) => parse_overrides(&read(path)?)
            .map_err(|e| usage_error(format!("{}: {e}", path.display())))?,
        None => BTreeMap::new(),
    };
    let raws: Vec<String> = extract_signals(chart).into_iter().map(|s| s.name).collect();
    match backend {
        BackendKind::Offline => {
            let backend = OfflineBackend { threshold, overrides };
            backend
                .map_signals(&raws, catalog)
                .map_err(|e| usage_error(format!("mapping: {e}")))
        }
        BackendKind::External => {
            let Some(endpoint) = endpoint else {
                return Err(usage_error("--backend external requires --endpoint or SDVTEST_ENDPOINT"));
            };
            let backend = ExternalBackend {
                endpoint: endpoint.to_string(),
                prompts: PromptSet::default(),
            };
            backend
                .map_signals(&raws, catalog)
                .map_err(|e| usage_error(format!("external backend: {e}")))
        }
    }
}

fn report_mapping(outcomes: &[MapOutcome]) -> u8 {
    let mut clarifications = 0;
    for outcome in outcomes {
        match outcome {
            MapOutcome::Mapped(m) => {
                println!("{} -> {} (score={:.6}, {})", m.raw_name, m.path, m.score, m.method.as_str());
            }
            MapOutcome::NeedsClarification(c) => {
                clarifications += 1;
                eprintln!("clarify {}: {}", c.raw_name, c.reason);
                for (path, score) in &c.candidates {
                    eprintln!("  candidate {path} (score={score:.6})");
                }
            }
        }
    }
    if clarifications > 0 {
        eprintln!("{clarifications} signal(s) need clarification");
        EXIT_UNRESOLVED
    } else {
        EXIT_OK
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_map(
    chart_path: &Path,
    catalog_paths: &[PathBuf],
    overrides: Option<&Path>,
    threshold: f64,
    backend: BackendKind,
    endpoint: Option<String>,
    out: Option<&Path>,
) -> u8 {
    let chart = match load_chart(chart_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let catalog = match load_catalogs(catalog_paths) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let outcomes = match run_mapping(&chart, &catalog, overrides, threshold, backend, endpoint.as_deref()) {
        Ok(o) => o,
        Err(code) => return code,
    };
    if let Some(path) = out {
        if let Err(code) = write_out(path, &mappings_table(&outcomes)) {
            return code;
        }
    }
    report_mapping(&outcomes)
}

fn generate_feature(
    chart: &StateChart,
    reqs_path: &Path,
    mappings: &BTreeMap<String, String>,
    ack_path: &str,
) -> Result<Feature, u8> {
    let reqs = parse_requirements(&read(reqs_path)?)
        .map_err(|e| usage_error(format!("{}: {e}", reqs_path.display())))?;
    let plan = plan_scenarios(chart, &reqs)
        .map_err(|e| unresolved_error(format!("planning: {e}")))?;
    let cfg = EmitConfig { ack_path: ack_path.to_string() };
    emit_feature(&plan, chart, mappings, &cfg)
        .map_err(|e| unresolved_error(format!("generation: {e}")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    chart_path: &Path,
    reqs_path: &Path,
    mappings_path: &Path,
    out: Option<&Path>,
    script_out: Option<&Path>,
    catalog_paths: &[PathBuf],
    ack_path: &str,
) -> u8 {
    let chart = match load_chart(chart_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mappings = match read(mappings_path).and_then(|t| parse_mappings_table(&t, mappings_path)) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let feature = match generate_feature(&chart, reqs_path, &mappings, ack_path) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let rendered = render_feature(&feature);
    match out {
        Some(path) => {
            if let Err(code) = write_out(path, &rendered) {
                return code;
            }
        }
        None => print!("{rendered}"),
    }
    if let Some(script_path) = script_out {
        if catalog_paths.is_empty() {
            return usage_error("--script-out requires at least one --catalog for step binding");
        }
        let catalog = match load_catalogs(catalog_paths) {
            Ok(c) => c,
            Err(code) => return code,
        };
        let mut binder = Binder::new(catalog);
        binder.ack_path = ack_path.to_string();
        let script = match emit_runner_script(&feature, &binder) {
            Ok(s) => s,
            Err(e) => return unresolved_error(format!("script emission: {e}")),
        };
        if let Err(code) = write_out(script_path, &script) {
            return code;
        }
    }
    EXIT_OK
}

struct RunOptions<'a> {
    aliases: Option<&'a Path>,
    ack_delay: u64,
    ack_path: &'a str,
    jobs: usize,
}

fn runner_config(opts: &RunOptions<'_>) -> Result<RunnerConfig, u8> {
    let aliases = match opts.aliases {
        Some(path) => AliasTable::parse(&read(path)?)
            .map_err(|e| usage_error(format!("{}: {e}", path.display())))?,
        None => AliasTable::shipped(),
    };
    #[cfg(not(feature = "parallel"))]
    if opts.jobs != 1 {
        eprintln!("note: built without the parallel feature; running sequentially");
    }
    Ok(RunnerConfig {
        aliases,
        ack_path: opts.ack_path.to_string(),
        ack_delay: opts.ack_delay,
        jobs: opts.jobs,
    })
}

fn exit_for_report(report: &TestReport) -> u8 {
    if report.any_error() {
        EXIT_UNRESOLVED
    } else if report.any_failed() {
        EXIT_FAILED
    } else {
        EXIT_OK
    }
}

fn reports_json(reports: &[TestReport]) -> String {
    let mut text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0]).expect("report serializes")
    } else {
        serde_json::to_string_pretty(reports).expect("reports serialize")
    };
    text.push('\n');
    text
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    feature_paths: &[PathBuf],
    catalog_paths: &[PathBuf],
    aliases: Option<&Path>,
    ack_delay: u64,
    ack_path: &str,
    sut: SutKind,
    jobs: usize,
    out: Option<&Path>,
    script: bool,
) -> u8 {
    let catalog = match load_catalogs(catalog_paths) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let config = match runner_config(&RunOptions { aliases, ack_delay, ack_path, jobs }) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let variant = sut.variant();
    let factory = move |broker: &mut Broker| Cpds::with_variant(variant).attach(broker);

    let mut reports = Vec::new();
    for path in feature_paths {
        let text = match read(path) {
            Ok(t) => t,
            Err(code) => return code,
        };
        let feature = if script {
            match parse_script(&text) {
                Ok(f) => f,
                Err(e) => return usage_error(format!("{}: {e}", path.display())),
            }
        } else {
            match parse_feature(&text) {
                Ok(f) => f,
                Err(e) => return usage_error(format!("{}: {e}", path.display())),
            }
        };
        let report = run_feature(&feature, &catalog, &config, &factory);
        print!("{}", sdvtest_core::runner::render_human(&report));
        reports.push(report);
    }
    if let Some(path) = out {
        if let Err(code) = write_out(path, &reports_json(&reports)) {
            return code;
        }
    }
    reports.iter().map(exit_for_report).max().unwrap_or(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    chart_path: &Path,
    reqs_path: &Path,
    catalog_paths: &[PathBuf],
    overrides: Option<&Path>,
    threshold: f64,
    ack_delay: u64,
    ack_path: &str,
    sut: SutKind,
    jobs: usize,
    out_dir: &Path,
) -> u8 {
    if let Err(e) = fs::create_dir_all(out_dir) {
        return usage_error(format!("{}: {e}", out_dir.display()));
    }
    let chart = match load_chart(chart_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let catalog = match load_catalogs(catalog_paths) {
        Ok(c) => c,
        Err(code) => return code,
    };

    // Step 1: signal extraction.
    let (_, listing) = extract_listing(&chart);
    if let Err(code) = write_out(&out_dir.join("signals.txt"), &listing) {
        return code;
    }

    // Step 2: mapping.
    let outcomes = match run_mapping(&chart, &catalog, overrides, threshold, BackendKind::Offline, None) {
        Ok(o) => o,
        Err(code) => return code,
    };
    if let Err(code) = write_out(&out_dir.join("mappings.txt"), &mappings_table(&outcomes)) {
        return code;
    }
    let mapping_status = report_mapping(&outcomes);
    if mapping_status != EXIT_OK {
        return mapping_status;
    }
    let mappings: BTreeMap<String, String> = outcomes
        .iter()
        .filter_map(|o| o.mapping())
        .map(|m| (m.raw_name.clone(), m.path.clone()))
        .collect();

    // Step 3: feature generation.
    let feature = match generate_feature(&chart, reqs_path, &mappings, ack_path) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let rendered = render_feature(&feature);
    if let Err(code) = write_out(&out_dir.join("generated.feature"), &rendered) {
        return code;
    }

    // Step 4: execution.
    let config = match runner_config(&RunOptions { aliases: None, ack_delay, ack_path, jobs }) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let variant = sut.variant();
    let factory = move |broker: &mut Broker| Cpds::with_variant(variant).attach(broker);
    let report = run_feature(&feature, &catalog, &config, &factory);
    print!("{}", sdvtest_core::runner::render_human(&report));
    if let Err(code) = write_out(&out_dir.join("report.json"), &reports_json(std::slice::from_ref(&report))) {
        return code;
    }
    exit_for_report(&report)
}

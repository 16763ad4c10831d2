//! The `mtcheck` command line.
//!
//! Workspace layout:
//!
//! ```text
//! <workspace>/<property>/suite.jsonl        generated test cases
//! <workspace>/<property>/genlog.json        generation log and statistics
//! <workspace>/<property>/candidates.jsonl   candidate sets or contrastive pairs
//! <workspace>/<property>/unanswered.jsonl   values the LLM could not answer
//! <workspace>/<property>/edit_audit.jsonl   one line per applied candidate edit
//! <workspace>/cache/translations.jsonl      translation cache
//! <workspace>/runs/<unix time>/             one directory per `run`
//!     translations/<system>.jsonl
//!     translations/<system>.errors.jsonl
//!     verdicts.jsonl  report.json  report.txt  run_meta.json
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 provider or
//! adapter failure, 3 data error.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::detection::{DetectError, EmbedError, Embedder};
use crate::generation::{derive_seed, generation_stats, GenError, GenerationLog, GenerationStats, Generator};
use crate::jsonl::{self, JsonlError};
use crate::metrics::{diversity_series, trend_fit_points, trend_value, MetricsError, ResampleConfig};
use crate::model::{
    load_candidates, load_suite, save_candidates, save_suite, CandidateEntry, ModelError, PropertySpec, TestCase,
    TranslationRecord, Verdict,
};
use crate::runner::cache::sha256_hex;
use crate::runner::{
    apply_candidate_edits, build_report, compare_systems, evaluate, index_candidates, render_comparisons, render_table,
    review_rows, sample_for_annotation, tally_review, translate_all, CandidateEdit, CaseFailure, ReportMetadata,
    ReviewRow, RunError, RunReport, TranslationCache,
};
use crate::text::TokenizerConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Provider(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Provider(_) | GenError::MaxBatchesExceeded { .. } => CliError::Provider(e.to_string()),
            GenError::Model(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match &e {
            RunError::Detect {
                source: DetectError::Embed(EmbedError::Provider(_)),
                ..
            } => CliError::Provider(e.to_string()),
            RunError::NoEmbedder(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "mtcheck",
    version,
    about = "Behavioral tests for machine translation systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by the config-driven commands; they override the config.
#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Restrict to these properties (repeatable).
    #[arg(long = "property", value_name = "ID")]
    pub properties: Vec<String>,
    /// Restrict to these systems (repeatable).
    #[arg(long = "system", value_name = "ID")]
    pub systems: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap resamples.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sentences to generate per property.
    #[arg(long)]
    pub target: Option<usize>,
    /// Output directory: the workspace for `generate`/`candidates`, the run
    /// directory for `run`, the review file for `annotate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refuse network providers and systems.
    #[arg(long)]
    pub offline: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.k {
            cfg.stats.k = k;
        }
        if let Some(a) = self.alpha {
            cfg.stats.alpha = a;
        }
        if let Some(t) = self.target {
            cfg.target_count = t;
        }
        cfg.offline = self.offline;
        cfg.resample().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate source-sentence suites with the LLM provider.
    Generate(Common),
    /// Generate candidate sets (or contrastive pairs) for every suite value.
    Candidates(Common),
    /// Translate, judge and report.
    Run(Common),
    /// Paired comparison of two systems from a finished run.
    Compare {
        #[command(flatten)]
        common: Common,
        /// `report.json` of the run (or its directory).
        #[arg(long)]
        report: PathBuf,
    },
    /// n-gram diversity along a suite's generation order.
    Diversity {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Degree of the polynomial trend.
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// Tokenizer settings come from this config when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample passing and failing verdicts into a review file.
    Annotate {
        #[command(flatten)]
        common: Common,
        /// Run directory to sample from.
        #[arg(long)]
        run: PathBuf,
        /// Verdicts per stratum (pass, fail) per property and system.
        #[arg(long, default_value_t = 100)]
        sample: usize,
    },
    /// Apply candidate edits and tally a reviewed file.
    ApplyEdits {
        #[command(flatten)]
        common: Common,
        /// JSONL of `{"value", "add", "remove", "add_foil", "remove_foil"}`.
        #[arg(long)]
        edits: Option<PathBuf>,
        /// Reviewed file (from `annotate`) to tally.
        #[arg(long)]
        review: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Generate(c) => cmd_generate(c),
        Command::Candidates(c) => cmd_candidates(c),
        Command::Run(c) => cmd_run(c).map(|_| ()),
        Command::Compare { common, report } => cmd_compare(common, report),
        Command::Diversity {
            suite,
            n,
            degree,
            config,
            out,
        } => cmd_diversity(suite, *n, *degree, config.as_deref(), out.as_deref()),
        Command::Annotate { common, run, sample } => cmd_annotate(common, run, *sample),
        Command::ApplyEdits { common, edits, review } => cmd_apply_edits(common, edits.as_deref(), review.as_deref()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn workspace(common: &Common, cfg: &RunConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| cfg.workspace.clone())
}

#[derive(Serialize)]
struct GenlogFile<'a> {
    stats: GenerationStats,
    #[serde(flatten)]
    log: &'a GenerationLog,
}

fn cmd_generate(common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let props = cfg.select_properties(&common.properties)?;
    let llm = cfg.llm()?;
    let generator = Generator::new(llm.as_ref(), cfg.sampling);
    let ws = workspace(common, &cfg);
    for spec in props {
        let seed = derive_seed(cfg.seed, &format!("generate:{}", spec.id));
        let (cases, log) = generator.generate_suite(spec, cfg.target_count, seed)?;
        let dir = ws.join(&spec.id);
        save_suite(&cases, &dir.join("suite.jsonl"))?;
        let stats = generation_stats(&log)?;
        write_json(&dir.join("genlog.json"), &GenlogFile { stats, log: &log })?;
        println!(
            "{}: {} cases from {} batches; kept {:.1}% of {} items, {:.1}% new values",
            spec.id,
            cases.len(),
            log.batches.len(),
            stats.kept * 100.0,
            log.emitted(),
            stats.unique_values * 100.0
        );
    }
    Ok(())
}

fn load_property_suite(dir: &Path, spec: &PropertySpec) -> Result<Vec<TestCase>, CliError> {
    let path = dir.join(&spec.id).join("suite.jsonl");
    if !path.exists() {
        return Err(CliError::Data(format!(
            "property {}: no suite at {} (run `generate` first)",
            spec.id,
            path.display()
        )));
    }
    Ok(load_suite(&path)?)
}

fn load_property_candidates(dir: &Path, spec: &PropertySpec) -> Result<Vec<CandidateEntry>, CliError> {
    let path = dir.join(&spec.id).join("candidates.jsonl");
    if !path.exists() {
        return Err(CliError::Data(format!(
            "property {}: no candidates file at {} (run `candidates` first)",
            spec.id,
            path.display()
        )));
    }
    Ok(load_candidates(&path)?)
}

/// A value the LLM declined or whose reply parsed to nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unanswered {
    pub value: String,
    pub reason: String,
    pub case_ids: Vec<String>,
}

fn load_unanswered(dir: &Path, spec: &PropertySpec) -> Result<Vec<Unanswered>, CliError> {
    let path = dir.join(&spec.id).join("unanswered.jsonl");
    if path.exists() {
        Ok(jsonl::read(&path)?)
    } else {
        Ok(Vec::new())
    }
}

fn cmd_candidates(common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let props = cfg.select_properties(&common.properties)?;
    let llm = cfg.llm()?;
    let generator = Generator::new(llm.as_ref(), cfg.sampling);
    let ws = workspace(common, &cfg);
    for spec in props {
        let cases = load_property_suite(&ws, spec)?;
        let mut order: Vec<&str> = Vec::new();
        let mut by_value: HashMap<&str, Vec<&TestCase>> = HashMap::new();
        for c in &cases {
            let e = by_value.entry(c.value.as_str()).or_default();
            if e.is_empty() {
                order.push(&c.value);
            }
            e.push(c);
        }
        let mut entries = Vec::new();
        let mut unanswered = Vec::new();
        for value in order {
            let group = &by_value[value];
            match generator.candidates_for(group[0], spec) {
                Ok(entry) => entries.push(entry),
                Err(e @ (GenError::UnanswerableValue(_) | GenError::EmptyAfterParse { .. })) => {
                    unanswered.push(Unanswered {
                        value: value.to_string(),
                        reason: e.to_string(),
                        case_ids: group.iter().map(|c| c.id.clone()).collect(),
                    })
                }
                Err(e) => return Err(e.into()),
            }
        }
        let dir = ws.join(&spec.id);
        save_candidates(&entries, &dir.join("candidates.jsonl"))?;
        let na_path = dir.join("unanswered.jsonl");
        if unanswered.is_empty() {
            if na_path.exists() {
                fs::remove_file(&na_path).map_err(|e| io_err(&na_path, e))?;
            }
        } else {
            jsonl::write(&na_path, &unanswered)?;
        }
        println!(
            "{}: {} values with candidates, {} unanswered",
            spec.id,
            entries.len(),
            unanswered.len()
        );
        for u in &unanswered {
            println!("  unanswered {:?} ({} cases): {}", u.value, u.case_ids.len(), u.reason);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMeta {
    started_unix: u64,
    finished_unix: u64,
    mtcheck_version: &'static str,
    config: PathBuf,
    properties: Vec<String>,
    systems: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn fresh_run_dir(ws: &Path, started: u64) -> PathBuf {
    let runs = ws.join("runs");
    let mut dir = runs.join(started.to_string());
    let mut i = 1;
    while dir.exists() {
        dir = runs.join(format!("{started}-{i}"));
        i += 1;
    }
    dir
}

fn file_sha(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(fs::read(path).map_err(|e| io_err(path, e))?))
}

struct PropertyInput<'a> {
    spec: &'a PropertySpec,
    cases: Vec<TestCase>,
    candidates: Vec<CandidateEntry>,
    no_candidates: usize,
}

/// Runs the pipeline; returns the run directory.
pub fn cmd_run(common: &Common) -> Result<PathBuf, CliError> {
    let started = unix_now();
    let cfg = common.load()?;
    let props = cfg.select_properties(&common.properties)?;
    let systems = cfg.select_systems(&common.systems)?;
    if props.is_empty() || systems.is_empty() {
        return Err(CliError::Usage(
            "`run` needs at least one property and one system".into(),
        ));
    }
    for s in &systems {
        cfg.check_system_allowed(s)?;
    }
    let ws = cfg.workspace.clone();

    let mut inputs = Vec::new();
    for spec in &props {
        let mut cases = load_property_suite(&ws, spec)?;
        let candidates = load_property_candidates(&ws, spec)?;
        let flagged: HashSet<String> = load_unanswered(&ws, spec)?.into_iter().map(|u| u.value).collect();
        let before = cases.len();
        let known: HashSet<&str> = candidates.iter().map(CandidateEntry::value).collect();
        cases.retain(|c| known.contains(c.value.as_str()) || !flagged.contains(&c.value));
        let no_candidates = before - cases.len();
        if no_candidates > 0 {
            eprintln!(
                "warning: {}: {no_candidates} cases excluded, the LLM gave no candidates for their values",
                spec.id
            );
        }
        index_candidates(spec, &cases, &candidates)?;
        inputs.push(PropertyInput {
            spec,
            cases,
            candidates,
            no_candidates,
        });
    }
    let embedder: Option<Box<dyn Embedder>> = if props
        .iter()
        .any(|p| p.detector == crate::model::DetectorKind::Contrastive)
    {
        Some(cfg.embedder()?)
    } else {
        None
    };

    let run_dir = common.out.clone().unwrap_or_else(|| fresh_run_dir(&ws, started));
    let mut cache = TranslationCache::open(&ws.join("cache").join("translations.jsonl"))?;
    let all_cases: Vec<TestCase> = inputs.iter().flat_map(|i| i.cases.iter().cloned()).collect();
    if all_cases.is_empty() {
        return Err(CliError::Data("no cases to evaluate".into()));
    }

    // translations[s] holds every record of system s.
    let mut translations: Vec<(String, Vec<TranslationRecord>)> = Vec::new();
    for sys in &systems {
        let translator = sys
            .build(&cfg.base_dir, Default::default())
            .map_err(|e| CliError::Provider(e.to_string()))?;
        let out = translate_all(&all_cases, translator.as_ref(), Some(&mut cache))?;
        let tdir = run_dir.join("translations");
        let err_path = tdir.join(format!("{}.errors.jsonl", sys.system_id));
        if !out.failures.is_empty() {
            jsonl::write::<CaseFailure>(&err_path, &out.failures)?;
        }
        if out.records.is_empty() {
            let first = out.failures.first().map(|f| f.error.clone()).unwrap_or_default();
            return Err(CliError::Provider(format!(
                "system {}: every translation failed ({first})",
                sys.system_id
            )));
        }
        jsonl::write(&tdir.join(format!("{}.jsonl", sys.system_id)), &out.records)?;
        translations.push((sys.system_id.clone(), out.records));
    }

    let stats = cfg.resample();
    let mut all_verdicts: Vec<Verdict> = Vec::new();
    let mut reports = Vec::new();
    for input in &inputs {
        if input.cases.is_empty() {
            continue;
        }
        let ids: HashSet<&str> = input.cases.iter().map(|c| c.id.as_str()).collect();
        let mut per_system = Vec::new();
        for (system, recs) in &translations {
            let mine: Vec<TranslationRecord> = recs
                .iter()
                .filter(|r| ids.contains(r.case_id.as_str()))
                .cloned()
                .collect();
            let verdicts = evaluate(
                input.spec,
                &input.cases,
                &input.candidates,
                &mine,
                &cfg.detector,
                embedder.as_deref(),
            )?;
            all_verdicts.extend(verdicts.iter().cloned());
            per_system.push((system.clone(), verdicts));
        }
        let pdir = ws.join(&input.spec.id);
        let metadata = ReportMetadata {
            suite_sha256: file_sha(&pdir.join("suite.jsonl"))?,
            candidates_sha256: file_sha(&pdir.join("candidates.jsonl"))?,
            detector: cfg.detector,
        };
        let mut report = build_report(
            &input.spec.id,
            input.spec.detector,
            &input.cases,
            &per_system,
            &stats,
            metadata,
        )?;
        report.no_candidates = input.no_candidates;
        reports.push(report);
    }

    jsonl::write(&run_dir.join("verdicts.jsonl"), &all_verdicts)?;
    let run_report = RunReport { properties: reports };
    write_json(&run_dir.join("report.json"), &run_report)?;
    let text = render_run_report(&run_report);
    fs::write(run_dir.join("report.txt"), &text).map_err(|e| io_err(&run_dir, e))?;
    write_json(
        &run_dir.join("run_meta.json"),
        &RunMeta {
            started_unix: started,
            finished_unix: unix_now(),
            mtcheck_version: env!("CARGO_PKG_VERSION"),
            config: common.config.clone(),
            properties: props.iter().map(|p| p.id.clone()).collect(),
            systems: systems.iter().map(|s| s.system_id.clone()).collect(),
        },
    )?;
    print!("{text}");
    println!("\nrun directory: {}", run_dir.display());
    Ok(run_dir)
}

/// Interval table followed by each property's comparisons and counts.
pub fn render_run_report(report: &RunReport) -> String {
    let mut out = render_table(&report.properties);
    for r in &report.properties {
        out.push_str(&format!("\n{} ({} cases)\n", r.property_id, r.n));
        for s in &r.systems {
            out.push_str(&format!(
                "  {}: mpr {:.3}  pr {:.3}  pass {}  fail {}\n",
                s.system_id, s.mpr, s.pr, s.passes, s.fails
            ));
        }
        if !r.comparisons.is_empty() {
            out.push('\n');
            out.push_str(&render_comparisons(&r.comparisons));
        }
    }
    out
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("report.json")
    } else {
        p.to_path_buf()
    }
}

fn verdicts_by_system(verdicts: Vec<Verdict>) -> BTreeMap<String, Vec<Verdict>> {
    let mut out: BTreeMap<String, Vec<Verdict>> = BTreeMap::new();
    for v in verdicts {
        out.entry(v.system_id.clone()).or_default().push(v);
    }
    out
}

fn cmd_compare(common: &Common, report: &Path) -> Result<(), CliError> {
    let [a, b] = common.systems.as_slice() else {
        return Err(CliError::Usage("compare needs exactly two --system flags".into()));
    };
    let cfg = common.load()?;
    let path = report_path(report);
    let run: RunReport = read_json(&path)?;
    let run_dir = path.parent().unwrap_or(Path::new("."));
    let verdicts = verdicts_by_system(jsonl::read(&run_dir.join("verdicts.jsonl"))?);
    for id in [a, b] {
        if !verdicts.contains_key(id) {
            return Err(CliError::Usage(format!(
                "unknown system id {id:?} in {}",
                path.display()
            )));
        }
    }
    let wanted: Vec<&str> = common.properties.iter().map(String::as_str).collect();
    for pr in &run.properties {
        if !wanted.is_empty() && !wanted.contains(&pr.property_id.as_str()) {
            continue;
        }
        let spec = cfg
            .property(&pr.property_id)
            .ok_or_else(|| CliError::Usage(format!("property {} is not in the config", pr.property_id)))?;
        let cases = load_property_suite(&cfg.workspace, spec)?;
        let stats = match pr.systems.first() {
            Some(s) => ResampleConfig {
                k: common.k.unwrap_or(s.k),
                alpha: common.alpha.unwrap_or(s.alpha),
                seed: common.seed.map(|x| derive_seed(x, "bootstrap")).unwrap_or(s.seed),
            },
            None => cfg.resample(),
        };
        let c = compare_systems(&cases, (a, &verdicts[a]), (b, &verdicts[b]), &stats)?;
        println!("{}", pr.property_id);
        print!("{}", render_comparisons(&[c]));
    }
    Ok(())
}

#[derive(Serialize)]
struct Trend {
    degree: usize,
    coefficients: Vec<f64>,
    first: f64,
    last: f64,
}

#[derive(Serialize)]
struct DiversityFile {
    suite: PathBuf,
    n: usize,
    values: Vec<Option<f64>>,
    cumulative: Vec<usize>,
    trend: Option<Trend>,
}

fn cmd_diversity(
    suite: &Path,
    n: usize,
    degree: usize,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let tok = match config {
        Some(c) => RunConfig::load(c)?.tokenizer,
        None => TokenizerConfig::default(),
    };
    let cases = load_suite(suite)?;
    let series = diversity_series(cases.iter().map(|c| c.source.as_str()), n, &tok)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let points: Vec<(f64, f64)> = series
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| ((i + 1) as f64, v)))
        .collect();
    let trend = match trend_fit_points(&points, degree) {
        Ok(coefficients) => {
            let first = points.first().map_or(0.0, |p| trend_value(&coefficients, p.0));
            let last = points.last().map_or(0.0, |p| trend_value(&coefficients, p.0));
            Some(Trend {
                degree,
                coefficients,
                first,
                last,
            })
        }
        Err(MetricsError::Underdetermined { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let out_path = out.map(Path::to_path_buf).unwrap_or_else(|| {
        suite
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("diversity_n{n}.json"))
    });
    let scored = points.len();
    let mean = if scored > 0 {
        points.iter().map(|p| p.1).sum::<f64>() / scored as f64
    } else {
        0.0
    };
    println!(
        "{}-gram diversity over {} sentences ({} scored): mean {:.3}",
        n,
        series.values.len(),
        scored,
        mean
    );
    match &trend {
        Some(t) => println!(
            "degree-{} trend: {:.3} at sentence {} to {:.3} at sentence {}",
            t.degree,
            t.first,
            points.first().map_or(0.0, |p| p.0),
            t.last,
            points.last().map_or(0.0, |p| p.0)
        ),
        None => println!("trend: not enough scored sentences for degree {degree}"),
    }
    write_json(
        &out_path,
        &DiversityFile {
            suite: suite.to_path_buf(),
            n,
            values: series.values,
            cumulative: series.cumulative,
            trend,
        },
    )?;
    println!("series written to {}", out_path.display());
    Ok(())
}

fn load_run_translations(run: &Path) -> Result<Vec<TranslationRecord>, CliError> {
    let tdir = run.join("translations");
    let mut paths: Vec<PathBuf> = fs::read_dir(&tdir)
        .map_err(|e| io_err(&tdir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".jsonl") && !n.ends_with(".errors.jsonl"))
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.extend(jsonl::read::<TranslationRecord>(&p)?);
    }
    Ok(out)
}

fn cmd_annotate(common: &Common, run: &Path, k: usize) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Usage("--sample must be at least 1".into()));
    }
    let cfg = common.load()?;
    let props = cfg.select_properties(&common.properties)?;
    let verdicts = verdicts_by_system(jsonl::read(&run.join("verdicts.jsonl"))?);
    let translations = load_run_translations(run)?;
    let mut rows: Vec<ReviewRow> = Vec::new();
    for spec in props {
        let cases = load_property_suite(&cfg.workspace, spec)?;
        let candidates = load_property_candidates(&cfg.workspace, spec)?;
        let ids: HashSet<&str> = cases.iter().map(|c| c.id.as_str()).collect();
        for (system, vs) in &verdicts {
            if !common.systems.is_empty() && !common.systems.contains(system) {
                continue;
            }
            let mine: Vec<Verdict> = vs
                .iter()
                .filter(|v| ids.contains(v.case_id.as_str()))
                .cloned()
                .collect();
            if mine.is_empty() {
                continue;
            }
            let seed = derive_seed(cfg.seed, &format!("annotate:{}:{system}", spec.id));
            let sample = sample_for_annotation(&mine, k, seed);
            for w in &sample.warnings {
                eprintln!("warning: {} / {system}: {w}", spec.id);
            }
            let picked: Vec<Verdict> = sample.passes.into_iter().chain(sample.fails).collect();
            let new_rows = review_rows(&picked, &cases, &translations, &candidates);
            let (p, f) = new_rows
                .iter()
                .fold((0, 0), |(p, f), r| if r.pass { (p + 1, f) } else { (p, f + 1) });
            println!("{} / {system}: {p} pass rows, {f} fail rows", spec.id);
            rows.extend(new_rows);
        }
    }
    let out = common.out.clone().unwrap_or_else(|| run.join("review.jsonl"));
    jsonl::write(&out, &rows)?;
    println!("review file: {}", out.display());
    Ok(())
}

fn cmd_apply_edits(common: &Common, edits: Option<&Path>, review: Option<&Path>) -> Result<(), CliError> {
    if edits.is_none() && review.is_none() {
        return Err(CliError::Usage("apply-edits needs --edits, --review or both".into()));
    }
    let cfg = common.load()?;
    if let Some(edits_path) = edits {
        let [prop] = common.properties.as_slice() else {
            return Err(CliError::Usage("apply-edits needs exactly one --property".into()));
        };
        let spec = cfg
            .property(prop)
            .ok_or_else(|| CliError::Usage(format!("unknown property id {prop:?}")))?;
        let edit_list: Vec<CandidateEdit> = jsonl::read(edits_path)?;
        let entries = load_property_candidates(&cfg.workspace, spec)?;
        let (updated, audit) =
            apply_candidate_edits(&entries, &edit_list).map_err(|e| CliError::Data(e.to_string()))?;
        let dir = cfg.property_dir(&spec.id);
        save_candidates(&updated, &dir.join("candidates.jsonl"))?;
        for line in &audit {
            jsonl::append(&dir.join("edit_audit.jsonl"), line)?;
        }
        let adds = audit.iter().filter(|a| a.action == "add").count();
        let removes = audit.iter().filter(|a| a.action == "remove").count();
        println!(
            "{}: applied {} edits ({adds} candidates added, {removes} removed)",
            spec.id,
            edit_list.len()
        );
    }
    if let Some(review_path) = review {
        let rows: Vec<ReviewRow> = jsonl::read(review_path)?;
        let t = tally_review(&rows);
        println!(
            "reviewed {} of {} rows: {} false positives among {} passes, {} false negatives among {} fails",
            t.reviewed, t.rows, t.false_positives, t.passes_reviewed, t.false_negatives, t.fails_reviewed
        );
    }
    Ok(())
}

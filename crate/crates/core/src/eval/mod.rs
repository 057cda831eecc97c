//! Batch evaluation over a corpus of recordings.
//!
//! A corpus directory holds one subdirectory per recording:
//! `manifest.json`, `plan.txt` (ground truth), and optionally `task.json`
//! (simulator task) and `mock.json` (mock backend rules).

mod config;
mod pipeline;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{BackendKind, BackendSettings, EvalConfig};
pub use pipeline::{run_pipeline, run_program, PipelineReport, ProgramRun, StageRecord, StageStatus};
pub use report::{emit_report, MetricsRow, MetricsTable, ReportFormat, TrialRecord, CSV_HEADER};

use crate::backend::{Backend, LiveBackend, MockBackend, MockScript, ReplayBackend, TranscriptLog, VlmClient};
use crate::demo::{load_recording, MultimodalDemo};
use crate::orchestrator::{
    api_description, build_prompt, check_leakage, generate_program, run_trials, OrchestratorError,
    PromptConfig, Strategy,
};
use crate::plan::{parse_plan, ActionPlan};
use crate::sim::TaskSpec;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
}

impl EvalError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalError::Config(_) => 3,
            EvalError::Corpus(_) => 4,
            EvalError::Backend(_) => 5,
            EvalError::Io { .. } | EvalError::Report(_) => 6,
        }
    }
}

/// One recording with its ground truth.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub video: String,
    pub dir: PathBuf,
    pub demo: MultimodalDemo,
    pub ground_truth: ActionPlan,
    pub task: Option<TaskSpec>,
    pub mock: Option<MockScript>,
}

impl CorpusEntry {
    /// Row key: the simulator task, else the manifest task, else the directory name.
    pub fn task_name(&self) -> String {
        if let Some(t) = &self.task {
            return t.task.to_string();
        }
        self.demo.task.clone().unwrap_or_else(|| self.video.clone())
    }

    /// Object names that must not appear in the prompt prefix.
    pub fn objects(&self) -> Vec<String> {
        let mut objects = self.ground_truth.objects();
        if let Some(t) = &self.task {
            objects.extend(t.objects.keys().cloned());
        }
        objects.sort();
        objects.dedup();
        objects
    }
}

fn load_entry(dir: &Path) -> Result<CorpusEntry, EvalError> {
    let video = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let corpus = |m: String| EvalError::Corpus(format!("{video}: {m}"));
    let demo = load_recording(&dir.join("manifest.json")).map_err(|e| corpus(e.to_string()))?;
    let plan_path = dir.join("plan.txt");
    let text = std::fs::read_to_string(&plan_path)
        .map_err(|e| corpus(format!("{}: {e}", plan_path.display())))?;
    let parsed = parse_plan(&text).map_err(|e| corpus(format!("plan.txt: {e}")))?;
    if let Some(d) = parsed.diagnostics.first() {
        return Err(corpus(format!("plan.txt: {d}")));
    }
    let task_path = dir.join("task.json");
    let task = if task_path.exists() {
        Some(TaskSpec::load(&task_path).map_err(|e| corpus(e.to_string()))?)
    } else {
        None
    };
    let mock_path = dir.join("mock.json");
    let mock = if mock_path.exists() {
        Some(MockScript::load(&mock_path).map_err(|e| corpus(e.to_string()))?)
    } else {
        None
    };
    Ok(CorpusEntry {
        video,
        dir: dir.to_path_buf(),
        demo,
        ground_truth: parsed.plan,
        task,
        mock,
    })
}

/// Loads every subdirectory holding a `manifest.json`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, EvalError> {
    let read = std::fs::read_dir(dir).map_err(|e| EvalError::Corpus(format!("{}: {e}", dir.display())))?;
    let mut dirs: Vec<PathBuf> = read
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(EvalError::Corpus(format!("no recordings found in {}", dir.display())));
    }
    dirs.iter().map(|d| load_entry(d)).collect()
}

/// Client for the configured backend. Mock clients start with an empty rule
/// set; per-recording rules are attached with [`VlmClient::with_backend`].
pub(crate) fn base_client(config: &EvalConfig) -> Result<VlmClient, EvalError> {
    let backend_err = |e: crate::backend::BackendError| EvalError::Backend(e.to_string());
    let settings = &config.backend;
    let backend: Arc<dyn Backend> = match settings.kind {
        BackendKind::Mock => Arc::new(MockBackend::new(MockScript::default()).map_err(backend_err)?),
        BackendKind::Replay => {
            let path = settings.transcript.as_ref().expect("validated");
            Arc::new(ReplayBackend::load(path).map_err(backend_err)?)
        }
        BackendKind::Live => Arc::new(LiveBackend::new(settings.live_config()?).map_err(backend_err)?),
    };
    let mut client = VlmClient::with_options(backend, settings.decoding(), settings.client_options());
    if let Some(path) = config.record_path() {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| EvalError::io(parent, e))?;
        }
        client = client.with_transcript(Arc::new(TranscriptLog::create(&path).map_err(backend_err)?));
    }
    Ok(client)
}

/// Aborts when any prompt prefix names an evaluation object or plan line.
pub(crate) fn leakage_check(
    prompt: &PromptConfig,
    strategies: &[Strategy],
    objects: &[String],
    ground_truth: Option<&ActionPlan>,
) -> Result<(), EvalError> {
    for s in strategies {
        let prefix = build_prompt(prompt, s.modalities, s.kind.layout())
            .map_err(|e| EvalError::Config(e.to_string()))?;
        check_leakage(&prefix, &prompt.example.objects, objects, ground_truth)
            .map_err(|e| EvalError::Config(e.to_string()))?;
    }
    Ok(())
}

struct JobResult {
    records: Vec<TrialRecord>,
    queries: usize,
    failures: Vec<String>,
}

fn run_job(
    entry: &CorpusEntry,
    strategy: &Strategy,
    prompt: &PromptConfig,
    client: &VlmClient,
    config: &EvalConfig,
    api: &str,
) -> JobResult {
    let mut out = JobResult {
        records: Vec::new(),
        queries: 0,
        failures: Vec::new(),
    };
    let summary = match run_trials(strategy, &entry.demo, &entry.ground_truth, prompt, client, config.trials) {
        Ok(s) => s,
        Err(e) => {
            let note = e.to_string();
            out.failures.push(format!("{}: {note}", entry.video));
            out.records = (0..config.trials)
                .map(|trial| TrialRecord {
                    video: entry.video.clone(),
                    trial,
                    exact_match: false,
                    similarity: 0.0,
                    failed: true,
                    note: Some(note.clone()),
                    program_valid: None,
                    success: None,
                })
                .collect();
            return out;
        }
    };
    for t in summary.trials {
        let mut record = TrialRecord {
            video: entry.video.clone(),
            trial: t.trial,
            exact_match: t.metrics.exact_match,
            similarity: t.metrics.similarity,
            failed: t.failed,
            note: t.error.clone(),
            program_valid: None,
            success: None,
        };
        // A backend error aborts the chain partway, so count the attempt.
        out.queries += t
            .chain
            .as_ref()
            .map_or(strategy.query_count(), |c| c.query_count);
        if record.failed {
            let why = record.note.clone().unwrap_or_else(|| "no plan in final answer".into());
            record.note.get_or_insert_with(|| why.clone());
            out.failures.push(format!("{} trial {}: {why}", entry.video, t.trial));
        }
        if let (Some(task), Some(chain), true) = (&entry.task, &t.chain, config.execute_programs) {
            if chain.plan.is_some() {
                out.queries += 1;
                match generate_program(chain, api, client, t.trial) {
                    Ok(source) => {
                        let run = run_program(&source, task, &config.interpreter);
                        record.program_valid = Some(run.valid());
                        record.success = Some(run.success());
                        if let Some(stage) = run.first_failure() {
                            let detail = stage.detail.clone().unwrap_or_default();
                            record.note.get_or_insert_with(|| format!("{}: {detail}", stage.stage));
                        }
                    }
                    Err(e) => {
                        record.program_valid = Some(false);
                        record.success = Some(false);
                        record.note.get_or_insert_with(|| format!("program: {e}"));
                    }
                }
            }
        }
        out.records.push(record);
    }
    out
}

/// Runs every strategy and modality subset on every recording and writes
/// `metrics.csv` and `metrics.json` to the output directory.
pub fn run_eval(config: &EvalConfig) -> Result<MetricsTable, EvalError> {
    config.validate()?;
    let prompt = config
        .prompt
        .resolve(&config.base_dir)
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let corpus = load_corpus(&config.corpus_dir)?;
    let strategies: Vec<(usize, usize, Strategy)> = config
        .strategies
        .iter()
        .enumerate()
        .flat_map(|(si, &kind)| {
            config
                .ablations
                .iter()
                .enumerate()
                .map(move |(ai, &mods)| (si, ai, Strategy::new(kind, mods)))
        })
        .collect();
    let plain: Vec<Strategy> = strategies.iter().map(|s| s.2).collect();
    for entry in &corpus {
        leakage_check(&prompt, &plain, &entry.objects(), Some(&entry.ground_truth))
            .map_err(|e| EvalError::Config(format!("{}: {e}", entry.video)))?;
    }

    std::fs::create_dir_all(&config.output_dir).map_err(|e| EvalError::io(&config.output_dir, e))?;
    let base = base_client(config)?;
    let clients: Vec<Option<VlmClient>> = corpus
        .iter()
        .map(|entry| match config.backend.kind {
            BackendKind::Mock => {
                let script = entry
                    .mock
                    .clone()
                    .ok_or_else(|| EvalError::Corpus(format!("{}: mock backend needs mock.json", entry.video)))?;
                let mock = MockBackend::new(script).map_err(|e| EvalError::Corpus(format!("{}: {e}", entry.video)))?;
                Ok(Some(base.with_backend(Arc::new(mock))))
            }
            _ => Ok(None),
        })
        .collect::<Result<_, EvalError>>()?;

    let jobs: Vec<(usize, usize)> = (0..corpus.len())
        .flat_map(|e| (0..strategies.len()).map(move |s| (e, s)))
        .collect();
    let api = api_description();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| EvalError::Config(format!("thread pool: {e}")))?;
    let results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(e, s)| {
                let client = clients[e].as_ref().unwrap_or(&base);
                run_job(&corpus[e], &strategies[s].2, &prompt, client, config, &api)
            })
            .collect()
    });

    // Jobs are in (entry, strategy) order, so each group keeps video order.
    let mut groups: BTreeMap<(String, usize, usize), JobResult> = BTreeMap::new();
    for (&(e, s), result) in jobs.iter().zip(results) {
        let (si, ai, _) = strategies[s];
        let slot = groups.entry((corpus[e].task_name(), si, ai)).or_insert(JobResult {
            records: Vec::new(),
            queries: 0,
            failures: Vec::new(),
        });
        slot.records.extend(result.records);
        slot.queries += result.queries;
        slot.failures.extend(result.failures);
    }
    let rows = groups
        .into_iter()
        .map(|((task, si, ai), r)| {
            MetricsRow::from_trials(
                task,
                config.strategies[si].label().to_string(),
                config.ablations[ai].label(),
                r.records,
                r.queries,
                r.failures,
            )
        })
        .collect();
    let table = MetricsTable {
        seed: config.seed,
        rows,
    };
    emit_report(&table, ReportFormat::Csv, &config.output_dir)?;
    emit_report(&table, ReportFormat::Json, &config.output_dir)?;
    Ok(table)
}

impl From<OrchestratorError> for EvalError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Backend { .. } | OrchestratorError::EmptyProgram => {
                EvalError::Backend(e.to_string())
            }
            OrchestratorError::Demo(_) => EvalError::Corpus(e.to_string()),
            _ => EvalError::Config(e.to_string()),
        }
    }
}

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{base_client, leakage_check, EvalConfig, EvalError};
use crate::backend::{MockBackend, MockScript};
use crate::demo::load_recording;
use crate::dsl::{interpret, parse_program, validate, Diagnostic, Execution, InterpretOptions, Program};
use crate::orchestrator::{api_description, generate_program, run_strategy, Strategy, StrategyKind};
use crate::sim::{check_success, EventTrace, SuccessReport, TaskId, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Result of running generated program text against a task.
#[derive(Debug, Clone)]
pub struct ProgramRun {
    pub stages: Vec<StageRecord>,
    pub program: Option<Program>,
    pub diagnostics: Vec<Diagnostic>,
    pub execution: Option<Execution>,
    pub verdict: Option<SuccessReport>,
}

impl ProgramRun {
    pub fn valid(&self) -> bool {
        self.program.is_some() && self.diagnostics.is_empty()
    }

    pub fn success(&self) -> bool {
        self.verdict.as_ref().is_some_and(|v| v.success)
    }

    /// First stage that did not complete, with its detail.
    pub fn first_failure(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.status == StageStatus::Failed)
    }
}

const PROGRAM_STAGES: [&str; 4] = ["parse", "validate", "interpret", "check"];

/// Parses, validates and interprets `source` on the task's initial world,
/// then checks the success predicate. Stages after a failure are skipped.
pub fn run_program(source: &str, task: &TaskSpec, options: &InterpretOptions) -> ProgramRun {
    let mut run = ProgramRun {
        stages: Vec::new(),
        program: None,
        diagnostics: Vec::new(),
        execution: None,
        verdict: None,
    };
    let record = |run: &mut ProgramRun, stage: &str, status, detail: Option<String>| {
        run.stages.push(StageRecord {
            stage: stage.into(),
            status,
            detail,
        });
    };
    let skip_rest = |run: &mut ProgramRun| {
        for name in &PROGRAM_STAGES[run.stages.len()..] {
            run.stages.push(StageRecord {
                stage: name.to_string(),
                status: StageStatus::Skipped,
                detail: None,
            });
        }
    };

    let program = match parse_program(source) {
        Ok(p) => p,
        Err(e) => {
            record(&mut run, "parse", StageStatus::Failed, Some(e.to_string()));
            skip_rest(&mut run);
            return run;
        }
    };
    record(&mut run, "parse", StageStatus::Ok, None);
    run.diagnostics = validate(&program);
    run.program = Some(program);
    if !run.diagnostics.is_empty() {
        let detail = run.diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        record(&mut run, "validate", StageStatus::Failed, Some(detail));
        skip_rest(&mut run);
        return run;
    }
    record(&mut run, "validate", StageStatus::Ok, None);

    let mut world = task.initial_world();
    let program = run.program.as_ref().expect("set above");
    let execution = match interpret(program, &mut world, options) {
        Ok(e) => e,
        Err(e) => {
            record(&mut run, "interpret", StageStatus::Failed, Some(e.to_string()));
            skip_rest(&mut run);
            return run;
        }
    };
    match execution.trace.first_failure() {
        Some(event) => record(&mut run, "interpret", StageStatus::Failed, Some(event.to_string())),
        None => record(&mut run, "interpret", StageStatus::Ok, None),
    }
    match check_success(task, &execution.trace, &world) {
        Ok(verdict) => {
            let status = if verdict.success { StageStatus::Ok } else { StageStatus::Failed };
            record(&mut run, "check", status, Some(verdict.to_string()));
            run.verdict = Some(verdict);
        }
        Err(e) => record(&mut run, "check", StageStatus::Failed, Some(e.to_string())),
    }
    run.execution = Some(execution);
    run
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub demo: String,
    pub task: TaskId,
    pub strategy: String,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    /// The trace event that stopped execution, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_event: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<SuccessReport>,
    pub success: bool,
}

impl fmt::Display for PipelineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({}) via {}", self.demo, self.task, self.strategy)?;
        for s in &self.stages {
            let status = match s.status {
                StageStatus::Ok => "ok",
                StageStatus::Failed => "FAILED",
                StageStatus::Skipped => "skipped",
            };
            write!(f, "  {:<10} {status}", s.stage)?;
            if let Some(d) = &s.detail {
                write!(f, ": {}", d.replace('\n', "\n             "))?;
            }
            writeln!(f)?;
        }
        write!(f, "success: {}", self.success)
    }
}

fn write(path: &Path, contents: &str) -> Result<(), EvalError> {
    std::fs::write(path, contents).map_err(|e| EvalError::io(path, e))
}

/// Runs analysis, program generation, interpretation and the success check
/// for one recording, writing every artifact to the output directory.
pub fn run_pipeline(
    manifest: &Path,
    task_path: &Path,
    config: &EvalConfig,
) -> Result<PipelineReport, EvalError> {
    let demo = load_recording(manifest).map_err(|e| EvalError::Corpus(e.to_string()))?;
    let task = TaskSpec::load(task_path).map_err(|e| EvalError::Corpus(e.to_string()))?;
    let prompt = config
        .prompt
        .resolve(&config.base_dir)
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let strategy = Strategy::new(StrategyKind::CoM, config.ablations[0]);
    let objects: Vec<String> = task.objects.keys().cloned().collect();
    leakage_check(&prompt, &[strategy], &objects, None)?;

    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| EvalError::io(out, e))?;
    let base = base_client(config)?;
    let client = match config.backend.kind {
        super::BackendKind::Mock => {
            let path = config
                .backend
                .mock
                .clone()
                .unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("mock.json"));
            let script = MockScript::load(&path).map_err(|e| EvalError::Backend(e.to_string()))?;
            let mock = MockBackend::new(script).map_err(|e| EvalError::Backend(e.to_string()))?;
            base.with_backend(Arc::new(mock))
        }
        _ => base,
    };

    let demo_name = manifest
        .parent()
        .and_then(Path::file_name)
        .map_or_else(|| manifest.display().to_string(), |n| n.to_string_lossy().into_owned());
    let mut report = PipelineReport {
        demo: demo_name,
        task: task.task,
        strategy: strategy.to_string(),
        stages: Vec::new(),
        plan: None,
        program: None,
        diagnostics: Vec::new(),
        failure_event: None,
        verdict: None,
        success: false,
    };
    let stage = |name: &str, status, detail: Option<String>| StageRecord {
        stage: name.into(),
        status,
        detail,
    };
    let finish = |report: &mut PipelineReport, from: &[&str]| {
        for name in from {
            report.stages.push(stage(name, StageStatus::Skipped, None));
        }
    };
    let downstream = ["program", "parse", "validate", "interpret", "check"];

    let chain = match run_strategy(&strategy, &demo, &prompt, &client, 0) {
        Ok(c) => c,
        Err(e) => {
            report.stages.push(stage("analysis", StageStatus::Failed, Some(e.to_string())));
            finish(&mut report, &downstream);
            return save(report, out, None);
        }
    };
    write(
        &out.join("analysis.json"),
        &(serde_json::to_string_pretty(&chain).expect("chain serializes") + "\n"),
    )?;
    report.diagnostics = chain.diagnostics.clone();
    match &chain.plan {
        Some(plan) => {
            report.plan = Some(plan.render());
            report.stages.push(stage("analysis", StageStatus::Ok, None));
        }
        None => {
            report
                .stages
                .push(stage("analysis", StageStatus::Failed, Some("no plan in final answer".into())));
            finish(&mut report, &downstream);
            return save(report, out, None);
        }
    }

    let source = match generate_program(&chain, &api_description(), &client, 0) {
        Ok(s) => s,
        Err(e) => {
            report.stages.push(stage("program", StageStatus::Failed, Some(e.to_string())));
            finish(&mut report, &downstream[1..]);
            return save(report, out, None);
        }
    };
    write(&out.join("program.py"), &source)?;
    report.program = Some(source.clone());
    report.stages.push(stage("program", StageStatus::Ok, None));

    let run = run_program(&source, &task, &config.interpreter);
    report.stages.extend(run.stages.iter().cloned());
    report.diagnostics.extend(run.diagnostics.iter().map(ToString::to_string));
    if let Some(exec) = &run.execution {
        report.failure_event = exec.trace.first_failure().map(ToString::to_string);
    }
    report.success = run.success();
    report.verdict = run.verdict.clone();
    save(report, out, run.execution.as_ref().map(|e| &e.trace))
}

fn save(
    report: PipelineReport,
    out: &Path,
    trace: Option<&EventTrace>,
) -> Result<PipelineReport, EvalError> {
    write(
        &out.join("trace.jsonl"),
        &trace.map(EventTrace::to_jsonl).unwrap_or_default(),
    )?;
    write(
        &out.join("report.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    Ok(report)
}

//! Prompt construction and the query strategies that turn a recording into a
//! task plan: four single-query baselines and the staged chain, which
//! analyzes force, then hand pose, then images, each stage conditioned on the
//! answers before it.

mod codegen;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Message, Part, Role, VlmClient};
use crate::demo::{DemoError, MultimodalDemo};
use crate::modality::{Modality, ModalitySet};
use crate::plan::{parse_plan, ActionPlan, PlanError, PlanMetrics};

pub use codegen::{api_description, generate_program, strip_code_fences, PROGRAM_TAG};
pub use prompt::{
    action_set_description, build_prompt, check_leakage, data_parts, section_heading, Layout,
    PromptConfig, PromptExample, PromptSettings, FINAL_MARKER,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("prompt configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error("stage {stage}: {source}")]
    Backend {
        stage: usize,
        #[source]
        source: BackendError,
    },
    #[error("prompt leakage: {0}")]
    Leakage(String),
    #[error("backend returned an empty program")]
    EmptyProgram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "merg", alias = "merged")]
    Merged,
    #[serde(rename = "merg-sep")]
    MergSep,
    #[serde(rename = "sep-merg")]
    SepMerg,
    #[serde(rename = "sep-sep")]
    SepSep,
    #[serde(rename = "com", alias = "CoM")]
    CoM,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Merged,
        StrategyKind::MergSep,
        StrategyKind::SepMerg,
        StrategyKind::SepSep,
        StrategyKind::CoM,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Merged => "Merg",
            StrategyKind::MergSep => "Merg-Sep",
            StrategyKind::SepMerg => "Sep-Merg",
            StrategyKind::SepSep => "Sep-Sep",
            StrategyKind::CoM => "CoM",
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            StrategyKind::Merged | StrategyKind::MergSep => Layout::Interleaved,
            _ => Layout::Grouped,
        }
    }

    /// Whether the single response must carry one section per modality.
    pub fn separate_answers(self) -> bool {
        matches!(self, StrategyKind::MergSep | StrategyKind::SepSep)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "merg" | "merged" => Ok(StrategyKind::Merged),
            "mergsep" => Ok(StrategyKind::MergSep),
            "sepmerg" => Ok(StrategyKind::SepMerg),
            "sepsep" => Ok(StrategyKind::SepSep),
            "com" | "chainofmodality" | "ours" => Ok(StrategyKind::CoM),
            _ => Err(format!("unknown strategy '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub modalities: ModalitySet,
}

impl Strategy {
    pub fn new(kind: StrategyKind, modalities: ModalitySet) -> Self {
        Self { kind, modalities }
    }

    pub fn com() -> Self {
        Self::new(StrategyKind::CoM, ModalitySet::ALL)
    }

    /// Analysis queries one run issues.
    pub fn query_count(&self) -> usize {
        match self.kind {
            StrategyKind::CoM => self.modalities.len(),
            _ => 1,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.kind, self.modalities.label())
    }
}

/// Tag opening the user turn of a stage query; stable across runs.
pub fn stage_tag(index: usize, total: usize, modality: Modality) -> String {
    format!("Stage {}/{total}: {modality}", index + 1)
}

/// Tag opening the user turn of a single-query strategy.
pub fn strategy_tag(kind: StrategyKind) -> String {
    format!("Strategy: {}", kind.label())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAnalysis {
    /// Modality analyzed in this stage; `None` for single-query strategies.
    pub modality: Option<Modality>,
    pub digest: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub strategy: Strategy,
    pub sample: u32,
    pub stages: Vec<StageAnalysis>,
    pub final_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ActionPlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    pub query_count: usize,
}

impl ChainResult {
    /// All stage responses joined, for code generation.
    pub fn analysis_text(&self) -> String {
        self.stages
            .iter()
            .map(|s| s.response.trim_end())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Splits `response` at the final-plan marker. Returns the plan text and any
/// format problems. Headings are only checked when `sections` is given.
fn plan_section(response: &str, sections: Option<ModalitySet>) -> (String, Vec<String>) {
    let mut issues = Vec::new();
    // ASCII lowercasing keeps byte offsets valid for slicing `response`.
    let lower = response.to_ascii_lowercase();
    let marker = FINAL_MARKER.trim_end_matches(':').to_ascii_lowercase();
    let heading_pos = |needle: &str| {
        lower
            .split('\n')
            .scan(0usize, |off, line| {
                let start = *off;
                *off += line.len() + 1;
                Some((start, line))
            })
            .find(|(_, line)| {
                line.trim_start_matches(|c: char| c == '#' || c == '*' || c.is_whitespace())
                    .starts_with(needle)
            })
            .map(|(start, _)| start)
    };
    let final_at = heading_pos(&marker);
    if let Some(required) = sections {
        for m in required.iter() {
            let h = section_heading(m).trim_end_matches(':').to_ascii_lowercase();
            match (heading_pos(&h), final_at) {
                (Some(at), Some(end)) if at < end => {}
                _ => issues.push(format!("missing '{}' section before the plan", section_heading(m))),
            }
        }
        if final_at.is_none() {
            issues.push(format!("missing '{FINAL_MARKER}' section"));
            return (String::new(), issues);
        }
    }
    let text = match final_at {
        Some(at) => {
            let mut start = at + lower[at..].find(&marker).expect("heading contains marker") + marker.len();
            if response[start..].starts_with(':') {
                start += 1;
            }
            response[start..].to_string()
        }
        None => response.to_string(),
    };
    (text, issues)
}

fn finish(
    strategy: Strategy,
    sample: u32,
    stages: Vec<StageAnalysis>,
    sections: Option<ModalitySet>,
) -> ChainResult {
    let final_text = stages.last().map(|s| s.response.clone()).unwrap_or_default();
    let (plan_text, mut diagnostics) = plan_section(&final_text, sections);
    let plan = if plan_text.trim().is_empty() {
        if diagnostics.is_empty() {
            diagnostics.push("response contains no plan".into());
        }
        None
    } else {
        match parse_plan(&plan_text) {
            Ok(parsed) => {
                diagnostics.extend(parsed.diagnostics.iter().map(ToString::to_string));
                Some(parsed.plan)
            }
            Err(PlanError::NoSteps { diagnostics: d }) => {
                diagnostics.extend(d.iter().map(ToString::to_string));
                diagnostics.push("no action could be parsed".into());
                None
            }
            Err(e) => {
                diagnostics.push(e.to_string());
                None
            }
        }
    };
    ChainResult {
        strategy,
        sample,
        query_count: stages.len(),
        stages,
        final_text,
        plan,
        diagnostics,
    }
}

fn check_demo(strategy: &Strategy, demo: &MultimodalDemo) -> Result<(), OrchestratorError> {
    if strategy.modalities.is_empty() {
        return Err(OrchestratorError::Precondition("no modality selected".into()));
    }
    if demo.frames.len() < 2 {
        return Err(OrchestratorError::Precondition(
            "recording needs at least 2 frames".into(),
        ));
    }
    if strategy.modalities.contains(Modality::Hand) && !demo.has_hands() {
        return Err(OrchestratorError::Precondition(
            "strategy uses hand poses but the recording has none".into(),
        ));
    }
    Ok(())
}

/// Runs one strategy on one recording. `sample` selects the trial.
pub fn run_strategy(
    strategy: &Strategy,
    demo: &MultimodalDemo,
    config: &PromptConfig,
    client: &VlmClient,
    sample: u32,
) -> Result<ChainResult, OrchestratorError> {
    check_demo(strategy, demo)?;
    let kind = strategy.kind;
    let mods = strategy.modalities;
    let prefix = build_prompt(config, mods, kind.layout())?;
    let backend_err = |stage| move |source| OrchestratorError::Backend { stage, source };

    if kind != StrategyKind::CoM {
        let mut parts = vec![Part::text(strategy_tag(kind))];
        parts.extend(data_parts(demo, config.keyframes, mods, kind.layout())?);
        let instruction = if kind.separate_answers() {
            let headings: Vec<String> = mods.iter().map(section_heading).collect();
            format!(
                "Analyze each modality on its own under the headings {}, then write the \
                 combined plan after `{FINAL_MARKER}`.",
                headings.join(", ")
            )
        } else {
            format!("Analyze the recording and write the plan after `{FINAL_MARKER}`.")
        };
        parts.push(Part::text(instruction));
        let mut conversation = prefix;
        conversation.push(Message::new(Role::User, parts));
        let done = client
            .complete_sample(&conversation, sample)
            .map_err(backend_err(0))?;
        let stage = StageAnalysis {
            modality: None,
            digest: done.digest,
            response: done.text,
        };
        let sections = kind.separate_answers().then_some(mods);
        return Ok(finish(*strategy, sample, vec![stage], sections));
    }

    let total = mods.len();
    let mut stages: Vec<StageAnalysis> = Vec::with_capacity(total);
    for (i, m) in mods.iter().enumerate() {
        let mut conversation = prefix.clone();
        for (j, prior) in stages.iter().enumerate() {
            let pm = prior.modality.expect("chain stages carry a modality");
            conversation.push(Message::user(format!(
                "{} (data shown earlier)",
                stage_tag(j, total, pm)
            )));
            conversation.push(Message::assistant(prior.response.clone()));
        }
        let mut parts = vec![Part::text(stage_tag(i, total, m))];
        parts.extend(data_parts(
            demo,
            config.keyframes,
            ModalitySet::new([m]).expect("one modality"),
            Layout::Grouped,
        )?);
        let instruction = if i + 1 == total {
            format!(
                "Refine the previous analysis with the {m} data, then write the final plan \
                 after `{FINAL_MARKER}`."
            )
        } else if i == 0 {
            format!("Analyze the {m} data: when actions start and stop, and how many there are.")
        } else {
            format!("Refine the previous analysis with the {m} data.")
        };
        parts.push(Part::text(instruction));
        conversation.push(Message::new(Role::User, parts));
        let done = client
            .complete_sample(&conversation, sample)
            .map_err(backend_err(i))?;
        stages.push(StageAnalysis {
            modality: Some(m),
            digest: done.digest,
            response: done.text,
        });
    }
    Ok(finish(*strategy, sample, stages, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u32,
    pub metrics: PlanMetrics,
    /// Set when the trial produced no usable plan or hit an error.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: Vec<TrialOutcome>,
    pub accuracy: f64,
    pub similarity: f64,
}

impl TrialSummary {
    pub fn from_trials(trials: Vec<TrialOutcome>) -> Self {
        let n = trials.len().max(1) as f64;
        let accuracy = trials
            .iter()
            .filter(|t| t.metrics.exact_match)
            .count() as f64
            / n;
        let similarity = trials.iter().map(|t| t.metrics.similarity).sum::<f64>() / n;
        Self {
            trials,
            accuracy,
            similarity,
        }
    }
}

/// Runs `n_trials` independent samples and scores each against `ground_truth`.
pub fn run_trials(
    strategy: &Strategy,
    demo: &MultimodalDemo,
    ground_truth: &ActionPlan,
    config: &PromptConfig,
    client: &VlmClient,
    n_trials: u32,
) -> Result<TrialSummary, OrchestratorError> {
    if n_trials == 0 {
        return Err(OrchestratorError::Precondition("n_trials must be at least 1".into()));
    }
    if ground_truth.steps.is_empty() {
        return Err(OrchestratorError::Precondition("ground-truth plan is empty".into()));
    }
    check_demo(strategy, demo)?;
    let mut trials = Vec::with_capacity(n_trials as usize);
    for trial in 0..n_trials {
        let outcome = match run_strategy(strategy, demo, config, client, trial) {
            Ok(chain) => {
                let metrics = chain
                    .plan
                    .as_ref()
                    .and_then(|p| PlanMetrics::score(p, ground_truth).ok());
                TrialOutcome {
                    trial,
                    failed: metrics.is_none(),
                    metrics: metrics.unwrap_or(PlanMetrics::FAILED),
                    error: None,
                    chain: Some(chain),
                }
            }
            Err(e @ (OrchestratorError::Precondition(_) | OrchestratorError::Config(_))) => {
                return Err(e)
            }
            Err(e) => {
                log::warn!("{strategy} trial {trial}: {e}");
                TrialOutcome {
                    trial,
                    metrics: PlanMetrics::FAILED,
                    failed: true,
                    error: Some(e.to_string()),
                    chain: None,
                }
            }
        };
        trials.push(outcome);
    }
    Ok(TrialSummary::from_trials(trials))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::{DecodingSettings, ScriptedBackend, TranscriptLog};

    fn client(responses: &[&str]) -> (VlmClient, Arc<TranscriptLog>) {
        let log = Arc::new(TranscriptLog::in_memory());
        let c = VlmClient::new(
            Arc::new(ScriptedBackend::new(responses.iter().copied())),
            DecodingSettings::default(),
        )
        .with_transcript(log.clone());
        (c, log)
    }

    fn demo() -> MultimodalDemo {
        PromptExample::builtin().demo
    }

    #[test]
    fn chain_issues_one_query_per_modality_and_carries_answers() {
        let (c, log) = client(&["force says two pushes", "hands say grasp", "Final plan:\nGrasp(left)"]);
        let r = run_strategy(&Strategy::com(), &demo(), &PromptConfig::default(), &c, 0).unwrap();
        assert_eq!(r.query_count, 3);
        let entries = log.entries();
        assert_eq!(entries.len(), 3);
        let order: Vec<_> = r.stages.iter().map(|s| s.modality.unwrap()).collect();
        assert_eq!(order, [Modality::Force, Modality::Hand, Modality::Image]);
        for (i, e) in entries.iter().enumerate() {
            assert_eq!(e.digest, r.stages[i].digest);
        }
        let second: String = entries[1].request.iter().map(Message::text).collect();
        assert!(second.contains("force says two pushes"));
        let third: String = entries[2].request.iter().map(Message::text).collect();
        assert!(third.contains("hands say grasp"));
        assert_eq!(r.plan.unwrap().steps.len(), 1);
    }

    #[test]
    fn single_query_strategies() {
        for kind in [StrategyKind::Merged, StrategyKind::SepMerg] {
            let (c, log) = client(&["Grasp(right, apple, 60)"]);
            let r = run_strategy(&Strategy::new(kind, ModalitySet::ALL), &demo(), &PromptConfig::default(), &c, 0).unwrap();
            assert_eq!((r.query_count, log.len()), (1, 1));
            assert!(r.plan.is_some(), "{kind}");
        }
    }

    #[test]
    fn separate_answers_require_sections() {
        let strategy = Strategy::new(StrategyKind::SepSep, ModalitySet::ALL);
        let (c, _) = client(&["Grasp(right)"]);
        let r = run_strategy(&strategy, &demo(), &PromptConfig::default(), &c, 0).unwrap();
        assert!(r.plan.is_none());
        assert!(!r.diagnostics.is_empty());

        let full = "Force analysis: one push\nHand analysis: closes\nImage analysis: apple\nFinal plan:\nGrasp(right)";
        let (c, _) = client(&[full]);
        let r = run_strategy(&strategy, &demo(), &PromptConfig::default(), &c, 0).unwrap();
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        assert_eq!(r.plan.unwrap().steps.len(), 1);
    }

    #[test]
    fn ablation_omits_force_series() {
        let (c, log) = client(&["a", "Final plan:\nRelease(left)"]);
        let s = Strategy::new(StrategyKind::CoM, ModalitySet::parse("w.o. force").unwrap());
        run_strategy(&s, &demo(), &PromptConfig::default(), &c, 0).unwrap();
        for e in log.entries() {
            for m in &e.request {
                assert!(m.parts.iter().all(|p| !matches!(p, Part::Series { .. })));
            }
        }
    }

    #[test]
    fn trial_mean_and_flags() {
        let gt = parse_plan("Grasp(right)").unwrap().plan;
        let (c, _) = client(&["Grasp(right)", "nothing useful", "Grasp(right)"]);
        let s = Strategy::new(StrategyKind::Merged, ModalitySet::ALL);
        let summary = run_trials(&s, &demo(), &gt, &PromptConfig::default(), &c, 3).unwrap();
        assert!((summary.accuracy - 0.6667).abs() < 1e-4);
        assert!(summary.trials[1].failed);
        assert!(run_trials(&s, &demo(), &gt, &PromptConfig::default(), &c, 0).is_err());
    }

    #[test]
    fn backend_errors_carry_stage() {
        let (c, _) = client(&["only one"]);
        match run_strategy(&Strategy::com(), &demo(), &PromptConfig::default(), &c, 0) {
            Err(OrchestratorError::Backend { stage: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.label().parse::<StrategyKind>().unwrap(), k);
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::aliases::snake_case;
use crate::backend::{Message, Part, Role, FORCE_LABEL};
use crate::demo::{select_keyframes, MultimodalDemo, RecordingManifest};
use crate::modality::{Modality, ModalitySet};
use crate::numfmt;
use crate::plan::ActionPlan;
use crate::skills::{Role as ParamRole, Skill};

const DEFAULT_FORCE: &str = "One value per keyframe in [0, 1], derived from forearm muscle \
activity or from the sound of the interaction. Values near 0 mean no effort; a rise marks the \
moment force is applied and the level indicates how hard.";
const DEFAULT_HAND: &str = "Pixel coordinates (x, y) of the thumb and middle fingertips of each \
hand per keyframe, origin at the top-left of the image. A hand may be not visible.";
const DEFAULT_IMAGE: &str = "RGB keyframes of the scene in time order.";

const EXAMPLE_MANIFEST: &str = include_str!("../../data/example/manifest.json");
const EXAMPLE_ANALYSIS: &str = include_str!("../../data/example/analysis.txt");
const EXAMPLE_OBJECTS: [&str; 2] = ["apple", "can"];

/// Marker line that introduces the plan in a response.
pub const FINAL_MARKER: &str = "Final plan:";

/// Heading a response uses for one modality's separate analysis.
pub fn section_heading(m: Modality) -> String {
    let name = m.as_str();
    let mut c = name.chars();
    let first = c.next().map(|f| f.to_ascii_uppercase()).unwrap_or_default();
    format!("{first}{} analysis:", c.as_str())
}

/// How modality data is laid out inside one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Per keyframe, one part for each active modality.
    Interleaved,
    /// One contiguous block per modality.
    Grouped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptExample {
    pub demo: MultimodalDemo,
    pub analysis: String,
    /// Objects appearing in the example; must be disjoint from evaluation objects.
    pub objects: Vec<String>,
}

impl PromptExample {
    /// Bundled example: a hand placing an apple into a can.
    pub fn builtin() -> Self {
        let manifest: RecordingManifest =
            serde_json::from_str(EXAMPLE_MANIFEST).expect("bundled example manifest parses");
        Self {
            demo: MultimodalDemo::from_manifest(manifest).expect("bundled example is valid"),
            analysis: EXAMPLE_ANALYSIS.trim_end().to_string(),
            objects: EXAMPLE_OBJECTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptConfig {
    pub force_description: String,
    pub hand_description: String,
    pub image_description: String,
    pub action_set: String,
    pub example: PromptExample,
    /// Keyframe budget per recording; clamped to the frame count.
    pub keyframes: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            force_description: DEFAULT_FORCE.into(),
            hand_description: DEFAULT_HAND.into(),
            image_description: DEFAULT_IMAGE.into(),
            action_set: action_set_description(),
            example: PromptExample::builtin(),
            keyframes: 8,
        }
    }
}

impl PromptConfig {
    pub fn description(&self, m: Modality) -> &str {
        match m {
            Modality::Force => &self.force_description,
            Modality::Hand => &self.hand_description,
            Modality::Image => &self.image_description,
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.keyframes < 2 {
            return Err(OrchestratorError::Config(format!(
                "keyframe budget must be at least 2, got {}",
                self.keyframes
            )));
        }
        if self.example.demo.frames.len() < 2 {
            return Err(OrchestratorError::Config(
                "example recording needs at least 2 frames".into(),
            ));
        }
        if self.example.analysis.trim().is_empty() {
            return Err(OrchestratorError::Config("example analysis is empty".into()));
        }
        Ok(())
    }
}

/// `[prompt]` section of a configuration file. Unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSettings {
    pub force_description: Option<String>,
    pub hand_description: Option<String>,
    pub image_description: Option<String>,
    pub action_set: Option<String>,
    pub example_manifest: Option<PathBuf>,
    pub example_analysis: Option<PathBuf>,
    pub example_objects: Option<Vec<String>>,
    pub keyframes: Option<usize>,
}

impl PromptSettings {
    /// Builds a config, resolving relative paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<PromptConfig, OrchestratorError> {
        let mut config = PromptConfig::default();
        let set = |slot: &mut String, value: &Option<String>| {
            if let Some(v) = value {
                *slot = v.clone();
            }
        };
        set(&mut config.force_description, &self.force_description);
        set(&mut config.hand_description, &self.hand_description);
        set(&mut config.image_description, &self.image_description);
        set(&mut config.action_set, &self.action_set);
        if let Some(k) = self.keyframes {
            config.keyframes = k;
        }
        match (&self.example_manifest, &self.example_analysis, &self.example_objects) {
            (None, None, None) => {}
            (Some(manifest), Some(analysis), Some(objects)) => {
                let demo = crate::demo::load_recording(&base.join(manifest))?;
                let path = base.join(analysis);
                let analysis = std::fs::read_to_string(&path).map_err(|e| {
                    OrchestratorError::Config(format!("{}: {e}", path.display()))
                })?;
                config.example = PromptExample {
                    demo,
                    analysis: analysis.trim_end().to_string(),
                    objects: objects.clone(),
                };
            }
            _ => {
                return Err(OrchestratorError::Config(
                    "example_manifest, example_analysis and example_objects go together".into(),
                ))
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn param_name(role: ParamRole) -> &'static str {
    match role {
        ParamRole::Hand => "hand",
        ParamRole::Object => "object",
        ParamRole::Target => "target",
        ParamRole::Direction => "direction",
        ParamRole::Degrees => "degrees",
        ParamRole::Force => "force",
    }
}

/// Skill signatures in plan syntax, optional parameters in brackets.
pub fn action_set_description() -> String {
    let mut out = String::from("Actions, one per line, positional arguments:\n");
    for skill in Skill::ALL {
        let args: Vec<String> = skill
            .signature()
            .iter()
            .map(|p| {
                let n = param_name(p.role);
                if p.optional {
                    format!("[{n}]")
                } else {
                    n.to_string()
                }
            })
            .collect();
        out.push_str(&format!("- {}({})\n", skill.name(), args.join(", ")));
    }
    out.push_str(
        "Parameters:\n\
         - hand: left or right\n\
         - object, target: snake_case object name\n\
         - direction: clockwise, counterclockwise, up, down or toward\n\
         - degrees: positive rotation angle\n\
         - force: integer from 0 (none) to 100 (maximum)\n\
         Repeated steps may be written as `for _ in range(N):` followed by an indented body.",
    );
    out
}

fn system_message(config: &PromptConfig, modalities: ModalitySet) -> Message {
    let mut text = String::from(
        "You analyze recordings of a person performing a manipulation task and recover the \
         sequence of actions with their parameters.\n",
    );
    for m in modalities.iter() {
        text.push_str(&format!("\n## Modality: {m}\n{}\n", config.description(m)));
    }
    text.push_str(&format!("\n## Action set\n{}\n", config.action_set));
    text.push_str(&format!(
        "\n## Output\nEnd every answer with a line reading `{FINAL_MARKER}` followed by the \
         plan, one action per line."
    ));
    Message::system(text)
}

/// Data parts for `demo` restricted to `modalities`, laid out as requested.
pub fn data_parts(
    demo: &MultimodalDemo,
    keyframes: usize,
    modalities: ModalitySet,
    layout: Layout,
) -> Result<Vec<Part>, OrchestratorError> {
    let k = keyframes.min(demo.frames.len());
    let set = select_keyframes(demo, k)?;
    let image = |idx: usize| {
        let frame = &demo.frames[idx];
        Part::image(demo.image_ref(frame), demo.image_path(frame))
    };
    let mut parts = Vec::new();
    match layout {
        Layout::Interleaved => {
            for (j, kf) in set.keyframes.iter().enumerate() {
                parts.push(Part::text(format!(
                    "Keyframe {j} (frame {}, t = {} s)",
                    kf.index,
                    numfmt::fixed(kf.timestamp_s, 2)
                )));
                for m in modalities.iter() {
                    parts.push(match m {
                        Modality::Force => Part::series(FORCE_LABEL, vec![kf.force]),
                        Modality::Hand => Part::HandPose {
                            label: "hands".into(),
                            pose: kf.hands,
                        },
                        Modality::Image => image(kf.index),
                    });
                }
            }
        }
        Layout::Grouped => {
            let frames: Vec<String> = set.keyframes.iter().map(|k| k.index.to_string()).collect();
            for m in modalities.iter() {
                parts.push(Part::text(format!(
                    "{m} at keyframes (frames {})",
                    frames.join(", ")
                )));
                match m {
                    Modality::Force => parts.push(Part::series(
                        FORCE_LABEL,
                        set.keyframes.iter().map(|k| k.force).collect(),
                    )),
                    Modality::Hand => parts.extend(set.keyframes.iter().map(|k| Part::HandPose {
                        label: format!("frame {}", k.index),
                        pose: k.hands,
                    })),
                    Modality::Image => parts.extend(set.keyframes.iter().map(|k| image(k.index))),
                }
            }
        }
    }
    Ok(parts)
}

/// System prompt plus the example exchange, identical for identical inputs.
pub fn build_prompt(
    config: &PromptConfig,
    modalities: ModalitySet,
    layout: Layout,
) -> Result<Vec<Message>, OrchestratorError> {
    config.validate()?;
    let mut parts = vec![Part::text("Example recording.")];
    parts.extend(data_parts(&config.example.demo, config.keyframes, modalities, layout)?);
    Ok(vec![
        system_message(config, modalities),
        Message::new(Role::User, parts),
        Message::assistant(config.example.analysis.clone()),
    ])
}

fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    haystack.match_indices(needle).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + needle.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

/// Fails if any evaluation object or object-bearing ground-truth plan line
/// appears in the prompt prefix, or if the example declares an evaluation object.
pub fn check_leakage(
    prompt: &[Message],
    example_objects: &[String],
    eval_objects: &[String],
    ground_truth: Option<&ActionPlan>,
) -> Result<(), OrchestratorError> {
    let text: String = prompt
        .iter()
        .map(|m| m.text().to_lowercase())
        .collect::<Vec<_>>()
        .join("\n");
    let declared: Vec<String> = example_objects.iter().map(|o| snake_case(o)).collect();
    for object in eval_objects {
        let key = snake_case(object);
        if declared.contains(&key) {
            return Err(OrchestratorError::Leakage(format!(
                "evaluation object '{key}' is declared by the prompt example"
            )));
        }
        let spaced = key.replace('_', " ");
        if contains_word(&text, &key) || contains_word(&text, &spaced) {
            return Err(OrchestratorError::Leakage(format!(
                "evaluation object '{key}' appears in the prompt"
            )));
        }
    }
    if let Some(gt) = ground_truth {
        // Object-free steps such as `Release(right)` say nothing task-specific.
        for step in gt.steps.iter().filter(|s| s.object.is_some()) {
            let line = step.to_string().to_lowercase();
            if text.contains(&line) {
                return Err(OrchestratorError::Leakage(format!(
                    "ground-truth step '{step}' appears in the prompt"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_example_loads() {
        let ex = PromptExample::builtin();
        assert_eq!(ex.demo.frames.len(), 6);
        assert!(ex.analysis.contains(FINAL_MARKER));
    }

    #[test]
    fn sections_follow_active_modalities() {
        let config = PromptConfig::default();
        let all = build_prompt(&config, ModalitySet::ALL, Layout::Grouped).unwrap();
        assert_eq!(all[0].text().matches("## Modality:").count(), 3);
        assert_eq!(all[2].role, Role::Assistant);

        let image_only = ModalitySet::parse("image-only").unwrap();
        let p = build_prompt(&config, image_only, Layout::Grouped).unwrap();
        let sys = p[0].text();
        assert!(sys.contains("## Modality: image"));
        assert!(!sys.contains("## Modality: force") && !sys.contains("## Modality: hand"));
        assert!(p[1].parts.iter().all(|part| part.modality() != Some(Modality::Force)));
    }

    #[test]
    fn interleaved_alternates_grouped_is_contiguous() {
        let demo = PromptExample::builtin().demo;
        let mods = |parts: &[Part]| -> Vec<Modality> {
            parts.iter().filter_map(Part::modality).collect()
        };
        let inter = mods(&data_parts(&demo, 4, ModalitySet::ALL, Layout::Interleaved).unwrap());
        assert_eq!(inter.len(), 12);
        for chunk in inter.chunks(3) {
            assert_eq!(chunk, [Modality::Force, Modality::Hand, Modality::Image]);
        }
        let grouped = mods(&data_parts(&demo, 4, ModalitySet::ALL, Layout::Grouped).unwrap());
        let mut runs = grouped.clone();
        runs.dedup();
        assert_eq!(runs, [Modality::Force, Modality::Hand, Modality::Image]);
    }

    #[test]
    fn leakage_scan_uses_word_boundaries() {
        let prompt = vec![Message::system("place the apple in the tin can")];
        let ex = vec!["apple".to_string()];
        assert!(check_leakage(&prompt, &ex, &["cap".into()], None).is_ok());
        assert!(check_leakage(&prompt, &ex, &["tin_can".into()], None).is_err());
        assert!(check_leakage(&prompt, &ex, &["apple".into()], None).is_err());
    }

    #[test]
    fn settings_require_full_example() {
        let s = PromptSettings {
            example_objects: Some(vec!["x".into()]),
            ..PromptSettings::default()
        };
        assert!(s.resolve(Path::new(".")).is_err());
        let s = PromptSettings {
            keyframes: Some(1),
            ..PromptSettings::default()
        };
        assert!(s.resolve(Path::new(".")).is_err());
    }
}

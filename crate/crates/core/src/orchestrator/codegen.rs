use super::{ChainResult, OrchestratorError};
use crate::backend::{Message, Part, Role, VlmClient};
use crate::skills::{Role as ParamRole, Skill};

/// Tag opening the user turn of a program request.
pub const PROGRAM_TAG: &str = "Program request";

fn skill_doc(skill: Skill) -> &'static str {
    match skill {
        Skill::Grasp => "Close the gripper on `object`, or on the nearest object when omitted.",
        Skill::Release => "Open the gripper.",
        Skill::Twist => "Rotate the wrist; a held object turns with it.",
        Skill::MoveTo => "Move the gripper to `target`, holding `force` on contact.",
        Skill::Insert => "Insert the held object into `target`.",
        Skill::PushTowards => "Push the gripper toward `target`.",
        Skill::Hit => "Strike `target` once.",
        Skill::Press => "Press down on `target`.",
        Skill::Wipe => "Sweep the gripper across `target`.",
        Skill::Find => "Return the location of `object`.",
    }
}

/// Skill API in Python stub form.
pub fn api_description() -> String {
    let mut out = String::new();
    for skill in Skill::ALL {
        let params: Vec<String> = skill
            .signature()
            .iter()
            .map(|p| {
                let name = match p.role {
                    ParamRole::Hand => "hand",
                    ParamRole::Object => "object",
                    ParamRole::Target => "target",
                    ParamRole::Direction => "direction",
                    ParamRole::Degrees => "degrees",
                    ParamRole::Force => "force",
                };
                if p.optional {
                    format!("{name}=None")
                } else {
                    name.to_string()
                }
            })
            .collect();
        out.push_str(&format!(
            "def {}({}):\n    \"\"\"{}\"\"\"\n\n",
            skill.name(),
            params.join(", "),
            skill_doc(skill)
        ));
    }
    out.push_str(
        "# hand: 'left' or 'right'. force: integer in [0, 100].\n\
         # direction: 'clockwise', 'counterclockwise', 'up', 'down' or 'toward'.\n\
         # target: an object name or Find('name').\n",
    );
    out
}

/// Contents of the first fenced code block, or the whole text without fences.
pub fn strip_code_fences(text: &str) -> String {
    let mut lines = text.lines();
    let mut body = Vec::new();
    if text.contains("```") {
        for line in lines.by_ref() {
            if line.trim_start().starts_with("```") {
                break;
            }
        }
        for line in lines {
            if line.trim_start().starts_with("```") {
                break;
            }
            body.push(line);
        }
    } else {
        body.extend(lines);
    }
    let joined = body.join("\n");
    let trimmed = joined.trim_matches('\n').trim_end();
    if trimmed.is_empty() {
        String::new()
    } else {
        format!("{trimmed}\n")
    }
}

/// Asks for a skill program implementing the analyzed task. Returns the raw
/// program source for the DSL parser.
pub fn generate_program(
    analysis: &ChainResult,
    api: &str,
    client: &VlmClient,
    sample: u32,
) -> Result<String, OrchestratorError> {
    if analysis.stages.is_empty() {
        return Err(OrchestratorError::Precondition(
            "analysis has no stage responses".into(),
        ));
    }
    let mut parts = vec![
        Part::text(PROGRAM_TAG),
        Part::text(format!("Task analysis:\n{}", analysis.analysis_text())),
    ];
    if let Some(plan) = &analysis.plan {
        parts.push(Part::text(format!("Extracted plan:\n{}", plan.render())));
    }
    let names: Vec<&str> = Skill::ALL.iter().map(|s| s.name()).collect();
    parts.push(Part::text(format!(
        "Continue this program. Use only skill calls and `for _ in range(N):` loops.\n\
         from skills import {}\n",
        names.join(", ")
    )));
    let conversation = vec![
        Message::system(format!(
            "You write robot programs from task analyses using this API:\n\n{api}"
        )),
        Message::new(Role::User, parts),
    ];
    let stage = analysis.stages.len();
    let done = client
        .complete_sample(&conversation, sample)
        .map_err(|source| OrchestratorError::Backend { stage, source })?;
    let program = strip_code_fences(&done.text);
    if program.is_empty() {
        return Err(OrchestratorError::EmptyProgram);
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::{DecodingSettings, ScriptedBackend};
    use crate::modality::ModalitySet;
    use crate::orchestrator::{StageAnalysis, Strategy};

    fn chain() -> ChainResult {
        ChainResult {
            strategy: Strategy::com(),
            sample: 0,
            stages: vec![StageAnalysis {
                modality: None,
                digest: "d".into(),
                response: "twist three times".into(),
            }],
            final_text: "twist three times".into(),
            plan: None,
            diagnostics: vec![],
            query_count: 1,
        }
    }

    fn client(response: &str) -> VlmClient {
        VlmClient::new(
            Arc::new(ScriptedBackend::new([response])),
            DecodingSettings::default(),
        )
    }

    #[test]
    fn fences_are_stripped() {
        assert_eq!(strip_code_fences("```python\nGrasp('left')\n```\nDone."), "Grasp('left')\n");
        assert_eq!(strip_code_fences("Grasp('left')"), "Grasp('left')\n");
        assert_eq!(strip_code_fences("```\n```"), "");
    }

    #[test]
    fn empty_response_is_an_error() {
        let r = generate_program(&chain(), &api_description(), &client("  \n"), 0);
        assert!(matches!(r, Err(OrchestratorError::EmptyProgram)));
    }

    #[test]
    fn needs_an_analysis() {
        let mut c = chain();
        c.stages.clear();
        c.strategy.modalities = ModalitySet::ALL;
        assert!(matches!(
            generate_program(&c, "", &client("x"), 0),
            Err(OrchestratorError::Precondition(_))
        ));
    }

    #[test]
    fn api_lists_every_skill() {
        let api = api_description();
        assert!(api.contains("def Grasp(hand, object=None, force=None):"));
        assert!(api.contains("def Insert(hand, target, force):"));
        assert_eq!(api.matches("def ").count(), Skill::ALL.len());
    }
}

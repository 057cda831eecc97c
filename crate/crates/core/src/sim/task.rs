use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Delta, EventTrace, GripperState, ObjectKind, ObjectState, SimError, Thresholds, WorldState};
use crate::skills::{Hand, Skill};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    OpeningBottle,
    InsertingPlug,
    WipingBoard,
    PlayingDrum,
    PressingCube,
}

impl TaskId {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::OpeningBottle => "opening_bottle",
            TaskId::InsertingPlug => "inserting_plug",
            TaskId::WipingBoard => "wiping_board",
            TaskId::PlayingDrum => "playing_drum",
            TaskId::PressingCube => "pressing_cube",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessSpec {
    /// Net counterclockwise rotation applied to `object` while held.
    Rotate { object: String, min_rotation_deg: f64 },
    /// `object` ends inserted into `target` by an insertion of at least `min_force`.
    Insert {
        object: String,
        target: String,
        min_force: u8,
    },
    /// Every mark in the workspace is cleared.
    ClearMarks,
    /// Struck beats match `forces` in count and, element-wise, within the band.
    Beats { target: String, forces: Vec<u8> },
    /// Presses match `forces` in count and, element-wise, within the band.
    Presses { target: String, forces: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task: TaskId,
    pub objects: BTreeMap<String, ObjectState>,
    pub grippers: BTreeMap<Hand, GripperState>,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub success: SuccessSpec,
}

impl TaskSpec {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidTask(format!("{}: {e}", path.display())))?;
        let spec: TaskSpec = serde_json::from_str(&text)
            .map_err(|e| SimError::InvalidTask(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidTask(m));
        let expected = match &self.success {
            SuccessSpec::Rotate { .. } => TaskId::OpeningBottle,
            SuccessSpec::Insert { .. } => TaskId::InsertingPlug,
            SuccessSpec::ClearMarks => TaskId::WipingBoard,
            SuccessSpec::Beats { .. } => TaskId::PlayingDrum,
            SuccessSpec::Presses { .. } => TaskId::PressingCube,
        };
        if expected != self.task {
            return bad(format!("task {} cannot use a {expected} predicate", self.task));
        }
        for h in Hand::BOTH {
            if !self.grippers.contains_key(&h) {
                return bad(format!("missing {h} gripper"));
            }
        }
        let t = &self.thresholds;
        if !(t.grasp_radius_m > 0.0 && t.insert_radius_m > 0.0 && t.wipe_radius_m > 0.0) {
            return bad("radii must be positive".into());
        }
        let need = |name: &String| match self.objects.contains_key(name) {
            true => Ok(()),
            false => bad(format!("predicate references unknown object '{name}'")),
        };
        match &self.success {
            SuccessSpec::Rotate {
                object,
                min_rotation_deg,
            } => {
                need(object)?;
                if *min_rotation_deg <= 0.0 {
                    return bad("min_rotation_deg must be positive".into());
                }
            }
            SuccessSpec::Insert {
                object,
                target,
                min_force,
            } => {
                need(object)?;
                need(target)?;
                if *min_force == 0 || *min_force > 100 {
                    return bad("min_force must be in 1..=100".into());
                }
            }
            SuccessSpec::ClearMarks => {
                if !self.objects.values().any(|o| o.kind == ObjectKind::Mark) {
                    return bad("wiping task has no marks".into());
                }
            }
            SuccessSpec::Beats { target, forces } | SuccessSpec::Presses { target, forces } => {
                need(target)?;
                if forces.is_empty() || forces.iter().any(|f| *f > 100) {
                    return bad("force pattern must be non-empty and within 0..=100".into());
                }
            }
        }
        Ok(())
    }

    pub fn initial_world(&self) -> WorldState {
        WorldState {
            objects: self.objects.clone(),
            grippers: self.grippers.clone(),
            thresholds: self.thresholds.clone(),
            beats: 0,
        }
    }
}

/// Coarse label for a force on the 0-100 scale.
pub fn force_band(force: u8) -> &'static str {
    match force {
        0..=33 => "low",
        34..=66 => "mid",
        _ => "high",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub task: TaskId,
    pub success: bool,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl fmt::Display for SuccessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.success { "success" } else { "failure" };
        write!(f, "{}: {verdict} ({})", self.task, self.summary)?;
        for d in &self.details {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

fn pattern_report(
    task: TaskId,
    noun: &str,
    observed: &[u8],
    expected: &[u8],
    band: u8,
) -> SuccessReport {
    let mut details = Vec::new();
    let mut success = true;
    let summary = if observed.len() != expected.len() {
        success = false;
        format!(
            "{noun} count mismatch: got {}, expected {}",
            observed.len(),
            expected.len()
        )
    } else {
        format!("{} {noun}s", observed.len())
    };
    for (i, (&got, &want)) in observed.iter().zip(expected).enumerate() {
        let ok = got.abs_diff(want) <= band;
        success &= ok;
        details.push(format!(
            "{noun} {i}: force {got} ({}) expected {want} ({}) {}",
            force_band(got),
            force_band(want),
            if ok { "ok" } else { "outside band" }
        ));
    }
    SuccessReport {
        task,
        success,
        summary,
        details,
    }
}

/// Evaluates the task's success predicate over a finished run.
pub fn check_success(
    spec: &TaskSpec,
    trace: &EventTrace,
    world: &WorldState,
) -> Result<SuccessReport, SimError> {
    if !world.objects.keys().eq(spec.objects.keys()) {
        return Err(SimError::TaskMismatch(format!(
            "world objects do not match task {}",
            spec.task
        )));
    }
    for d in trace.deltas() {
        let name = match d {
            Delta::ObjectMoved { object, .. }
            | Delta::ObjectRotated { object, .. }
            | Delta::Inserted { object, .. } => object,
            Delta::Beat { target, .. } | Delta::Pressed { target, .. } => target,
            Delta::MarkCleared { mark } => mark,
            _ => continue,
        };
        if !spec.objects.contains_key(name) {
            return Err(SimError::TaskMismatch(format!(
                "trace references '{name}', unknown to task {}",
                spec.task
            )));
        }
    }
    let task = spec.task;
    let band = spec.thresholds.force_band;
    let report = match &spec.success {
        SuccessSpec::Rotate {
            object,
            min_rotation_deg,
        } => {
            let total: f64 = trace
                .deltas()
                .filter_map(|d| match d {
                    Delta::ObjectRotated {
                        object: o,
                        delta_deg,
                        ..
                    } if o == object => Some(*delta_deg),
                    _ => None,
                })
                .sum();
            SuccessReport {
                task,
                success: total >= *min_rotation_deg,
                summary: format!(
                    "{object} rotated {} deg counterclockwise, need {}",
                    crate::plan::format_number(total),
                    crate::plan::format_number(*min_rotation_deg)
                ),
                details: vec![],
            }
        }
        SuccessSpec::Insert {
            object,
            target,
            min_force,
        } => {
            let o = &world.objects[object];
            let inserted = o.inserted && o.insert_target.as_deref() == Some(target.as_str());
            let force = trace
                .events
                .iter()
                .filter(|e| e.outcome.is_ok() && e.skill == Skill::Insert)
                .filter_map(|e| e.applied_force)
                .max();
            let strong = force.is_some_and(|f| f >= *min_force);
            let summary = match (inserted, force) {
                (false, _) => format!("{object} not inserted into {target}"),
                (true, Some(f)) => format!(
                    "{object} inserted into {target} with force {f} ({}), need {min_force}",
                    force_band(f)
                ),
                (true, None) => format!("{object} at {target} without an insertion"),
            };
            SuccessReport {
                task,
                success: inserted && strong,
                summary,
                details: vec![],
            }
        }
        SuccessSpec::ClearMarks => {
            let remaining: Vec<&String> = world
                .objects
                .iter()
                .filter(|(_, o)| o.kind == ObjectKind::Mark && !o.cleared)
                .map(|(n, _)| n)
                .collect();
            SuccessReport {
                task,
                success: remaining.is_empty(),
                summary: format!("{} marks remaining", remaining.len()),
                details: remaining.iter().map(|n| format!("{n} not cleared")).collect(),
            }
        }
        SuccessSpec::Beats { target, forces } => {
            let observed: Vec<u8> = trace
                .deltas()
                .filter_map(|d| match d {
                    Delta::Beat { target: t, force, .. } if t == target => Some(*force),
                    _ => None,
                })
                .collect();
            pattern_report(task, "beat", &observed, forces, band)
        }
        SuccessSpec::Presses { target, forces } => {
            let observed: Vec<u8> = trace
                .deltas()
                .filter_map(|d| match d {
                    Delta::Pressed { target: t, force } if t == target => Some(*force),
                    _ => None,
                })
                .collect();
            pattern_report(task, "press", &observed, forces, band)
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drum() -> TaskSpec {
        serde_json::from_value(serde_json::json!({
            "task": "playing_drum",
            "objects": {"drum": {"position": [0.5, 0.0, 0.0]}},
            "grippers": {"left": {"position": [0.3, 0.2, 0.1]}, "right": {"position": [0.3, -0.2, 0.1]}},
            "success": {"type": "beats", "target": "drum", "forces": [80, 20, 80]}
        }))
        .unwrap()
    }

    fn beats(forces: &[u8]) -> EventTrace {
        let mut t = EventTrace::default();
        for (i, &f) in forces.iter().enumerate() {
            t.push(super::super::Event {
                step: i,
                skill: Skill::Hit,
                args: vec![],
                outcome: super::super::Outcome::Ok,
                applied_force: Some(f),
                deltas: vec![Delta::Beat {
                    index: i,
                    target: "drum".into(),
                    force: f,
                }],
            });
        }
        t
    }

    #[test]
    fn beat_pattern_band() {
        let spec = drum();
        spec.validate().unwrap();
        let w = spec.initial_world();
        assert!(check_success(&spec, &beats(&[95, 5, 61]), &w).unwrap().success);
        let r = check_success(&spec, &beats(&[80, 45, 80]), &w).unwrap();
        assert!(!r.success);
        let r = check_success(&spec, &beats(&[80, 20]), &w).unwrap();
        assert!(r.summary.contains("beat count mismatch"), "{}", r.summary);
    }

    #[test]
    fn mismatched_world_is_reported() {
        let spec = drum();
        let w = WorldState::new(Thresholds::default());
        assert!(matches!(
            check_success(&spec, &EventTrace::default(), &w),
            Err(SimError::TaskMismatch(_))
        ));
    }

    #[test]
    fn predicate_must_match_task() {
        let mut spec = drum();
        spec.task = TaskId::PressingCube;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(force_band(33), "low");
        assert_eq!(force_band(34), "mid");
        assert_eq!(force_band(67), "high");
    }
}

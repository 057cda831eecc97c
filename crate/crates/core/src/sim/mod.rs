//! Kinematic bi-manual workspace.
//!
//! Skills act on named objects and two grippers at the event level: there is
//! no dynamics, collision or contact physics. Each call produces one
//! [`Event`]; a call whose preconditions fail records the reason and leaves
//! the world untouched.

mod task;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aliases::{snake_case, AliasTable};
use crate::skills::{BoundArgs, Hand, Skill, TargetRef};

pub use task::{check_success, force_band, SuccessReport, SuccessSpec, TaskId, TaskSpec};

pub type Vec3 = [f64; 3];

fn distance(a: Vec3, b: Vec3) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("object '{name}' not found{}", suggest(.suggestions))]
    NotFound {
        name: String,
        suggestions: Vec<String>,
    },
    #[error("task/trace mismatch: {0}")]
    TaskMismatch(String),
    #[error("invalid task spec: {0}")]
    InvalidTask(String),
}

fn suggest(names: &[String]) -> String {
    if names.is_empty() {
        String::new()
    } else {
        format!(" (did you mean {}?)", names.join(", "))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    #[default]
    Rigid,
    /// Marker stroke on a surface; cleared by wiping, never grasped.
    Mark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectState {
    pub position: Vec3,
    #[serde(default)]
    pub orientation_deg: f64,
    #[serde(default)]
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached_to: Option<Hand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insert_target: Option<String>,
    #[serde(default)]
    pub inserted: bool,
    #[serde(default)]
    pub cleared: bool,
}

impl ObjectState {
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            orientation_deg: 0.0,
            kind: ObjectKind::Rigid,
            attached_to: None,
            insert_target: None,
            inserted: false,
            cleared: false,
        }
    }

    pub fn mark(position: Vec3) -> Self {
        Self {
            kind: ObjectKind::Mark,
            ..Self::at(position)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperState {
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<String>,
    #[serde(default)]
    pub grip_force: u8,
    #[serde(default)]
    pub wrist_deg: f64,
}

impl GripperState {
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            held: None,
            grip_force: 0,
            wrist_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub grasp_radius_m: f64,
    pub insert_radius_m: f64,
    /// Minimum insertion force on the 0-100 scale.
    pub insert_force: u8,
    pub wipe_radius_m: f64,
    /// Half-width of the accepted force band in beat and press patterns.
    pub force_band: u8,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            grasp_radius_m: 0.05,
            insert_radius_m: 0.03,
            insert_force: 80,
            wipe_radius_m: 0.15,
            force_band: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub objects: BTreeMap<String, ObjectState>,
    pub grippers: BTreeMap<Hand, GripperState>,
    pub thresholds: Thresholds,
    /// Number of drum beats struck so far.
    pub beats: usize,
}

/// Resolves object names to positions. The default implementation reads the
/// world registry; a perception-backed locator can honor the same contract.
pub trait Locator: Send + Sync {
    fn locate(&self, world: &WorldState, name: &str) -> Result<Vec3, SimError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RegistryLocator;

impl Locator for RegistryLocator {
    fn locate(&self, world: &WorldState, name: &str) -> Result<Vec3, SimError> {
        world.find(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Delta {
    GripperMoved { hand: Hand, to: Vec3 },
    ObjectMoved { object: String, to: Vec3 },
    Held { hand: Hand, object: Option<String> },
    GripForce { hand: Hand, force: u8 },
    WristRotated { hand: Hand, delta_deg: f64 },
    ObjectRotated { object: String, delta_deg: f64, orientation_deg: f64 },
    Inserted { object: String, target: String },
    Beat { index: usize, target: String, force: u8 },
    Pressed { target: String, force: u8 },
    MarkCleared { mark: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Failure { reason: String },
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    pub skill: Skill,
    pub args: Vec<String>,
    pub outcome: Outcome,
    /// Force commanded by the call, when it carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied_force: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<Delta>,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {}({})", self.step, self.skill, self.args.join(", "))?;
        match &self.outcome {
            Outcome::Ok => Ok(()),
            Outcome::Failure { reason } => write!(f, " failed: {reason}"),
        }
    }
}

/// Append-only event log with strictly increasing step indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventTrace {
    pub events: Vec<Event>,
}

impl EventTrace {
    pub fn push(&mut self, event: Event) {
        if let Some(last) = self.events.last() {
            assert!(event.step > last.step, "event steps must strictly increase");
        }
        self.events.push(event);
    }

    pub fn next_step(&self) -> usize {
        self.events.last().map_or(0, |e| e.step + 1)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_failure(&self) -> Option<&Event> {
        self.events.iter().find(|e| !e.outcome.is_ok())
    }

    pub fn deltas(&self) -> impl Iterator<Item = &Delta> {
        self.events
            .iter()
            .filter(|e| e.outcome.is_ok())
            .flat_map(|e| e.deltas.iter())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            let line = serde_json::to_string(e).expect("event serializes");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

/// A validated skill invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillCall {
    pub skill: Skill,
    pub args: BoundArgs,
}

impl SkillCall {
    fn display_args(&self) -> Vec<String> {
        let a = &self.args;
        let mut out = Vec::new();
        out.extend(a.hand.map(|h| h.to_string()));
        out.extend(a.target.as_ref().map(|t| match t {
            TargetRef::Name(n) => n.clone(),
            TargetRef::Find(n) => format!("Find({n})"),
        }));
        out.extend(a.direction.map(|d| d.to_string()));
        out.extend(a.degrees.map(crate::plan::format_number));
        out.extend(a.force.map(|f| f.to_string()));
        out
    }
}

struct Failure(String);

impl<S: Into<String>> From<S> for Failure {
    fn from(s: S) -> Self {
        Failure(s.into())
    }
}

impl WorldState {
    pub fn new(thresholds: Thresholds) -> Self {
        let grippers = Hand::BOTH
            .into_iter()
            .map(|h| (h, GripperState::at([0.0; 3])))
            .collect();
        Self {
            objects: BTreeMap::new(),
            grippers,
            thresholds,
            beats: 0,
        }
    }

    pub fn with_object(mut self, name: &str, object: ObjectState) -> Self {
        self.objects.insert(name.to_string(), object);
        self
    }

    pub fn with_gripper(mut self, hand: Hand, position: Vec3) -> Self {
        self.grippers.insert(hand, GripperState::at(position));
        self
    }

    pub fn gripper(&self, hand: Hand) -> &GripperState {
        &self.grippers[&hand]
    }

    /// Registry key for `name` after snake-casing and alias resolution.
    pub fn resolve_name(&self, name: &str) -> Option<String> {
        let key = snake_case(name);
        if self.objects.contains_key(&key) {
            return Some(key);
        }
        let aliased = AliasTable::builtin().object(&key);
        self.objects.contains_key(aliased).then(|| aliased.to_string())
    }

    /// Current location of a named object.
    pub fn find(&self, name: &str) -> Result<Vec3, SimError> {
        match self.resolve_name(name) {
            Some(key) => Ok(self.objects[&key].position),
            None => Err(SimError::NotFound {
                name: name.to_string(),
                suggestions: self.nearest_names(name),
            }),
        }
    }

    fn nearest_names(&self, name: &str) -> Vec<String> {
        let key = snake_case(name);
        let mut scored: Vec<(f64, &String)> = self
            .objects
            .keys()
            .map(|k| (strsim::jaro_winkler(&key, k), k))
            .filter(|(s, _)| *s >= 0.7)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        scored.into_iter().take(3).map(|(_, k)| k.clone()).collect()
    }

    /// No object is attached to more than one gripper, and attachment agrees
    /// with each gripper's `held` slot.
    pub fn attachment_consistent(&self) -> bool {
        self.objects.iter().all(|(name, o)| match o.attached_to {
            Some(h) => self.grippers[&h].held.as_deref() == Some(name.as_str()),
            None => self
                .grippers
                .values()
                .all(|g| g.held.as_deref() != Some(name.as_str())),
        })
    }

    /// Applies one call, returning its event. Failed calls leave `self` unchanged.
    pub fn apply(&mut self, call: &SkillCall, step: usize, locator: &dyn Locator) -> Event {
        let mut deltas = Vec::new();
        let outcome = match self.dispatch(call, locator, &mut deltas) {
            Ok(()) => Outcome::Ok,
            Err(Failure(reason)) => {
                deltas.clear();
                Outcome::Failure { reason }
            }
        };
        Event {
            step,
            skill: call.skill,
            args: call.display_args(),
            outcome,
            applied_force: call.args.force.map(|f| f as u8),
            deltas,
        }
    }

    fn target(&self, call: &SkillCall, locator: &dyn Locator) -> Result<(String, Vec3), Failure> {
        let target = call
            .args
            .target
            .as_ref()
            .ok_or_else(|| format!("{} needs a target", call.skill))?;
        let name = target.object_name();
        let pos = locator
            .locate(self, name)
            .map_err(|e| Failure(e.to_string()))?;
        let key = self.resolve_name(name).unwrap_or_else(|| snake_case(name));
        Ok((key, pos))
    }

    fn hand(call: &SkillCall) -> Result<Hand, Failure> {
        call.args
            .hand
            .ok_or_else(|| Failure(format!("{} needs a hand", call.skill)))
    }

    fn dispatch(
        &mut self,
        call: &SkillCall,
        locator: &dyn Locator,
        deltas: &mut Vec<Delta>,
    ) -> Result<(), Failure> {
        match call.skill {
            Skill::Grasp => self.grasp(call, locator, deltas),
            Skill::Release => {
                let hand = Self::hand(call)?;
                let held = self.grippers[&hand].held.clone().ok_or("hand empty")?;
                let g = self.grippers.get_mut(&hand).unwrap();
                g.held = None;
                g.grip_force = 0;
                self.objects.get_mut(&held).unwrap().attached_to = None;
                deltas.push(Delta::Held { hand, object: None });
                deltas.push(Delta::GripForce { hand, force: 0 });
                Ok(())
            }
            Skill::Twist => {
                let hand = Self::hand(call)?;
                let dir = call.args.direction.ok_or("Twist needs a direction")?;
                let sign = dir
                    .rotation_sign()
                    .ok_or_else(|| format!("'{dir}' is not a rotation direction"))?;
                let degrees = call.args.degrees.ok_or("Twist needs degrees")?;
                let delta = sign * degrees;
                let g = self.grippers.get_mut(&hand).unwrap();
                g.wrist_deg += delta;
                deltas.push(Delta::WristRotated {
                    hand,
                    delta_deg: delta,
                });
                if let Some(held) = g.held.clone() {
                    let o = self.objects.get_mut(&held).unwrap();
                    o.orientation_deg += delta;
                    deltas.push(Delta::ObjectRotated {
                        object: held,
                        delta_deg: delta,
                        orientation_deg: o.orientation_deg,
                    });
                }
                Ok(())
            }
            // Guarded moves: stop at the target and record the commanded force.
            Skill::MoveTo | Skill::PushTowards => {
                let hand = Self::hand(call)?;
                let (_, pos) = self.target(call, locator)?;
                self.move_gripper(hand, pos, deltas);
                Ok(())
            }
            Skill::Insert => {
                let hand = Self::hand(call)?;
                let (target, pos) = self.target(call, locator)?;
                let held = self.grippers[&hand].held.clone().ok_or("hand empty")?;
                if held == target {
                    return Err(format!("cannot insert '{held}' into itself").into());
                }
                let d = distance(self.grippers[&hand].position, pos);
                if d > self.thresholds.insert_radius_m {
                    return Err(format!(
                        "target '{target}' out of insert range ({d:.3} m > {} m)",
                        self.thresholds.insert_radius_m
                    )
                    .into());
                }
                let force = call.args.force.ok_or("Insert needs a force")? as u8;
                if force < self.thresholds.insert_force {
                    return Err(format!(
                        "insufficient force ({force} < {})",
                        self.thresholds.insert_force
                    )
                    .into());
                }
                self.grippers.get_mut(&hand).unwrap().grip_force = force;
                deltas.push(Delta::GripForce { hand, force });
                self.move_gripper(hand, pos, deltas);
                let o = self.objects.get_mut(&held).unwrap();
                o.inserted = true;
                o.insert_target = Some(target.clone());
                deltas.push(Delta::Inserted {
                    object: held,
                    target,
                });
                Ok(())
            }
            Skill::Hit => {
                let (target, _) = self.target(call, locator)?;
                let force = call.args.force.ok_or("Hit needs a force")? as u8;
                deltas.push(Delta::Beat {
                    index: self.beats,
                    target,
                    force,
                });
                self.beats += 1;
                Ok(())
            }
            Skill::Press => {
                let hand = Self::hand(call)?;
                let (target, pos) = self.target(call, locator)?;
                let d = distance(self.grippers[&hand].position, pos);
                if d > self.thresholds.grasp_radius_m {
                    return Err(format!("not in contact with '{target}' ({d:.3} m away)").into());
                }
                let force = call.args.force.ok_or("Press needs a force")? as u8;
                deltas.push(Delta::Pressed { target, force });
                Ok(())
            }
            Skill::Wipe => {
                let hand = Self::hand(call)?;
                let (_, pos) = self.target(call, locator)?;
                self.move_gripper(hand, pos, deltas);
                let radius = self.thresholds.wipe_radius_m;
                for (name, o) in self.objects.iter_mut() {
                    if o.kind == ObjectKind::Mark && !o.cleared && distance(o.position, pos) <= radius
                    {
                        o.cleared = true;
                        deltas.push(Delta::MarkCleared { mark: name.clone() });
                    }
                }
                Ok(())
            }
            Skill::Find => {
                self.target(call, locator)?;
                Ok(())
            }
        }
    }

    fn grasp(
        &mut self,
        call: &SkillCall,
        locator: &dyn Locator,
        deltas: &mut Vec<Delta>,
    ) -> Result<(), Failure> {
        let hand = Self::hand(call)?;
        let radius = self.thresholds.grasp_radius_m;
        let gpos = self.grippers[&hand].position;
        let name = match &call.args.target {
            Some(_) => {
                let (name, pos) = self.target(call, locator)?;
                let d = distance(gpos, pos);
                if d > radius {
                    return Err(format!("'{name}' out of reach ({d:.3} m > {radius} m)").into());
                }
                if self.objects.get(&name).map(|o| o.kind) == Some(ObjectKind::Mark) {
                    return Err(format!("cannot grasp mark '{name}'").into());
                }
                name
            }
            None => self
                .objects
                .iter()
                .filter(|(_, o)| o.kind == ObjectKind::Rigid)
                .map(|(n, o)| (distance(gpos, o.position), n))
                .filter(|(d, _)| *d <= radius)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)))
                .map(|(_, n)| n.clone())
                .ok_or("nothing within reach")?,
        };
        let other = self.objects[&name].attached_to;
        if other.is_some_and(|h| h != hand) {
            return Err(format!("'{name}' is held by the other hand").into());
        }
        if let Some(held) = &self.grippers[&hand].held {
            if *held != name {
                return Err(format!("hand already holding '{held}'").into());
            }
        }
        let force = call.args.force.map_or(100, |f| f as u8);
        let g = self.grippers.get_mut(&hand).unwrap();
        g.held = Some(name.clone());
        g.grip_force = force;
        self.objects.get_mut(&name).unwrap().attached_to = Some(hand);
        deltas.push(Delta::Held {
            hand,
            object: Some(name),
        });
        deltas.push(Delta::GripForce { hand, force });
        Ok(())
    }

    fn move_gripper(&mut self, hand: Hand, to: Vec3, deltas: &mut Vec<Delta>) {
        let g = self.grippers.get_mut(&hand).unwrap();
        g.position = to;
        deltas.push(Delta::GripperMoved { hand, to });
        if let Some(held) = g.held.clone() {
            let o = self.objects.get_mut(&held).unwrap();
            if o.position != to {
                o.position = to;
                if o.inserted {
                    o.inserted = false;
                    o.insert_target = None;
                }
                deltas.push(Delta::ObjectMoved { object: held, to });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::Direction;

    fn call(skill: Skill, hand: Option<Hand>, target: Option<&str>) -> SkillCall {
        SkillCall {
            skill,
            args: BoundArgs {
                hand,
                target: target.map(|t| TargetRef::Name(t.into())),
                ..BoundArgs::default()
            },
        }
    }

    fn twist(dir: Direction, deg: f64) -> SkillCall {
        SkillCall {
            skill: Skill::Twist,
            args: BoundArgs {
                hand: Some(Hand::Right),
                direction: Some(dir),
                degrees: Some(deg),
                ..BoundArgs::default()
            },
        }
    }

    fn bottle_world() -> WorldState {
        WorldState::new(Thresholds::default())
            .with_object("bottle", ObjectState::at([0.4, 0.0, 0.10]))
            .with_object("bottle_cap", ObjectState::at([0.4, 0.0, 0.22]))
            .with_gripper(Hand::Right, [0.4, 0.0, 0.22])
    }

    #[test]
    fn find_lookup_and_errors() {
        let w = bottle_world();
        assert_eq!(w.find("bottle").unwrap(), [0.4, 0.0, 0.10]);
        assert_eq!(w.find("cap").unwrap(), [0.4, 0.0, 0.22]);
        match w.find("bottl") {
            Err(SimError::NotFound { suggestions, .. }) => assert_eq!(suggestions[0], "bottle"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(w.find("unicorn"), Err(SimError::NotFound { .. })));
    }

    #[test]
    fn twist_while_holding_rotates_object() {
        let mut w = bottle_world();
        let l = RegistryLocator;
        assert!(w
            .apply(&call(Skill::Grasp, Some(Hand::Right), Some("bottle_cap")), 0, &l)
            .outcome
            .is_ok());
        w.apply(&twist(Direction::Counterclockwise, 180.0), 1, &l);
        assert_eq!(w.objects["bottle_cap"].orientation_deg, 180.0);
        assert_eq!(w.find("bottle_cap").unwrap(), [0.4, 0.0, 0.22]);
    }

    #[test]
    fn twist_without_holding_only_turns_wrist() {
        let mut w = bottle_world();
        let l = RegistryLocator;
        let e = w.apply(&call(Skill::Release, Some(Hand::Right), None), 0, &l);
        assert_eq!(e.outcome, Outcome::Failure { reason: "hand empty".into() });
        let before = w.clone();
        w.apply(&twist(Direction::Clockwise, 180.0), 1, &l);
        assert_eq!(w.objects, before.objects);
        assert_eq!(w.gripper(Hand::Right).wrist_deg, -180.0);
    }

    #[test]
    fn failed_call_leaves_world_unchanged() {
        let mut w = bottle_world();
        let before = w.clone();
        let e = w.apply(
            &call(Skill::Grasp, Some(Hand::Left), Some("bottle")),
            0,
            &RegistryLocator,
        );
        assert!(!e.outcome.is_ok());
        assert!(e.deltas.is_empty());
        assert_eq!(w, before);
    }

    #[test]
    fn insert_checks_force_threshold() {
        let world = WorldState::new(Thresholds::default())
            .with_object("plug", ObjectState::at([0.3, 0.2, 0.05]))
            .with_object("power_strip", ObjectState::at([0.3, 0.21, 0.05]))
            .with_gripper(Hand::Right, [0.3, 0.2, 0.05]);
        let l = RegistryLocator;
        let insert = |force| SkillCall {
            skill: Skill::Insert,
            args: BoundArgs {
                hand: Some(Hand::Right),
                target: Some(TargetRef::Name("power_strip".into())),
                force: Some(force),
                ..BoundArgs::default()
            },
        };
        let mut w = world.clone();
        let e = w.apply(&insert(100), 0, &l);
        assert_eq!(e.outcome, Outcome::Failure { reason: "hand empty".into() });

        w.apply(&call(Skill::Grasp, Some(Hand::Right), Some("plug")), 1, &l);
        let mut weak = w.clone();
        let e = weak.apply(&insert(20), 2, &l);
        assert!(matches!(&e.outcome, Outcome::Failure { reason } if reason.starts_with("insufficient force")));
        assert!(!weak.objects["plug"].inserted);

        let e = w.apply(&insert(100), 2, &l);
        assert!(e.outcome.is_ok(), "{e}");
        assert!(w.objects["plug"].inserted);
        assert_eq!(w.objects["plug"].position, w.objects["power_strip"].position);
    }

    #[test]
    fn attachment_is_exclusive() {
        let mut w = bottle_world().with_gripper(Hand::Left, [0.4, 0.0, 0.22]);
        let l = RegistryLocator;
        w.apply(&call(Skill::Grasp, Some(Hand::Right), None), 0, &l);
        let e = w.apply(&call(Skill::Grasp, Some(Hand::Left), Some("bottle_cap")), 1, &l);
        assert!(!e.outcome.is_ok());
        assert!(w.attachment_consistent());
    }

    #[test]
    fn hits_count_beats() {
        let mut w = WorldState::new(Thresholds::default()).with_object("drum", ObjectState::at([0.5, 0.0, 0.0]));
        let hit = |f| SkillCall {
            skill: Skill::Hit,
            args: BoundArgs {
                target: Some(TargetRef::Name("drum".into())),
                force: Some(f),
                ..BoundArgs::default()
            },
        };
        w.apply(&hit(80), 0, &RegistryLocator);
        let e = w.apply(&hit(20), 1, &RegistryLocator);
        assert_eq!(
            e.deltas,
            vec![Delta::Beat { index: 1, target: "drum".into(), force: 20 }]
        );
    }

    #[test]
    fn wipe_clears_marks_in_radius() {
        let mut w = WorldState::new(Thresholds::default())
            .with_object("board", ObjectState::at([0.5, 0.0, 0.0]))
            .with_object("mark_a", ObjectState::mark([0.55, 0.0, 0.0]))
            .with_object("mark_far", ObjectState::mark([1.5, 0.0, 0.0]));
        w.apply(&call(Skill::Wipe, Some(Hand::Right), Some("board")), 0, &RegistryLocator);
        assert!(w.objects["mark_a"].cleared);
        assert!(!w.objects["mark_far"].cleared);
    }

    #[test]
    #[should_panic(expected = "strictly increase")]
    fn trace_rejects_non_increasing_steps() {
        let mut t = EventTrace::default();
        let e = Event {
            step: 0,
            skill: Skill::Release,
            args: vec![],
            outcome: Outcome::Ok,
            applied_force: None,
            deltas: vec![],
        };
        t.push(e.clone());
        t.push(e);
    }
}

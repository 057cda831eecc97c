//! Skill vocabulary and per-skill positional signatures.
//!
//! Both the plan parser and the program validator bind positional arguments
//! against the same table, so a plan line and a program call with the same
//! arguments always agree on which field each argument fills.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aliases::{snake_case, AliasTable};

/// Upper bound of the integer force scale.
pub const FORCE_MAX: i64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Skill {
    Grasp,
    Release,
    Twist,
    #[serde(rename = "Move_to")]
    MoveTo,
    Insert,
    #[serde(rename = "Push_towards")]
    PushTowards,
    Hit,
    Press,
    Wipe,
    Find,
}

impl Skill {
    pub const ALL: [Skill; 10] = [
        Skill::Grasp,
        Skill::Release,
        Skill::Twist,
        Skill::MoveTo,
        Skill::Insert,
        Skill::PushTowards,
        Skill::Hit,
        Skill::Press,
        Skill::Wipe,
        Skill::Find,
    ];

    /// Name as written in programs, e.g. `Move_to`.
    pub fn name(self) -> &'static str {
        match self {
            Skill::Grasp => "Grasp",
            Skill::Release => "Release",
            Skill::Twist => "Twist",
            Skill::MoveTo => "Move_to",
            Skill::Insert => "Insert",
            Skill::PushTowards => "Push_towards",
            Skill::Hit => "Hit",
            Skill::Press => "Press",
            Skill::Wipe => "Wipe",
            Skill::Find => "Find",
        }
    }

    /// Lowercase token used in canonical plan streams.
    pub fn token(self) -> &'static str {
        match self {
            Skill::Grasp => "grasp",
            Skill::Release => "release",
            Skill::Twist => "twist",
            Skill::MoveTo => "move_to",
            Skill::Insert => "insert",
            Skill::PushTowards => "push_towards",
            Skill::Hit => "hit",
            Skill::Press => "press",
            Skill::Wipe => "wipe",
            Skill::Find => "find",
        }
    }

    /// Exact program-level name lookup (case sensitive, no aliases).
    pub fn from_exact(name: &str) -> Option<Skill> {
        Skill::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Lenient lookup used for plan text: case-insensitive with the alias table applied.
    pub fn from_loose(name: &str, aliases: &AliasTable) -> Option<Skill> {
        let key = snake_case(name);
        let key = aliases.skill(&key);
        Skill::ALL.into_iter().find(|s| s.token() == key)
    }

    pub fn signature(self) -> &'static [Param] {
        const HAND: Param = Param::required(Role::Hand);
        const OBJECT: Param = Param::required(Role::Object);
        const OBJECT_OPT: Param = Param::optional(Role::Object);
        const TARGET: Param = Param::required(Role::Target);
        const DIRECTION: Param = Param::required(Role::Direction);
        const DEGREES: Param = Param::required(Role::Degrees);
        const FORCE: Param = Param::required(Role::Force);
        const FORCE_OPT: Param = Param::optional(Role::Force);
        match self {
            Skill::Grasp => &[HAND, OBJECT_OPT, FORCE_OPT],
            Skill::Release => &[HAND],
            Skill::Twist => &[HAND, DIRECTION, DEGREES],
            Skill::MoveTo => &[HAND, TARGET, FORCE_OPT],
            Skill::Insert => &[HAND, TARGET, FORCE],
            Skill::PushTowards => &[HAND, TARGET, FORCE],
            Skill::Hit => &[TARGET, FORCE],
            Skill::Press => &[HAND, TARGET, FORCE],
            Skill::Wipe => &[HAND, TARGET],
            Skill::Find => &[OBJECT],
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }

    pub fn parse(text: &str, aliases: &AliasTable) -> Option<Hand> {
        match aliases.hand(&snake_case(text)) {
            "left" => Some(Hand::Left),
            "right" => Some(Hand::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Clockwise,
    Counterclockwise,
    Up,
    Down,
    Toward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Clockwise => "clockwise",
            Direction::Counterclockwise => "counterclockwise",
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Toward => "toward",
        }
    }

    pub fn parse(text: &str, aliases: &AliasTable) -> Option<Direction> {
        match aliases.direction(&snake_case(text)) {
            "clockwise" => Some(Direction::Clockwise),
            "counterclockwise" => Some(Direction::Counterclockwise),
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            "toward" => Some(Direction::Toward),
            _ => None,
        }
    }

    /// Sign of a rotation about the vertical axis; counterclockwise is positive.
    pub fn rotation_sign(self) -> Option<f64> {
        match self {
            Direction::Counterclockwise => Some(1.0),
            Direction::Clockwise => Some(-1.0),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Hand,
    /// Object name; never a nested `Find`.
    Object,
    /// Object name or a nested `Find(...)` lookup.
    Target,
    Direction,
    Degrees,
    Force,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Hand => "hand",
            Role::Object => "object",
            Role::Target => "target",
            Role::Direction => "direction",
            Role::Degrees => "degrees",
            Role::Force => "force",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Param {
    pub role: Role,
    pub optional: bool,
}

impl Param {
    const fn required(role: Role) -> Self {
        Self {
            role,
            optional: false,
        }
    }

    const fn optional(role: Role) -> Self {
        Self {
            role,
            optional: true,
        }
    }
}

/// An argument after lexical classification.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Hand(Hand),
    Direction(Direction),
    Int(i64),
    Number(f64),
    Name(String),
    Find(String),
}

impl ArgValue {
    /// Classifies a textual argument (quoted string contents or a bare word).
    pub fn classify_text(text: &str, aliases: &AliasTable) -> ArgValue {
        if let Some(hand) = Hand::parse(text, aliases) {
            return ArgValue::Hand(hand);
        }
        if let Some(dir) = Direction::parse(text, aliases) {
            return ArgValue::Direction(dir);
        }
        ArgValue::Name(snake_case(text))
    }

    fn fits(&self, role: Role) -> bool {
        matches!(
            (role, self),
            (Role::Hand, ArgValue::Hand(_))
                | (Role::Object, ArgValue::Name(_))
                | (Role::Target, ArgValue::Name(_) | ArgValue::Find(_))
                | (Role::Direction, ArgValue::Direction(_))
                | (Role::Degrees, ArgValue::Int(_) | ArgValue::Number(_))
                | (Role::Force, ArgValue::Int(_))
        )
    }

    fn describe(&self) -> String {
        match self {
            ArgValue::Hand(h) => format!("hand '{h}'"),
            ArgValue::Direction(d) => format!("direction '{d}'"),
            ArgValue::Int(v) => format!("integer {v}"),
            ArgValue::Number(v) => format!("number {v}"),
            ArgValue::Name(n) => format!("name '{n}'"),
            ArgValue::Find(n) => format!("Find('{n}')"),
        }
    }
}

/// Object reference produced by binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetRef {
    Name(String),
    Find(String),
}

impl TargetRef {
    pub fn object_name(&self) -> &str {
        match self {
            TargetRef::Name(n) | TargetRef::Find(n) => n,
        }
    }
}

/// Positional arguments resolved to named fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundArgs {
    pub hand: Option<Hand>,
    pub target: Option<TargetRef>,
    pub direction: Option<Direction>,
    pub degrees: Option<f64>,
    pub force: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BindError {
    #[error("{skill}: missing required {role} argument")]
    Missing { skill: Skill, role: Role },
    #[error("{skill}: argument {position} ({found}) does not fit parameter {role}")]
    Mismatch {
        skill: Skill,
        position: usize,
        role: Role,
        found: String,
    },
    #[error("{skill}: too many arguments (expected at most {max}, got {got})")]
    TooMany { skill: Skill, max: usize, got: usize },
    #[error("{skill}: force {value} outside [0, {FORCE_MAX}]")]
    ForceOutOfRange { skill: Skill, value: i64 },
    #[error("{skill}: degrees must be positive, got {value}")]
    NonPositiveDegrees { skill: Skill, value: f64 },
}

/// Binds positional arguments to `skill`'s signature and checks value bounds.
///
/// Optional parameters are skipped when the next argument does not fit them,
/// so `Grasp(right, 100)` binds 100 as the force.
pub fn bind(skill: Skill, args: &[ArgValue]) -> Result<BoundArgs, BindError> {
    let params = skill.signature();
    let mut bound = BoundArgs::default();
    let mut next = 0;
    for param in params {
        let arg = args.get(next);
        match arg {
            Some(arg) if arg.fits(param.role) => {
                assign(&mut bound, param.role, arg);
                next += 1;
            }
            _ if param.optional => {}
            Some(arg) => {
                return Err(BindError::Mismatch {
                    skill,
                    position: next + 1,
                    role: param.role,
                    found: arg.describe(),
                })
            }
            None => return Err(BindError::Missing { skill, role: param.role }),
        }
    }
    if next < args.len() {
        return Err(BindError::TooMany {
            skill,
            max: params.len(),
            got: args.len(),
        });
    }
    if let Some(force) = bound.force {
        if !(0..=FORCE_MAX).contains(&force) {
            return Err(BindError::ForceOutOfRange { skill, value: force });
        }
    }
    if let Some(deg) = bound.degrees {
        if !deg.is_finite() || deg <= 0.0 {
            return Err(BindError::NonPositiveDegrees { skill, value: deg });
        }
    }
    Ok(bound)
}

fn assign(bound: &mut BoundArgs, role: Role, arg: &ArgValue) {
    match (role, arg) {
        (Role::Hand, ArgValue::Hand(h)) => bound.hand = Some(*h),
        (Role::Object | Role::Target, ArgValue::Name(n)) => {
            bound.target = Some(TargetRef::Name(n.clone()))
        }
        (Role::Target, ArgValue::Find(n)) => bound.target = Some(TargetRef::Find(n.clone())),
        (Role::Direction, ArgValue::Direction(d)) => bound.direction = Some(*d),
        (Role::Degrees, ArgValue::Int(v)) => bound.degrees = Some(*v as f64),
        (Role::Degrees, ArgValue::Number(v)) => bound.degrees = Some(*v),
        (Role::Force, ArgValue::Int(v)) => bound.force = Some(*v),
        _ => unreachable!("assign called with a non-fitting argument"),
    }
}

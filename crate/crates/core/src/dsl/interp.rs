use std::fmt;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Arg, Program, Stmt};
use crate::aliases::{snake_case, AliasTable};
use crate::sim::{EventTrace, Locator, RegistryLocator, SkillCall, WorldState};
use crate::skills::{bind, ArgValue, Skill};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    /// Stop at the first failed call; the trace ends with the failure event.
    #[default]
    Halt,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretOptions {
    /// Upper bound on calls after loop unrolling, checked before anything runs.
    pub max_unrolled: usize,
    pub policy: FailurePolicy,
}

impl Default for InterpretOptions {
    fn default() -> Self {
        Self {
            max_unrolled: 1000,
            policy: FailurePolicy::Halt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("program failed validation: {}", join(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("program unrolls to {count} calls, limit is {limit}")]
    UnrollLimit { count: u128, limit: usize },
}

fn join(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub trace: EventTrace,
    /// Step of the failure that stopped execution under [`FailurePolicy::Halt`].
    pub halted_at: Option<usize>,
}

impl Execution {
    pub fn failures(&self) -> usize {
        self.trace
            .events
            .iter()
            .filter(|e| !e.outcome.is_ok())
            .count()
    }
}

enum Instr {
    Call(SkillCall),
    Loop(u64, Vec<Instr>),
}

/// Static checks against the skill registry. An empty result means valid.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    match lower(program) {
        Ok(_) => Vec::new(),
        Err(diags) => diags,
    }
}

fn lower(program: &Program) -> Result<Vec<Instr>, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let instrs = lower_block(&program.body, AliasTable::builtin(), &mut diags);
    if diags.is_empty() {
        Ok(instrs)
    } else {
        Err(diags)
    }
}

fn lower_block(stmts: &[Stmt], aliases: &AliasTable, diags: &mut Vec<Diagnostic>) -> Vec<Instr> {
    let mut out = Vec::new();
    for s in stmts {
        match s {
            Stmt::Call { skill, args, line } => {
                let mut push = |message: String| {
                    diags.push(Diagnostic {
                        line: *line,
                        message,
                    })
                };
                match lower_call(skill, args, aliases) {
                    Ok(call) => out.push(Instr::Call(call)),
                    Err(message) => push(message),
                }
            }
            Stmt::Loop { count, body, .. } => {
                out.push(Instr::Loop(*count, lower_block(body, aliases, diags)));
            }
        }
    }
    out
}

fn lower_call(name: &str, args: &[Arg], aliases: &AliasTable) -> Result<SkillCall, String> {
    let skill = Skill::from_exact(name).ok_or_else(|| format!("unknown skill '{name}'"))?;
    let mut values = Vec::with_capacity(args.len());
    for a in args {
        let v = match a {
            Arg::Str(s) => ArgValue::classify_text(s, aliases),
            Arg::Int(v) => ArgValue::Int(*v),
            Arg::Find(inner) => match inner.as_slice() {
                [Arg::Str(s)] => ArgValue::Find(snake_case(s)),
                _ => return Err("Find expects a single string argument".into()),
            },
        };
        if matches!(&v, ArgValue::Name(n) | ArgValue::Find(n) if n.is_empty()) {
            return Err(format!("{skill}: empty object name"));
        }
        values.push(v);
    }
    let args = bind(skill, &values).map_err(|e| e.to_string())?;
    Ok(SkillCall { skill, args })
}

/// Runs `program` against `world` using the world's own object registry.
pub fn interpret(
    program: &Program,
    world: &mut WorldState,
    options: &InterpretOptions,
) -> Result<Execution, InterpretError> {
    interpret_with(program, world, options, &RegistryLocator)
}

/// Validates, bounds and executes `program`. Nothing runs unless every check passes.
pub fn interpret_with(
    program: &Program,
    world: &mut WorldState,
    options: &InterpretOptions,
    locator: &dyn Locator,
) -> Result<Execution, InterpretError> {
    let instrs = lower(program).map_err(InterpretError::Invalid)?;
    let count = program.unrolled_len();
    if count > options.max_unrolled as u128 {
        return Err(InterpretError::UnrollLimit {
            count,
            limit: options.max_unrolled,
        });
    }
    let mut exec = Execution {
        trace: EventTrace::default(),
        halted_at: None,
    };
    let _ = run(&instrs, world, options.policy, locator, &mut exec);
    Ok(exec)
}

fn run(
    instrs: &[Instr],
    world: &mut WorldState,
    policy: FailurePolicy,
    locator: &dyn Locator,
    exec: &mut Execution,
) -> ControlFlow<()> {
    for instr in instrs {
        match instr {
            Instr::Call(call) => {
                let step = exec.trace.next_step();
                let event = world.apply(call, step, locator);
                let failed = !event.outcome.is_ok();
                log::debug!("{event}");
                exec.trace.push(event);
                if failed && policy == FailurePolicy::Halt {
                    exec.halted_at = Some(step);
                    return ControlFlow::Break(());
                }
            }
            Instr::Loop(count, body) => {
                for _ in 0..*count {
                    run(body, world, policy, locator, exec)?;
                }
            }
        }
    }
    ControlFlow::Continue(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::sim::{ObjectState, Outcome, Thresholds};
    use crate::skills::Hand;

    fn diags(src: &str) -> Vec<String> {
        validate(&parse_program(src).unwrap())
            .into_iter()
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn validation_diagnostics() {
        assert!(diags("Move_to('left', Find('bottle'))\nGrasp('left')").is_empty());
        assert_eq!(diags("Frobnicate('left')"), vec!["unknown skill 'Frobnicate'"]);
        assert!(diags("Grasp('right', 'plug', 150)")[0].contains("force 150 outside"));
        assert!(diags("Twist('up', 'ccw', 180)")[0].contains("does not fit parameter hand"));
        assert!(diags("Insert('right', 'power_strip')")[0].contains("missing required force"));
        assert!(diags("Move_to('left', Find('a', 'b'))")[0].contains("single string"));
        assert!(diags("Grasp('right', Find('plug'))")[0].contains("Grasp"));
    }

    #[test]
    fn every_diagnostic_has_its_line() {
        let d = validate(&parse_program("Grasp('left')\nfor _ in range(2):\n    Nope()\n").unwrap());
        assert_eq!(d[0].line, 3);
    }

    fn drum_world() -> WorldState {
        WorldState::new(Thresholds::default()).with_object("drum", ObjectState::at([0.5, 0.0, 0.0]))
    }

    #[test]
    fn unroll_limit_checked_before_running() {
        let p = parse_program("Hit('drum', 10)\nfor _ in range(1000000000):\n    Hit('drum', 10)\n").unwrap();
        let mut w = drum_world();
        let before = w.clone();
        let err = interpret(&p, &mut w, &InterpretOptions::default()).unwrap_err();
        assert!(matches!(err, InterpretError::UnrollLimit { count: 1_000_000_001, limit: 1000 }));
        assert_eq!(w, before);
    }

    #[test]
    fn empty_program_empty_trace() {
        let mut w = drum_world();
        let before = w.clone();
        let exec = interpret(&Program::default(), &mut w, &InterpretOptions::default()).unwrap();
        assert!(exec.trace.is_empty());
        assert_eq!(w, before);
    }

    #[test]
    fn insert_before_grasp_halts() {
        let mut w = WorldState::new(Thresholds::default())
            .with_object("power_strip", ObjectState::at([0.0; 3]))
            .with_gripper(Hand::Right, [0.0; 3]);
        let p = parse_program("Insert('right', 'power_strip', 100)\nRelease('right')").unwrap();
        let exec = interpret(&p, &mut w, &InterpretOptions::default()).unwrap();
        assert_eq!(exec.trace.len(), 1);
        assert_eq!(exec.halted_at, Some(0));
        assert_eq!(
            exec.trace.events[0].outcome,
            Outcome::Failure { reason: "hand empty".into() }
        );

        let opts = InterpretOptions {
            policy: FailurePolicy::Continue,
            ..InterpretOptions::default()
        };
        let exec = interpret(&p, &mut w, &opts).unwrap();
        assert_eq!((exec.trace.len(), exec.failures(), exec.halted_at), (2, 2, None));
    }
}

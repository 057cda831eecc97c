//! Restricted skill-program language.
//!
//! Programs are Python-shaped but admit only skill calls, `for _ in range(N):`
//! loops, comments and `from skills import ...` headers. Everything else is
//! rejected while parsing, so no source text ever reaches an evaluator.
//!
//! ```
//! use com_core::dsl::{parse_program, validate};
//!
//! let program = parse_program("for _ in range(2):\n    Hit('drum', 80)\n").unwrap();
//! assert!(validate(&program).is_empty());
//! assert_eq!(program.unrolled_len(), 2);
//! ```

mod interp;
mod lexer;
mod parser;

use std::fmt;

pub use interp::{
    interpret, interpret_with, validate, Diagnostic, Execution, FailurePolicy, InterpretError,
    InterpretOptions,
};
pub use parser::{parse_program, ParseError, MAX_LOOP_DEPTH};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Str(String),
    Int(i64),
    /// `Find(...)`, the only call allowed in argument position.
    Find(Vec<Arg>),
}

/// A statement with its 1-based source line. Equality ignores the line.
#[derive(Debug, Clone, Eq)]
pub enum Stmt {
    Call {
        skill: String,
        args: Vec<Arg>,
        line: usize,
    },
    Loop {
        count: u64,
        body: Vec<Stmt>,
        line: usize,
    },
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Stmt::Call { skill, args, .. },
                Stmt::Call {
                    skill: s2,
                    args: a2,
                    ..
                },
            ) => skill == s2 && args == a2,
            (
                Stmt::Loop { count, body, .. },
                Stmt::Loop {
                    count: c2,
                    body: b2,
                    ..
                },
            ) => count == c2 && body == b2,
            _ => false,
        }
    }
}

impl Stmt {
    pub fn line(&self) -> usize {
        match self {
            Stmt::Call { line, .. } | Stmt::Loop { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    /// Names from `from skills import ...` headers, in source order.
    pub imports: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Program {
    /// Number of calls executed once every loop is unrolled (saturating).
    pub fn unrolled_len(&self) -> u128 {
        unrolled(&self.body)
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }
}

fn unrolled(stmts: &[Stmt]) -> u128 {
    stmts.iter().fold(0u128, |acc, s| {
        let n = match s {
            Stmt::Call { .. } => 1,
            Stmt::Loop { count, body, .. } => unrolled(body).saturating_mul(*count as u128),
        };
        acc.saturating_add(n)
    })
}

fn write_str_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Arg]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Str(s) => write_str_literal(f, s),
            Arg::Int(v) => write!(f, "{v}"),
            Arg::Find(args) => {
                f.write_str("Find(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
        }
    }
}

fn write_block(f: &mut fmt::Formatter<'_>, stmts: &[Stmt], depth: usize) -> fmt::Result {
    for s in stmts {
        let pad = "    ".repeat(depth);
        match s {
            Stmt::Call { skill, args, .. } => {
                write!(f, "{pad}{skill}(")?;
                write_args(f, args)?;
                writeln!(f, ")")?;
            }
            Stmt::Loop { count, body, .. } => {
                writeln!(f, "{pad}for _ in range({count}):")?;
                write_block(f, body, depth + 1)?;
            }
        }
    }
    Ok(())
}

/// Canonical source: single quotes, four-space indentation, no comments.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.imports.is_empty() {
            writeln!(f, "from skills import {}", self.imports.join(", "))?;
        }
        write_block(f, &self.body, 0)
    }
}

use thiserror::Error;

use super::lexer::{lex_line, split_indent, Tok, TokKind};
use super::{Arg, Program, Stmt};
use crate::skills::Skill;

pub const MAX_LOOP_DEPTH: usize = 2;

const KEYWORDS: [&str; 35] = [
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Lexical {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: indentation error: {message}")]
    Indentation { line: usize, message: String },
    #[error("line {line}, column {column}: {construct} is not allowed")]
    Disallowed {
        line: usize,
        column: usize,
        construct: String,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Lexical { line, .. }
            | ParseError::Indentation { line, .. }
            | ParseError::Disallowed { line, .. }
            | ParseError::Syntax { line, .. } => *line,
        }
    }
}

struct Line {
    number: usize,
    indent: usize,
    toks: Vec<Tok>,
}

enum Parsed {
    Import(Vec<String>),
    Call(Stmt),
    LoopHeader(u64),
}

/// Parses program source into an AST, rejecting anything outside the grammar.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut lines = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let number = i + 1;
        let raw = if i == 0 {
            raw.trim_start_matches('\u{feff}')
        } else {
            raw
        };
        let (indent, rest) = split_indent(raw, number)?;
        let toks = lex_line(rest, number, indent)?;
        if !toks.is_empty() {
            lines.push(Line {
                number,
                indent,
                toks,
            });
        }
    }
    let mut parser = Parser {
        lines,
        pos: 0,
        imports: Vec::new(),
    };
    let body = parser.block(0, 0)?;
    if let Some(line) = parser.lines.get(parser.pos) {
        return Err(ParseError::Indentation {
            line: line.number,
            message: "dedent does not match any outer indentation level".into(),
        });
    }
    Ok(Program {
        imports: parser.imports,
        body,
    })
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
    imports: Vec<String>,
}

impl Parser {
    fn block(&mut self, indent: usize, depth: usize) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while let Some(line) = self.lines.get(self.pos) {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                let message = if out.is_empty() {
                    "unexpected indent"
                } else {
                    "dedent does not match any outer indentation level"
                };
                return Err(ParseError::Indentation {
                    line: line.number,
                    message: message.into(),
                });
            }
            let number = line.number;
            let parsed = statement(line)?;
            self.pos += 1;
            match parsed {
                Parsed::Import(names) => {
                    if depth > 0 {
                        return Err(ParseError::Disallowed {
                            line: number,
                            column: indent + 1,
                            construct: "import inside a loop".into(),
                        });
                    }
                    self.imports.extend(names);
                }
                Parsed::Call(stmt) => out.push(stmt),
                Parsed::LoopHeader(count) => {
                    if depth >= MAX_LOOP_DEPTH {
                        return Err(ParseError::Disallowed {
                            line: number,
                            column: indent + 1,
                            construct: format!("loop nesting deeper than {MAX_LOOP_DEPTH}"),
                        });
                    }
                    let body_indent = match self.lines.get(self.pos) {
                        Some(next) if next.indent > indent => next.indent,
                        _ => {
                            return Err(ParseError::Indentation {
                                line: number,
                                message: "expected an indented block after loop header".into(),
                            })
                        }
                    };
                    let body = self.block(body_indent, depth + 1)?;
                    if let Some(next) = self.lines.get(self.pos) {
                        if next.indent > indent && next.indent < body_indent {
                            return Err(ParseError::Indentation {
                                line: next.number,
                                message: "dedent does not match any outer indentation level"
                                    .into(),
                            });
                        }
                    }
                    out.push(Stmt::Loop {
                        count,
                        body,
                        line: number,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Token cursor over one line.
struct Cursor<'a> {
    line: usize,
    toks: &'a [Tok],
    pos: usize,
    /// Column just past the last token, for end-of-line errors.
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        let end_col = line.toks.last().map_or(1, |t| t.col + 1);
        Self {
            line: line.number,
            toks: &line.toks,
            pos: 0,
            end_col,
        }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokKind> {
        self.peek().map(|t| &t.kind)
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn col(&self) -> usize {
        self.peek().map_or(self.end_col, |t| t.col)
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.col(),
            message: message.into(),
        }
    }

    fn disallowed(&self, construct: impl Into<String>) -> ParseError {
        ParseError::Disallowed {
            line: self.line,
            column: self.col(),
            construct: construct.into(),
        }
    }

    /// Error for the token under the cursor, naming the construct it starts.
    fn unexpected(&self, in_call: bool) -> ParseError {
        let Some(tok) = self.peek() else {
            return self.syntax(if in_call {
                "unclosed '('"
            } else {
                "unexpected end of line"
            });
        };
        match &tok.kind {
            TokKind::Op(c) => {
                let next = self.toks.get(self.pos + 1).map(|t| &t.kind);
                self.disallowed(op_construct(*c, next, in_call))
            }
            TokKind::Ident(w) if is_keyword(w) => self.disallowed(format!("'{w}' keyword")),
            TokKind::Ident(w) => self.syntax(format!("unexpected name '{w}'")),
            TokKind::Str(_) => self.syntax("unexpected string"),
            TokKind::Int(_) => self.syntax("unexpected integer"),
            TokKind::LParen => self.syntax("unexpected '('"),
            TokKind::RParen => self.syntax("unexpected ')'"),
            TokKind::Comma => self.disallowed("tuple expression"),
            TokKind::Colon => self.syntax("unexpected ':'"),
        }
    }

    fn expect(&mut self, want: &TokKind, in_call: bool) -> Result<(), ParseError> {
        if self.peek_kind() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(in_call))
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        match self.peek_kind() {
            Some(TokKind::Ident(w)) => {
                self.pos += 1;
                Some(w)
            }
            _ => None,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

fn op_construct(c: char, next: Option<&TokKind>, in_call: bool) -> String {
    let s = match (c, next) {
        ('=', Some(TokKind::Op('='))) => "comparison",
        ('=', _) if in_call => "keyword argument",
        ('=', _) => "assignment",
        ('+' | '-' | '*' | '/' | '%', Some(TokKind::Op('='))) => "augmented assignment",
        ('+' | '-' | '*' | '/' | '%', _) => "arithmetic",
        ('.', _) => "attribute access",
        ('[' | ']', _) => "list literal or subscript",
        ('{' | '}', _) => "dict or set literal",
        ('<' | '>' | '!', _) => "comparison",
        ('&' | '|' | '^' | '~', _) => "bitwise operator",
        ('@', _) => "decorator",
        (';', _) => "statement separator",
        ('\\', _) => "line continuation",
        _ => "operator",
    };
    s.to_string()
}

fn statement(line: &Line) -> Result<Parsed, ParseError> {
    let mut cur = Cursor::new(line);
    let first = match cur.peek_kind() {
        Some(TokKind::Ident(w)) => w.as_str(),
        _ => return Err(cur.unexpected(false)),
    };
    match first {
        "from" => import(&mut cur),
        "import" => {
            cur.pos += 1;
            let module = cur.ident().unwrap_or("?");
            cur.pos -= 1;
            Err(cur.disallowed(format!("import statement ('import {module}')")))
        }
        "for" => loop_header(&mut cur),
        w if is_keyword(w) => Err(cur.disallowed(format!("'{w}' statement"))),
        _ => call(&mut cur).map(Parsed::Call),
    }
}

fn import(cur: &mut Cursor<'_>) -> Result<Parsed, ParseError> {
    cur.next();
    let module = cur.ident().ok_or_else(|| cur.syntax("expected module name"))?;
    if module != "skills" || !matches!(cur.peek_kind(), Some(TokKind::Ident(w)) if w == "import") {
        cur.pos -= 1;
        return Err(cur.disallowed(format!("import from module '{module}'")));
    }
    cur.next();
    let parens = cur.peek_kind() == Some(&TokKind::LParen);
    if parens {
        cur.next();
    }
    let mut names = Vec::new();
    loop {
        if cur.peek_kind() == Some(&TokKind::Op('*')) {
            return Err(cur.disallowed("wildcard import"));
        }
        let col = cur.col();
        let name = cur.ident().ok_or_else(|| cur.unexpected(parens))?;
        if Skill::from_exact(name).is_none() {
            return Err(ParseError::Disallowed {
                line: cur.line,
                column: col,
                construct: format!("import of non-skill name '{name}'"),
            });
        }
        if matches!(cur.peek_kind(), Some(TokKind::Ident(w)) if w == "as") {
            return Err(cur.disallowed("import alias"));
        }
        names.push(name.to_string());
        match cur.peek_kind() {
            Some(TokKind::Comma) => {
                cur.next();
                if parens && cur.peek_kind() == Some(&TokKind::RParen) {
                    break;
                }
            }
            _ => break,
        }
    }
    if parens {
        cur.expect(&TokKind::RParen, true)?;
    }
    if !cur.at_end() {
        return Err(cur.unexpected(false));
    }
    Ok(Parsed::Import(names))
}

fn loop_header(cur: &mut Cursor<'_>) -> Result<Parsed, ParseError> {
    cur.next();
    match cur.ident() {
        Some(w) if !is_keyword(w) => {}
        _ => return Err(cur.disallowed("loop target other than a plain name")),
    }
    match cur.ident() {
        Some("in") => {}
        _ => return Err(cur.unexpected(false)),
    }
    let iter_col = cur.col();
    match cur.ident() {
        Some("range") => {}
        Some(other) => {
            return Err(ParseError::Disallowed {
                line: cur.line,
                column: iter_col,
                construct: format!("loop over '{other}'"),
            })
        }
        None => return Err(cur.disallowed("loop over a non-range iterable")),
    }
    cur.expect(&TokKind::LParen, false)?;
    let count = match cur.peek_kind() {
        Some(TokKind::Int(n)) => *n,
        _ => return Err(cur.disallowed("range bound other than an integer literal")),
    };
    cur.next();
    match cur.peek_kind() {
        Some(TokKind::RParen) => {
            cur.next();
        }
        Some(TokKind::Comma) => return Err(cur.disallowed("range with start or step")),
        _ => return Err(cur.unexpected(true)),
    }
    if count < 1 {
        return Err(cur.syntax(format!("loop count must be at least 1, got {count}")));
    }
    cur.expect(&TokKind::Colon, false)?;
    if !cur.at_end() {
        return Err(cur.disallowed("inline loop body"));
    }
    Ok(Parsed::LoopHeader(count as u64))
}

fn call(cur: &mut Cursor<'_>) -> Result<Stmt, ParseError> {
    let line = cur.line;
    let (skill, args) = call_expr(cur)?;
    if !cur.at_end() {
        return Err(cur.unexpected(false));
    }
    Ok(Stmt::Call { skill, args, line })
}

fn call_expr(cur: &mut Cursor<'_>) -> Result<(String, Vec<Arg>), ParseError> {
    let name = cur.ident().expect("caller checked for a name");
    if name.starts_with("__") {
        cur.pos -= 1;
        return Err(cur.disallowed(format!("dunder name '{name}'")));
    }
    cur.expect(&TokKind::LParen, false)?;
    let mut args = Vec::new();
    loop {
        match cur.peek_kind() {
            Some(TokKind::RParen) => {
                cur.next();
                break;
            }
            None => return Err(cur.unexpected(true)),
            _ => {}
        }
        args.push(arg(cur)?);
        match cur.peek_kind() {
            Some(TokKind::Comma) => {
                cur.next();
            }
            Some(TokKind::RParen) => {}
            _ => return Err(cur.unexpected(true)),
        }
    }
    Ok((name.to_string(), args))
}

fn arg(cur: &mut Cursor<'_>) -> Result<Arg, ParseError> {
    let tok = cur.peek().expect("caller checked for a token");
    match &tok.kind {
        TokKind::Str(s) => {
            cur.next();
            Ok(Arg::Str(s.clone()))
        }
        TokKind::Int(v) => {
            cur.next();
            Ok(Arg::Int(*v))
        }
        TokKind::Ident(w) if is_keyword(w) => {
            let what = if w == "lambda" { "lambda expression".into() } else { format!("'{w}' keyword") };
            Err(cur.disallowed(what))
        }
        TokKind::Ident(w) => match cur.toks.get(cur.pos + 1).map(|t| &t.kind) {
            Some(TokKind::LParen) if w == "Find" => {
                let (_, args) = call_expr(cur)?;
                Ok(Arg::Find(args))
            }
            Some(TokKind::LParen) => Err(cur.disallowed(format!("nested call to '{w}'"))),
            Some(TokKind::Op('=')) if cur.toks.get(cur.pos + 2).map(|t| &t.kind) != Some(&TokKind::Op('=')) => {
                Err(cur.disallowed("keyword argument"))
            }
            _ => Err(cur.disallowed(format!("bare name '{w}'"))),
        },
        _ => Err(cur.unexpected(true)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn construct(src: &str) -> String {
        match parse_program(src) {
            Err(ParseError::Disallowed { construct, .. }) => construct,
            other => panic!("expected disallowed construct, got {other:?}"),
        }
    }

    #[test]
    fn parses_loop_with_body() {
        let p = parse_program("Grasp('left')\nfor _ in range(3):\n    Grasp('right')\n    Release('right')\nRelease('left')\n").unwrap();
        assert_eq!(p.body.len(), 3);
        match &p.body[1] {
            Stmt::Loop { count, body, line } => {
                assert_eq!((*count, body.len(), *line), (3, 2, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_find_and_imports() {
        let p = parse_program("from skills import Grasp, Find\nMove_to('left', Find(\"bottle\"))\n").unwrap();
        assert_eq!(p.imports, vec!["Grasp", "Find"]);
        assert_eq!(
            p.body[0],
            Stmt::Call {
                skill: "Move_to".into(),
                args: vec![Arg::Str("left".into()), Arg::Find(vec![Arg::Str("bottle".into())])],
                line: 0,
            }
        );
    }

    #[test]
    fn names_rejected_constructs() {
        assert_eq!(construct("x = 1"), "assignment");
        assert_eq!(construct("Grasp(hand='left')"), "keyword argument");
        assert_eq!(construct("Grasp('left', 50 + 50)"), "arithmetic");
        assert_eq!(construct("os.system('ls')"), "attribute access");
        assert_eq!(construct("Grasp(['left'])"), "list literal or subscript");
        assert_eq!(construct("if True:"), "'if' statement");
        assert_eq!(construct("import os"), "import statement ('import os')");
        assert_eq!(construct("from os import system"), "import from module 'os'");
        assert_eq!(construct("from skills import exec"), "import of non-skill name 'exec'");
        assert_eq!(construct("from skills import *"), "wildcard import");
        assert_eq!(construct("for _ in range(10**9):\n    Hit('drum', 1)"), "arithmetic");
        assert_eq!(construct("for _ in range(0, 5):\n    Hit('drum', 1)"), "range with start or step");
        assert_eq!(construct("Grasp(left)"), "bare name 'left'");
        assert_eq!(construct("Grasp(open('x'))"), "nested call to 'open'");
        assert_eq!(construct("__import__('os')"), "dunder name '__import__'");
        assert_eq!(construct("Grasp(lambda: 1)"), "lambda expression");
        assert_eq!(construct("Grasp('l'); Release('l')"), "statement separator");
        assert_eq!(construct("for i in items:\n    Hit('d', 1)"), "loop over 'items'");
    }

    #[test]
    fn indentation_errors() {
        for src in [
            "    Grasp('left')",
            "for _ in range(2):\nGrasp('left')",
            "for _ in range(2):\n    Grasp('left')\n  Release('left')",
            "for _ in range(2):",
        ] {
            assert!(
                matches!(parse_program(src), Err(ParseError::Indentation { .. })),
                "{src:?}"
            );
        }
    }

    #[test]
    fn loop_depth_limited() {
        let ok = "for _ in range(2):\n    for _ in range(2):\n        Hit('drum', 1)\n";
        assert!(parse_program(ok).is_ok());
        let deep = "for _ in range(2):\n  for _ in range(2):\n    for _ in range(2):\n      Hit('drum', 1)\n";
        assert!(construct(deep).starts_with("loop nesting"));
    }

    #[test]
    fn zero_count_rejected() {
        assert!(matches!(
            parse_program("for _ in range(0):\n    Hit('d', 1)"),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn unclosed_paren() {
        match parse_program("Grasp('left'") {
            Err(ParseError::Syntax { message, .. }) => assert_eq!(message, "unclosed '('"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_and_comment_only() {
        assert!(parse_program("").unwrap().is_empty());
        assert!(parse_program("# nothing\n\n").unwrap().is_empty());
    }
}

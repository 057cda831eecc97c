//! Task-plan representation, plan-text parsing and plan metrics.
//!
//! Plan text is one action per line in the form `Skill(arg, ...)` with
//! positional arguments bound through the skill signatures. Arguments may be
//! bare words or quoted strings. A repeated block is written as a
//! `for _ in range(N):` header followed by an indented body and is stored
//! expanded, with a [`RepeatGroup`] annotation.
//!
//! Plans are compared on their canonical token stream: six tokens per step
//! (`skill hand object direction magnitude force`), `_` for absent fields,
//! aliases resolved.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aliases::{snake_case, AliasTable};
use crate::skills::{bind, ArgValue, Direction, Hand, Skill, TargetRef};

/// Token emitted for an absent field.
pub const PLACEHOLDER: &str = "_";

/// Largest repeat count accepted in plan text.
pub const MAX_REPEAT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    pub skill: Skill,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<Hand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<u8>,
}

impl ActionStep {
    pub fn new(skill: Skill) -> Self {
        Self {
            skill,
            hand: None,
            object: None,
            direction: None,
            magnitude_deg: None,
            force: None,
        }
    }
}

impl fmt::Display for ActionStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut args: Vec<String> = Vec::new();
        for param in self.skill.signature() {
            use crate::skills::Role;
            let arg = match param.role {
                Role::Hand => self.hand.map(|h| h.to_string()),
                Role::Object | Role::Target => self.object.clone(),
                Role::Direction => self.direction.map(|d| d.to_string()),
                Role::Degrees => self.magnitude_deg.map(format_number),
                Role::Force => self.force.map(|v| v.to_string()),
            };
            args.extend(arg);
        }
        write!(f, "{}({})", self.skill.name(), args.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatGroup {
    /// Index of the first step of the first repetition.
    pub start: usize,
    /// Steps per repetition.
    pub len: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub steps: Vec<ActionStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repeats: Vec<RepeatGroup>,
}

impl ActionPlan {
    pub fn from_steps(steps: Vec<ActionStep>) -> Self {
        Self {
            steps,
            repeats: Vec::new(),
        }
    }

    /// Distinct object names mentioned by the plan, alias-resolved.
    pub fn objects(&self) -> Vec<String> {
        let aliases = AliasTable::builtin();
        let mut names: Vec<String> = self
            .steps
            .iter()
            .filter_map(|s| s.object.as_deref())
            .map(|o| aliases.object(o).to_string())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Plan text that parses back to this plan.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut i = 0;
        while i < self.steps.len() {
            if let Some(group) = self.repeats.iter().find(|g| g.start == i) {
                let _ = writeln!(out, "for _ in range({}):", group.count);
                for step in &self.steps[i..i + group.len] {
                    let _ = writeln!(out, "    {step}");
                }
                i += group.len * group.count;
            } else {
                let _ = writeln!(out, "{}", self.steps[i]);
                i += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {} ({:?})", self.line, self.reason, self.text)
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no plan steps found ({} unparsed lines)", diagnostics.len())]
    NoSteps { diagnostics: Vec<LineDiagnostic> },
    #[error("ground-truth plan is empty")]
    EmptyGroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPlan {
    pub plan: ActionPlan,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Parses plan text. Lines that are not actions become diagnostics; the
/// parse only fails when no line yields a step.
pub fn parse_plan(text: &str) -> Result<ParsedPlan, PlanError> {
    let aliases = AliasTable::builtin();
    let mut plan = ActionPlan::default();
    let mut diagnostics = Vec::new();
    // (header indent, first step index, repeat count)
    let mut group: Option<(usize, usize, usize)> = None;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let indent = raw.len() - raw.trim_start().len();
        let line = clean_line(raw);
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if let Some((header_indent, start, count)) = group {
            if indent <= header_indent {
                close_group(&mut plan, start, count);
                group = None;
            }
        }
        if let Some(count) = repeat_header(line) {
            if group.is_some() {
                diagnostics.push(diag(line_no, raw, "nested repeat blocks are not supported"));
                continue;
            }
            match count {
                Ok(c) if (1..=MAX_REPEAT).contains(&c) => {
                    group = Some((indent, plan.steps.len(), c))
                }
                _ => diagnostics.push(diag(
                    line_no,
                    raw,
                    &format!("repeat count must be an integer in [1, {MAX_REPEAT}]"),
                )),
            }
            continue;
        }
        match parse_action(line, aliases) {
            Ok(step) => plan.steps.push(step),
            Err(reason) => diagnostics.push(diag(line_no, raw, &reason)),
        }
    }
    if let Some((_, start, count)) = group {
        close_group(&mut plan, start, count);
    }

    if plan.steps.is_empty() {
        return Err(PlanError::NoSteps { diagnostics });
    }
    Ok(ParsedPlan { plan, diagnostics })
}

fn diag(line: usize, text: &str, reason: &str) -> LineDiagnostic {
    LineDiagnostic {
        line,
        text: text.to_string(),
        reason: reason.to_string(),
    }
}

fn close_group(plan: &mut ActionPlan, start: usize, count: usize) {
    let len = plan.steps.len() - start;
    if len == 0 {
        return;
    }
    let body: Vec<ActionStep> = plan.steps[start..].to_vec();
    for _ in 1..count {
        plan.steps.extend(body.iter().cloned());
    }
    if count > 1 {
        plan.repeats.push(RepeatGroup { start, len, count });
    }
}

/// Strips list markers, trailing comments and statement terminators.
fn clean_line(raw: &str) -> &str {
    let mut line = raw.trim();
    if let Some(pos) = line.find('#') {
        line = line[..pos].trim_end();
    }
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            line = rest.trim_start();
        }
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            line = rest.trim_start();
        }
    }
    line.trim_end_matches([';', ','])
}

fn repeat_header(line: &str) -> Option<Result<usize, ()>> {
    let body = line
        .strip_prefix("for _ in range(")
        .and_then(|r| r.strip_suffix("):"))
        .or_else(|| {
            line.strip_prefix("repeat ")
                .and_then(|r| r.strip_suffix(':'))
                .map(|r| r.trim_end_matches(" times"))
        })?;
    Some(body.trim().parse::<usize>().map_err(|_| ()))
}

fn parse_action(line: &str, aliases: &AliasTable) -> Result<ActionStep, String> {
    let open = line
        .find('(')
        .ok_or_else(|| "not an action of the form Skill(arg, ...)".to_string())?;
    let inner = line[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| "missing closing parenthesis".to_string())?;
    let name = line[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == ' ') {
        return Err("not an action of the form Skill(arg, ...)".into());
    }
    let skill =
        Skill::from_loose(name, aliases).ok_or_else(|| format!("unknown skill '{name}'"))?;

    let args = split_args(inner)?
        .into_iter()
        .map(|a| parse_arg(a, aliases))
        .collect::<Result<Vec<_>, _>>()?;
    let bound = bind(skill, &args).map_err(|e| e.to_string())?;

    Ok(ActionStep {
        skill,
        hand: bound.hand,
        object: bound.target.map(|t| match t {
            TargetRef::Name(n) | TargetRef::Find(n) => n,
        }),
        direction: bound.direction,
        magnitude_deg: bound.degrees,
        force: bound.force.map(|f| f as u8),
    })
}

fn split_args(inner: &str) -> Result<Vec<&str>, String> {
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    for (i, ch) in inner.char_indices() {
        match (quote, ch) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"') => quote = Some(ch),
            (None, '(') => depth += 1,
            (None, ')') => depth -= 1,
            (None, ',') if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err("unbalanced parentheses".into());
        }
    }
    if quote.is_some() || depth != 0 {
        return Err("unterminated argument".into());
    }
    let last = inner[start..].trim();
    if !last.is_empty() || !args.is_empty() {
        args.push(last);
    }
    if args.iter().any(|a| a.is_empty()) {
        return Err("empty argument".into());
    }
    Ok(args)
}

fn parse_arg(arg: &str, aliases: &AliasTable) -> Result<ArgValue, String> {
    // keyword form `force=100`: binding is by type, so the key is dropped
    let arg = match arg.split_once('=') {
        Some((key, value)) if !key.contains(['\'', '"', '(']) => value.trim(),
        _ => arg,
    };
    if let Some(inner) = unquote(arg) {
        return Ok(ArgValue::classify_text(inner, aliases));
    }
    if let Ok(v) = arg.parse::<i64>() {
        return Ok(ArgValue::Int(v));
    }
    if let Ok(v) = arg.parse::<f64>() {
        if v.is_finite() {
            return Ok(ArgValue::Number(v));
        }
    }
    if let Some(rest) = arg.strip_prefix("Find(").or_else(|| arg.strip_prefix("find(")) {
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("malformed Find argument '{arg}'"))?
            .trim();
        let name = unquote(inner).unwrap_or(inner);
        return Ok(ArgValue::Find(snake_case(name)));
    }
    if arg.chars().all(|c| c.is_alphanumeric() || c == '_' || c == ' ' || c == '-') {
        return Ok(ArgValue::classify_text(arg, aliases));
    }
    Err(format!("unrecognized argument '{arg}'"))
}

fn unquote(arg: &str) -> Option<&str> {
    let bytes = arg.as_bytes();
    if bytes.len() >= 2 {
        let (first, last) = (bytes[0], bytes[bytes.len() - 1]);
        if first == last && (first == b'\'' || first == b'"') {
            return Some(&arg[1..arg.len() - 1]);
        }
    }
    None
}

/// Whole-number magnitudes print without a fractional part.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Deterministic flat token stream used by both metrics.
pub fn canonicalize(plan: &ActionPlan) -> Vec<String> {
    let aliases = AliasTable::builtin();
    let mut tokens = Vec::with_capacity(plan.steps.len() * 6);
    for step in &plan.steps {
        tokens.push(step.skill.token().to_string());
        tokens.push(step.hand.map_or(PLACEHOLDER, Hand::as_str).to_string());
        tokens.push(
            step.object
                .as_deref()
                .map(|o| aliases.object(&snake_case(o)).to_string())
                .unwrap_or_else(|| PLACEHOLDER.to_string()),
        );
        tokens.push(step.direction.map_or(PLACEHOLDER, Direction::as_str).to_string());
        tokens.push(
            step.magnitude_deg
                .map(format_number)
                .unwrap_or_else(|| PLACEHOLDER.to_string()),
        );
        tokens.push(
            step.force
                .map(|f| f.to_string())
                .unwrap_or_else(|| PLACEHOLDER.to_string()),
        );
    }
    tokens
}

pub fn exact_match(pred: &ActionPlan, gt: &ActionPlan) -> bool {
    canonicalize(pred) == canonicalize(gt)
}

/// Length of the longest common contiguous run shared by `a` and `b`.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Token-level similarity of two token streams, normalized by the
/// ground-truth length.
pub fn token_similarity(pred: &[String], gt: &[String]) -> Result<f64, PlanError> {
    if gt.is_empty() {
        return Err(PlanError::EmptyGroundTruth);
    }
    Ok(longest_common_substring(pred, gt) as f64 / gt.len() as f64)
}

pub fn similarity(pred: &ActionPlan, gt: &ActionPlan) -> Result<f64, PlanError> {
    token_similarity(&canonicalize(pred), &canonicalize(gt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub exact_match: bool,
    pub similarity: f64,
}

impl PlanMetrics {
    pub const FAILED: PlanMetrics = PlanMetrics {
        exact_match: false,
        similarity: 0.0,
    };

    pub fn score(pred: &ActionPlan, gt: &ActionPlan) -> Result<Self, PlanError> {
        let p = canonicalize(pred);
        let g = canonicalize(gt);
        Ok(Self {
            exact_match: p == g,
            similarity: token_similarity(&p, &g)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ActionPlan {
        parse_plan(text).unwrap().plan
    }

    #[test]
    fn parses_two_step_plan() {
        let plan = parse("Grasp(right, bottle_cap, 100)\nTwist(right, counterclockwise, 180)");
        assert_eq!(plan.steps.len(), 2);
        let grasp = &plan.steps[0];
        assert_eq!(grasp.skill, Skill::Grasp);
        assert_eq!(grasp.hand, Some(Hand::Right));
        assert_eq!(grasp.object.as_deref(), Some("bottle_cap"));
        assert_eq!(grasp.force, Some(100));
        let twist = &plan.steps[1];
        assert_eq!(twist.direction, Some(Direction::Counterclockwise));
        assert_eq!(twist.magnitude_deg, Some(180.0));
    }

    #[test]
    fn parses_plug_listing_body() {
        let text = "Grasp('right', 'plug', 100) # force range from [0, 100]\n\
                    Move_to('right', 'box', 20) # rotate plug in-hand\n\
                    Insert('right', 'power_strip', 100)";
        let plan = parse(text);
        let forces: Vec<_> = plan.steps.iter().map(|s| s.force).collect();
        assert_eq!(forces, vec![Some(100), Some(20), Some(100)]);
    }

    #[test]
    fn garbage_is_rejected_with_diagnostics() {
        match parse_plan("hello world") {
            Err(PlanError::NoSteps { diagnostics }) => assert_eq!(diagnostics.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_plan(""), Err(PlanError::NoSteps { .. })));
    }

    #[test]
    fn prose_lines_become_diagnostics() {
        let parsed = parse_plan("Final plan:\n1. Grasp(left, bottle)\n2. Release(left)").unwrap();
        assert_eq!(parsed.plan.steps.len(), 2);
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].line, 1);
    }

    #[test]
    fn out_of_range_force_is_a_diagnostic() {
        let parsed = parse_plan("Grasp(right, plug, 150)\nRelease(right)").unwrap();
        assert_eq!(parsed.plan.steps.len(), 1);
        assert!(parsed.diagnostics[0].reason.contains("force"));
    }

    #[test]
    fn repeat_block_expands() {
        let text = "Grasp(left, bottle)\nfor _ in range(3):\n    Grasp(right)\n    Release(right)\nRelease(left)";
        let plan = parse(text);
        assert_eq!(plan.steps.len(), 8);
        assert_eq!(plan.repeats, vec![RepeatGroup { start: 1, len: 2, count: 3 }]);
        assert_eq!(plan.steps[7].skill, Skill::Release);
        assert_eq!(parse(&plan.render()), plan);
    }

    #[test]
    fn canonical_tokens() {
        let plan = parse("Twist(right, counterclockwise, 180)");
        assert_eq!(
            canonicalize(&plan),
            vec!["twist", "right", "_", "counterclockwise", "180", "_"]
        );
        assert_eq!(canonicalize(&plan), canonicalize(&plan));
    }

    #[test]
    fn aliases_canonicalize_identically() {
        let a = parse("Twist(right, ccw, 180)\nGrasp(left, cap)");
        let b = parse("twist('Right', 'counterclockwise', 180)\nGrasp(left, bottle_cap)");
        assert_eq!(canonicalize(&a), canonicalize(&b));
        assert!(exact_match(&a, &b));
    }

    #[test]
    fn exact_match_is_sensitive_to_force() {
        let a = parse("Grasp(right, plug, 100)");
        let b = parse("Grasp(right, plug, 90)");
        assert!(exact_match(&a, &a));
        assert!(!exact_match(&a, &b));
    }

    #[test]
    fn similarity_examples() {
        let a = parse("Grasp(right, plug, 100)");
        assert_eq!(similarity(&a, &a).unwrap(), 1.0);
        let tok = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        assert_eq!(token_similarity(&tok("a b c d"), &tok("a b x c d")).unwrap(), 0.4);
        assert_eq!(token_similarity(&tok("p q"), &tok("a b")).unwrap(), 0.0);
        assert!(matches!(
            token_similarity(&tok("a"), &[]),
            Err(PlanError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn render_uses_signature_order() {
        let plan = parse("Grasp(right, 40)\nMove_to(left, Find('bottle'))");
        assert_eq!(plan.render(), "Grasp(right, 40)\nMove_to(left, bottle)\n");
    }
}

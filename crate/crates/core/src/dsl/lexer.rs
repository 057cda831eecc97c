use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum TokKind {
    Ident(String),
    Str(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Colon,
    /// Operator or punctuation outside the grammar; the parser names the construct.
    Op(char),
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Tok {
    pub kind: TokKind,
    /// 1-based character column.
    pub col: usize,
}

const OPS: &str = "=+-*/%.[]{}<>!&|^~@;\\";
const STRING_PREFIXES: [&str; 8] = ["f", "r", "b", "u", "rb", "br", "fr", "rf"];

/// Splits leading indentation off a physical line.
pub(super) fn split_indent(raw: &str, line: usize) -> Result<(usize, &str), ParseError> {
    let rest = raw.trim_start_matches([' ', '\t']);
    let lead = &raw[..raw.len() - rest.len()];
    if lead.contains('\t') {
        return Err(ParseError::Indentation {
            line,
            message: "tab in indentation".into(),
        });
    }
    Ok((lead.len(), rest))
}

/// Tokenizes one logical line; `offset` is the width of stripped indentation.
pub(super) fn lex_line(text: &str, line: usize, offset: usize) -> Result<Vec<Tok>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks: Vec<Tok> = Vec::new();
    let mut i = 0;
    let lexical = |col: usize, message: String| ParseError::Lexical {
        line,
        column: col,
        message,
    };
    let disallowed = |col: usize, construct: &str| ParseError::Disallowed {
        line,
        column: col,
        construct: construct.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let col = offset + i + 1;
        if c == '#' {
            break;
        }
        if c == ' ' || c == '\t' {
            i += 1;
            continue;
        }
        let after_open = matches!(
            toks.last().map(|t| &t.kind),
            Some(TokKind::LParen | TokKind::Comma)
        );
        let negative = c == '-' && after_open && chars.get(i + 1).is_some_and(char::is_ascii_digit);
        if c.is_ascii_digit() || negative {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
                return Err(disallowed(col, "float literal"));
            }
            if chars.get(i).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
                return Err(lexical(col, "malformed number".into()));
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse::<i64>()
                .map_err(|_| lexical(col, format!("integer literal {digits} out of range")))?;
            toks.push(Tok {
                kind: TokKind::Int(value),
                col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if matches!(chars.get(i), Some('\'' | '"'))
                && STRING_PREFIXES.contains(&word.to_ascii_lowercase().as_str())
            {
                return Err(disallowed(col, "prefixed string literal"));
            }
            toks.push(Tok {
                kind: TokKind::Ident(word),
                col,
            });
            continue;
        }
        if c == '\'' || c == '"' {
            if chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                return Err(disallowed(col, "triple-quoted string"));
            }
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(lexical(col, "unterminated string".into())),
                    Some(&q) if q == c => break,
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('\\') => '\\',
                            Some('\'') => '\'',
                            Some('"') => '"',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some(other) => {
                                return Err(lexical(
                                    offset + i + 1,
                                    format!("unsupported escape '\\{other}'"),
                                ))
                            }
                            None => return Err(lexical(col, "unterminated string".into())),
                        };
                        s.push(esc);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            toks.push(Tok {
                kind: TokKind::Str(s),
                col,
            });
            continue;
        }
        let kind = match c {
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            ',' => TokKind::Comma,
            ':' => TokKind::Colon,
            c if OPS.contains(c) => TokKind::Op(c),
            c => return Err(lexical(col, format!("unexpected character {c:?}"))),
        };
        toks.push(Tok { kind, col });
        i += 1;
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<TokKind> {
        lex_line(s, 1, 0).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_call_with_comment() {
        assert_eq!(
            kinds("Grasp('right', \"plug\", 100) # force"),
            vec![
                TokKind::Ident("Grasp".into()),
                TokKind::LParen,
                TokKind::Str("right".into()),
                TokKind::Comma,
                TokKind::Str("plug".into()),
                TokKind::Comma,
                TokKind::Int(100),
                TokKind::RParen,
            ]
        );
    }

    #[test]
    fn hash_inside_string_is_not_a_comment() {
        assert_eq!(kinds("'a#b'"), vec![TokKind::Str("a#b".into())]);
    }

    #[test]
    fn negative_literal_only_in_argument_position() {
        assert_eq!(kinds("(-5")[1], TokKind::Int(-5));
        assert_eq!(kinds("1-5")[1], TokKind::Op('-'));
    }

    #[test]
    fn lexical_errors_carry_position() {
        match lex_line("Grasp('left)", 3, 4) {
            Err(ParseError::Lexical { line: 3, column: 11, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(lex_line("a $ b", 1, 0), Err(ParseError::Lexical { column: 3, .. })));
        assert!(matches!(
            lex_line("f'{x}'", 1, 0),
            Err(ParseError::Disallowed { .. })
        ));
    }

    #[test]
    fn tabs_in_indent_rejected() {
        assert!(split_indent("\tGrasp('left')", 1).is_err());
        assert_eq!(split_indent("    x", 1).unwrap(), (4, "x"));
    }
}

use std::fmt;

use super::parser::ParseError;
use super::Pos;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    /// Identifiers and keywords; the parser decides which words are reserved.
    Word(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Word(w) => write!(f, "`{w}`"),
            TokenKind::Int(i) => write!(f, "`{i}`"),
            TokenKind::Sym(s) => write!(f, "`{s}`"),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

/// Longest symbols first, so that prefix matching picks the longest token.
const SYMBOLS: &[&str] = &[
    "<==>", "==>", "::", ":=", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]",
    ",", ":", ";", ".", "<", ">", "+", "-", "*", "/", "\\", "%", "!", "?",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos::new(line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, 2);
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(pos, vec!["`*/`".into()], "end of input"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, &mut line, &mut col, 2);
                    break;
                }
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<i64>()
                .map_err(|_| ParseError::new(pos, vec!["integer literal".into()], &text))?;
            out.push(Token {
                kind: TokenKind::Int(value),
                pos,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token {
                kind: TokenKind::Word(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, sym.chars().count());
                out.push(Token {
                    kind: TokenKind::Sym(sym),
                    pos,
                });
            }
            None => {
                return Err(ParseError::new(
                    pos,
                    vec!["token".into()],
                    &format!("`{c}`"),
                ))
            }
        }
    }
    out.push(Token {
        kind: TokenKind::Eof,
        pos: Pos::new(line, col),
    });
    Ok(out)
}

//! Shared lexer for the rule, query and event surface syntaxes.
//!
//! `%` starts a line comment. Numeric literals are unsigned at this level;
//! the parsers fold a leading minus into the literal. A literal with a
//! decimal point or an exponent is a real, otherwise an integer.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Turnstile, // :-
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Ident(s) => write!(f, "identifier {s}"),
            TokKind::Int(i) => write!(f, "integer {i}"),
            TokKind::Real(x) => write!(f, "real {x:?}"),
            TokKind::Str(s) => write!(f, "string {s:?}"),
            TokKind::LParen => f.write_str("("),
            TokKind::RParen => f.write_str(")"),
            TokKind::LBracket => f.write_str("["),
            TokKind::RBracket => f.write_str("]"),
            TokKind::Comma => f.write_str(","),
            TokKind::Dot => f.write_str("."),
            TokKind::Turnstile => f.write_str(":-"),
            TokKind::Eq => f.write_str("="),
            TokKind::Ne => f.write_str("!="),
            TokKind::Lt => f.write_str("<"),
            TokKind::Le => f.write_str("<="),
            TokKind::Gt => f.write_str(">"),
            TokKind::Ge => f.write_str(">="),
            TokKind::Plus => f.write_str("+"),
            TokKind::Minus => f.write_str("-"),
            TokKind::Star => f.write_str("*"),
            TokKind::Slash => f.write_str("/"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tok {
    pub kind: TokKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at line {line}, col {col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn at(pos: Pos, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: pos.line, col: pos.col, message: message.into() }
    }
}

struct Scanner<'a> {
    rest: &'a str,
    line: u32,
    col: u32,
}

impl<'a> Scanner<'a> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<char> {
        self.rest.chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.rest.chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.chars().next()?;
        self.rest = &self.rest[c.len_utf8()..];
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if pred(c) {
                out.push(c);
                self.bump();
            } else {
                break;
            }
        }
        out
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn lex(text: &str) -> Result<Vec<Tok>, SyntaxError> {
    let mut s = Scanner { rest: text, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while let Some(c) = s.peek() {
            if c.is_whitespace() {
                s.bump();
            } else if c == '%' {
                while let Some(c) = s.peek() {
                    if c == '\n' {
                        break;
                    }
                    s.bump();
                }
            } else {
                break;
            }
        }
        let pos = s.pos();
        let Some(c) = s.peek() else { break };

        let kind = if is_ident_start(c) {
            TokKind::Ident(s.take_while(is_ident_continue))
        } else if c.is_ascii_digit() {
            lex_number(&mut s, pos)?
        } else if c == '"' {
            lex_string(&mut s, pos)?
        } else {
            s.bump();
            match c {
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                '[' => TokKind::LBracket,
                ']' => TokKind::RBracket,
                ',' => TokKind::Comma,
                '.' => TokKind::Dot,
                '+' => TokKind::Plus,
                '-' => TokKind::Minus,
                '*' => TokKind::Star,
                '/' => TokKind::Slash,
                '=' => TokKind::Eq,
                ':' => {
                    if s.peek() == Some('-') {
                        s.bump();
                        TokKind::Turnstile
                    } else {
                        return Err(SyntaxError::at(pos, "expected '-' after ':'"));
                    }
                }
                '!' => {
                    if s.peek() == Some('=') {
                        s.bump();
                        TokKind::Ne
                    } else {
                        return Err(SyntaxError::at(pos, "expected '=' after '!'"));
                    }
                }
                '<' => {
                    if s.peek() == Some('=') {
                        s.bump();
                        TokKind::Le
                    } else {
                        TokKind::Lt
                    }
                }
                '>' => {
                    if s.peek() == Some('=') {
                        s.bump();
                        TokKind::Ge
                    } else {
                        TokKind::Gt
                    }
                }
                other => {
                    return Err(SyntaxError::at(pos, format!("unexpected character {other:?}")));
                }
            }
        };
        out.push(Tok { kind, pos });
    }
    Ok(out)
}

fn lex_number(s: &mut Scanner<'_>, pos: Pos) -> Result<TokKind, SyntaxError> {
    let mut text = s.take_while(|c| c.is_ascii_digit());
    let mut is_real = false;
    // A dot only belongs to the number when a digit follows; "0." is the
    // integer zero followed by an end-of-rule dot.
    if s.peek() == Some('.') && s.peek2().is_some_and(|c| c.is_ascii_digit()) {
        is_real = true;
        text.push('.');
        s.bump();
        text.push_str(&s.take_while(|c| c.is_ascii_digit()));
    }
    if matches!(s.peek(), Some('e') | Some('E')) {
        let after = s.peek2();
        let digit_after_sign = matches!(after, Some('+') | Some('-'))
            && s.rest.chars().nth(2).is_some_and(|c| c.is_ascii_digit());
        if after.is_some_and(|c| c.is_ascii_digit()) || digit_after_sign {
            is_real = true;
            text.push(s.bump().unwrap());
            if matches!(s.peek(), Some('+') | Some('-')) {
                text.push(s.bump().unwrap());
            }
            text.push_str(&s.take_while(|c| c.is_ascii_digit()));
        }
    }
    if is_real {
        let x: f64 = text
            .parse()
            .map_err(|_| SyntaxError::at(pos, format!("invalid real literal {text}")))?;
        if !x.is_finite() {
            return Err(SyntaxError::at(pos, format!("real literal {text} overflows")));
        }
        Ok(TokKind::Real(x))
    } else {
        let i: i64 = text
            .parse()
            .map_err(|_| SyntaxError::at(pos, format!("integer literal {text} out of range")))?;
        Ok(TokKind::Int(i))
    }
}

fn lex_string(s: &mut Scanner<'_>, pos: Pos) -> Result<TokKind, SyntaxError> {
    s.bump(); // opening quote
    let mut out = String::new();
    loop {
        match s.bump() {
            None => return Err(SyntaxError::at(pos, "unterminated string literal")),
            Some('"') => return Ok(TokKind::Str(out)),
            Some('\\') => match s.bump() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                other => {
                    return Err(SyntaxError::at(
                        pos,
                        format!("unsupported escape {:?} in string literal", other),
                    ));
                }
            },
            Some(c) => out.push(c),
        }
    }
}

/// Token cursor the parsers share.
pub(crate) struct Cursor {
    toks: Vec<Tok>,
    i: usize,
    end: Pos,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Cursor, SyntaxError> {
        let toks = lex(text)?;
        let end = toks.last().map(|t| t.pos).unwrap_or(Pos { line: 1, col: 1 });
        Ok(Cursor { toks, i: 0, end })
    }

    pub fn peek(&self) -> Option<&TokKind> {
        self.toks.get(self.i).map(|t| &t.kind)
    }

    pub fn pos(&self) -> Pos {
        self.toks.get(self.i).map(|t| t.pos).unwrap_or(self.end)
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).cloned();
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    pub fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek() == Some(kind) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, kind: &TokKind) -> Result<(), SyntaxError> {
        if self.eat(kind) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kind}")))
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(String, Pos), SyntaxError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok { kind: TokKind::Ident(s), .. }) => Ok((s, pos)),
            _ => Err(SyntaxError::at(pos, format!("expected {what}"))),
        }
    }

    /// Consumes an identifier equal to `kw` (ASCII case-insensitive).
    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if let Some(TokKind::Ident(s)) = self.peek() {
            if s.eq_ignore_ascii_case(kw) {
                self.i += 1;
                return true;
            }
        }
        false
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let found = match self.peek() {
            Some(k) => format!("{message}, found {k}", message = message.into(), k = k),
            None => format!("{message}, found end of input", message = message.into()),
        };
        SyntaxError::at(self.pos(), found)
    }
}

//! Recursive-descent parser for the prefix program notation:
//! `plus|minus|times|divide(expr, expr)`, `d<int>`, `[<real>]`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{BinOp, Expr, Program};

/// Nesting deeper than this is rejected instead of risking the stack.
const MAX_NESTING: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedEnd,
    UnknownOperator(String),
    ExpectedOpenParen,
    /// Operator applied to the wrong number of arguments.
    Arity { op: &'static str, found: usize },
    UnbalancedParen,
    BadConstant(String),
    BadDimension,
    TrailingInput,
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    /// Byte offset into the input where the problem was detected.
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: ", self.offset)?;
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty input"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnknownOperator(name) => write!(f, "unknown operator {name:?}"),
            ParseErrorKind::ExpectedOpenParen => write!(f, "expected '('"),
            ParseErrorKind::Arity { op, found } => {
                write!(f, "{op} takes 2 arguments, found {found}")
            }
            ParseErrorKind::UnbalancedParen => write!(f, "unbalanced parentheses"),
            ParseErrorKind::BadConstant(s) => write!(f, "constant {s:?} is not a real literal"),
            ParseErrorKind::BadDimension => write!(f, "malformed dimension reference"),
            ParseErrorKind::TrailingInput => write!(f, "trailing input after expression"),
            ParseErrorKind::TooDeep => write!(f, "expression nested too deeply"),
        }
    }
}

/// Result of [`parse_recovering`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub program: Program,
    /// Byte offsets of surplus `)` characters that were skipped.
    pub dropped_closers: Vec<usize>,
}

/// Strict parse: every malformation is an error.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text, false);
    p.program()
}

/// Parse that skips surplus closing parentheses.
///
/// A `)` found where the separating `,` of a binary node is expected, or after
/// the complete expression, cannot close any open node without breaking
/// arity, so it is dropped and its offset recorded. Any other malformation is
/// still an error.
pub fn parse_recovering(text: &str) -> Result<Recovered, ParseError> {
    let mut p = Parser::new(text, true);
    let program = p.program()?;
    Ok(Recovered { program, dropped_closers: p.dropped })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    recover: bool,
    dropped: Vec<usize>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, recover: bool) -> Self {
        Self { src: text.as_bytes(), pos: 0, recover, dropped: Vec::new() }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { offset: self.pos, kind }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        if self.peek().is_none() {
            return Err(self.err(ParseErrorKind::Empty));
        }
        let root = self.expr(0)?;
        loop {
            match self.peek() {
                None => return Ok(Program::new(root)),
                Some(b')') if self.recover => {
                    self.dropped.push(self.pos);
                    self.pos += 1;
                }
                Some(b')') => return Err(self.err(ParseErrorKind::UnbalancedParen)),
                Some(_) => return Err(self.err(ParseErrorKind::TrailingInput)),
            }
        }
    }

    fn expr(&mut self, nesting: usize) -> Result<Expr, ParseError> {
        if nesting > MAX_NESTING {
            return Err(self.err(ParseErrorKind::TooDeep));
        }
        match self.peek() {
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
            Some(b'[') => self.constant(),
            Some(b'd') if self.src.get(self.pos + 1).is_some_and(u8::is_ascii_digit) => {
                self.dimension()
            }
            Some(c) if c.is_ascii_alphabetic() => self.application(nesting),
            Some(b')') => Err(self.err(ParseErrorKind::UnbalancedParen)),
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(self.char_at(c)))),
        }
    }

    fn char_at(&self, first: u8) -> char {
        core::str::from_utf8(&self.src[self.pos..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or(first as char)
    }

    fn application(&mut self, nesting: usize) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        let op = BinOp::from_name(name).ok_or(ParseError {
            offset: start,
            kind: ParseErrorKind::UnknownOperator(name.to_string()),
        })?;
        if self.peek() != Some(b'(') {
            return Err(self.err(ParseErrorKind::ExpectedOpenParen));
        }
        self.pos += 1;
        let a = self.expr(nesting + 1)?;
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    break;
                }
                Some(b')') if self.recover => {
                    self.dropped.push(self.pos);
                    self.pos += 1;
                }
                Some(b')') => {
                    return Err(self.err(ParseErrorKind::Arity { op: op.name(), found: 1 }));
                }
                None => return Err(self.err(ParseErrorKind::UnexpectedEnd)),
                Some(c) => return Err(self.err(ParseErrorKind::UnexpectedChar(self.char_at(c)))),
            }
        }
        let b = self.expr(nesting + 1)?;
        match self.peek() {
            Some(b')') => {
                self.pos += 1;
                Ok(Expr::bin(op, a, b))
            }
            Some(b',') => {
                // Count the extra arguments for a useful message.
                let offset = self.pos;
                let mut found = 2;
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    found += 1;
                    if self.expr(nesting + 1).is_err() {
                        break;
                    }
                }
                Err(ParseError { offset, kind: ParseErrorKind::Arity { op: op.name(), found } })
            }
            None => Err(self.err(ParseErrorKind::UnbalancedParen)),
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(self.char_at(c)))),
        }
    }

    fn dimension(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            return Err(ParseError { offset: start, kind: ParseErrorKind::BadDimension });
        }
        let text = core::str::from_utf8(&self.src[digits..self.pos]).unwrap_or_default();
        text.parse::<u32>()
            .map(Expr::Dim)
            .map_err(|_| ParseError { offset: start, kind: ParseErrorKind::BadDimension })
    }

    fn constant(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let body_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != b']' {
            self.pos += 1;
        }
        if self.pos == self.src.len() {
            return Err(ParseError { offset: start, kind: ParseErrorKind::UnexpectedEnd });
        }
        let body = core::str::from_utf8(&self.src[body_start..self.pos]).unwrap_or_default();
        self.pos += 1;
        let literal = body.trim();
        let well_formed = !literal.is_empty()
            && literal.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
            && literal.bytes().any(|b| b.is_ascii_digit());
        match literal.parse::<f64>() {
            Ok(v) if well_formed && v.is_finite() => Ok(Expr::Const(v)),
            _ => Err(ParseError { offset: start, kind: ParseErrorKind::BadConstant(literal.to_string()) }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_constant() {
        let p = parse("[3.14]").unwrap();
        assert_eq!(p.root(), &Expr::Const(3.14));
        assert_eq!(p.depth(), 0);
    }

    #[test]
    fn mnist_logit_shape() {
        let p = parse("plus(d618, minus(d303, times(d12, divide(d901, plus(d618, minus(d303, [1.73]))))))").unwrap();
        assert_eq!(p.node_count(), 13);
        assert_eq!(p.depth(), 6);
    }

    #[test]
    fn whitespace_is_tolerated() {
        let p = parse("  plus (\n d1 ,\t[ -2.5e1 ] ) ").unwrap();
        assert_eq!(p.serialize(), "plus(d1, [-25.0])");
    }

    #[test]
    fn arity_errors() {
        let e = parse("plus(d1)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity { op: "plus", found: 1 });
        assert_eq!(e.offset, 7);
        let e = parse("times(d1, d2, d3)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity { op: "times", found: 3 });
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(parse("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(parse("pow(d1, d2)").unwrap_err().kind, ParseErrorKind::UnknownOperator("pow".into()));
        assert_eq!(parse("plus(d1, d2").unwrap_err().kind, ParseErrorKind::UnbalancedParen);
        assert_eq!(parse("plus(d1, d2))").unwrap_err(), ParseError { offset: 12, kind: ParseErrorKind::UnbalancedParen });
        assert!(matches!(parse("[abc]").unwrap_err().kind, ParseErrorKind::BadConstant(_)));
        assert!(matches!(parse("[inf]").unwrap_err().kind, ParseErrorKind::BadConstant(_)));
        assert!(matches!(parse("[1.0").unwrap_err().kind, ParseErrorKind::UnexpectedEnd));
        assert_eq!(parse("d12x").unwrap_err().kind, ParseErrorKind::BadDimension);
        assert_eq!(parse("d1 d2").unwrap_err().kind, ParseErrorKind::TrailingInput);
        assert_eq!(parse("plus d1").unwrap_err().kind, ParseErrorKind::ExpectedOpenParen);
    }

    #[test]
    fn recovery_drops_surplus_closers() {
        let r = parse_recovering("plus(times(d1, d2)), d3))").unwrap();
        assert_eq!(r.program.serialize(), "plus(times(d1, d2), d3)");
        assert_eq!(r.dropped_closers, [18, 24]);
        // well-formed input is untouched
        let r = parse_recovering("minus(d1, [2.0])").unwrap();
        assert!(r.dropped_closers.is_empty());
        // recovery does not invent arguments
        assert!(parse_recovering("plus(d1)").is_err());
    }
}

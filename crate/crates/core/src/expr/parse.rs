//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" integer ] ;
//! integer = [ "-" ] digits | "(" [ "-" ] digits ")" ;
//! primary = number | variable | call | "(" expr ")" ;
//! call    = ("sqrt" | "exp" | "sin" | "cos" | "atan") "(" expr ")"
//!         | "jbr" "(" expr { "," expr } ")"
//!         | "jbrpow" "(" expr { "," expr } "," signed-number ")" ;
//! variable = ("x" | "y" | "z" | "xi" | "eta") index | "t" ;
//! ```
//!
//! A `-` immediately followed by a numeric literal (and no `^`) folds into a
//! negative constant, so printed negative constants reparse to the same tree.

use thiserror::Error;

use super::node::Expr;
use super::var::{Var, VarNameError};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at position {pos}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected token {0}")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("variable {name:?} out of range for dimension {dim}")]
    VariableOutOfRange { name: String, dim: usize },
    #[error("exponent must be an integer")]
    NonIntegerExponent,
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("{0} expects {1}")]
    Arity(String, &'static str),
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(_, s) | Tok::Ident(s) => format!("{s:?}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => out.push((Tok::Plus, start)),
            '-' => out.push((Tok::Minus, start)),
            '*' => out.push((Tok::Star, start)),
            '/' => out.push((Tok::Slash, start)),
            '^' => out.push((Tok::Caret, start)),
            '(' => out.push((Tok::LParen, start)),
            ')' => out.push((Tok::RParen, start)),
            ',' => out.push((Tok::Comma, start)),
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::BadNumber(s.to_string()),
                    pos: start,
                })?;
                out.push((Tok::Num(v, s.to_string()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let s = &text[start..i];
                match s {
                    "nan" => out.push((Tok::Num(f64::NAN, s.into()), start)),
                    "inf" => out.push((Tok::Num(f64::INFINITY, s.into()), start)),
                    _ => out.push((Tok::Ident(s.to_string()), start)),
                }
                continue;
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(other),
                    pos: start,
                })
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    dim: usize,
    _text: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            pos: self.pos(),
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(t.describe())),
            None => self.err(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    let rhs = self.term()?;
                    lhs = Expr::raw(super::Node::Binary(super::BinaryOp::Add, lhs, rhs));
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    let rhs = self.term()?;
                    lhs = Expr::raw(super::Node::Binary(super::BinaryOp::Sub, lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::raw(super::Node::Binary(super::BinaryOp::Mul, lhs, rhs));
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::raw(super::Node::Binary(super::BinaryOp::Div, lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            if matches!(self.peek(), Some(Tok::Num(..))) {
                let operand = self.power()?;
                if let Some(c) = operand.as_const() {
                    return Ok(Expr::constant(-c));
                }
                return Ok(Expr::raw(super::Node::Unary(super::UnaryOp::Neg, operand)));
            }
            let operand = self.unary()?;
            return Ok(Expr::raw(super::Node::Unary(super::UnaryOp::Neg, operand)));
        }
        self.power()
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        let paren = self.peek() == Some(&Tok::LParen);
        if paren {
            self.at += 1;
        }
        let negative = self.peek() == Some(&Tok::Minus);
        if negative {
            self.at += 1;
        }
        let pos = self.pos();
        let k = match self.bump() {
            Some(Tok::Num(v, _)) if v.fract() == 0.0 && v.abs() < i32::MAX as f64 => v as i32,
            Some(Tok::Num(..)) => {
                return Err(ParseError {
                    kind: ParseErrorKind::NonIntegerExponent,
                    pos,
                })
            }
            _ => {
                self.at -= 1;
                return Err(self.err(ParseErrorKind::NonIntegerExponent));
            }
        };
        if paren {
            self.expect(Tok::RParen)?;
        }
        Ok(if negative { -k } else { k })
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.at += 1;
            let k = self.integer()?;
            return Ok(Expr::raw(super::Node::Pow(base, k)));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v, _)) => Ok(Expr::constant(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(name, pos),
            Some(_) => {
                self.at -= 1;
                Err(self.unexpected())
            }
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Expr, ParseError> {
        use super::{Node, UnaryOp};
        let unary = |op| -> Option<UnaryOp> {
            Some(match op {
                "sqrt" => UnaryOp::Sqrt,
                "exp" => UnaryOp::Exp,
                "sin" => UnaryOp::Sin,
                "cos" => UnaryOp::Cos,
                "atan" => UnaryOp::Atan,
                _ => return None,
            })
        };
        if let Some(op) = unary(name.as_str()) {
            let mut args = self.args()?;
            if args.len() != 1 {
                return Err(ParseError {
                    kind: ParseErrorKind::Arity(name, "one argument"),
                    pos,
                });
            }
            return Ok(Expr::raw(Node::Unary(op, args.pop().unwrap())));
        }
        match name.as_str() {
            "jbr" => {
                let args = self.args()?;
                Ok(Expr::raw(Node::Bracket(args, 1.0)))
            }
            "jbrpow" => {
                let mut args = self.args()?;
                let m = match args.pop().and_then(|m| m.as_const()) {
                    Some(m) if !args.is_empty() => m,
                    _ => {
                        return Err(ParseError {
                            kind: ParseErrorKind::Arity(
                                name,
                                "arguments followed by a numeric exponent",
                            ),
                            pos,
                        })
                    }
                };
                Ok(Expr::raw(Node::Bracket(args, m)))
            }
            _ => match Var::from_name(&name, self.dim) {
                Ok(v) => Ok(Expr::var(v)),
                Err(VarNameError::OutOfRange { dim, .. }) => Err(ParseError {
                    kind: ParseErrorKind::VariableOutOfRange { name, dim },
                    pos,
                }),
                Err(VarNameError::Unknown) => Err(ParseError {
                    kind: ParseErrorKind::UnknownIdentifier(name),
                    pos,
                }),
            },
        }
    }
}

/// Parse `text` as an expression over variables of ambient dimension `dim`.
///
/// The returned tree is exactly the parse tree (no simplification), so
/// `parse(&e.to_string(), dim)` reproduces `e` structurally.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    if dim == 0 || dim > super::var::MAX_DIM {
        return Err(ParseError {
            kind: ParseErrorKind::BadDimension(dim),
            pos: 0,
        });
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        dim,
        _text: text,
    };
    let e = p.expr()?;
    if p.at < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{BinaryOp, Node};

    #[test]
    fn reads_sum_of_power_and_bracket() {
        let e = parse("xi1^2 + jbr(x1)", 1).unwrap();
        let expected = Expr::raw(Node::Binary(
            BinaryOp::Add,
            Expr::raw(Node::Pow(Expr::var(Var::xi(0)), 2)),
            Expr::raw(Node::Bracket(vec![Expr::var(Var::x(0))], 1.0)),
        ));
        assert_eq!(e, expected);
    }

    #[test]
    fn bracket_of_two_variables() {
        let e = parse("jbr(x1,x2)", 2).unwrap();
        assert_eq!(
            e,
            Expr::raw(Node::Bracket(vec![Var::x(0).into(), Var::x(1).into()], 1.0))
        );
    }

    #[test]
    fn variable_beyond_dimension_is_rejected() {
        let err = parse("x3", 2).unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::VariableOutOfRange { dim: 2, .. }
        ));
        assert_eq!(err.pos, 0);
        let err = parse("x1 + y2", 1).unwrap_err();
        assert_eq!(err.pos, 5);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("x1 + * 2", 1).unwrap_err();
        assert_eq!(err.pos, 5);
        assert!(matches!(parse("(x1", 1).unwrap_err().kind, ParseErrorKind::UnexpectedEnd));
        assert!(matches!(parse("foo(x1)", 1).unwrap_err().kind, ParseErrorKind::UnknownIdentifier(_)));
        assert!(matches!(parse("x1^1.5", 1).unwrap_err().kind, ParseErrorKind::NonIntegerExponent));
        assert!(matches!(parse("x1 # 2", 1).unwrap_err().kind, ParseErrorKind::UnexpectedChar('#')));
    }

    #[test]
    fn negative_literals_and_exponents() {
        assert_eq!(parse("-2", 1).unwrap(), Expr::constant(-2.0));
        assert_eq!(parse("x1^-2", 1).unwrap(), parse("x1^(-2)", 1).unwrap());
        // Unary minus binds looser than power.
        let e = parse("-2^2", 1).unwrap();
        assert!(matches!(e.node(), Node::Unary(..)));
        let e = parse("jbrpow(y1, -0.5)", 1).unwrap();
        assert!(matches!(e.node(), Node::Bracket(_, m) if *m == -0.5));
        assert_eq!(parse("1e-3", 1).unwrap(), Expr::constant(1e-3));
        assert_eq!(parse("eta1*t", 1).unwrap().free_vars().len(), 2);
    }
}

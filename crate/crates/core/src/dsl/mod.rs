//! Text front end: model files, query files and their printers.

mod lexer;
mod model_parser;
mod print;
mod query_parser;

use std::fmt;

use crate::expr::{BinOp, Expr, Func, UnOp};
use crate::model::Span;

pub use lexer::{tokenize, Tok, Token};
pub use model_parser::parse_model;
pub use print::{print_model, print_query_file};
pub use query_parser::{parse_queries, parse_query, parse_query_file};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub span: Span,
    /// Length of the offending token in characters (at least 1).
    pub len: u32,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        ParseError {
            span,
            len: 1,
            message: message.into(),
            expected: Vec::new(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

const RESERVED: &[&str] = &["and", "or", "not", "imply", "true", "false"];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, expected: &[&str]) -> ParseError {
        let tok = &self.toks[self.pos];
        let len = match &tok.tok {
            Tok::Ident(s) => s.chars().count() as u32,
            _ => 1,
        };
        ParseError {
            span: tok.span,
            len,
            message: format!("unexpected {}", tok.tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> Result<Span, ParseError> {
        if self.peek() == t {
            Ok(self.next().span)
        } else {
            Err(self.error(&[&t.describe()]))
        }
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        if self.is_keyword(kw) {
            Ok(self.next().span)
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let span = self.next().span;
                Ok((s, span))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    /// A possibly negated numeric literal.
    pub(crate) fn number(&mut self) -> Result<f64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let v = match self.peek().clone() {
            Tok::Int(v) => v as f64,
            Tok::Real(v) => v,
            _ => return Err(self.error(&["number"])),
        };
        self.next();
        Ok(if neg { -v } else { v })
    }

    pub(crate) fn integer(&mut self) -> Result<i64, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(v)
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let c = self.imply()?;
        if self.eat(&Tok::Question) {
            let a = self.expr()?;
            self.expect(&Tok::Colon)?;
            let b = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn imply(&mut self) -> Result<Expr, ParseError> {
        let l = self.or()?;
        if self.eat_keyword("imply") {
            let r = self.imply()?;
            return Ok(Expr::binary(BinOp::Imply, l, r));
        }
        Ok(l)
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.and()?;
        while self.eat(&Tok::OrOr) || self.eat_keyword("or") {
            let r = self.and()?;
            l = Expr::binary(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.equality()?;
        while self.eat(&Tok::AndAnd) || self.eat_keyword("and") {
            let r = self.equality()?;
            l = Expr::binary(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn equality(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.relational()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::Ne => BinOp::Ne,
                _ => return Ok(l),
            };
            self.next();
            let r = self.relational()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn relational(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => return Ok(l),
            };
            self.next();
            let r = self.additive()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(l),
            };
            self.next();
            let r = self.multiplicative()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(l),
            };
            self.next();
            let r = self.unary()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Bang) || self.eat_keyword("not") {
            let e = self.unary()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(e)));
        }
        if self.eat(&Tok::Minus) {
            // fold negative literals so printing and reparsing agree
            match self.peek().clone() {
                Tok::Int(v) if !matches!(self.peek_at(1), Tok::Dot) => {
                    self.next();
                    return Ok(Expr::Int(-v));
                }
                Tok::Real(v) => {
                    self.next();
                    return Ok(Expr::Real(-v));
                }
                _ => {}
            }
            let e = self.unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(Expr::Int(v))
            }
            Tok::Real(v) => {
                self.next();
                Ok(Expr::Real(v))
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(s) if Func::from_name(&s).is_some() && self.peek_at(1) == &Tok::LParen => {
                let func = Func::from_name(&s).unwrap();
                self.next();
                self.next();
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(&Tok::Comma)?;
                    }
                }
                Ok(Expr::Call(func, args))
            }
            Tok::Ident(_) => {
                let (first, _) = self.ident()?;
                let mut path = vec![first];
                while self.peek() == &Tok::Dot && matches!(self.peek_at(1), Tok::Ident(_)) {
                    self.next();
                    path.push(self.ident()?.0);
                }
                Ok(Expr::Name(path))
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

/// Parses a standalone expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.error(&["end of expression"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c < 4 && !d || e imply f").unwrap();
        assert_eq!(e.to_string(), "a + b * c < 4 && !d || e imply f");
        let e = parse_expr("(a + b) * c").unwrap();
        assert_eq!(e.to_string(), "(a + b) * c");
    }

    #[test]
    fn qualified_names_and_calls() {
        let e = parse_expr("Ctrl.turn_left && max(x, 2) > 1").unwrap();
        let Expr::Binary(BinOp::And, l, _) = e else { panic!() };
        assert_eq!(*l, Expr::Name(vec!["Ctrl".into(), "turn_left".into()]));
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(parse_expr("-3").unwrap(), Expr::Int(-3));
        assert_eq!(parse_expr("x - -3").unwrap().to_string(), "x - -3");
    }

    #[test]
    fn error_positions() {
        let err = parse_expr("a + ").unwrap_err();
        assert_eq!(err.span.col, 5);
        let err = parse_expr("a b").unwrap_err();
        assert_eq!(err.span.col, 3);
    }
}

//! Recursive-descent parser for Hamiltonian expressions.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" unary ] ;              (* right associative *)
//! primary = number
//!         | "t" | "z" | "q" index | "p" index | "pi"
//!         | func "(" expr ")"
//!         | "cutoff" "(" expr "," expr ")"      (* both arguments constant *)
//!         | "(" expr ")" ;
//! func    = "sin" | "cos" | "exp" | "log" | "tanh" | "sqrt" | "sabs" ;
//! index   = digit { digit } ;                     (* 1 ..= dim *)
//! number  = digits [ "." [ digits ] ] [ exponent ] | "." digits [ exponent ] ;
//! exponent = ("e" | "E") [ "+" | "-" ] digits ;
//! ```
//!
//! Constant subexpressions are folded while parsing whenever the folded
//! value is finite.

use std::ops::Range;

use super::ast::{BinOp, Expr, Func, Node, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Range<usize>,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
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
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
            if !value.is_finite() {
                return Err(syntax(start, format!("number `{text}` overflows")));
            }
            out.push(Token {
                tok: Tok::Num(value),
                span: start..i,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                span: start..i,
            });
        } else if b"+-*/^(),".contains(&c) {
            out.push(Token {
                tok: Tok::Sym(c as char),
                span: i..i + 1,
            });
            i += 1;
        } else {
            // Report the full UTF-8 character, not a byte.
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(syntax(i, format!("unexpected character `{ch}`")));
        }
    }
    out.push(Token {
        tok: Tok::End,
        span: src.len()..src.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<Token> {
        let t = self.peek().clone();
        if t.tok == Tok::Sym(c) {
            Ok(self.bump())
        } else {
            Err(syntax(t.span.start, format!("expected `{c}`, found {}", describe(&t.tok))))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_sym('+') {
                BinOp::Add
            } else if self.eat_sym('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_sym('*') {
                BinOp::Mul
            } else if self.eat_sym('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        let start = self.peek().span.start;
        if self.eat_sym('-') {
            let inner = self.unary()?;
            let span = start..inner.span.end;
            return Ok(match inner.node {
                Node::Const(c) => Expr::new(Node::Const(-c), span),
                _ => Expr::new(Node::Neg(Box::new(inner)), span),
            });
        }
        if self.eat_sym('+') {
            let inner = self.unary()?;
            return Ok(Expr::new(inner.node, start..inner.span.end));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat_sym('^') {
            let exponent = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::new(Node::Const(v), t.span)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                let close = self.expect_sym(')')?;
                Ok(Expr::new(inner.node, t.span.start..close.span.end))
            }
            Tok::Ident(name) => self.ident(name, t.span),
            other => Err(syntax(t.span.start, format!("expected an operand, found {}", describe(&other)))),
        }
    }

    fn ident(&mut self, name: String, span: Range<usize>) -> Result<Expr> {
        match name.as_str() {
            "t" => return Ok(Expr::new(Node::Var(Var::T), span)),
            "z" => return Ok(Expr::new(Node::Var(Var::Z), span)),
            "pi" => return Ok(Expr::new(Node::Const(std::f64::consts::PI), span)),
            _ => {}
        }
        if let Some(var) = self.indexed_var(&name, span.start)? {
            return Ok(Expr::new(Node::Var(var), span));
        }
        if name == "cutoff" {
            let args = self.call_args(&name, span.start)?;
            return self.cutoff(args, span.start);
        }
        if let Some(func) = Func::from_name(&name) {
            let mut args = self.call_args(&name, span.start)?;
            if args.len() != 1 {
                return Err(Error::Arity {
                    name,
                    offset: span.start,
                    expected: 1,
                    found: args.len(),
                });
            }
            let arg = args.pop().expect("one argument");
            let full = span.start..self.tokens[self.pos - 1].span.end;
            return Ok(call(func, arg, full));
        }
        Err(Error::UnknownIdentifier {
            name,
            offset: span.start,
        })
    }

    fn indexed_var(&self, name: &str, offset: usize) -> Result<Option<Var>> {
        let (head, digits) = name.split_at(1);
        if !(head == "q" || head == "p") || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Ok(None);
        }
        let index: usize = digits.parse().unwrap_or(usize::MAX);
        if index == 0 || index > self.dim {
            return Err(Error::IndexOutOfRange {
                name: name.to_string(),
                offset,
                dim: self.dim,
            });
        }
        Ok(Some(if head == "q" {
            Var::Q(index - 1)
        } else {
            Var::P(index - 1)
        }))
    }

    fn call_args(&mut self, name: &str, offset: usize) -> Result<Vec<Expr>> {
        if self.peek().tok != Tok::Sym('(') {
            return Err(syntax(offset, format!("function `{name}` must be called with parentheses")));
        }
        self.bump();
        let mut args = Vec::new();
        if self.eat_sym(')') {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_sym(',') {
                continue;
            }
            self.expect_sym(')')?;
            return Ok(args);
        }
    }

    fn cutoff(&self, args: Vec<Expr>, offset: usize) -> Result<Expr> {
        if args.len() != 2 {
            return Err(Error::Arity {
                name: "cutoff".into(),
                offset,
                expected: 2,
                found: args.len(),
            });
        }
        let (Some(r0), Some(w)) = (args[0].as_const(), args[1].as_const()) else {
            return Err(syntax(offset, "cutoff arguments must be constants"));
        };
        if !(r0 > 0.0 && w > 0.0) {
            return Err(syntax(offset, "cutoff requires positive radius and width"));
        }
        let end = self.tokens[self.pos - 1].span.end;
        Ok(Expr::new(Node::Cutoff { r0, w }, offset..end))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

fn fold_binary(op: BinOp, a: f64, b: f64) -> Option<f64> {
    let v = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return None;
            }
            a / b
        }
        BinOp::Pow => a.powf(b),
    };
    v.is_finite().then_some(v)
}

fn fold_call(func: Func, a: f64) -> Option<f64> {
    let v = match func {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Log if a > 0.0 => a.ln(),
        Func::Tanh => a.tanh(),
        Func::Sqrt if a >= 0.0 => a.sqrt(),
        Func::SmoothAbs => (a * a + super::ast::SMOOTH_ABS_EPS.powi(2)).sqrt(),
        _ => return None,
    };
    v.is_finite().then_some(v)
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.start.min(rhs.span.start)..lhs.span.end.max(rhs.span.end);
    if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
        if let Some(v) = fold_binary(op, a, b) {
            return Expr::new(Node::Const(v), span);
        }
    }
    Expr::new(Node::Binary(op, Box::new(lhs), Box::new(rhs)), span)
}

fn call(func: Func, arg: Expr, span: Range<usize>) -> Expr {
    if let Some(a) = arg.as_const() {
        if let Some(v) = fold_call(func, a) {
            return Expr::new(Node::Const(v), span);
        }
    }
    Expr::new(Node::Call(func, Box::new(arg)), span)
}

pub(crate) fn parse_expr(src: &str, dim: usize) -> Result<Expr> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if src.trim().is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let tokens = lex(src)?;
    let mut parser = Parser { tokens, pos: 0, dim };
    let expr = parser.expr()?;
    let trailing = parser.peek().clone();
    if trailing.tok != Tok::End {
        return Err(syntax(
            trailing.span.start,
            format!("unexpected {} after expression", describe(&trailing.tok)),
        ));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_folding() {
        let e = parse_expr("2*3 + 1", 1).unwrap();
        assert_eq!(e.as_const(), Some(7.0));
        let e = parse_expr("-2^2", 1).unwrap();
        assert_eq!(e.as_const(), Some(-4.0));
        let e = parse_expr("2^3^2", 1).unwrap();
        assert_eq!(e.as_const(), Some(512.0));
        let e = parse_expr("2^-1", 1).unwrap();
        assert_eq!(e.as_const(), Some(0.5));
    }

    #[test]
    fn error_offsets() {
        match parse_expr("p1 + * q1", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match parse_expr("cos(q1", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        match parse_expr("p1 $", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
        match parse_expr("q1 q1", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arity_and_identifiers() {
        assert!(matches!(
            parse_expr("sin(q1, p1)", 1),
            Err(Error::Arity { expected: 1, found: 2, .. })
        ));
        assert!(matches!(
            parse_expr("cutoff(1)", 1),
            Err(Error::Arity { expected: 2, found: 1, .. })
        ));
        assert!(matches!(
            parse_expr("foo + 1", 1),
            Err(Error::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expr("q0", 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            parse_expr("p3", 2),
            Err(Error::IndexOutOfRange { dim: 2, .. })
        ));
        assert!(parse_expr("q2 * p2", 2).is_ok());
    }

    #[test]
    fn domain_errors_are_not_folded() {
        let e = parse_expr("log(0)", 1).unwrap();
        assert!(matches!(e.node, Node::Call(Func::Log, _)));
        let e = parse_expr("1/0", 1).unwrap();
        assert!(matches!(e.node, Node::Binary(BinOp::Div, _, _)));
    }

    #[test]
    fn rejects_overflowing_literals_and_empty_input() {
        assert!(matches!(parse_expr("1e999", 1), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_expr("   ", 1), Err(Error::Syntax { .. })));
    }
}

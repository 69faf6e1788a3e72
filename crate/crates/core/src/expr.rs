//! Minimal arithmetic expressions over the coordinates `x1..x3`.
//!
//! Grammar: `+ - * / ×`, unary minus, parentheses, numbers, `pi`, `e`,
//! and the functions `sin`, `cos`, `exp`.

use std::fmt;

use thiserror::Error;

use crate::grid::Point;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression error at byte {position}: {message}")]
pub struct ExprError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Coord(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

/// Parsed expression; `Display` gives back the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_coord: usize,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, max_coord: 0 };
        let root = p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(ExprError { position: t.1, message: format!("unexpected {:?}", t.0) });
        }
        Ok(Self { source: source.to_string(), root, max_coord: p.max_coord })
    }

    pub fn constant(value: f64) -> Self {
        Self { source: format!("{value}"), root: Node::Num(value), max_coord: 0 }
    }

    /// Highest coordinate index referenced (1-based, 0 if none).
    pub fn max_coordinate(&self) -> usize {
        self.max_coord
    }

    pub fn is_constant(&self) -> bool {
        self.max_coord == 0
    }

    pub fn eval(&self, x: &Point) -> f64 {
        eval(&self.root, x)
    }
}

fn eval(n: &Node, x: &Point) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Coord(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => a / b,
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, x);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // Exponent part.
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = if i < chars.len() { chars[i].0 } else { s.len() };
            let text = &s[chars[start].0..end];
            let v = text.parse::<f64>().map_err(|_| ExprError { position: pos, message: format!("bad number {text:?}") })?;
            out.push((Tok::Num(v), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = if i < chars.len() { chars[i].0 } else { s.len() };
            out.push((Tok::Ident(s[chars[start].0..end].to_string()), pos));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' => Tok::Op(c),
                '×' => Tok::Op('*'),
                '−' => Tok::Op('-'),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(ExprError { position: pos, message: format!("unexpected character {c:?}") }),
            };
            out.push((tok, pos));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    max_coord: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.1).unwrap_or_else(|| self.tokens.last().map(|t| t.1 + 1).unwrap_or(0))
    }

    fn err(&self, message: &str) -> ExprError {
        ExprError { position: self.position(), message: message.to_string() }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let tok = self.peek().cloned().ok_or_else(|| self.err("unexpected end of expression"))?;
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.position();
                self.pos += 1;
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    "x1" | "x2" | "x3" => {
                        let i = name[1..].parse::<usize>().unwrap();
                        self.max_coord = self.max_coord.max(i);
                        Ok(Node::Coord(i - 1))
                    }
                    "sin" | "cos" | "exp" => {
                        let f = match name.as_str() {
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            _ => Func::Exp,
                        };
                        if self.peek() != Some(&Tok::LParen) {
                            return Err(self.err("expected '(' after function name"));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(Node::Call(f, Box::new(arg)))
                    }
                    _ => Err(ExprError { position: at, message: format!("unknown identifier {name:?}") }),
                }
            }
            other => Err(self.err(&format!("unexpected {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err("expected ')'"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_grammar() {
        let x = [0.5, 0.25, 2.0];
        let cases = [
            ("1 + 0.2*x1", 1.1),
            ("1+0.2×x1", 1.1),
            ("-x2 * 4", -1.0),
            ("2 - 3 - 4", -5.0),
            ("8 / 2 / 2", 2.0),
            ("sin(pi*x1)", 1.0),
            ("exp(0) + cos(0)", 2.0),
            ("(1 + x3) * 2", 6.0),
            ("1.5e-1 * 2", 0.3),
        ];
        for (src, want) in cases {
            let e = Expr::parse(src).unwrap();
            assert!((e.eval(&x) - want).abs() < 1e-14, "{src}");
        }
        assert!(Expr::parse("0.75").unwrap().is_constant());
        assert_eq!(Expr::parse("x3 + x1").unwrap().max_coordinate(), 3);
    }

    #[test]
    fn reports_errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("y + 1").is_err());
        assert!(Expr::parse("sin 2").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
    }
}

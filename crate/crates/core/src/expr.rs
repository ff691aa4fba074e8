//! Landscape expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 't' | 'pi' | 'e' | func '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus (`-2^2 == -4`) and is right
//! associative. `gauss(c, w)` is the normalized Gaussian density centred at
//! `c` with standard deviation `w`; `tophat(c, h)` is `1/(2h)` on
//! `|x - c| <= h` and zero elsewhere.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Sqrt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(&self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Nonnegative literal; negative values are `Neg(Num)`.
    Num(f64),
    X,
    T,
    Pi,
    E,
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Gauss(Box<Expr>, Box<Expr>),
    TopHat(Box<Expr>, Box<Expr>),
}

const IDENTIFIERS: [&str; 12] = [
    "x", "t", "pi", "e", "sin", "cos", "exp", "log", "abs", "sqrt", "gauss", "tophat",
];

impl Expr {
    pub fn num(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    /// Evaluates at `(x, t)`. Domain violations (log or sqrt of a negative
    /// number, division by zero) are errors rather than NaN/inf.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::T => t,
            Expr::Pi => std::f64::consts::PI,
            Expr::E => std::f64::consts::E,
            Expr::Neg(a) => -a.eval(x, t)?,
            Expr::Call(f, a) => {
                let a = a.eval(x, t)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain(format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, t)?;
                let b = b.eval(x, t)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Gauss(c, w) => {
                let c = c.eval(x, t)?;
                let w = w.eval(x, t)?;
                if w <= 0.0 {
                    return Err(domain(format!("gauss width must be positive, got {w}")));
                }
                let z = (x - c) / w;
                (-0.5 * z * z).exp() / (w * (2.0 * std::f64::consts::PI).sqrt())
            }
            Expr::TopHat(c, h) => {
                let c = c.eval(x, t)?;
                let h = h.eval(x, t)?;
                if h <= 0.0 {
                    return Err(domain(format!(
                        "tophat half-width must be positive, got {h}"
                    )));
                }
                if (x - c).abs() <= h {
                    1.0 / (2.0 * h)
                } else {
                    0.0
                }
            }
        };
        Ok(v)
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            Expr::T => true,
            Expr::Num(_) | Expr::X | Expr::Pi | Expr::E => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on_t(),
            Expr::Binary(_, a, b) | Expr::Gauss(a, b) | Expr::TopHat(a, b) => {
                a.depends_on_t() || b.depends_on_t()
            }
        }
    }

    /// Samples the expression at the cell centres.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<Field> {
        let values = grid
            .centers()
            .into_iter()
            .map(|x| self.eval(x, t))
            .collect::<Result<Vec<_>>>()?;
        Field::new(*grid, values)
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::X | Expr::T | Expr::Pi | Expr::E => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) | Expr::Gauss(a, b) | Expr::TopHat(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }
}

fn domain(message: String) -> Error {
    Error::Expression { offset: 0, message }
}

/// Fully parenthesized rendering; parsing it back yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => f.write_str("x"),
            Expr::T => f.write_str("t"),
            Expr::Pi => f.write_str("pi"),
            Expr::E => f.write_str("e"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Gauss(a, b) => write!(f, "gauss({a}, {b})"),
            Expr::TopHat(a, b) => write!(f, "tophat({a}, {b})"),
        }
    }
}

pub fn pretty_print(e: &Expr) -> String {
    e.to_string()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                // exponent only if followed by digits (optionally signed)
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
            let v: f64 = s.parse().map_err(|_| Error::Expression {
                offset: start,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(Error::Expression {
                    offset: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((start, tok));
        i += c.len_utf8();
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn args(&mut self, n: usize, name: &str) -> Result<Vec<Expr>> {
        self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                self.expect(Tok::Comma, &format!("`,` in `{name}` arguments"))?;
            }
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, &format!("`)` closing `{name}`"))?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        let start = self.offset();
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "t" => Ok(Expr::T),
                    "pi" => Ok(Expr::Pi),
                    "e" => Ok(Expr::E),
                    "gauss" | "tophat" => {
                        let mut a = self.args(2, &name)?;
                        let w = Box::new(a.pop().expect("two args"));
                        let c = Box::new(a.pop().expect("two args"));
                        Ok(if name == "gauss" {
                            Expr::Gauss(c, w)
                        } else {
                            Expr::TopHat(c, w)
                        })
                    }
                    other => match Func::from_name(other) {
                        Some(f) => {
                            let mut a = self.args(1, other)?;
                            Ok(Expr::Call(f, Box::new(a.pop().expect("one arg"))))
                        }
                        None => Err(Error::Expression {
                            offset: start,
                            message: unknown_identifier(other),
                        }),
                    },
                }
            }
            Tok::Op(c) => self.err(format!("unexpected operator `{c}`")),
            Tok::RParen => self.err("unexpected `)`"),
            Tok::Comma => self.err("unexpected `,`"),
        }
    }
}

fn unknown_identifier(name: &str) -> String {
    let best = IDENTIFIERS
        .iter()
        .map(|cand| (edit_distance(name, cand), *cand))
        .min()
        .filter(|(d, _)| *d <= 2);
    match best {
        Some((_, cand)) => format!("unknown identifier `{name}`; did you mean `{cand}`?"),
        None => format!("unknown identifier `{name}`"),
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn parse_expression(text: &str) -> Result<Expr> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, text };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// Expressions serialize as their fully parenthesized text.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Expr> {
        parse_expression(s)
    }
}

//! Infix expression parser for the canonical text form.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := integer | identifier | '(' sum ')'
//! ```
//!
//! Exponents must be rational constants with denominator 1 or 2.

use num_bigint::BigInt;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{Expr, FiberLabel, Symbol, Q};
use crate::jet::{JetSpace, MultiIndex};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Int(BigInt),
    Ident(String),
    Punct(char),
    End,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCT: &str = "+-*/^(){}:,=";

/// Splits `src` into tokens; `#` starts a comment running to the end of the
/// line.
pub(crate) fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                {
                    let c = chars[i];
                    advance(&mut i, &mut line, &mut col, c);
                }
            }
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                {
                    let c = chars[i];
                    advance(&mut i, &mut line, &mut col, c);
                }
            }
            out.push(Token { tok: Tok::Int(s.parse().unwrap()), line: l0, col: c0 });
        } else if c.is_ascii_alphabetic() {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                {
                    let c = chars[i];
                    advance(&mut i, &mut line, &mut col, c);
                }
                // a multi-index follows an underscore
                if s.ends_with('_') && i < chars.len() && chars[i] == '[' {
                    while i < chars.len() && chars[i] != ']' {
                        if !chars[i].is_whitespace() {
                            s.push(chars[i]);
                        }
                        {
                            let c = chars[i];
                            advance(&mut i, &mut line, &mut col, c);
                        }
                    }
                    if i == chars.len() {
                        return Err(Error::Syntax { line: l0, col: c0, msg: "unterminated multi-index".into() });
                    }
                    s.push(']');
                    advance(&mut i, &mut line, &mut col, ']');
                }
            }
            out.push(Token { tok: Tok::Ident(s), line: l0, col: c0 });
        } else if PUNCT.contains(c) {
            out.push(Token { tok: Tok::Punct(c), line: l0, col: c0 });
            advance(&mut i, &mut line, &mut col, c);
        } else {
            return Err(Error::Syntax { line, col, msg: format!("unexpected character `{c}`") });
        }
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

/// What identifiers may denote.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    /// Coordinates must belong to this jet space.
    pub space: Option<JetSpace>,
    /// Highest admitted jet order; defaults to the space's order.
    pub max_order: Option<usize>,
    /// Symbols referred to by name, such as the metric's `w`.
    pub named: Vec<Symbol>,
    /// Unrecognised identifiers become free symbols instead of errors.
    pub free: bool,
    /// Admit unknowns `F<i>_<coordinate>`.
    pub unknowns: bool,
}

impl Scope {
    /// Free symbols and any coordinate, for ad-hoc expressions.
    pub fn permissive() -> Self {
        Scope { free: true, unknowns: true, ..Scope::default() }
    }

    pub fn for_space(space: &JetSpace) -> Self {
        Scope { space: Some(space.clone()), ..Scope::default() }
    }

    fn base_dim(&self) -> Option<usize> {
        self.space.as_ref().map(|s| s.base_dim())
    }
}

fn digits(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn multi_index(s: &str) -> Option<MultiIndex> {
    let inner = s.strip_prefix('[')?.strip_suffix(']')?;
    let entries: Option<Vec<u8>> = inner.split(',').map(|p| digits(p).and_then(|v| u8::try_from(v).ok())).collect();
    let entries = entries?;
    if entries.is_empty() {
        return None;
    }
    Some(MultiIndex::from_slice(&entries))
}

/// Reads a fiber coordinate name: `q<a>_<i>`, `u<a>_[..]` or `g<m><n>[_[..]]`.
fn fiber_coordinate(name: &str, base_dim: Option<usize>) -> Option<Symbol> {
    if let Some(rest) = name.strip_prefix('q') {
        let (a, i) = rest.split_once('_')?;
        let a = digits(a)?;
        let i = u8::try_from(digits(i)?).ok()?;
        if a == 0 {
            return None;
        }
        return Some(Symbol::jet(FiberLabel::Component((a - 1) as u16), MultiIndex::from_slice(&[i])));
    }
    if let Some(rest) = name.strip_prefix('u') {
        let (a, idx) = rest.split_once('_')?;
        let a = digits(a)?;
        if a == 0 {
            return None;
        }
        return Some(Symbol::jet(FiberLabel::Component((a - 1) as u16), multi_index(idx)?));
    }
    if let Some(rest) = name.strip_prefix('g') {
        let (pair, idx) = match rest.split_once('_') {
            Some((p, i)) => (p, Some(multi_index(i)?)),
            None => (rest, None),
        };
        let b = pair.as_bytes();
        if b.len() != 2 || !b[0].is_ascii_digit() || !b[1].is_ascii_digit() {
            return None;
        }
        let index = match idx {
            Some(i) => i,
            None => MultiIndex::zeros(base_dim?),
        };
        return Some(Symbol::jet(FiberLabel::metric((b[0] - b'0') as usize, (b[1] - b'0') as usize), index));
    }
    None
}

/// The symbol an identifier denotes in `scope`.
pub fn resolve_identifier(name: &str, scope: &Scope) -> Result<Symbol> {
    let unknown = || Error::UnknownCoordinate(name.to_string());
    if let Some(s) = scope.named.iter().find(|s| s.to_string() == name) {
        return Ok(s.clone());
    }
    let sym = if name == "t" && scope.base_dim().is_none_or(|m| m == 1) {
        Some(Symbol::base(0))
    } else if let Some(i) = name.strip_prefix('x').and_then(digits) {
        (i >= 1).then(|| Symbol::base(i - 1))
    } else if let Some(rest) = name.strip_prefix('F') {
        let parsed = rest.split_once('_').and_then(|(dir, coord)| {
            let dir = digits(dir)?;
            match fiber_coordinate(coord, scope.base_dim())? {
                Symbol::Jet { label, index } if dir >= 1 => Some(Symbol::unknown(label, index, dir - 1)),
                _ => None,
            }
        });
        match parsed {
            Some(s) if scope.unknowns => Some(s),
            Some(_) => return Err(unknown()),
            None => None,
        }
    } else {
        fiber_coordinate(name, scope.base_dim())
    };
    let Some(sym) = sym else {
        return if scope.free { Ok(Symbol::aux(name)) } else { Err(unknown()) };
    };
    if let Some(space) = &scope.space {
        let (label, index) = match &sym {
            Symbol::Base(i) => {
                return if (*i as usize) < space.base_dim() { Ok(sym) } else { Err(unknown()) };
            }
            Symbol::Jet { label, index } | Symbol::Unknown { label, index, .. } => (label, index),
            Symbol::Aux(_) => return Ok(sym),
        };
        if index.dim() != space.base_dim() || space.label_index(label).is_none() {
            return Err(unknown());
        }
        let limit = scope.max_order.unwrap_or(space.order());
        if index.order() > limit {
            return Err(Error::OrderViolation { coord: name.to_string(), order: limit });
        }
    }
    Ok(sym)
}

pub(crate) struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    scope: &'a Scope,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(toks: &'a [Token], scope: &'a Scope) -> Self {
        Parser { toks, pos: 0, scope }
    }

    /// Continues at the current token under another scope.
    pub(crate) fn rescoped<'b>(&self, scope: &'b Scope) -> Parser<'b>
    where
        'a: 'b,
    {
        Parser { toks: self.toks, pos: self.pos, scope }
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    pub(crate) fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        let t = self.peek();
        Error::Syntax { line: t.line, col: t.col, msg: msg.into() }
    }

    pub(crate) fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Punct(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    pub(crate) fn sum(&mut self) -> Result<Expr> {
        let mut terms = vec![self.product()?];
        loop {
            if self.eat('+') {
                terms.push(self.product()?);
            } else if self.eat('-') {
                terms.push(-self.product()?);
            } else {
                return Ok(Expr::add_all(terms));
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat('*') {
                factors.push(self.unary()?);
            } else if self.peek().tok == Tok::Punct('/') {
                let t = self.bump();
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(Error::Syntax { line: t.line, col: t.col, msg: "division by zero".into() });
                }
                factors.push(Expr::try_pow(&d, Rational64::from_integer(-1))?);
            } else {
                return Ok(Expr::mul_all(factors));
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            Ok(-self.unary()?)
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Punct('^') {
            return Ok(base);
        }
        let at = self.bump();
        let e = self.unary()?;
        let exp = e.as_num().and_then(rational64).ok_or_else(|| Error::Syntax {
            line: at.line,
            col: at.col,
            msg: "exponent must be a rational constant".into(),
        })?;
        if base.is_zero() && exp < Rational64::zero() {
            return Err(Error::Syntax { line: at.line, col: at.col, msg: "division by zero".into() });
        }
        Expr::try_pow(&base, exp).map_err(|err| Error::Syntax { line: at.line, col: at.col, msg: err.to_string() })
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.bump();
        match t.tok {
            Tok::Int(n) => Ok(Expr::num(Q::from_integer(n))),
            Tok::Ident(name) => Ok(Expr::sym(resolve_identifier(&name, self.scope)?)),
            Tok::Punct('(') => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::End => Err(Error::Syntax { line: t.line, col: t.col, msg: "unexpected end of input".into() }),
            Tok::Punct(c) => Err(Error::Syntax { line: t.line, col: t.col, msg: format!("unexpected `{c}`") }),
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.peek().tok == Tok::End
    }
}

fn rational64(q: &Q) -> Option<Rational64> {
    Some(Rational64::new(q.numer().to_i64()?, q.denom().to_i64()?))
}

/// Parses one expression in `scope`.
pub fn parse_expr_in(src: &str, scope: &Scope) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser::new(&toks, scope);
    let e = p.sum()?;
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

/// Parses one expression, admitting any coordinate and free symbols.
pub fn parse_expr(src: &str) -> Result<Expr> {
    parse_expr_in(src, &Scope::permissive())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates() {
        let sp = JetSpace::new(2, 1, 2);
        let scope = Scope::for_space(&sp);
        assert_eq!(parse_expr_in("u1_[1,1]", &scope).unwrap(), sp.u(0, &[1, 1]));
        assert_eq!(parse_expr_in("x2", &scope).unwrap(), sp.base(1));
        assert!(matches!(parse_expr_in("u1_[2,1]", &scope), Err(Error::OrderViolation { .. })));
        assert!(matches!(parse_expr_in("u2_[0,0]", &scope), Err(Error::UnknownCoordinate(_))));
        assert!(matches!(parse_expr_in("x3", &scope), Err(Error::UnknownCoordinate(_))));
        assert!(matches!(parse_expr_in("y", &scope), Err(Error::UnknownCoordinate(_))));
        let mech = JetSpace::new(1, 1, 2);
        let scope = Scope::for_space(&mech);
        assert_eq!(parse_expr_in("t", &scope).unwrap(), mech.base(0));
        assert_eq!(parse_expr_in("q1_2", &scope).unwrap(), mech.u(0, &[2]));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_expr("a +\n  * b") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("a^b"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("a^(1/3)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("1/0"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("(a"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("-a^2 + 2*a/b").unwrap();
        let a = Expr::sym(Symbol::aux("a"));
        let b = Expr::sym(Symbol::aux("b"));
        assert_eq!(e, -a.powi(2) + Expr::int(2) * &a / &b);
        assert_eq!(parse_expr("1/2*a^2").unwrap(), Expr::rational(1, 2) * a.powi(2));
    }

    #[test]
    fn unknown_symbols() {
        let e = parse_expr("F2_u1_[1,2]").unwrap();
        assert_eq!(e.to_string(), "F2_u1_[1,2]");
        assert!(e.has_unknowns());
    }
}

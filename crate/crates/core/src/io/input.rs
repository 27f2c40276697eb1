//! Lagrangian input files.
//!
//! ```text
//! # comments run to the end of the line
//! lagrangian { kind: mechanics, n: 1, k: 2 }
//! L = q1_0 * q1_2
//! ```
//!
//! `kind` is `field` (keys `m`, `n`, `k`), `mechanics` (keys `n`, `k`) or
//! `builtin:hilbert` (key `d`, no `L`). The optional keys
//! `max_generations`, `points` and `seed` carry run options.

use std::fmt;

use num_traits::ToPrimitive;

use super::parse::{lex, Parser, Scope, Tok};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::JetSpace;
use crate::mechanics::MechLagrangian;
use crate::variational::FieldLagrangian;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Field,
    Mechanics,
    Hilbert,
}

impl InputKind {
    pub fn name(self) -> &'static str {
        match self {
            InputKind::Field => "field",
            InputKind::Mechanics => "mechanics",
            InputKind::Hilbert => "builtin:hilbert",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct InputOptions {
    pub max_generations: Option<usize>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianInput {
    pub kind: InputKind,
    /// `m`; 1 for mechanics, `d` for the Hilbert Lagrangian.
    pub base_dim: usize,
    /// `n`; `d(d+1)/2` for the Hilbert Lagrangian.
    pub fiber_dim: usize,
    /// `k`; 2 for field theories.
    pub order: usize,
    /// Absent for built-in Lagrangians.
    pub lagrangian: Option<Expr>,
    pub options: InputOptions,
}

impl LagrangianInput {
    pub fn field(m: usize, n: usize, lagrangian: Expr) -> Self {
        LagrangianInput {
            kind: InputKind::Field,
            base_dim: m,
            fiber_dim: n,
            order: 2,
            lagrangian: Some(lagrangian),
            options: InputOptions::default(),
        }
    }

    pub fn mechanics(n: usize, k: usize, lagrangian: Expr) -> Self {
        LagrangianInput {
            kind: InputKind::Mechanics,
            base_dim: 1,
            fiber_dim: n,
            order: k,
            lagrangian: Some(lagrangian),
            options: InputOptions::default(),
        }
    }

    pub fn hilbert(d: usize) -> Self {
        LagrangianInput {
            kind: InputKind::Hilbert,
            base_dim: d,
            fiber_dim: d * (d + 1) / 2,
            order: 2,
            lagrangian: None,
            options: InputOptions::default(),
        }
    }

    /// Jet space of the declared Lagrangian (not used for the Hilbert kind,
    /// whose fibers are metric components).
    pub fn space(&self) -> JetSpace {
        JetSpace::new(self.base_dim, self.fiber_dim, self.order)
    }

    pub fn field_lagrangian(&self) -> Result<FieldLagrangian> {
        match (&self.kind, &self.lagrangian) {
            (InputKind::Field, Some(l)) => FieldLagrangian::new(self.space(), l.clone()),
            _ => Err(Error::Input(format!("a {} input is not a field Lagrangian", self.kind.name()))),
        }
    }

    pub fn mech_lagrangian(&self) -> Result<MechLagrangian> {
        match (&self.kind, &self.lagrangian) {
            (InputKind::Mechanics, Some(l)) => MechLagrangian::new(self.fiber_dim, self.order, l.clone()),
            _ => Err(Error::Input(format!("a {} input is not a mechanics Lagrangian", self.kind.name()))),
        }
    }
}

impl fmt::Display for LagrangianInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lagrangian {{ kind: {}", self.kind.name())?;
        match self.kind {
            InputKind::Field => write!(f, ", m: {}, n: {}, k: {}", self.base_dim, self.fiber_dim, self.order)?,
            InputKind::Mechanics => write!(f, ", n: {}, k: {}", self.fiber_dim, self.order)?,
            InputKind::Hilbert => write!(f, ", d: {}", self.base_dim)?,
        }
        let o = &self.options;
        if let Some(v) = o.max_generations {
            write!(f, ", max_generations: {v}")?;
        }
        if let Some(v) = o.points {
            write!(f, ", points: {v}")?;
        }
        if let Some(v) = o.seed {
            write!(f, ", seed: {v}")?;
        }
        writeln!(f, " }}")?;
        if let Some(l) = &self.lagrangian {
            writeln!(f, "L = {l}")?;
        }
        Ok(())
    }
}

/// Parses a Lagrangian input file.
pub fn parse_input(src: &str) -> Result<LagrangianInput> {
    let toks = lex(src)?;
    let empty = Scope::default();
    let mut p = Parser::new(&toks, &empty);
    match &p.peek().tok {
        Tok::Ident(s) if s == "lagrangian" => {
            p.bump();
        }
        _ => return Err(p.error("expected `lagrangian { ... }` header")),
    }
    p.expect('{')?;
    let mut kind = None;
    let (mut m, mut n, mut k, mut d) = (None, None, None, None);
    let mut options = InputOptions::default();
    while !p.eat('}') {
        let key = match p.bump().tok {
            Tok::Ident(s) => s,
            _ => return Err(p.error("expected a header key")),
        };
        p.expect(':')?;
        if key == "kind" {
            let t = p.peek().clone();
            let name = match p.bump().tok {
                Tok::Ident(s) if s == "builtin" => {
                    p.expect(':')?;
                    match p.bump().tok {
                        Tok::Ident(b) => format!("builtin:{b}"),
                        _ => return Err(p.error("expected a built-in name")),
                    }
                }
                Tok::Ident(s) => s,
                _ => return Err(p.error("expected a kind")),
            };
            kind = Some(match name.as_str() {
                "field" => InputKind::Field,
                "mechanics" => InputKind::Mechanics,
                "builtin:hilbert" => InputKind::Hilbert,
                other => {
                    return Err(Error::Syntax { line: t.line, col: t.col, msg: format!("unknown kind `{other}`") })
                }
            });
        } else {
            let t = p.peek().clone();
            let v = match p.bump().tok {
                Tok::Int(v) => v.to_u64().ok_or_else(|| p.error("value out of range"))?,
                _ => {
                    return Err(Error::Syntax {
                        line: t.line,
                        col: t.col,
                        msg: format!("expected a number for `{key}`"),
                    })
                }
            };
            let slot = match key.as_str() {
                "m" => &mut m,
                "n" => &mut n,
                "k" => &mut k,
                "d" => &mut d,
                "max_generations" => {
                    options.max_generations = Some(v as usize);
                    p.eat(',');
                    continue;
                }
                "points" => {
                    options.points = Some(v as usize);
                    p.eat(',');
                    continue;
                }
                "seed" => {
                    options.seed = Some(v);
                    p.eat(',');
                    continue;
                }
                other => return Err(Error::Syntax { line: t.line, col: t.col, msg: format!("unknown key `{other}`") }),
            };
            *slot = Some(v as usize);
        }
        p.eat(',');
    }
    let kind = kind.ok_or_else(|| Error::Input("the header must declare `kind`".into()))?;
    let mut input = match kind {
        InputKind::Field => {
            let k = k.unwrap_or(2);
            if k != 2 {
                return Err(Error::Input(format!("field Lagrangians are second order, got k = {k}")));
            }
            LagrangianInput::field(m.unwrap_or(1), n.unwrap_or(1), Expr::zero())
        }
        InputKind::Mechanics => {
            if m.is_some_and(|m| m != 1) {
                return Err(Error::Input("mechanics has one base coordinate".into()));
            }
            LagrangianInput::mechanics(n.unwrap_or(1), k.unwrap_or(2), Expr::zero())
        }
        InputKind::Hilbert => {
            let d = d.unwrap_or(4);
            if !(2..=4).contains(&d) {
                return Err(Error::Input(format!("metric dimension must be 2, 3 or 4, got {d}")));
            }
            LagrangianInput::hilbert(d)
        }
    };
    if input.base_dim == 0 || input.fiber_dim == 0 || input.order == 0 {
        return Err(Error::Input("dimensions and order must be positive".into()));
    }
    input.options = options;
    if kind == InputKind::Hilbert {
        if !p.at_end() {
            return Err(p.error("the built-in Hilbert Lagrangian takes no `L = ...`"));
        }
        return Ok(input);
    }
    match &p.peek().tok {
        Tok::Ident(s) if s == "L" => {
            p.bump();
        }
        _ => return Err(p.error("expected `L = <expression>`")),
    }
    p.expect('=')?;
    let scope = Scope::for_space(&input.space());
    let mut q = p.rescoped(&scope);
    let l = q.sum()?;
    if !q.at_end() {
        return Err(q.error("unexpected trailing input"));
    }
    input.lagrangian = Some(l);
    Ok(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mechanics_header() {
        let s = parse_input("lagrangian{kind:mechanics,n:1,k:2} L = q1_0 * q1_2").unwrap();
        let sp = JetSpace::new(1, 1, 2);
        assert_eq!(s.lagrangian.unwrap(), sp.u(0, &[0]) * sp.u(0, &[2]));
        assert_eq!((s.base_dim, s.fiber_dim, s.order), (1, 1, 2));
    }

    #[test]
    fn field_with_comments() {
        let src = "# half square of the mixed derivative\nlagrangian {\n  kind: field, m: 2, n: 1\n}\nL = 1/2 * u1_[1,1]^2 # done\n";
        let s = parse_input(src).unwrap();
        let sp = JetSpace::new(2, 1, 2);
        assert_eq!(s.lagrangian.unwrap(), Expr::rational(1, 2) * sp.u(0, &[1, 1]).powi(2));
    }

    #[test]
    fn hilbert_header() {
        let s = parse_input("lagrangian { kind: builtin:hilbert, d: 4, seed: 9 }").unwrap();
        assert_eq!(s.kind, InputKind::Hilbert);
        assert_eq!(s.base_dim, 4);
        assert_eq!(s.options.seed, Some(9));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_input("lagrangian { kind: mechanics, n: 1, k: 2 } L = q1_3"),
            Err(Error::OrderViolation { .. })
        ));
        assert!(matches!(
            parse_input("lagrangian { kind: field, m: 2, n: 1 } L = q1_0"),
            Err(Error::UnknownCoordinate(_))
        ));
        assert!(matches!(parse_input("lagrangian { kind: quantum }"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_input("L = 1"), Err(Error::Syntax { .. })));
        assert!(parse_input("lagrangian { kind: field, m: 2, n: 1, k: 3 } L = 1").is_err());
    }

    #[test]
    fn round_trip() {
        for src in [
            "lagrangian { kind: mechanics, n: 2, k: 2, seed: 4 }\nL = q1_0*q2_2 - 1/2*q1_1^2 + t\n",
            "lagrangian { kind: field, m: 2, n: 1, k: 2 }\nL = 1/2*u1_[1,1]^2 + x1*u1_[0,0]\n",
            "lagrangian { kind: builtin:hilbert, d: 3, max_generations: 4, points: 20 }\n",
        ] {
            let s = parse_input(src).unwrap();
            assert_eq!(parse_input(&s.to_string()).unwrap(), s);
        }
    }
}

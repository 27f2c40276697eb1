//! Numeric evaluation: exact over Q(√D) where possible, modular for
//! probabilistic identity testing.

use rustc_hash::FxHashMap;
use std::collections::HashMap;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

use super::{mix, q_sqrt_exact, rational_to_f64, Expr, ExprError, Kind, Symbol, Q};

/// Result of [`eval_numeric`].
#[derive(Clone, Debug, PartialEq)]
pub enum Numeric {
    /// Exact rational value.
    Rational(Q),
    /// Exact value `a + b·√d` with `d` a positive non-square rational.
    Surd { a: Q, b: Q, d: Q },
    /// Radicals with unrelated radicands occurred.
    Float(f64),
}

impl Numeric {
    /// Nearest double, computed without cancellation when the two parts of a
    /// surd have opposite signs.
    pub fn to_f64(&self) -> f64 {
        match self {
            Numeric::Rational(q) => rational_to_f64(q),
            Numeric::Float(x) => *x,
            Numeric::Surd { a, b, d } => {
                let bs = rational_to_f64(b) * rational_to_f64(d).sqrt();
                let af = rational_to_f64(a);
                if a.is_zero() || b.is_zero() || a.is_positive() == b.is_positive() {
                    af + bs
                } else {
                    // a + b√d = (a² − b²d) / (a − b√d)
                    let num = a * a - b * b * d;
                    rational_to_f64(&num) / (af - bs)
                }
            }
        }
    }

    pub fn as_rational(&self) -> Option<&Q> {
        match self {
            Numeric::Rational(q) => Some(q),
            _ => None,
        }
    }
}

/// Element of Q(√d) for the radicand fixed during one evaluation.
#[derive(Clone, Debug)]
struct Surd {
    a: Q,
    b: Q,
}

struct SurdEval<'a> {
    point: &'a HashMap<Symbol, Q>,
    d: Option<Q>,
    memo: FxHashMap<usize, Surd>,
}

enum Fail {
    Err(ExprError),
    NeedFloat,
}

impl From<ExprError> for Fail {
    fn from(e: ExprError) -> Self {
        Fail::Err(e)
    }
}

impl<'a> SurdEval<'a> {
    fn mul(&self, x: &Surd, y: &Surd) -> Surd {
        let d = self.d.clone().unwrap_or_else(Q::zero);
        Surd { a: &x.a * &y.a + &x.b * &y.b * d, b: &x.a * &y.b + &x.b * &y.a }
    }

    fn recip(&self, x: &Surd) -> Result<Surd, Fail> {
        let d = self.d.clone().unwrap_or_else(Q::zero);
        let n = &x.a * &x.a - &x.b * &x.b * d;
        if n.is_zero() {
            return Err(ExprError::DivisionByZero.into());
        }
        Ok(Surd { a: &x.a / &n, b: -&x.b / &n })
    }

    fn powi(&self, x: &Surd, n: i64) -> Result<Surd, Fail> {
        let base = if n < 0 { self.recip(x)? } else { x.clone() };
        let mut k = n.unsigned_abs();
        let mut acc = Surd { a: Q::one(), b: Q::zero() };
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &sq);
            }
            k >>= 1;
            if k > 0 {
                sq = self.mul(&sq, &sq);
            }
        }
        Ok(acc)
    }

    fn sqrt(&mut self, x: &Surd) -> Result<Surd, Fail> {
        if !x.b.is_zero() {
            return Err(Fail::NeedFloat);
        }
        if x.a.is_negative() {
            return Err(ExprError::NegativeRadicand(x.a.to_string()).into());
        }
        if let Some(r) = q_sqrt_exact(&x.a) {
            return Ok(Surd { a: r, b: Q::zero() });
        }
        match &self.d {
            None => {
                self.d = Some(x.a.clone());
                Ok(Surd { a: Q::zero(), b: Q::one() })
            }
            Some(d) => match q_sqrt_exact(&(&x.a / d)) {
                Some(r) => Ok(Surd { a: Q::zero(), b: r }),
                None => Err(Fail::NeedFloat),
            },
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Surd, Fail> {
        if let Some(v) = self.memo.get(&e.id()) {
            return Ok(v.clone());
        }
        let v = match e.kind() {
            Kind::Num(q) => Surd { a: q.clone(), b: Q::zero() },
            Kind::Sym(s) => match self.point.get(s) {
                Some(q) => Surd { a: q.clone(), b: Q::zero() },
                None => match s.definition() {
                    Some(d) => self.eval(d)?,
                    None => return Err(ExprError::UnboundSymbol(s.to_string()).into()),
                },
            },
            Kind::Add(c) => {
                let mut acc = Surd { a: Q::zero(), b: Q::zero() };
                for t in c.iter() {
                    let x = self.eval(t)?;
                    acc.a += x.a;
                    acc.b += x.b;
                }
                acc
            }
            Kind::Mul(c) => {
                let mut acc = Surd { a: Q::one(), b: Q::zero() };
                for t in c.iter() {
                    let x = self.eval(t)?;
                    acc = self.mul(&acc, &x);
                }
                acc
            }
            Kind::Pow(b, p) => {
                let x = self.eval(b)?;
                pow_split(self, &x, *p)?
            }
        };
        self.memo.insert(e.id(), v.clone());
        Ok(v)
    }
}

fn pow_split(ev: &mut SurdEval<'_>, x: &Surd, p: Rational64) -> Result<Surd, Fail> {
    if p.is_integer() {
        return ev.powi(x, p.to_integer());
    }
    // p = n + 1/2
    let n = p.floor().to_integer();
    let r = ev.sqrt(x)?;
    let xn = ev.powi(x, n)?;
    Ok(ev.mul(&xn, &r))
}

fn eval_f64(e: &Expr, point: &HashMap<Symbol, Q>, memo: &mut FxHashMap<usize, f64>) -> Result<f64, ExprError> {
    if let Some(v) = memo.get(&e.id()) {
        return Ok(*v);
    }
    let v = match e.kind() {
        Kind::Num(q) => rational_to_f64(q),
        Kind::Sym(s) => match point.get(s) {
            Some(q) => rational_to_f64(q),
            None => match s.definition() {
                Some(d) => eval_f64(d, point, memo)?,
                None => return Err(ExprError::UnboundSymbol(s.to_string())),
            },
        },
        Kind::Add(c) => {
            // Neumaier summation: sums here often cancel to far below their terms.
            let (mut acc, mut comp) = (0.0f64, 0.0f64);
            for t in c.iter() {
                let x = eval_f64(t, point, memo)?;
                let s = acc + x;
                comp += if acc.abs() >= x.abs() { (acc - s) + x } else { (x - s) + acc };
                acc = s;
            }
            acc + comp
        }
        Kind::Mul(c) => {
            let mut acc = 1.0;
            for t in c.iter() {
                acc *= eval_f64(t, point, memo)?;
            }
            acc
        }
        Kind::Pow(b, p) => {
            let x = eval_f64(b, point, memo)?;
            if !p.is_integer() && x < 0.0 {
                return Err(ExprError::NegativeRadicand(format!("{x}")));
            }
            if p.is_integer() {
                if x == 0.0 && p.is_negative() {
                    return Err(ExprError::DivisionByZero);
                }
                x.powi(p.to_integer() as i32)
            } else {
                x.powf(*p.numer() as f64 / *p.denom() as f64)
            }
        }
    };
    memo.insert(e.id(), v);
    Ok(v)
}

/// Evaluates several expressions in double precision, sharing one memo.
/// Much faster than [`eval_numeric_many`] on deep expressions, whose exact
/// intermediate rationals grow quickly.
pub fn eval_f64_many(es: &[Expr], point: &HashMap<Symbol, Q>) -> Result<Vec<f64>, ExprError> {
    let mut memo = FxHashMap::default();
    es.iter().map(|e| eval_f64(e, point, &mut memo)).collect()
}

/// Evaluates `e` at a rational point. Auxiliary symbols with a definition
/// that are not bound evaluate through their definition.
pub fn eval_numeric(e: &Expr, point: &HashMap<Symbol, Q>) -> Result<Numeric, ExprError> {
    let mut ev = SurdEval { point, d: None, memo: FxHashMap::default() };
    match ev.eval(e) {
        Ok(v) => {
            if v.b.is_zero() {
                Ok(Numeric::Rational(v.a))
            } else {
                Ok(Numeric::Surd { a: v.a, b: v.b, d: ev.d.unwrap() })
            }
        }
        Err(Fail::Err(err)) => Err(err),
        Err(Fail::NeedFloat) => Ok(Numeric::Float(eval_f64(e, point, &mut FxHashMap::default())?)),
    }
}

/// Evaluates several expressions at one point, sharing the memo across
/// them.
pub fn eval_numeric_many(es: &[Expr], point: &HashMap<Symbol, Q>) -> Result<Vec<Numeric>, ExprError> {
    let mut ev = SurdEval { point, d: None, memo: FxHashMap::default() };
    let mut vals = Vec::with_capacity(es.len());
    for e in es {
        match ev.eval(e) {
            Ok(v) => vals.push(v),
            Err(Fail::Err(err)) => return Err(err),
            Err(Fail::NeedFloat) => {
                let mut memo = FxHashMap::default();
                return es.iter().map(|e| eval_f64(e, point, &mut memo).map(Numeric::Float)).collect();
            }
        }
    }
    Ok(vals
        .into_iter()
        .map(|v| {
            if v.b.is_zero() {
                Numeric::Rational(v.a)
            } else {
                Numeric::Surd { a: v.a, b: v.b, d: ev.d.clone().unwrap() }
            }
        })
        .collect())
}

/// The Mersenne prime 2^61 − 1 (≡ 3 mod 4, so square roots are a single
/// exponentiation).
pub const PRIME: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    let p = (a as u128) * (b as u128);
    let lo = (p as u64) & PRIME;
    let hi = (p >> 61) as u64;
    let s = lo + hi;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

fn addmod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

fn powmod(mut a: u64, mut k: u64) -> u64 {
    let mut acc = 1;
    while k > 0 {
        if k & 1 == 1 {
            acc = mulmod(acc, a);
        }
        a = mulmod(a, a);
        k >>= 1;
    }
    acc
}

fn invmod(a: u64) -> Option<u64> {
    (a != 0).then(|| powmod(a, PRIME - 2))
}

fn q_mod(q: &Q) -> Option<u64> {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    let p = BigInt::from(PRIME);
    let reduce = |n: &BigInt| -> u64 {
        let r = n % &p;
        let r = if r.is_negative() { r + &p } else { r };
        r.to_u64().unwrap()
    };
    let n = reduce(q.numer());
    let d = reduce(q.denom());
    invmod(d).map(|di| mulmod(n, di))
}

/// Why a modular evaluation had to be abandoned at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModFailure {
    /// A denominator vanished modulo the prime.
    Pole,
    /// A radicand was a quadratic non-residue.
    NonResidue,
}

/// Evaluation modulo [`PRIME`] at a pseudo-random point. Every free symbol
/// receives a value derived from `(seed, point, symbol)`, so independent
/// expressions evaluated with the same seed see the same point.
pub struct ModEval {
    seed: u64,
    point: u64,
    memo: FxHashMap<usize, Result<u64, ModFailure>>,
    overrides: HashMap<Symbol, u64>,
}

impl ModEval {
    pub fn new(seed: u64, point: u64) -> Self {
        ModEval { seed, point, memo: FxHashMap::default(), overrides: HashMap::new() }
    }

    /// Pins a symbol to a rational value (reduced mod p).
    pub fn bind(&mut self, s: Symbol, q: &Q) {
        if let Some(v) = q_mod(q) {
            self.overrides.insert(s, v);
            self.memo.clear();
        }
    }

    pub fn symbol_value(&self, s: &Symbol) -> u64 {
        if let Some(v) = self.overrides.get(s) {
            return *v;
        }
        let h = mix(mix(self.seed ^ 0x5EED, self.point), s.stable_hash());
        let v = mix(h, 0xC0FFEE) % PRIME;
        v.max(1)
    }

    pub fn eval(&mut self, e: &Expr) -> Result<u64, ModFailure> {
        if let Some(v) = self.memo.get(&e.id()) {
            return *v;
        }
        let v = self.eval_inner(e);
        self.memo.insert(e.id(), v);
        v
    }

    fn eval_inner(&mut self, e: &Expr) -> Result<u64, ModFailure> {
        Ok(match e.kind() {
            Kind::Num(q) => q_mod(q).ok_or(ModFailure::Pole)?,
            Kind::Sym(s) => match (self.overrides.contains_key(s), s.definition()) {
                (false, Some(d)) => {
                    let d = d.clone();
                    self.eval(&d)?
                }
                _ => self.symbol_value(s),
            },
            Kind::Add(c) => {
                let mut acc = 0;
                for t in c.iter() {
                    acc = addmod(acc, self.eval(t)?);
                }
                acc
            }
            Kind::Mul(c) => {
                let mut acc = 1;
                for t in c.iter() {
                    acc = mulmod(acc, self.eval(t)?);
                }
                acc
            }
            Kind::Pow(b, p) => {
                let x = self.eval(b)?;
                let n = p.floor().to_integer();
                let mut v = if n >= 0 {
                    powmod(x, n as u64)
                } else {
                    powmod(invmod(x).ok_or(ModFailure::Pole)?, n.unsigned_abs())
                };
                if !p.is_integer() {
                    let r = powmod(x, (PRIME + 1) / 4);
                    if mulmod(r, r) != x {
                        return Err(ModFailure::NonResidue);
                    }
                    v = mulmod(v, r);
                }
                v
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: &str) -> Symbol {
        Symbol::aux(n)
    }
    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    #[test]
    fn exact_rational_values() {
        let (a, b) = (Expr::sym(s("s")), Expr::sym(s("t")));
        let mut pt = HashMap::new();
        pt.insert(s("s"), q(1, 1));
        pt.insert(s("t"), q(3, 1));
        let e = (&a + &b) / Expr::int(2);
        assert_eq!(eval_numeric(&e, &pt).unwrap(), Numeric::Rational(q(2, 1)));
        pt.insert(s("s"), q(2, 3));
        pt.insert(s("t"), q(3, 2));
        assert_eq!(eval_numeric(&(&a * &b), &pt).unwrap(), Numeric::Rational(q(1, 1)));
    }

    #[test]
    fn radicals() {
        let w = Expr::sym(s("w"));
        let mut pt = HashMap::new();
        pt.insert(s("w"), q(-1, 1));
        assert!(matches!(eval_numeric(&w.sqrt(), &pt), Err(ExprError::NegativeRadicand(_))));
        pt.insert(s("w"), q(2, 1));
        let e = Expr::pow(&w, Rational64::new(3, 2)) - w.sqrt();
        let v = eval_numeric(&e, &pt).unwrap();
        assert_eq!(v, Numeric::Surd { a: q(0, 1), b: q(1, 1), d: q(2, 1) });
        assert!((v.to_f64() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(eval_numeric(&Expr::sym(s("z")), &pt), Err(ExprError::UnboundSymbol(_))));
    }

    #[test]
    fn unrelated_radicals_fall_back_to_float() {
        let mut pt = HashMap::new();
        pt.insert(s("a"), q(2, 1));
        pt.insert(s("b"), q(3, 1));
        let e = Expr::sym(s("a")).sqrt() + Expr::sym(s("b")).sqrt();
        let v = eval_numeric(&e, &pt).unwrap();
        assert!(matches!(v, Numeric::Float(_)));
        assert!((v.to_f64() - (2f64.sqrt() + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn surd_to_f64_avoids_cancellation() {
        // 1e8 - sqrt(1e16 - 1) ≈ 5e-9
        let v = Numeric::Surd { a: q(100_000_000, 1), b: q(-1, 1), d: q(9_999_999_999_999_999, 1) };
        let x = v.to_f64();
        assert!((x - 5e-9).abs() < 1e-18, "{x}");
    }

    #[test]
    fn modular_identities() {
        let (a, b) = (Expr::sym(s("a")), Expr::sym(s("b")));
        let lhs = (&a + &b).powi(2);
        let rhs = a.powi(2) + Expr::int(2) * &a * &b + b.powi(2);
        for k in 0..5 {
            let mut m = ModEval::new(7, k);
            assert_eq!(m.eval(&lhs), m.eval(&rhs));
        }
        let mut m = ModEval::new(7, 0);
        m.bind(s("a"), &q(4, 1));
        assert_eq!(m.eval(&a.sqrt()), Ok(2));
    }
}

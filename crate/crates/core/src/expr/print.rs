//! Canonical text form. The output re-parses to the same expression.

use std::fmt::{self, Write};

use num_rational::Rational64;
use num_traits::{One, Signed};

use super::{split_coeff, Expr, Kind, Q};

fn write_q(f: &mut impl Write, q: &Q) -> fmt::Result {
    if q.denom().is_one() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

fn write_exp(f: &mut impl Write, e: Rational64) -> fmt::Result {
    if e.is_integer() && e.is_positive() {
        write!(f, "{}", e.numer())
    } else if e.is_integer() {
        write!(f, "({})", e.numer())
    } else {
        write!(f, "({}/{})", e.numer(), e.denom())
    }
}

/// A base of `^`: atoms and non-negative integers print bare.
fn write_base(f: &mut impl Write, b: &Expr) -> fmt::Result {
    match b.kind() {
        Kind::Sym(_) => write!(f, "{}", b),
        Kind::Num(q) if !q.is_negative() && q.denom().is_one() => write_q(f, q),
        _ => write!(f, "({})", b),
    }
}

fn write_power(f: &mut impl Write, b: &Expr, e: Rational64) -> fmt::Result {
    write_base(f, b)?;
    if !e.is_one() {
        f.write_char('^')?;
        write_exp(f, e)?;
    }
    Ok(())
}

/// A factor inside a product.
fn write_factor(f: &mut impl Write, x: &Expr) -> fmt::Result {
    match x.kind() {
        Kind::Add(_) => write!(f, "({})", x),
        Kind::Pow(b, e) => write_power(f, b, *e),
        _ => write!(f, "{}", x),
    }
}

/// Writes `|term|` (a term of a sum with its sign stripped); returns whether
/// the term was negative.
fn write_unsigned_term(f: &mut impl Write, t: &Expr) -> Result<bool, fmt::Error> {
    let (c, rest) = split_coeff(t);
    let neg = c.is_negative();
    let c = c.abs();
    if rest.is_one() {
        write_q(f, &c)?;
        return Ok(neg);
    }
    let factors: Vec<Expr> = match rest.kind() {
        Kind::Mul(fs) => fs.to_vec(),
        _ => vec![rest.clone()],
    };
    let (den, num): (Vec<&Expr>, Vec<&Expr>) =
        factors.iter().partition(|x| matches!(x.kind(), Kind::Pow(_, e) if e.is_negative()));
    let mut first = true;
    if !c.is_one() || num.is_empty() {
        write_q(f, &c)?;
        first = false;
    }
    for x in num {
        if !first {
            f.write_char('*')?;
        }
        write_factor(f, x)?;
        first = false;
    }
    for x in den {
        if let Kind::Pow(b, e) = x.kind() {
            f.write_char('/')?;
            write_power(f, b, -*e)?;
        }
    }
    Ok(neg)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Num(q) => write_q(f, q),
            Kind::Sym(s) => write!(f, "{}", s),
            Kind::Pow(b, e) => {
                if e.is_negative() {
                    f.write_str("1/")?;
                    write_power(f, b, -*e)
                } else {
                    write_power(f, b, *e)
                }
            }
            Kind::Mul(_) => {
                let mut buf = String::new();
                let neg = write_unsigned_term(&mut buf, self)?;
                if neg {
                    f.write_char('-')?;
                }
                f.write_str(&buf)
            }
            Kind::Add(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    let mut buf = String::new();
                    let neg = write_unsigned_term(&mut buf, t)?;
                    match (k, neg) {
                        (0, true) => f.write_char('-')?,
                        (0, false) => {}
                        (_, true) => f.write_str(" - ")?,
                        (_, false) => f.write_str(" + ")?,
                    }
                    f.write_str(&buf)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::Symbol;
    use super::*;

    fn s(n: &str) -> Expr {
        Expr::sym(Symbol::aux(n))
    }

    #[test]
    fn prints_products_and_sums() {
        let (a, b) = (s("a"), s("b"));
        assert_eq!((Expr::int(2) * &a).to_string(), "2*a");
        assert_eq!((&a - &b).to_string(), "a - b");
        assert_eq!((Expr::rational(1, 2) * a.powi(2)).to_string(), "1/2*a^2");
        assert_eq!((&a / (&b * &b)).to_string(), "a/b^2");
        assert_eq!(b.recip().to_string(), "1/b");
        assert_eq!((-(&a * &b)).to_string(), "-a*b");
        assert_eq!(((&a + &b) * &a).to_string(), "a*(a + b)");
        assert_eq!(a.sqrt().to_string(), "a^(1/2)");
        assert_eq!(Expr::pow(&a, Rational64::new(-3, 2)).to_string(), "1/a^(3/2)");
    }
}

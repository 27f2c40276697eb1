//! Full expansion into sparse polynomials over atoms.
//!
//! Atoms are symbols and "kernels" (sums or products raised to a negative
//! or half-integer power, which cannot be expanded). Exponents are stored in
//! half units so `w^(1/2)` is the atom `w` with exponent 1.

use rustc_hash::FxHashMap as HashMap;
use std::sync::Mutex;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use once_cell::sync::Lazy;

use super::{q_sqrt_exact, Expr, Kind, Q};

struct AtomTable {
    ids: HashMap<Expr, u32>,
    atoms: Vec<Expr>,
}

static ATOMS: Lazy<Mutex<AtomTable>> =
    Lazy::new(|| Mutex::new(AtomTable { ids: HashMap::default(), atoms: Vec::new() }));

/// Tag bit on ids of non-symbol atoms.
const KERNEL: u32 = 1 << 31;

fn atom_id(e: &Expr) -> u32 {
    let mut t = ATOMS.lock().expect("atom table poisoned");
    if let Some(&i) = t.ids.get(e) {
        return i;
    }
    let mut i = t.atoms.len() as u32;
    if !matches!(e.kind(), Kind::Sym(_)) {
        i |= KERNEL;
    }
    t.atoms.push(e.clone());
    t.ids.insert(e.clone(), i);
    i
}

fn atom_expr(i: u32) -> Expr {
    ATOMS.lock().expect("atom table poisoned").atoms[(i & !KERNEL) as usize].clone()
}

/// Monomial: `(atom id, exponent in half units)`, sorted by id, no zeros.
pub(crate) type Mono = Vec<(u32, i32)>;

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let e = a[i].1 + b[j].1;
                if e != 0 {
                    out.push((a[i].0, e));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Sparse polynomial (Laurent in half-integer exponents) with exact
/// rational coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub(crate) terms: HashMap<Mono, Q>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(q: Q) -> Poly {
        let mut p = Poly::zero();
        if !q.is_zero() {
            p.terms.insert(Vec::new(), q);
        }
        p
    }

    fn monomial(m: Mono, q: Q) -> Poly {
        let mut p = Poly::zero();
        if !q.is_zero() {
            p.terms.insert(m, q);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, m: Mono, q: Q) {
        if q.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(c) => {
                *c += q;
                if c.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, q);
            }
        }
    }

    pub fn add_assign(&mut self, other: &Poly) {
        for (m, q) in &other.terms {
            self.add_term(m.clone(), q.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, c: &Q) {
        if c.is_zero() {
            return;
        }
        for (m, q) in &other.terms {
            self.add_term(m.clone(), q * c);
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        for (m1, q1) in &small.terms {
            for (m2, q2) in &large.terms {
                out.add_term(mono_mul(m1, m2), q1 * q2);
            }
        }
        out.settle()
    }

    fn pow_u(&self, mut n: u64) -> Poly {
        let mut acc = Poly::constant(Q::one());
        let mut sq = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&sq);
            }
            n >>= 1;
            if n > 0 {
                sq = sq.mul(&sq);
            }
        }
        acc
    }

    /// Expands kernels whose accumulated exponent reached a full positive
    /// power (e.g. `K^(1/2)·K^(1/2)`).
    fn settle(self) -> Poly {
        let needs = self.terms.keys().any(|m| m.iter().any(|&(a, e)| e >= 2 && is_kernel(a)));
        if !needs {
            return self;
        }
        let mut out = Poly::zero();
        for (m, q) in self.terms {
            let mut rest: Mono = Vec::with_capacity(m.len());
            let mut factors = Vec::new();
            for (a, e) in m {
                if e >= 2 && is_kernel(a) {
                    let full = e / 2;
                    if e % 2 != 0 {
                        rest.push((a, 1));
                    }
                    factors.push((atom_expr(a), full as u64));
                } else {
                    rest.push((a, e));
                }
            }
            let mut p = Poly::monomial(rest, q);
            for (b, n) in factors {
                p = p.mul(&Poly::from_expr(&b).pow_u(n));
            }
            out.add_assign(&p);
        }
        out
    }

    /// Full expansion of `e`.
    pub fn from_expr(e: &Expr) -> Poly {
        let mut memo = HashMap::default();
        expand(e, &mut memo)
    }

    /// Rebuilds an expression; the smart constructors order the terms.
    pub fn to_expr(&self) -> Expr {
        let mut keys: Vec<&Mono> = self.terms.keys().collect();
        keys.sort();
        Expr::add_all(keys.into_iter().map(|m| {
            let mut fs = Vec::with_capacity(m.len() + 1);
            fs.push(Expr::num(self.terms[m].clone()));
            for &(a, e) in m {
                fs.push(Expr::pow_unchecked(&atom_expr(a), Rational64::new(e as i64, 2)));
            }
            Expr::mul_all(fs)
        }))
    }

    /// Exact zero decision. Atoms with an expansion (defined auxiliary
    /// symbols and sum kernels) are eliminated one at a time: negative powers
    /// are cleared, the integer and half-integer parts are separated (the
    /// square root of a non-square is independent over the remaining field),
    /// and integer powers are replaced by the expanded definition.
    pub fn is_identically_zero(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        let target =
            self.terms.keys().flat_map(|m| m.iter().map(|&(a, _)| a)).filter(|&a| reducible(a).is_some()).min();
        let Some(a) = target else { return false };
        let def = reducible(a).unwrap();
        let dpoly = Poly::from_expr(&def);
        let emin = self.terms.keys().map(|m| m.iter().find(|t| t.0 == a).map_or(0, |t| t.1)).min().unwrap_or(0);
        let shift = if emin < 0 { (-emin + 1) / 2 * 2 } else { 0 };
        // exponent (full units) -> coefficient polynomial, per parity
        let mut parts: [HashMap<i32, Poly>; 2] = [HashMap::default(), HashMap::default()];
        for (m, q) in &self.terms {
            let mut rest = Vec::with_capacity(m.len());
            let mut ea = shift;
            for &(b, e) in m {
                if b == a {
                    ea += e;
                } else {
                    rest.push((b, e));
                }
            }
            let parity = (ea % 2) as usize;
            parts[parity].entry(ea / 2).or_default().add_term(rest, q.clone());
        }
        parts.iter().all(|part| {
            let mut total = Poly::zero();
            let mut exps: Vec<&i32> = part.keys().collect();
            exps.sort();
            let mut cache: HashMap<i32, Poly> = HashMap::default();
            for &j in exps {
                let dj = cache.entry(j).or_insert_with(|| dpoly.pow_u(j as u64)).clone();
                total.add_assign(&dj.mul(&part[&j]));
            }
            total.is_identically_zero()
        })
    }

    /// Leading monomial under the internal order (deterministic within a
    /// process).
    pub(crate) fn leading(&self) -> Option<(&Mono, &Q)> {
        self.terms.iter().max_by(|a, b| a.0.cmp(b.0))
    }
}

fn is_kernel(a: u32) -> bool {
    a & KERNEL != 0
}

/// The expansion an atom stands for, if any.
fn reducible(a: u32) -> Option<Expr> {
    let e = atom_expr(a);
    match e.kind() {
        Kind::Sym(s) => s.definition().cloned(),
        _ => Some(e.clone()),
    }
}

fn expand(e: &Expr, memo: &mut HashMap<usize, Poly>) -> Poly {
    if let Some(p) = memo.get(&e.id()) {
        return p.clone();
    }
    let p = match e.kind() {
        Kind::Num(q) => Poly::constant(q.clone()),
        Kind::Sym(_) => Poly::monomial(vec![(atom_id(e), 2)], Q::one()),
        Kind::Add(c) => {
            let mut acc = Poly::zero();
            for t in c.iter() {
                let tp = expand(t, memo);
                acc.add_assign(&tp);
            }
            acc
        }
        Kind::Mul(c) => {
            let mut acc = Poly::constant(Q::one());
            for f in c.iter() {
                let fp = expand(f, memo);
                acc = acc.mul(&fp);
                if acc.is_zero() {
                    break;
                }
            }
            acc
        }
        Kind::Pow(b, x) => expand_pow(b, *x, memo),
    };
    memo.insert(e.id(), p.clone());
    p
}

fn expand_pow(b: &Expr, x: Rational64, memo: &mut HashMap<usize, Poly>) -> Poly {
    let half = (*x.numer() * (2 / *x.denom())) as i32;
    if let Kind::Sym(_) = b.kind() {
        return Poly::monomial(vec![(atom_id(b), half)], Q::one());
    }
    let bp = expand(b, memo);
    if bp.is_zero() {
        return Poly::zero();
    }
    if bp.len() == 1 {
        let (m, c) = bp.terms.iter().next().unwrap();
        if x.is_integer() {
            let n = x.to_integer();
            let c =
                if n >= 0 { num_traits::pow(c.clone(), n as usize) } else { num_traits::pow(c.recip(), (-n) as usize) };
            let m: Mono = m.iter().map(|&(a, e)| (a, e * n as i32)).collect();
            return Poly::monomial(m, c);
        }
        // A lone atom under a half-integer power keeps its exponent. A
        // product with a square coefficient is left unsplit by design.
        if m.len() == 1 && m[0].1 == 2 && c.is_one() {
            return Poly::monomial(vec![(m[0].0, half)], Q::one());
        }
        if m.is_empty() {
            return match q_sqrt_exact(c) {
                Some(r) if c.is_positive() => {
                    let n = x.floor().to_integer();
                    let v = if n >= 0 {
                        num_traits::pow(c.clone(), n as usize)
                    } else {
                        num_traits::pow(c.recip(), (-n) as usize)
                    };
                    Poly::constant(v * r)
                }
                _ => kernel_pow(&bp, half),
            };
        }
    }
    if x.is_integer() && x.is_positive() {
        return bp.pow_u(x.to_integer() as u64);
    }
    kernel_pow(&bp, half)
}

/// `B^(half/2)` for an unexpandable base: nonnegative full powers are
/// expanded, the rest stays on the kernel atom.
fn kernel_pow(bp: &Poly, half: i32) -> Poly {
    let base = bp.to_expr();
    let a = atom_id(&base);
    if half >= 2 {
        let full = half / 2;
        let mut p = bp.pow_u(full as u64);
        if half % 2 != 0 {
            p = p.mul(&Poly::monomial(vec![(a, 1)], Q::one()));
        }
        p
    } else {
        Poly::monomial(vec![(a, half)], Q::one())
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
    fn binomial_expands() {
        let (a, b) = (s("a"), s("b"));
        let e = (&a + &b).powi(2) - a.powi(2) - Expr::int(2) * &a * &b - b.powi(2);
        assert!(Poly::from_expr(&e).is_zero());
        let e = (&a + &b) * (&a - &b) - (a.powi(2) - b.powi(2));
        assert!(Poly::from_expr(&e).is_zero());
    }

    #[test]
    fn round_trip_is_stable() {
        let (a, b) = (s("a"), s("b"));
        let e = (&a + Expr::int(2) * &b).powi(3) * a.sqrt() + (&a + &b).recip();
        let p = Poly::from_expr(&e);
        let e1 = p.to_expr();
        assert_eq!(Poly::from_expr(&e1).to_expr(), e1);
    }

    #[test]
    fn kernel_halves_recombine() {
        let (a, b) = (s("a"), s("b"));
        let k = (&a + &b).sqrt();
        let e = &k * &k - &a - &b;
        assert!(Poly::from_expr(&e).is_zero());
    }

    #[test]
    fn definitions_are_eliminated() {
        let (a, b) = (s("a"), s("b"));
        let w = Expr::sym(Symbol::defined("w", &a * &b + Expr::one()));
        // w^(-1)·(ab + 1) − 1 is zero only after eliminating w
        let e = w.recip() * (&a * &b + Expr::one()) - Expr::one();
        let p = Poly::from_expr(&e);
        assert!(!p.is_zero());
        assert!(p.is_identically_zero());
        // √w·w^(-1)·(ab+1) − √w
        let e = w.sqrt() * w.recip() * (&a * &b + Expr::one()) - w.sqrt();
        assert!(Poly::from_expr(&e).is_identically_zero());
        // √w − 1 is not zero
        assert!(!Poly::from_expr(&(w.sqrt() - Expr::one())).is_identically_zero());
    }

    #[test]
    fn rational_function_identity() {
        let (a, b) = (s("a"), s("b"));
        let e = (&a + &b).recip() * &a + (&a + &b).recip() * &b - Expr::one();
        assert!(Poly::from_expr(&e).is_identically_zero());
    }
}

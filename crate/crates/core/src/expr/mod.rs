//! Exact symbolic expressions over jet coordinates.
//!
//! Expressions are immutable, hash-consed DAG nodes: structurally equal
//! expressions share one allocation, so equality is a pointer comparison and
//! derivation passes can memoize per node. The smart constructors keep every
//! node in a light canonical form (flattened, sorted, like terms and powers
//! collected, constants folded) without expanding products of sums; full
//! expansion lives in [`poly`] and is selected through [`ExpansionPolicy`].

mod derive;
mod eval;
mod poly;
mod print;
mod simplify;
mod symbol;

use rustc_hash::FxHashMap as HashMap;
use std::cmp::Ordering;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, Weak};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;

pub(crate) use derive::Deriver;
pub use derive::{diff, diff_many, substitute, substitute_raw};
pub use eval::{eval_f64_many, eval_numeric, eval_numeric_many, ModEval, Numeric, PRIME};
pub use poly::Poly;
pub(crate) use simplify::derive_seed;
pub use simplify::{is_zero, normalize, ExpansionPolicy, LinearSpan, Simplifier, ZeroMethod, ZeroVerdict};
pub use symbol::{AuxSymbol, FiberLabel, Symbol};

/// Arbitrary-precision rational.
pub type Q = BigRational;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ExprError {
    #[error("cyclic binding involving `{0}`")]
    CyclicBinding(String),
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("negative radicand {0}")]
    NegativeRadicand(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("unsupported exponent {0}: only denominators 1 and 2 are allowed")]
    UnsupportedExponent(String),
}

pub(crate) fn mix(h: u64, v: u64) -> u64 {
    let mut z = (h ^ v.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_bigint(h: u64, n: &BigInt) -> u64 {
    let mut h = mix(h, if n.is_negative() { 1 } else { 0 });
    for d in n.magnitude().to_u64_digits() {
        h = mix(h, d);
    }
    h
}

pub(crate) fn hash_q(h: u64, q: &Q) -> u64 {
    hash_bigint(hash_bigint(h, q.numer()), q.denom())
}

// Node metadata flags.
pub(crate) const HAS_BASE: u8 = 1;
pub(crate) const HAS_UNKNOWN: u8 = 2;
pub(crate) const HAS_FREE_AUX: u8 = 4;
pub(crate) const HAS_AUX_DEF: u8 = 8;
pub(crate) const HAS_RADICAL: u8 = 16;

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Meta {
    /// Highest jet order of any fiber coordinate reachable (through aux
    /// definitions too); -1 when none.
    pub max_order: i16,
    pub flags: u8,
}

impl Meta {
    fn empty() -> Self {
        Meta { max_order: -1, flags: 0 }
    }

    fn join(self, other: Meta) -> Meta {
        Meta { max_order: self.max_order.max(other.max_order), flags: self.flags | other.flags }
    }
}

#[derive(Debug)]
pub(crate) enum Kind {
    Num(Q),
    Sym(Symbol),
    Add(Box<[Expr]>),
    Mul(Box<[Expr]>),
    Pow(Expr, Rational64),
}

#[derive(Debug)]
pub(crate) struct Node {
    pub kind: Kind,
    hash: u64,
    pub meta: Meta,
}

/// Exact symbolic expression. Cheap to clone; safe to share across threads.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({})", self)
    }
}

// ---------------------------------------------------------------------------
// Interning

const SHARDS: usize = 64;

struct Shard {
    table: HashMap<u64, Vec<Weak<Node>>>,
    inserts: usize,
}

struct Interner {
    shards: Vec<Mutex<Shard>>,
}

static INTERNER: Lazy<Interner> = Lazy::new(|| Interner {
    shards: (0..SHARDS).map(|_| Mutex::new(Shard { table: HashMap::default(), inserts: 0 })).collect(),
});

fn shallow_eq(a: &Kind, b: &Kind) -> bool {
    match (a, b) {
        (Kind::Num(x), Kind::Num(y)) => x == y,
        (Kind::Sym(x), Kind::Sym(y)) => x == y,
        (Kind::Add(x), Kind::Add(y)) | (Kind::Mul(x), Kind::Mul(y)) => {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| p == q)
        }
        (Kind::Pow(b1, e1), Kind::Pow(b2, e2)) => b1 == b2 && e1 == e2,
        _ => false,
    }
}

fn kind_hash(kind: &Kind) -> u64 {
    match kind {
        Kind::Num(q) => hash_q(0x31, q),
        Kind::Sym(s) => mix(0x32, s.stable_hash()),
        Kind::Add(c) => c.iter().fold(0x33, |h, e| mix(h, e.0.hash)),
        Kind::Mul(c) => c.iter().fold(0x34, |h, e| mix(h, e.0.hash)),
        Kind::Pow(b, e) => mix(mix(mix(0x35, b.0.hash), *e.numer() as u64), *e.denom() as u64),
    }
}

fn kind_meta(kind: &Kind) -> Meta {
    match kind {
        Kind::Num(_) => Meta::empty(),
        Kind::Sym(s) => match s {
            Symbol::Base(_) => Meta { max_order: -1, flags: HAS_BASE },
            Symbol::Jet { index, .. } => Meta { max_order: index.order() as i16, flags: 0 },
            Symbol::Unknown { .. } => Meta { max_order: -1, flags: HAS_UNKNOWN },
            Symbol::Aux(a) => match &a.definition {
                None => Meta { max_order: -1, flags: HAS_FREE_AUX },
                Some(d) => {
                    let m = d.meta();
                    Meta { max_order: m.max_order, flags: m.flags | HAS_AUX_DEF }
                }
            },
        },
        Kind::Add(c) | Kind::Mul(c) => c.iter().fold(Meta::empty(), |m, e| m.join(e.meta())),
        Kind::Pow(b, e) => {
            let mut m = b.meta();
            if !e.is_integer() {
                m.flags |= HAS_RADICAL;
            }
            m
        }
    }
}

fn intern(kind: Kind) -> Expr {
    let hash = kind_hash(&kind);
    let shard = &INTERNER.shards[(hash as usize) % SHARDS];
    let mut guard = shard.lock().expect("interner poisoned");
    if let Some(bucket) = guard.table.get(&hash) {
        for w in bucket {
            if let Some(node) = w.upgrade() {
                if shallow_eq(&node.kind, &kind) {
                    return Expr(node);
                }
            }
        }
    }
    let meta = kind_meta(&kind);
    let node = Arc::new(Node { kind, hash, meta });
    guard.table.entry(hash).or_default().push(Arc::downgrade(&node));
    guard.inserts += 1;
    if guard.inserts > 4096.max(guard.table.len()) {
        guard.table.retain(|_, bucket| {
            bucket.retain(|w| w.strong_count() > 0);
            !bucket.is_empty()
        });
        guard.inserts = 0;
    }
    Expr(node)
}

static ZERO: Lazy<Expr> = Lazy::new(|| intern(Kind::Num(Q::zero())));
static ONE: Lazy<Expr> = Lazy::new(|| intern(Kind::Num(Q::one())));

// ---------------------------------------------------------------------------
// Accessors

impl Expr {
    pub(crate) fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub(crate) fn meta(&self) -> Meta {
        self.0.meta
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Deterministic structural hash (identical across runs).
    pub fn stable_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn zero() -> Expr {
        ZERO.clone()
    }

    pub fn one() -> Expr {
        ONE.clone()
    }

    pub fn num(q: Q) -> Expr {
        if q.is_zero() {
            return Expr::zero();
        }
        if q.is_one() {
            return Expr::one();
        }
        intern(Kind::Num(q))
    }

    pub fn int(n: i64) -> Expr {
        Expr::num(Q::from_integer(BigInt::from(n)))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::num(Q::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn sym(s: Symbol) -> Expr {
        intern(Kind::Sym(s))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind(), Kind::Num(q) if q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.kind(), Kind::Num(q) if q.is_one())
    }

    pub fn as_num(&self) -> Option<&Q> {
        match self.kind() {
            Kind::Num(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.kind() {
            Kind::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Highest jet order of fiber coordinates occurring (structurally), if any.
    pub fn max_jet_order(&self) -> Option<usize> {
        let m = self.meta().max_order;
        (m >= 0).then_some(m as usize)
    }

    /// True when an unknown `F` symbol occurs structurally.
    pub fn has_unknowns(&self) -> bool {
        self.meta().flags & HAS_UNKNOWN != 0
    }

    /// Number of distinct DAG nodes.
    pub fn dag_size(&self) -> usize {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.kind() {
                Kind::Add(c) | Kind::Mul(c) => stack.extend(c.iter().cloned()),
                Kind::Pow(b, _) => stack.push(b.clone()),
                Kind::Sym(s) => {
                    if let Some(d) = s.definition() {
                        stack.push(d.clone());
                    }
                }
                Kind::Num(_) => {}
            }
        }
        seen.len()
    }

    /// Size of the expression written out as a tree, saturating at `cap`.
    pub fn tree_size(&self, cap: usize) -> usize {
        fn go(e: &Expr, cap: usize, memo: &mut HashMap<usize, usize>) -> usize {
            if let Some(&s) = memo.get(&e.id()) {
                return s;
            }
            let s = match e.kind() {
                Kind::Num(_) | Kind::Sym(_) => 1,
                Kind::Pow(b, _) => 1 + go(b, cap, memo),
                Kind::Add(c) | Kind::Mul(c) => {
                    let mut t = 1usize;
                    for x in c.iter() {
                        t = t.saturating_add(go(x, cap, memo)).min(cap);
                    }
                    t
                }
            };
            let s = s.min(cap);
            memo.insert(e.id(), s);
            s
        }
        go(self, cap, &mut HashMap::default())
    }

    /// Distinct symbols occurring, including those inside aux definitions
    /// (the defined aux symbols themselves are reported too), sorted.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut out = std::collections::BTreeSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.kind() {
                Kind::Add(c) | Kind::Mul(c) => stack.extend(c.iter().cloned()),
                Kind::Pow(b, _) => stack.push(b.clone()),
                Kind::Sym(s) => {
                    if let Some(d) = s.definition() {
                        stack.push(d.clone());
                    }
                    out.insert(s.clone());
                }
                Kind::Num(_) => {}
            }
        }
        out.into_iter().collect()
    }

    /// Symbols that act as independent coordinates: every symbol except
    /// auxiliary symbols that carry a definition.
    pub fn free_coordinates(&self) -> Vec<Symbol> {
        self.symbols().into_iter().filter(|s| s.definition().is_none()).collect()
    }
}

// ---------------------------------------------------------------------------
// Canonical ordering

fn kind_rank(k: &Kind) -> u8 {
    match k {
        Kind::Num(_) => 0,
        Kind::Sym(_) => 1,
        Kind::Pow(..) => 2,
        Kind::Mul(_) => 3,
        Kind::Add(_) => 4,
    }
}

fn cmp_slices(a: &[Expr], b: &[Expr]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        match (self.kind(), other.kind()) {
            (Kind::Num(a), Kind::Num(b)) => a.cmp(b),
            (Kind::Sym(a), Kind::Sym(b)) => a.cmp(b),
            (Kind::Pow(b1, e1), Kind::Pow(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Kind::Mul(a), Kind::Mul(b)) | (Kind::Add(a), Kind::Add(b)) => cmp_slices(a, b),
            (a, b) => kind_rank(a).cmp(&kind_rank(b)),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Splits a term into its rational coefficient and the remaining factor.
pub(crate) fn split_coeff(e: &Expr) -> (Q, Expr) {
    match e.kind() {
        Kind::Num(q) => (q.clone(), Expr::one()),
        Kind::Mul(c) => {
            if let Kind::Num(q) = c[0].kind() {
                let rest = if c.len() == 2 { c[1].clone() } else { intern(Kind::Mul(c[1..].into())) };
                (q.clone(), rest)
            } else {
                (Q::one(), e.clone())
            }
        }
        _ => (Q::one(), e.clone()),
    }
}

/// Splits a factor into base and exponent.
fn split_pow(e: &Expr) -> (Expr, Rational64) {
    match e.kind() {
        Kind::Pow(b, x) => (b.clone(), *x),
        _ => (e.clone(), Rational64::one()),
    }
}

// ---------------------------------------------------------------------------
// Smart constructors

fn q_pow_int(q: &Q, n: i64) -> Option<Q> {
    if n >= 0 {
        Some(num_traits::pow(q.clone(), n as usize))
    } else if q.is_zero() {
        None
    } else {
        Some(num_traits::pow(q.recip(), (-n) as usize))
    }
}

/// Exact square root of a non-negative rational when it is a perfect square.
pub(crate) fn q_sqrt_exact(q: &Q) -> Option<Q> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(Q::new(n, d))
    } else {
        None
    }
}

fn check_exponent(e: Rational64) -> Result<(), ExprError> {
    if *e.denom() == 1 || *e.denom() == 2 {
        Ok(())
    } else {
        Err(ExprError::UnsupportedExponent(e.to_string()))
    }
}

impl Expr {
    /// Sum with like-term collection.
    pub fn add_all<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = Q::zero();
        let mut order: Vec<Expr> = Vec::new();
        let mut coeffs: HashMap<Expr, Q> = HashMap::default();
        let mut push = |t: &Expr, constant: &mut Q| {
            if let Kind::Num(q) = t.kind() {
                *constant += q;
                return;
            }
            let (c, rest) = split_coeff(t);
            match coeffs.get_mut(&rest) {
                Some(v) => *v += c,
                None => {
                    order.push(rest.clone());
                    coeffs.insert(rest, c);
                }
            }
        };
        for t in terms {
            match t.kind() {
                Kind::Add(c) => {
                    for x in c.iter() {
                        push(x, &mut constant);
                    }
                }
                _ => push(&t, &mut constant),
            }
        }
        let mut kept: Vec<(Expr, Q)> = Vec::with_capacity(order.len());
        for rest in order {
            let c = coeffs.remove(&rest).unwrap();
            if !c.is_zero() {
                kept.push((rest, c));
            }
        }
        // terms are ordered by their non-numeric part, the constant first
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<Expr> = Vec::with_capacity(kept.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        out.extend(kept.into_iter().map(|(rest, c)| scale(&rest, c)));
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => intern(Kind::Add(out.into_boxed_slice())),
        }
    }

    /// Product with power collection.
    pub fn mul_all<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = Q::one();
        let mut order: Vec<Expr> = Vec::new();
        let mut exps: HashMap<Expr, Rational64> = HashMap::default();
        let mut push = |f: &Expr, coeff: &mut Q| {
            if let Kind::Num(q) = f.kind() {
                *coeff *= q;
                return;
            }
            let (b, e) = split_pow(f);
            match exps.get_mut(&b) {
                Some(v) => *v += e,
                None => {
                    order.push(b.clone());
                    exps.insert(b, e);
                }
            }
        };
        for f in factors {
            match f.kind() {
                Kind::Mul(c) => {
                    for x in c.iter() {
                        push(x, &mut coeff);
                    }
                }
                _ => push(&f, &mut coeff),
            }
            if coeff.is_zero() {
                return Expr::zero();
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(order.len() + 1);
        let mut recombine = false;
        for b in order {
            let e = exps[&b];
            if e.is_zero() {
                continue;
            }
            let p = Expr::pow_unchecked(&b, e);
            match p.kind() {
                Kind::Num(q) => coeff *= q,
                Kind::Mul(c) => {
                    // base^e split into a rational part and radicals, or a
                    // product base whose factors may merge with others.
                    recombine = true;
                    for x in c.iter() {
                        match x.kind() {
                            Kind::Num(q) => coeff *= q,
                            _ => out.push(x.clone()),
                        }
                    }
                }
                _ => out.push(p),
            }
        }
        if recombine {
            let bases: rustc_hash::FxHashSet<Expr> = out.iter().map(|f| split_pow(f).0).collect();
            if bases.len() != out.len() {
                out.push(Expr::num(coeff));
                return Expr::mul_all(out);
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        out.sort_by(|a, b| split_pow(a).0.cmp(&split_pow(b).0));
        if out.is_empty() {
            return Expr::num(coeff);
        }
        if coeff.is_one() && out.len() == 1 {
            return out.pop().unwrap();
        }
        if !coeff.is_one() {
            out.insert(0, Expr::num(coeff));
        }
        intern(Kind::Mul(out.into_boxed_slice()))
    }

    /// `base^exp` for exponents with denominator 1 or 2.
    pub fn try_pow(base: &Expr, exp: Rational64) -> Result<Expr, ExprError> {
        check_exponent(exp)?;
        if exp.is_zero() {
            return Ok(Expr::one());
        }
        if let Kind::Num(q) = base.kind() {
            if q.is_zero() && exp.is_negative() {
                return Err(ExprError::DivisionByZero);
            }
        }
        Ok(Expr::pow_unchecked(base, exp))
    }

    /// Panics on unsupported exponents or `0^negative`.
    pub fn pow(base: &Expr, exp: Rational64) -> Expr {
        Expr::try_pow(base, exp).unwrap_or_else(|e| panic!("invalid power: {e}"))
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr::pow(self, Rational64::from_integer(n))
    }

    pub fn sqrt(&self) -> Expr {
        Expr::pow(self, Rational64::new(1, 2))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    fn pow_unchecked(base: &Expr, exp: Rational64) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base.clone();
        }
        match base.kind() {
            Kind::Num(q) => {
                if exp.is_integer() {
                    return match q_pow_int(q, exp.to_integer()) {
                        Some(v) => Expr::num(v),
                        None => panic!("division by zero in constant power"),
                    };
                }
                // half-integer exponent: q^(n + 1/2) = q^n * q^(1/2)
                if q.is_negative() {
                    return intern(Kind::Pow(base.clone(), exp));
                }
                if let Some(r) = q_sqrt_exact(q) {
                    let n = exp.numer();
                    return match q_pow_int(&r, *n) {
                        Some(v) => Expr::num(v),
                        None => panic!("division by zero in constant power"),
                    };
                }
                let n = exp.floor().to_integer();
                let rad = intern(Kind::Pow(base.clone(), Rational64::new(1, 2)));
                if n == 0 {
                    return rad;
                }
                let c = q_pow_int(q, n).expect("nonzero");
                intern(Kind::Mul(vec![Expr::num(c), rad].into_boxed_slice()))
            }
            Kind::Pow(b, e1) => {
                if exp.is_integer() || *e1 == -Rational64::one() {
                    let e = *e1 * exp;
                    if *e.denom() <= 2 {
                        return Expr::pow_unchecked(b, e);
                    }
                }
                intern(Kind::Pow(base.clone(), exp))
            }
            Kind::Mul(c) if exp.is_integer() => Expr::mul_all(c.iter().map(|f| Expr::pow_unchecked(f, exp))),
            _ => intern(Kind::Pow(base.clone(), exp)),
        }
    }

    pub fn scale(&self, c: &Q) -> Expr {
        scale(self, c.clone())
    }
}

fn scale(e: &Expr, c: Q) -> Expr {
    if c.is_one() {
        return e.clone();
    }
    if c.is_zero() {
        return Expr::zero();
    }
    match e.kind() {
        Kind::Num(q) => Expr::num(q * c),
        Kind::Mul(ch) if !matches!(ch[0].kind(), Kind::Num(_)) => {
            let mut out = Vec::with_capacity(ch.len() + 1);
            out.push(Expr::num(c));
            out.extend(ch.iter().cloned());
            intern(Kind::Mul(out.into_boxed_slice()))
        }
        Kind::Mul(_) => Expr::mul_all([Expr::num(c), e.clone()]),
        _ => intern(Kind::Mul(vec![Expr::num(c), e.clone()].into_boxed_slice())),
    }
}

/// Combinatorial factor `n(ij)`: 1 on the diagonal, 2 off it.
pub fn n_factor(i: usize, j: usize) -> i64 {
    if i == j {
        1
    } else {
        2
    }
}

pub(crate) fn rational_to_f64(q: &Q) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // scale down huge numerators/denominators
            let nb = q.numer().bits() as i64;
            let db = q.denom().bits() as i64;
            let shift = (nb.max(db) - 900).max(0) as u64;
            let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

// ---------------------------------------------------------------------------
// Operators

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
        impl<'a> std::ops::$tr<&'a Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &'a Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, rhs)
            }
        }
        impl<'a> std::ops::$tr<Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, &rhs)
            }
        }
        impl<'a, 'b> std::ops::$tr<&'b Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: &'b Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::add_all([a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::add_all([a.clone(), scale(b, -Q::one())]));
binop!(Mul, mul, |a, b| Expr::mul_all([a.clone(), b.clone()]));
binop!(Div, div, |a, b| Expr::mul_all([a.clone(), b.recip()]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        scale(&self, -Q::one())
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        scale(self, -Q::one())
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Q> for Expr {
    fn from(q: Q) -> Expr {
        Expr::num(q)
    }
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Expr {
        Expr::sym(s)
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::add_all(iter)
    }
}

impl std::iter::Product for Expr {
    fn product<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::mul_all(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: &str) -> Expr {
        Expr::sym(Symbol::aux(n))
    }

    #[test]
    fn interning_shares_nodes() {
        let a = s("a") + s("b");
        let b = s("b") + s("a");
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn like_terms_collect() {
        let x = s("x");
        assert_eq!(&x + &x, Expr::int(2) * &x);
        assert!((&x - &x).is_zero());
        let u = s("u");
        let v = s("v");
        assert!((&u * &v - &v * &u).is_zero());
    }

    #[test]
    fn powers_collect() {
        let w = s("w");
        assert_eq!(w.sqrt() * w.sqrt(), w);
        assert!((w.recip() * &w).is_one());
        assert_eq!((&w * &w).sqrt(), Expr::pow(&w.powi(2), Rational64::new(1, 2)));
        assert_ne!((&w * &w).sqrt(), w);
    }

    #[test]
    fn constant_radicals() {
        assert_eq!(Expr::int(4).sqrt(), Expr::int(2));
        assert_eq!(Expr::rational(9, 4).sqrt(), Expr::rational(3, 2));
        let r2 = Expr::int(2).sqrt();
        assert_eq!(&r2 * &r2, Expr::int(2));
        let r8 = Expr::pow(&Expr::int(8), Rational64::new(3, 2));
        assert_eq!(r8, Expr::int(8) * Expr::int(8).sqrt());
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(Expr::try_pow(&s("x"), Rational64::new(1, 3)).is_err());
        assert_eq!(Expr::try_pow(&Expr::zero(), Rational64::from_integer(-1)), Err(ExprError::DivisionByZero));
    }

    #[test]
    fn metadata_tracks_orders() {
        use crate::jet::MultiIndex;
        let u = Expr::sym(Symbol::jet(FiberLabel::Component(0), MultiIndex::from_slice(&[2, 1])));
        let e = &u * s("a") + Expr::sym(Symbol::base(0));
        assert_eq!(e.max_jet_order(), Some(3));
        assert!(!e.has_unknowns());
    }
}

//! Jet-space coordinates, multi-indices and coordinate total derivatives.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{self, Deriver, Expr, FiberLabel, Simplifier, Symbol, Q};

/// Largest supported base dimension.
pub const MAX_BASE_DIM: usize = 8;

/// Element of `Z^m` with nonnegative entries.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: [u8; MAX_BASE_DIM],
    len: u8,
}

impl MultiIndex {
    pub fn zeros(m: usize) -> Self {
        assert!(m <= MAX_BASE_DIM, "base dimension {m} too large");
        MultiIndex { entries: [0; MAX_BASE_DIM], len: m as u8 }
    }

    pub fn from_slice(v: &[u8]) -> Self {
        let mut mi = MultiIndex::zeros(v.len());
        mi.entries[..v.len()].copy_from_slice(v);
        mi
    }

    /// The unit index `1_i`.
    pub fn unit(m: usize, i: usize) -> Self {
        MultiIndex::zeros(m).add_unit(i)
    }

    pub fn dim(&self) -> usize {
        self.len as usize
    }

    pub fn get(&self, i: usize) -> u8 {
        self.entries[i]
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries[..self.dim()]
    }

    /// `|I|`, the sum of the entries.
    pub fn order(&self) -> usize {
        self.entries().iter().map(|&c| c as usize).sum()
    }

    pub fn add_unit(mut self, i: usize) -> Self {
        assert!(i < self.dim(), "direction {i} out of range");
        self.entries[i] += 1;
        self
    }

    pub fn sub_unit(mut self, i: usize) -> Option<Self> {
        if i < self.dim() && self.entries[i] > 0 {
            self.entries[i] -= 1;
            Some(self)
        } else {
            None
        }
    }

    pub fn add(mut self, other: &MultiIndex) -> Self {
        for i in 0..self.dim() {
            self.entries[i] += other.entries[i];
        }
        self
    }

    /// `I!` = product of factorials of the entries.
    pub fn factorial(&self) -> u64 {
        self.entries().iter().map(|&c| (1..=c as u64).product::<u64>()).product()
    }

    /// Number of distinct orderings of the derivative sequence (multinomial).
    pub fn multiplicity(&self) -> u64 {
        let n: u64 = (1..=self.order() as u64).product();
        n / self.factorial()
    }

    /// Directions as a nondecreasing sequence, e.g. `(1,0,2)` → `[0,2,2]`.
    pub fn directions(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.order());
        for (i, &c) in self.entries().iter().enumerate() {
            for _ in 0..c {
                v.push(i);
            }
        }
        v
    }

    pub fn stable_hash(&self) -> u64 {
        self.entries().iter().fold(self.len as u64, |h, &c| expr::mix(h, c as u64))
    }

    /// All indices of order `r` in dimension `m`, in the graded order.
    pub fn of_order(m: usize, r: usize) -> Vec<MultiIndex> {
        fn rec(m: usize, pos: usize, left: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
            if pos + 1 == m {
                cur.entries[pos] = left as u8;
                out.push(*cur);
                return;
            }
            for c in (0..=left).rev() {
                cur.entries[pos] = c as u8;
                rec(m, pos + 1, left - c, cur, out);
            }
            cur.entries[pos] = 0;
        }
        let mut out = Vec::new();
        if m == 0 {
            if r == 0 {
                out.push(MultiIndex::zeros(0));
            }
            return out;
        }
        rec(m, 0, r, &mut MultiIndex::zeros(m), &mut out);
        out
    }

    /// All indices with order in `lo..=hi`.
    pub fn up_to(m: usize, lo: usize, hi: usize) -> Vec<MultiIndex> {
        (lo..=hi).flat_map(|r| MultiIndex::of_order(m, r)).collect()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.len.cmp(&other.len))
            .then_with(|| other.entries().cmp(self.entries()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, c) in self.entries().iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Binomial coefficient.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Coordinates of the jet bundle `J^k π` for a bundle with base dimension
/// `m` and fiber labels `labels`. Total derivatives are defined on the whole
/// jet tower, so results may exceed order `k`.
#[derive(Clone, Debug)]
pub struct JetSpace {
    m: usize,
    labels: Vec<FiberLabel>,
    k: usize,
}

impl JetSpace {
    /// Generic fiber components `u1..un`.
    pub fn new(m: usize, n: usize, k: usize) -> Self {
        JetSpace::with_labels(m, (0..n).map(|a| FiberLabel::Component(a as u16)).collect(), k)
    }

    pub fn with_labels(m: usize, labels: Vec<FiberLabel>, k: usize) -> Self {
        assert!((1..=MAX_BASE_DIM).contains(&m), "base dimension must be in 1..={MAX_BASE_DIM}");
        JetSpace { m, labels, k }
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn fiber_dim(&self) -> usize {
        self.labels.len()
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[FiberLabel] {
        &self.labels
    }

    pub fn label(&self, alpha: usize) -> FiberLabel {
        self.labels[alpha]
    }

    pub fn with_order(&self, k: usize) -> JetSpace {
        JetSpace { k, ..self.clone() }
    }

    pub fn base(&self, i: usize) -> Expr {
        Expr::sym(Symbol::base(i))
    }

    pub fn coord_symbol(&self, alpha: usize, index: MultiIndex) -> Symbol {
        Symbol::jet(self.labels[alpha], index)
    }

    pub fn coord(&self, alpha: usize, index: MultiIndex) -> Expr {
        Expr::sym(self.coord_symbol(alpha, index))
    }

    /// `u^α_I` given the entries of `I`.
    pub fn u(&self, alpha: usize, entries: &[u8]) -> Expr {
        assert_eq!(entries.len(), self.m);
        self.coord(alpha, MultiIndex::from_slice(entries))
    }

    /// Fiber coordinates of level `r`, ordered by label then multi-index.
    pub fn fiber_coords(&self, r: usize) -> Vec<Symbol> {
        let idx = MultiIndex::of_order(self.m, r);
        let mut out = Vec::with_capacity(self.labels.len() * idx.len());
        for &l in &self.labels {
            for &i in &idx {
                out.push(Symbol::jet(l, i));
            }
        }
        out
    }

    /// `n·C(m+r−1, r)`.
    pub fn count_at(&self, r: usize) -> usize {
        self.labels.len() * binomial(self.m + r - 1, r)
    }

    /// All coordinates of `J^k π`: base first, then fibers by level.
    pub fn coordinates(&self) -> Vec<Symbol> {
        let mut out: Vec<Symbol> = (0..self.m).map(Symbol::base).collect();
        for r in 0..=self.k {
            out.extend(self.fiber_coords(r));
        }
        out
    }

    /// Fiber coordinates `u^β_J` with `s < |J| <= k`, spanning the vertical
    /// vector fields of `J^k π → J^s π`.
    pub fn vertical_basis(&self, s: usize, k: usize) -> Vec<Symbol> {
        ((s + 1)..=k).flat_map(|r| self.fiber_coords(r)).collect()
    }

    /// True when `s` is a base or fiber-jet coordinate of this tower.
    pub fn admits(&self, s: &Symbol) -> bool {
        match s {
            Symbol::Base(i) => (*i as usize) < self.m,
            Symbol::Jet { label, index } => index.dim() == self.m && self.labels.contains(label),
            _ => false,
        }
    }

    /// Index of a fiber label, if it belongs to this space.
    pub fn label_index(&self, l: &FiberLabel) -> Option<usize> {
        self.labels.iter().position(|x| x == l)
    }

    /// Coordinate total derivative `D_i`.
    pub fn total_derivative(&self, e: &Expr, i: usize) -> Result<Expr> {
        Ok(self.total_derivatives(std::slice::from_ref(e), i)?.pop().unwrap())
    }

    /// `D_i` of several expressions sharing one memo.
    pub fn total_derivatives(&self, es: &[Expr], i: usize) -> Result<Vec<Expr>> {
        assert!(i < self.m, "direction {i} out of range");
        let mut bad: Option<Symbol> = None;
        let m = self.m;
        let labels = &self.labels;
        let out = {
            let mut d = Deriver::new(
                |s: &Symbol| match s {
                    Symbol::Base(j) if (*j as usize) < m => {
                        Some(if *j as usize == i { Expr::one() } else { Expr::zero() })
                    }
                    Symbol::Jet { label, index } if index.dim() == m && labels.contains(label) => {
                        Some(Expr::sym(Symbol::jet(*label, index.add_unit(i))))
                    }
                    Symbol::Aux(a) if a.definition.is_some() => None,
                    other => {
                        if bad.is_none() {
                            bad = Some(other.clone());
                        }
                        Some(Expr::zero())
                    }
                },
                |meta| {
                    meta.max_order < 0
                        && meta.flags & (expr::HAS_BASE | expr::HAS_UNKNOWN | expr::HAS_FREE_AUX | expr::HAS_AUX_DEF)
                            == 0
                },
            );
            es.iter().map(|e| d.apply(e)).collect::<Vec<_>>()
        };
        match bad {
            Some(s) => Err(Error::UnknownCoordinate(s.to_string())),
            None => Ok(out),
        }
    }

    /// `D_I`, applying the directions of `I` in increasing order.
    pub fn iterated_total_derivative(&self, e: &Expr, index: &MultiIndex) -> Result<Expr> {
        let mut cur = e.clone();
        for i in index.directions() {
            cur = self.total_derivative(&cur, i)?;
        }
        Ok(cur)
    }
}

/// True iff `e` does not depend on fiber coordinates of order above `s`.
pub fn projects_onto(e: &Expr, s: usize) -> bool {
    projects_onto_with(e, s, &Simplifier::default())
}

pub fn projects_onto_with(e: &Expr, s: usize, simp: &Simplifier) -> bool {
    match e.max_jet_order() {
        None => true,
        Some(o) if o <= s => true,
        Some(_) => e
            .free_coordinates()
            .iter()
            .filter(|c| c.jet_order().is_some_and(|r| r > s))
            .all(|c| simp.is_zero(&expr::diff(e, c)).is_zero),
    }
}

/// A polynomial section `φ^α(x) = Σ_I c^α_I x^I / I!`, used to generate
/// consistent jet points for finite-difference checks of total derivatives.
#[derive(Clone, Debug)]
pub struct PolynomialSection {
    space: JetSpace,
    degree: usize,
    /// `coeffs[α][I]` = `∂_I φ^α(0)`.
    coeffs: Vec<HashMap<MultiIndex, Q>>,
}

impl PolynomialSection {
    /// Random section; `base(α)` gives `φ^α(0)` and higher Taylor
    /// coefficients are drawn from `[-scale, scale]` with denominator 64.
    pub fn random<R: Rng>(space: &JetSpace, degree: usize, rng: &mut R, base: impl Fn(usize) -> Q, scale: i64) -> Self {
        let mut coeffs = Vec::new();
        for alpha in 0..space.fiber_dim() {
            let mut c = HashMap::new();
            for idx in MultiIndex::up_to(space.base_dim(), 0, degree) {
                let v = if idx.order() == 0 {
                    base(alpha)
                } else {
                    Q::new(rng.gen_range(-scale * 64..=scale * 64).into(), 64.into())
                };
                c.insert(idx, v);
            }
            coeffs.push(c);
        }
        PolynomialSection { space: space.clone(), degree, coeffs }
    }

    /// `∂_I φ^α(x)`.
    pub fn derivative(&self, alpha: usize, index: &MultiIndex, x: &[Q]) -> Q {
        let mut acc = Q::zero();
        for (j, c) in &self.coeffs[alpha] {
            let mut term = c.clone();
            let mut ok = true;
            for d in 0..index.dim() {
                if j.get(d) < index.get(d) {
                    ok = false;
                    break;
                }
                let p = (j.get(d) - index.get(d)) as usize;
                let fact: u64 = (1..=p as u64).product();
                term = term * num_traits::pow(x[d].clone(), p) / Q::from_integer(fact.into());
            }
            if ok {
                acc += term;
            }
        }
        acc
    }

    /// The jet point `j^r φ(x)`: base coordinates and all fiber jets up to
    /// order `r`.
    pub fn jet_point(&self, x: &[Q], r: usize) -> HashMap<Symbol, Q> {
        let mut pt = HashMap::new();
        for (i, xi) in x.iter().enumerate() {
            pt.insert(Symbol::base(i), xi.clone());
        }
        for alpha in 0..self.space.fiber_dim() {
            for idx in MultiIndex::up_to(self.space.base_dim(), 0, r) {
                let v = if idx.order() > self.degree { Q::zero() } else { self.derivative(alpha, &idx, x) };
                pt.insert(self.space.coord_symbol(alpha, idx), v);
            }
        }
        pt
    }
}

/// `x` shifted by `h` along direction `i`.
pub fn shifted(x: &[Q], i: usize, h: &Q) -> Vec<Q> {
    let mut y = x.to_vec();
    y[i] += h;
    y
}

/// Default finite-difference step `1e-5` as an exact rational.
pub fn fd_step() -> Q {
    Q::new(1.into(), 100_000.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn graded_order() {
        let v = MultiIndex::of_order(2, 2);
        assert_eq!(
            v,
            vec![MultiIndex::from_slice(&[2, 0]), MultiIndex::from_slice(&[1, 1]), MultiIndex::from_slice(&[0, 2])]
        );
        assert!(MultiIndex::from_slice(&[3, 0]) < MultiIndex::from_slice(&[2, 1]));
        assert!(MultiIndex::from_slice(&[0, 2]) < MultiIndex::from_slice(&[3, 0]));
        assert_eq!(MultiIndex::from_slice(&[1, 0, 2]).directions(), vec![0, 2, 2]);
        assert_eq!(MultiIndex::from_slice(&[1, 1]).multiplicity(), 2);
    }

    #[test]
    fn coordinate_counts() {
        let j = JetSpace::new(3, 2, 3);
        for r in 0..=3 {
            assert_eq!(j.fiber_coords(r).len(), j.count_at(r));
        }
        assert_eq!(j.count_at(2), 2 * 6);
        assert_eq!(JetSpace::new(2, 1, 3).vertical_basis(2, 3).len(), 4);
        assert_eq!(JetSpace::new(1, 1, 3).vertical_basis(2, 3).len(), 1);
        assert!(JetSpace::new(2, 1, 3).vertical_basis(3, 3).is_empty());
    }

    #[test]
    fn total_derivative_examples() {
        let j = JetSpace::new(1, 1, 2);
        let q0 = j.u(0, &[0]);
        let q1 = j.u(0, &[1]);
        let q2 = j.u(0, &[2]);
        assert_eq!(j.total_derivative(&(&q0 * &q1), 0).unwrap(), q1.powi(2) + &q0 * &q2);
        assert!(j.total_derivative(&j.base(0), 0).unwrap().is_one());

        let j2 = JetSpace::new(2, 1, 2);
        let u = j2.u(0, &[0, 0]);
        let d = j2.iterated_total_derivative(&u, &MultiIndex::from_slice(&[1, 1])).unwrap();
        assert_eq!(d, j2.u(0, &[1, 1]));
        assert!(j2.total_derivative(&j2.base(1), 0).unwrap().is_zero());

        let foreign = Expr::sym(Symbol::aux("z"));
        assert!(matches!(j.total_derivative(&foreign, 0), Err(Error::UnknownCoordinate(_))));
    }

    #[test]
    fn projection_tests() {
        let j = JetSpace::new(2, 1, 2);
        assert!(!projects_onto(&j.u(0, &[2, 0]), 1));
        assert!(projects_onto(&(j.base(0) * j.u(0, &[0, 0])), 0));
        let cancel = j.u(0, &[2, 0]) - j.u(0, &[2, 0]) + j.u(0, &[1, 0]);
        assert!(projects_onto(&cancel, 1));
    }

    #[test]
    fn section_derivatives_are_consistent() {
        use rand::SeedableRng;
        let j = JetSpace::new(2, 1, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sec = PolynomialSection::random(&j, 3, &mut rng, |_| Q::one(), 1);
        let x = vec![Q::new(1.into(), 3.into()), Q::new((-1).into(), 5.into())];
        let p = sec.jet_point(&x, 3);
        // exact polynomial: derivative of u_[1,0] along x1 equals u_[2,0]
        let h = fd_step();
        let f = |y: &[Q]| sec.derivative(0, &MultiIndex::from_slice(&[1, 0]), y);
        let fd = (f(&shifted(&x, 0, &h)) - f(&shifted(&x, 0, &-h.clone()))) / (h.clone() * Q::from_integer(2.into()));
        let exact = &p[&Symbol::jet(FiberLabel::Component(0), MultiIndex::from_slice(&[2, 0]))];
        let err = crate::expr::rational_to_f64(&(fd - exact));
        assert!(err.abs() < 1e-8);
    }
}

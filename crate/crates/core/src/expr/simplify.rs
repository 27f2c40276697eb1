//! Normalization policies, zero testing and linear-dependence detection.

use num_traits::One;
use rayon::prelude::*;

use super::eval::{ModEval, ModFailure, PRIME};
use super::poly::{Mono, Poly};
use super::{mix, Expr, Q};

/// How far `normalize` goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionPolicy {
    /// Expand into a sum of monomials over atoms.
    #[default]
    Expand,
    /// Keep the light canonical form of the smart constructors and decide
    /// zeros by evaluation.
    NoExpand,
}

/// Which path decided a zero test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroMethod {
    /// The expression is the constant 0 as built.
    Structural,
    /// Exact expansion (with elimination of defined symbols).
    Exact,
    /// Agreement at this many points modulo a 61-bit prime.
    Probabilistic { points: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ZeroVerdict {
    pub is_zero: bool,
    pub method: ZeroMethod,
}

/// Zero tests and normal forms under a fixed policy.
#[derive(Clone, Copy, Debug)]
pub struct Simplifier {
    pub policy: ExpansionPolicy,
    /// Number of evaluation points for the probabilistic test (at least 8).
    pub zero_points: usize,
    pub seed: u64,
}

impl Default for Simplifier {
    fn default() -> Self {
        Simplifier { policy: ExpansionPolicy::Expand, zero_points: 8, seed: 0x6a65_7476 }
    }
}

impl Simplifier {
    pub fn new(policy: ExpansionPolicy) -> Self {
        Simplifier { policy, ..Simplifier::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn normalize(&self, e: &Expr) -> Expr {
        match self.policy {
            ExpansionPolicy::Expand => Poly::from_expr(e).to_expr(),
            ExpansionPolicy::NoExpand => e.clone(),
        }
    }

    pub fn is_zero(&self, e: &Expr) -> ZeroVerdict {
        if e.is_zero() {
            return ZeroVerdict { is_zero: true, method: ZeroMethod::Structural };
        }
        match self.policy {
            ExpansionPolicy::Expand => {
                ZeroVerdict { is_zero: Poly::from_expr(e).is_identically_zero(), method: ZeroMethod::Exact }
            }
            ExpansionPolicy::NoExpand => {
                let (z, n) = self.probabilistic_zero(e);
                ZeroVerdict { is_zero: z, method: ZeroMethod::Probabilistic { points: n } }
            }
        }
    }

    /// True when `e` vanishes at `zero_points` random points mod p. Points
    /// where a denominator vanishes or a radicand is a non-residue are
    /// skipped and replaced.
    pub fn probabilistic_zero(&self, e: &Expr) -> (bool, usize) {
        let want = self.zero_points.max(8);
        let mut used = 0;
        let mut k = 0u64;
        while used < want {
            if k > 64 * want as u64 {
                break;
            }
            let mut ev = ModEval::new(self.seed, k);
            k += 1;
            match ev.eval(e) {
                Ok(0) => used += 1,
                Ok(_) => return (false, used + 1),
                Err(ModFailure::Pole) | Err(ModFailure::NonResidue) => continue,
            }
        }
        (used >= want, used)
    }

    pub fn span(&self) -> LinearSpan {
        LinearSpan::new(*self)
    }
}

/// Canonical form under the default (expanding) policy.
pub fn normalize(e: &Expr) -> Expr {
    Simplifier::default().normalize(e)
}

/// Zero test under the default (expanding) policy.
pub fn is_zero(e: &Expr) -> bool {
    Simplifier::default().is_zero(e).is_zero
}

/// Incremental test for rational linear dependence among expressions.
///
/// In expanding mode, rows are exact polynomials reduced by Gaussian
/// elimination over monomials. In the non-expanding mode, rows are value
/// vectors at pseudo-random points modulo p; the point set grows so that it
/// always exceeds the rank by a margin.
pub struct LinearSpan {
    simp: Simplifier,
    exact_rows: Vec<(Mono, Poly)>,
    exprs: Vec<Expr>,
    points: Vec<u64>,
    mod_rows: Vec<(usize, Vec<u64>)>,
}

const MARGIN: usize = 8;

fn inv(a: u64) -> u64 {
    let (mut r, mut b, mut k) = (1u64, a, PRIME - 2);
    while k > 0 {
        if k & 1 == 1 {
            r = ((r as u128 * b as u128) % PRIME as u128) as u64;
        }
        b = ((b as u128 * b as u128) % PRIME as u128) as u64;
        k >>= 1;
    }
    r
}

fn sub_scaled(row: &mut [u64], other: &[u64], c: u64) {
    for (x, y) in row.iter_mut().zip(other) {
        let t = ((*y as u128 * c as u128) % PRIME as u128) as u64;
        *x = (*x + PRIME - t) % PRIME;
    }
}

impl LinearSpan {
    pub fn new(simp: Simplifier) -> Self {
        LinearSpan { simp, exact_rows: Vec::new(), exprs: Vec::new(), points: Vec::new(), mod_rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        match self.simp.policy {
            ExpansionPolicy::Expand => self.exact_rows.len(),
            ExpansionPolicy::NoExpand => self.mod_rows.len(),
        }
    }

    /// Adds `e` if it is independent of what is already spanned; returns
    /// whether it was added.
    pub fn insert(&mut self, e: &Expr) -> bool {
        self.insert_many(std::slice::from_ref(e))[0]
    }

    /// Inserts `es` in order; entry `j` of the result tells whether `es[j]`
    /// was independent of everything before it. In the non-expanding mode
    /// the batch is evaluated with one shared evaluator per point.
    pub fn insert_many(&mut self, es: &[Expr]) -> Vec<bool> {
        match self.simp.policy {
            ExpansionPolicy::Expand => es.iter().map(|e| self.insert_exact(e)).collect(),
            ExpansionPolicy::NoExpand => {
                let rows = self.prepare(es);
                es.iter()
                    .zip(rows)
                    .map(|(e, v)| {
                        if e.is_zero() {
                            return false;
                        }
                        let r = self.reduce_mod(v);
                        if self.push_mod_row(r) {
                            self.exprs.push(e.clone());
                            true
                        } else {
                            false
                        }
                    })
                    .collect()
            }
        }
    }

    /// Tests membership without inserting.
    pub fn contains(&mut self, e: &Expr) -> bool {
        match self.simp.policy {
            ExpansionPolicy::Expand => self.reduce_exact(Poly::from_expr(e)).is_zero(),
            ExpansionPolicy::NoExpand => {
                let v = self.prepare(std::slice::from_ref(e)).pop().unwrap();
                self.reduce_mod(v).iter().all(|&x| x == 0)
            }
        }
    }

    fn reduce_exact(&self, mut p: Poly) -> Poly {
        for (pivot, row) in &self.exact_rows {
            if let Some(c) = p.terms.get(pivot).cloned() {
                p.add_scaled(row, &-c);
            }
        }
        p
    }

    fn insert_exact(&mut self, e: &Expr) -> bool {
        let p = self.reduce_exact(Poly::from_expr(e));
        if p.is_zero() {
            return false;
        }
        let (pivot, c) = p.leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let mut row = Poly::zero();
        row.add_scaled(&p, &(Q::one() / c));
        // keep earlier rows reduced with respect to the new pivot
        for (_, r) in self.exact_rows.iter_mut() {
            if let Some(k) = r.terms.get(&pivot).cloned() {
                r.add_scaled(&row, &-k);
            }
        }
        self.exact_rows.push((pivot, row));
        true
    }

    /// Values of `es` at point `k` with one evaluator; a failed evaluation
    /// yields `None` when `strict` and 0 otherwise.
    fn eval_point(&self, k: u64, es: &[Expr], strict: bool) -> Option<Vec<u64>> {
        let mut ev = ModEval::new(self.simp.seed, k);
        es.iter()
            .map(|e| match ev.eval(e) {
                Ok(v) => Some(v),
                Err(_) if strict => None,
                Err(_) => Some(0),
            })
            .collect()
    }

    /// Value vectors of `batch`, after growing the point set to exceed the
    /// rank plus the batch size by the margin. When the point set grows the
    /// stored rows are rebuilt; new points must be usable for every stored
    /// and batch expression.
    fn prepare(&mut self, batch: &[Expr]) -> Vec<Vec<u64>> {
        let old = self.exprs.len();
        let needed = old + batch.len() + MARGIN;
        let (table, offset) = if self.points.len() >= needed {
            let t: Vec<Vec<u64>> = self.points.par_iter().map(|&k| self.eval_point(k, batch, false).unwrap()).collect();
            (t, 0)
        } else {
            let target = needed.max(2 * self.points.len());
            let mut all = self.exprs.clone();
            all.extend_from_slice(batch);
            let mut t: Vec<Vec<u64>> =
                self.points.par_iter().map(|&k| self.eval_point(k, &all, false).unwrap()).collect();
            let mut k = self.points.last().map_or(0, |&p| p + 1);
            while self.points.len() < target {
                if let Some(v) = self.eval_point(k, &all, true) {
                    self.points.push(k);
                    t.push(v);
                }
                k += 1;
            }
            self.mod_rows.clear();
            for j in 0..old {
                let v: Vec<u64> = t.iter().map(|col| col[j]).collect();
                let r = self.reduce_mod(v);
                self.push_mod_row(r);
            }
            (t, old)
        };
        (0..batch.len()).map(|j| table.iter().map(|col| col[offset + j]).collect()).collect()
    }

    fn reduce_mod(&self, mut v: Vec<u64>) -> Vec<u64> {
        for (pivot, row) in &self.mod_rows {
            let c = v[*pivot];
            if c != 0 {
                sub_scaled(&mut v, row, c);
            }
        }
        v
    }

    fn push_mod_row(&mut self, v: Vec<u64>) -> bool {
        let Some(pivot) = v.iter().position(|&x| x != 0) else { return false };
        let c = inv(v[pivot]);
        let row: Vec<u64> = v.iter().map(|&x| ((x as u128 * c as u128) % PRIME as u128) as u64).collect();
        for (_, r) in self.mod_rows.iter_mut() {
            let k = r[pivot];
            if k != 0 {
                sub_scaled(r, &row, k);
            }
        }
        self.mod_rows.push((pivot, row));
        true
    }
}

/// Deterministic 64-bit seed derived from a label, for reproducible
/// sub-streams.
pub(crate) fn derive_seed(seed: u64, label: &str) -> u64 {
    label.bytes().fold(mix(seed, 0x51), |h, b| mix(h, b as u64))
}

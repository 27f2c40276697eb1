//! Sparse differential forms on jet spaces.
//!
//! A basis one-form is named by its coordinate (`dx^i` by `Symbol::Base`,
//! `du^α_I` by `Symbol::Jet`). A p-form is a map from strictly increasing
//! p-tuples of coordinates to coefficients.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{diff, Expr, Simplifier, Symbol};

/// Sorted, duplicate-free wedge of basis one-forms.
pub type BasisKey = Vec<Symbol>;

/// Sorts `v` in place and returns the permutation sign, or `None` when a
/// coordinate repeats.
fn sort_sign(v: &mut [Symbol]) -> Option<i64> {
    let mut sign = 1;
    // insertion sort; keys are short
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

fn is_coordinate(s: &Symbol) -> bool {
    matches!(s, Symbol::Base(_) | Symbol::Jet { .. })
}

/// Differential form of fixed degree with expression coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct JetForm {
    degree: usize,
    terms: BTreeMap<BasisKey, Expr>,
}

impl JetForm {
    pub fn zero(degree: usize) -> Self {
        JetForm { degree, terms: BTreeMap::new() }
    }

    /// The 0-form `f`.
    pub fn function(f: Expr) -> Self {
        let mut w = JetForm::zero(0);
        w.add_term(Vec::new(), f);
        w
    }

    /// `d(coordinate)`.
    pub fn basis(s: Symbol) -> Self {
        assert!(is_coordinate(&s), "basis one-forms are coordinate differentials");
        let mut w = JetForm::zero(1);
        w.add_term(vec![s], Expr::one());
        w
    }

    /// `f · dc_1 ∧ … ∧ dc_p` in the given (not necessarily sorted) order.
    pub fn monomial(f: Expr, coords: &[Symbol]) -> Self {
        let mut w = JetForm::zero(coords.len());
        let mut key = coords.to_vec();
        if let Some(sign) = sort_sign(&mut key) {
            w.add_term(key, if sign < 0 { -f } else { f });
        }
        w
    }

    /// `d^m x = dx^1 ∧ … ∧ dx^m`.
    pub fn volume(m: usize) -> Self {
        JetForm::monomial(Expr::one(), &(0..m).map(Symbol::base).collect::<Vec<_>>())
    }

    /// `d^{m-1}x_j = i(∂/∂x^j) d^m x`.
    pub fn volume_minus(m: usize, j: usize) -> Self {
        JetForm::volume(m).interior_product(&VectorField::basis(Symbol::base(j)))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisKey, &Expr)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, key: &[Symbol]) -> Expr {
        let mut k = key.to_vec();
        match sort_sign(&mut k) {
            Some(sign) => {
                let c = self.terms.get(&k).cloned().unwrap_or_else(Expr::zero);
                if sign < 0 {
                    -c
                } else {
                    c
                }
            }
            None => Expr::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, key: BasisKey, c: Expr) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(key.len(), self.degree);
        let v = match self.terms.remove(&key) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(key, v);
        }
    }

    pub fn add(&self, other: &JetForm) -> JetForm {
        assert_eq!(self.degree, other.degree, "adding forms of different degree");
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, f: &Expr) -> JetForm {
        let mut out = JetForm::zero(self.degree);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * f);
        }
        out
    }

    pub fn neg(&self) -> JetForm {
        self.scale(&Expr::int(-1))
    }

    /// Graded-antisymmetric product.
    pub fn wedge(&self, other: &JetForm) -> JetForm {
        let mut out = JetForm::zero(self.degree + other.degree);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let mut key: BasisKey = k1.iter().chain(k2.iter()).cloned().collect();
                if let Some(sign) = sort_sign(&mut key) {
                    let c = c1 * c2;
                    out.add_term(key, if sign < 0 { -c } else { c });
                }
            }
        }
        out
    }

    /// `wedge` with a bound on the ambient dimension.
    pub fn try_wedge(&self, other: &JetForm, ambient_dim: usize) -> Result<JetForm> {
        let deg = self.degree + other.degree;
        if deg > ambient_dim {
            return Err(Error::DegreeOverflow(deg, ambient_dim));
        }
        Ok(self.wedge(other))
    }

    /// Exterior derivative.
    pub fn exterior_derivative(&self) -> JetForm {
        self.exterior_derivative_along(|_| true)
    }

    /// The part of `dω` coming from differentiating coefficients along the
    /// coordinates selected by `keep`.
    pub fn exterior_derivative_along(&self, keep: impl Fn(&Symbol) -> bool + Sync) -> JetForm {
        let parts: Vec<Vec<(BasisKey, Expr)>> = self
            .terms
            .par_iter()
            .map(|(key, c)| {
                let mut v = Vec::new();
                for s in c.free_coordinates() {
                    if !is_coordinate(&s) || !keep(&s) || key.contains(&s) {
                        continue;
                    }
                    let d = diff(c, &s);
                    if d.is_zero() {
                        continue;
                    }
                    let mut k = Vec::with_capacity(key.len() + 1);
                    k.push(s);
                    k.extend(key.iter().cloned());
                    let sign = sort_sign(&mut k).expect("fresh coordinate");
                    v.push((k, if sign < 0 { -d } else { d }));
                }
                v
            })
            .collect();
        let mut out = JetForm::zero(self.degree + 1);
        for p in parts {
            for (k, c) in p {
                out.add_term(k, c);
            }
        }
        out
    }

    /// Contraction `i(v)ω`.
    pub fn interior_product(&self, v: &VectorField) -> JetForm {
        assert!(self.degree > 0, "interior product of a function");
        let mut out = JetForm::zero(self.degree - 1);
        for (key, c) in &self.terms {
            for (pos, s) in key.iter().enumerate() {
                if let Some(vs) = v.comps.get(s) {
                    let mut k = key.clone();
                    k.remove(pos);
                    let t = c * vs;
                    out.add_term(k, if pos % 2 == 1 { -t } else { t });
                }
            }
        }
        out
    }

    /// Lie derivative by Cartan's formula `L(v) = i(v)d + d i(v)`.
    pub fn lie_derivative(&self, v: &VectorField) -> JetForm {
        let a = self.exterior_derivative().interior_product(v);
        if self.degree == 0 {
            return a;
        }
        a.add(&self.interior_product(v).exterior_derivative())
    }

    /// True when every coefficient is zero under `simp`.
    pub fn is_zero_with(&self, simp: &Simplifier) -> bool {
        self.terms.values().collect::<Vec<_>>().par_iter().all(|c| simp.is_zero(c).is_zero)
    }

    /// `ω − η` vanishes under `simp`.
    pub fn equals_with(&self, other: &JetForm, simp: &Simplifier) -> bool {
        self.degree == other.degree && self.add(&other.neg()).is_zero_with(simp)
    }

    /// Semibasic with respect to `J^k π → J^s π`: every basis element is
    /// `dx^i` or `du^β_J` with `|J| <= s`, up to zero coefficients.
    pub fn is_semibasic(&self, s: usize) -> bool {
        self.is_semibasic_with(s, &Simplifier::default())
    }

    pub fn is_semibasic_with(&self, s: usize, simp: &Simplifier) -> bool {
        let high: Vec<&Expr> = self
            .terms
            .iter()
            .filter(|(k, _)| k.iter().any(|c| c.jet_order().is_some_and(|r| r > s)))
            .map(|(_, c)| c)
            .collect();
        high.par_iter().all(|c| simp.is_zero(c).is_zero)
    }

    /// `ω` and `dω` are both semibasic.
    pub fn is_basic(&self, s: usize) -> bool {
        self.is_basic_with(s, &Simplifier::default())
    }

    pub fn is_basic_with(&self, s: usize, simp: &Simplifier) -> bool {
        if !self.is_semibasic_with(s, simp) {
            return false;
        }
        // With ω semibasic, only derivatives along the suppressed
        // coordinates can make dω fail to be semibasic.
        let high = |c: &Symbol| c.jet_order().is_some_and(|r| r > s);
        self.exterior_derivative_along(high).is_semibasic_with(s, simp)
    }

    /// Applies `f` to every coefficient.
    pub fn map_coefficients(&self, f: impl Fn(&Expr) -> Expr) -> JetForm {
        let mut out = JetForm::zero(self.degree);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), f(c));
        }
        out
    }
}

fn write_key(f: &mut fmt::Formatter<'_>, key: &[Symbol]) -> fmt::Result {
    for (i, s) in key.iter().enumerate() {
        if i > 0 {
            f.write_str("^")?;
        }
        write!(f, "d{s}")?;
    }
    Ok(())
}

impl fmt::Display for JetForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if k.is_empty() {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c})*")?;
                write_key(f, k)?;
            }
        }
        Ok(())
    }
}

/// Vector field `Σ v^c ∂/∂c` over coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorField {
    comps: BTreeMap<Symbol, Expr>,
}

impl VectorField {
    pub fn basis(s: Symbol) -> Self {
        let mut v = VectorField::default();
        v.comps.insert(s, Expr::one());
        v
    }

    pub fn with(mut self, s: Symbol, c: Expr) -> Self {
        if !c.is_zero() {
            self.comps.insert(s, c);
        }
        self
    }

    /// `v(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::add_all(self.comps.iter().map(|(s, c)| c * diff(f, s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetSpace;

    fn x(i: usize) -> Symbol {
        Symbol::base(i)
    }

    #[test]
    fn wedge_examples() {
        let dx1 = JetForm::basis(x(0));
        let dx2 = JetForm::basis(x(1));
        assert!(dx1.wedge(&dx1).is_empty());
        assert_eq!(dx1.wedge(&dx2), dx2.wedge(&dx1).neg());
        let (f, g) = (Expr::sym(Symbol::aux("f")), Expr::sym(Symbol::aux("g")));
        let w = dx1.scale(&f).wedge(&dx2.scale(&g));
        assert_eq!(w.coefficient(&[x(0), x(1)]), &f * &g);
        assert!(matches!(dx1.try_wedge(&dx2, 1), Err(Error::DegreeOverflow(2, 1))));
    }

    #[test]
    fn exterior_derivative_examples() {
        let j = JetSpace::new(1, 1, 1);
        let u = j.coord_symbol(0, crate::jet::MultiIndex::zeros(1));
        let dx1 = JetForm::basis(x(0));
        assert!(dx1.scale(&Expr::int(3)).exterior_derivative().is_empty());
        let w = dx1.scale(&Expr::sym(u.clone())).exterior_derivative();
        assert_eq!(w, JetForm::basis(u.clone()).wedge(&dx1));
        let f = Expr::sym(u.clone()).powi(3) * Expr::sym(x(0));
        let df = JetForm::function(f).exterior_derivative();
        assert!(df.exterior_derivative().is_empty());
    }

    #[test]
    fn interior_product_examples() {
        let j = JetSpace::new(1, 1, 1);
        let u = j.coord_symbol(0, crate::jet::MultiIndex::zeros(1));
        let du = JetForm::basis(u.clone());
        let dx1 = JetForm::basis(x(0));
        let vu = VectorField::basis(u.clone());
        assert!(dx1.interior_product(&vu).is_empty());
        assert_eq!(du.wedge(&dx1).interior_product(&vu), dx1);
        // i(∂/∂x^j) d^3x = (−1)^j dx^0..^j..
        let v = JetForm::volume_minus(3, 1);
        assert_eq!(v, JetForm::monomial(Expr::int(-1), &[x(0), x(2)]));
    }

    #[test]
    fn lie_derivative_of_top_form() {
        let j = JetSpace::new(2, 1, 1);
        let u = j.coord_symbol(0, crate::jet::MultiIndex::zeros(2));
        let f = Expr::sym(u.clone()).powi(2) * Expr::sym(x(0));
        let w = JetForm::volume(2).scale(&f);
        let l = w.lie_derivative(&VectorField::basis(u.clone()));
        assert_eq!(l, JetForm::volume(2).scale(&diff(&f, &u)));
    }

    #[test]
    fn semibasic_examples() {
        let j = JetSpace::new(2, 1, 2);
        let high = j.coord_symbol(0, crate::jet::MultiIndex::from_slice(&[1, 1]));
        assert!(JetForm::volume(2).is_semibasic(0));
        let w = JetForm::basis(high.clone()).wedge(&JetForm::volume_minus(2, 0));
        assert!(!w.is_semibasic(1));
        assert!(w.is_semibasic(2));
        assert!(JetForm::volume(2).scale(&Expr::int(5)).is_basic(0));
        assert!(!JetForm::volume(2).scale(&Expr::sym(high)).is_basic(1));
    }
}

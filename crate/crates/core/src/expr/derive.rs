use rustc_hash::FxHashMap;
use std::collections::{HashMap, HashSet};

use num_rational::Rational64;
use num_traits::One;

use super::{Expr, ExprError, Kind, Meta, Symbol, HAS_AUX_DEF, HAS_BASE, HAS_FREE_AUX, HAS_UNKNOWN};

/// A derivation (Leibniz-rule operator) applied over an expression DAG.
///
/// `rule` gives the image of each independent symbol; auxiliary symbols with
/// a definition are differentiated through their definition unless `rule`
/// claims them. `skip` lets callers prune subtrees whose metadata proves the
/// result is zero. The memo is keyed by node identity and may be reused for
/// many roots over the same DAG.
pub(crate) struct Deriver<R, S>
where
    R: FnMut(&Symbol) -> Option<Expr>,
    S: Fn(Meta) -> bool,
{
    rule: R,
    skip: S,
    memo: FxHashMap<usize, Expr>,
}

impl<R, S> Deriver<R, S>
where
    R: FnMut(&Symbol) -> Option<Expr>,
    S: Fn(Meta) -> bool,
{
    pub(crate) fn new(rule: R, skip: S) -> Self {
        Deriver { rule, skip, memo: FxHashMap::default() }
    }

    pub(crate) fn apply(&mut self, e: &Expr) -> Expr {
        if (self.skip)(e.meta()) {
            return Expr::zero();
        }
        if let Some(r) = self.memo.get(&e.id()) {
            return r.clone();
        }
        let out = match e.kind() {
            Kind::Num(_) => Expr::zero(),
            Kind::Sym(s) => match (self.rule)(s) {
                Some(r) => r,
                None => match s.definition() {
                    Some(d) => {
                        let d = d.clone();
                        self.apply(&d)
                    }
                    None => Expr::zero(),
                },
            },
            Kind::Add(c) => {
                let terms: Vec<Expr> = c.iter().map(|t| self.apply(t)).collect();
                Expr::add_all(terms)
            }
            Kind::Mul(c) => {
                let derivs: Vec<Expr> = c.iter().map(|f| self.apply(f)).collect();
                let mut terms = Vec::new();
                for (k, d) in derivs.iter().enumerate() {
                    if d.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = Vec::with_capacity(c.len());
                    for (j, f) in c.iter().enumerate() {
                        if j != k {
                            fs.push(f.clone());
                        }
                    }
                    fs.push(d.clone());
                    terms.push(Expr::mul_all(fs));
                }
                Expr::add_all(terms)
            }
            Kind::Pow(b, p) => {
                let db = self.apply(b);
                if db.is_zero() {
                    Expr::zero()
                } else {
                    let coeff = Expr::rational(*p.numer(), *p.denom());
                    Expr::mul_all([coeff, Expr::pow(b, *p - Rational64::one()), db])
                }
            }
        };
        self.memo.insert(e.id(), out.clone());
        out
    }
}

/// Metadata test: can `node` possibly depend on `s`?
pub(crate) fn may_contain(meta: Meta, s: &Symbol) -> bool {
    match s {
        Symbol::Base(_) => meta.flags & HAS_BASE != 0,
        Symbol::Jet { index, .. } => meta.max_order >= index.order() as i16,
        Symbol::Unknown { .. } => meta.flags & HAS_UNKNOWN != 0,
        Symbol::Aux(a) => {
            if a.definition.is_some() {
                meta.flags & HAS_AUX_DEF != 0
            } else {
                meta.flags & HAS_FREE_AUX != 0
            }
        }
    }
}

/// Partial derivative with respect to `s`, all other symbols independent.
/// An auxiliary symbol with a definition is independent when it is `s`
/// itself and is differentiated through its definition otherwise.
pub fn diff(e: &Expr, s: &Symbol) -> Expr {
    diff_many(std::slice::from_ref(e), s).pop().unwrap()
}

/// `diff` of several expressions sharing one memo.
pub fn diff_many(es: &[Expr], s: &Symbol) -> Vec<Expr> {
    let target = s.clone();
    let probe = s.clone();
    let mut d = Deriver::new(
        move |sym: &Symbol| {
            if *sym == target {
                Some(Expr::one())
            } else if sym.definition().is_some() {
                None
            } else {
                Some(Expr::zero())
            }
        },
        move |m| !may_contain(m, &probe),
    );
    es.iter().map(|e| d.apply(e)).collect()
}

/// Substitution followed by normalization under the default policy.
///
/// A binding may mention its own symbol (`s -> s + 1` is a simultaneous
/// update). References to other bound symbols are resolved transitively, and a
/// chain through two or more bindings that loops is `CyclicBinding`.
pub fn substitute(e: &Expr, bindings: &HashMap<Symbol, Expr>) -> Result<Expr, ExprError> {
    Ok(super::normalize(&substitute_raw(e, bindings)?))
}

/// Substitution without the final normalization.
pub fn substitute_raw(e: &Expr, bindings: &HashMap<Symbol, Expr>) -> Result<Expr, ExprError> {
    // Resolve binding chains first.
    let mut resolved: HashMap<Symbol, Expr> = HashMap::new();
    let mut keys: Vec<&Symbol> = bindings.keys().collect();
    keys.sort();
    for k in keys {
        let mut visiting = HashSet::new();
        resolve(k, bindings, &mut resolved, &mut visiting)?;
    }
    let mut memo = HashMap::new();
    rebuild(e, &resolved, &mut memo)
}

fn resolve(
    k: &Symbol,
    bindings: &HashMap<Symbol, Expr>,
    resolved: &mut HashMap<Symbol, Expr>,
    visiting: &mut HashSet<Symbol>,
) -> Result<Expr, ExprError> {
    if let Some(r) = resolved.get(k) {
        return Ok(r.clone());
    }
    if !visiting.insert(k.clone()) {
        return Err(ExprError::CyclicBinding(k.to_string()));
    }
    let target = &bindings[k];
    let mut local: HashMap<Symbol, Expr> = HashMap::new();
    for s in target.symbols() {
        if &s != k && bindings.contains_key(&s) {
            let r = resolve(&s, bindings, resolved, visiting)?;
            local.insert(s, r);
        }
    }
    let out = if local.is_empty() { target.clone() } else { rebuild(target, &local, &mut HashMap::new())? };
    visiting.remove(k);
    resolved.insert(k.clone(), out.clone());
    Ok(out)
}

fn rebuild(e: &Expr, map: &HashMap<Symbol, Expr>, memo: &mut HashMap<usize, Expr>) -> Result<Expr, ExprError> {
    if let Some(r) = memo.get(&e.id()) {
        return Ok(r.clone());
    }
    let out = match e.kind() {
        Kind::Num(_) => e.clone(),
        Kind::Sym(s) => match map.get(s) {
            Some(r) => r.clone(),
            None => match s.definition() {
                // Substituting inside a definition yields a new expression;
                // the abbreviation is expanded in that case.
                Some(d) if d.symbols().iter().any(|x| map.contains_key(x)) => rebuild(d, map, memo)?,
                _ => e.clone(),
            },
        },
        Kind::Add(c) => {
            let mut v = Vec::with_capacity(c.len());
            for t in c.iter() {
                v.push(rebuild(t, map, memo)?);
            }
            Expr::add_all(v)
        }
        Kind::Mul(c) => {
            let mut v = Vec::with_capacity(c.len());
            for t in c.iter() {
                v.push(rebuild(t, map, memo)?);
            }
            Expr::mul_all(v)
        }
        Kind::Pow(b, p) => {
            let nb = rebuild(b, map, memo)?;
            Expr::try_pow(&nb, *p)?
        }
    };
    memo.insert(e.id(), out.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: &str) -> Symbol {
        Symbol::aux(n)
    }
    fn e(n: &str) -> Expr {
        Expr::sym(s(n))
    }

    #[test]
    fn power_rule() {
        let x = e("s");
        assert_eq!(diff(&x.powi(2), &s("s")), Expr::int(2) * &x);
        assert!(diff(&e("t"), &s("s")).is_zero());
        let w = e("w");
        assert_eq!(diff(&w.sqrt(), &s("w")), Expr::rational(1, 2) * Expr::pow(&w, Rational64::new(-1, 2)));
    }

    #[test]
    fn product_rule_three_factors() {
        let (a, b) = (e("a"), e("b"));
        let f = &a * &a * &b * &b * &b;
        assert_eq!(diff(&f, &s("b")), Expr::int(3) * a.powi(2) * b.powi(2));
    }

    #[test]
    fn defined_aux_differentiates_through_definition() {
        let x = e("x");
        let w = Symbol::defined("w", &x * &x + Expr::int(1));
        let we = Expr::sym(w.clone());
        let d = diff(&we.sqrt(), &s("x"));
        // (1/2) w^{-1/2} * 2x
        assert_eq!(d, &x * Expr::pow(&we, Rational64::new(-1, 2)));
        // treated as an atom when it is the variable
        assert!(diff(&we, &w).is_one());
    }

    #[test]
    fn substitution_examples() {
        let mut b = HashMap::new();
        b.insert(s("s"), Expr::int(1));
        b.insert(s("t"), Expr::int(2));
        assert_eq!(substitute(&(e("s") + e("t")), &b).unwrap(), Expr::int(3));

        let mut b = HashMap::new();
        b.insert(s("w"), Expr::int(4));
        assert_eq!(substitute(&e("w").sqrt(), &b).unwrap(), Expr::int(2));

        let mut b = HashMap::new();
        b.insert(s("s"), e("s") + Expr::one());
        let got = substitute(&e("s").powi(2), &b).unwrap();
        assert_eq!(got, super::super::normalize(&(e("s").powi(2) + Expr::int(2) * e("s") + Expr::one())));

        let mut b = HashMap::new();
        b.insert(s("s"), e("t"));
        b.insert(s("t"), e("s") + Expr::one());
        assert!(matches!(substitute(&e("s"), &b), Err(ExprError::CyclicBinding(_))));

        let mut b = HashMap::new();
        b.insert(s("s"), Expr::zero());
        assert_eq!(substitute_raw(&e("s").recip(), &b), Err(ExprError::DivisionByZero));
    }
}

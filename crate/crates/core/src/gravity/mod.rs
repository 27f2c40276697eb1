//! Metric jet bundle and the Hilbert Lagrangian.
//!
//! Fiber coordinates are the independent components `g_{αβ}`, `α <= β`.
//! With `w = −det g > 0` (Lorentzian signature), `√|det g| = w^{1/2}` and
//! `g^{μν} = −adj(g)_{μν} w^{-1}`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{derive_seed, mix, n_factor, Expr, FiberLabel, Symbol, Q};
use crate::jet::{JetSpace, MultiIndex, PolynomialSection};
use crate::variational::FieldLagrangian;

mod verify;
pub use verify::{
    relative_error, verify_gravity, verify_run, Check, CheckMethod, GravityOptions, GravityReport, HilbertRun,
    BIANCHI_TOL, FD_TOL, IDENTITY_TOL,
};

/// Symbolic context for metrics on a `d`-manifold.
#[derive(Clone, Debug)]
pub struct MetricJetContext {
    d: usize,
    space: JetSpace,
    w: Symbol,
    det: Expr,
    inv: Vec<Vec<Expr>>,
    gamma: Vec<Vec<Vec<Expr>>>,
    ricci: Vec<Vec<Expr>>,
    scalar: Expr,
}

/// Permutations of `0..n` with their signs.
fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, sign: i64, out: &mut Vec<(Vec<usize>, i64)>) {
        let n = used.len();
        if prefix.len() == n {
            out.push((prefix.clone(), sign));
            return;
        }
        for j in 0..n {
            if used[j] {
                continue;
            }
            // inversions contributed by placing j now
            let inv = (0..j).filter(|&k| !used[k]).count();
            used[j] = true;
            prefix.push(j);
            go(prefix, used, if inv % 2 == 0 { sign } else { -sign }, out);
            prefix.pop();
            used[j] = false;
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], 1, &mut out);
    out
}

/// Leibniz determinant of `m[rows][cols]`.
fn determinant(rows: &[usize], cols: &[usize], entry: &impl Fn(usize, usize) -> Expr) -> Expr {
    Expr::add_all(permutations(rows.len()).into_iter().map(|(p, sign)| {
        let f = Expr::mul_all(rows.iter().zip(&p).map(|(&r, &c)| entry(r, cols[c])));
        f * Expr::int(sign)
    }))
}

impl MetricJetContext {
    pub fn new(d: usize) -> Result<Self> {
        if !(2..=4).contains(&d) {
            return Err(Error::Input(format!("metric dimension must be 2, 3 or 4, got {d}")));
        }
        let mut labels = Vec::new();
        for a in 0..d {
            for b in a..d {
                labels.push(FiberLabel::metric(a, b));
            }
        }
        let space = JetSpace::with_labels(d, labels, 2);
        let g = |a: usize, b: usize| Expr::sym(Symbol::jet(FiberLabel::metric(a, b), MultiIndex::zeros(d)));
        let all: Vec<usize> = (0..d).collect();
        let det = determinant(&all, &all, &g);
        let w = Symbol::defined("w", -&det);
        let w_inv = Expr::sym(w.clone()).recip();
        let mut inv = vec![vec![Expr::zero(); d]; d];
        for mu in 0..d {
            for nu in mu..d {
                // g^{μν} = C_{νμ} / det with C the cofactor matrix
                let rows: Vec<usize> = all.iter().copied().filter(|&r| r != nu).collect();
                let cols: Vec<usize> = all.iter().copied().filter(|&c| c != mu).collect();
                let sign = if (mu + nu) % 2 == 0 { -1 } else { 1 };
                let e = Expr::int(sign) * determinant(&rows, &cols, &g) * &w_inv;
                inv[mu][nu] = e.clone();
                inv[nu][mu] = e;
            }
        }
        let mut ctx =
            MetricJetContext { d, space, w, det, inv, gamma: Vec::new(), ricci: Vec::new(), scalar: Expr::zero() };
        let mut gamma = vec![vec![vec![Expr::zero(); d]; d]; d];
        for rho in 0..d {
            for mu in 0..d {
                for nu in mu..d {
                    let e = ctx.christoffel_formula(rho, mu, nu);
                    gamma[rho][mu][nu] = e.clone();
                    gamma[rho][nu][mu] = e;
                }
            }
        }
        ctx.gamma = gamma;
        let mut ricci = vec![vec![Expr::zero(); d]; d];
        for mu in 0..d {
            for nu in 0..d {
                ricci[mu][nu] = ctx.ricci_formula(mu, nu)?;
            }
        }
        ctx.ricci = ricci;
        ctx.scalar = Expr::add_all(
            (0..d).flat_map(|mu| (0..d).map(move |nu| (mu, nu))).map(|(mu, nu)| &ctx.inv[mu][nu] * &ctx.ricci[mu][nu]),
        );
        Ok(ctx)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    /// Independent components `(α, β)`, `α <= β`, in fiber order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.d).flat_map(|a| (a..self.d).map(move |b| (a, b))).collect()
    }

    /// Fiber index of `g_{αβ}` (either order).
    pub fn label_index(&self, a: usize, b: usize) -> usize {
        self.space.label_index(&FiberLabel::metric(a, b)).unwrap()
    }

    pub fn g_symbol(&self, a: usize, b: usize, index: MultiIndex) -> Symbol {
        Symbol::jet(FiberLabel::metric(a, b), index)
    }

    /// `g_{αβ}`; symmetric in the two indices.
    pub fn g(&self, a: usize, b: usize) -> Expr {
        Expr::sym(self.g_symbol(a, b, MultiIndex::zeros(self.d)))
    }

    /// `∂g_{αβ}/∂x^μ` as a first-order jet coordinate.
    pub fn dg(&self, a: usize, b: usize, mu: usize) -> Expr {
        Expr::sym(self.g_symbol(a, b, MultiIndex::unit(self.d, mu)))
    }

    /// The defined symbol `w = −det g`.
    pub fn w(&self) -> &Symbol {
        &self.w
    }

    pub fn determinant(&self) -> &Expr {
        &self.det
    }

    /// `√|det g| = w^{1/2}`.
    pub fn sqrt_abs_det(&self) -> Expr {
        Expr::sym(self.w.clone()).sqrt()
    }

    pub fn inverse_metric(&self, mu: usize, nu: usize) -> Expr {
        self.inv[mu][nu].clone()
    }

    fn christoffel_formula(&self, rho: usize, mu: usize, nu: usize) -> Expr {
        let half = Expr::rational(1, 2);
        Expr::add_all((0..self.d).map(|l| {
            let bracket = self.dg(nu, l, mu) + self.dg(l, mu, nu) - self.dg(mu, nu, l);
            &half * &self.inv[rho][l] * bracket
        }))
    }

    /// `Γ^ρ_{μν}`.
    pub fn christoffel(&self, rho: usize, mu: usize, nu: usize) -> Expr {
        self.gamma[rho][mu][nu].clone()
    }

    fn ricci_formula(&self, mu: usize, nu: usize) -> Result<Expr> {
        let d = self.d;
        let sp = &self.space;
        let mut t = Vec::new();
        for rho in 0..d {
            t.push(sp.total_derivative(&self.gamma[rho][mu][nu], rho)?);
            t.push(-sp.total_derivative(&self.gamma[rho][rho][nu], mu)?);
            for delta in 0..d {
                t.push(&self.gamma[rho][mu][nu] * &self.gamma[delta][delta][rho]);
                t.push(-(&self.gamma[rho][delta][nu] * &self.gamma[delta][mu][rho]));
            }
        }
        Ok(Expr::add_all(t))
    }

    /// `R_{μν} = D_ρΓ^ρ_{μν} − D_μΓ^ρ_{ρν} + Γ^ρ_{μν}Γ^δ_{δρ} − Γ^ρ_{δν}Γ^δ_{μρ}`.
    pub fn ricci(&self, mu: usize, nu: usize) -> Expr {
        self.ricci[mu][nu].clone()
    }

    /// `R = g^{μν} R_{μν}`.
    pub fn scalar_curvature(&self) -> Expr {
        self.scalar.clone()
    }

    /// `R^{αβ} = g^{αμ} g^{βν} R_{μν}`.
    pub fn ricci_upper(&self, a: usize, b: usize) -> Expr {
        let d = self.d;
        Expr::add_all(
            (0..d)
                .flat_map(|mu| (0..d).map(move |nu| (mu, nu)))
                .map(|(mu, nu)| &self.inv[a][mu] * &self.inv[b][nu] * &self.ricci[mu][nu]),
        )
    }

    /// `G^{αβ} = R^{αβ} − ½ g^{αβ} R`.
    pub fn einstein_upper(&self, a: usize, b: usize) -> Expr {
        self.ricci_upper(a, b) - Expr::rational(1, 2) * &self.inv[a][b] * &self.scalar
    }

    /// Expected first-generation constraint
    /// `−√|det g| n(αβ) (R^{αβ} − ½ g^{αβ} R)`.
    pub fn einstein_constraint(&self, a: usize, b: usize) -> Expr {
        -(self.sqrt_abs_det() * Expr::int(n_factor(a, b)) * self.einstein_upper(a, b))
    }

    /// `L = √|det g| g^{μν} R_{μν}` on `J^2 π`.
    pub fn hilbert_lagrangian(&self) -> Result<FieldLagrangian> {
        FieldLagrangian::new(self.space.clone(), self.sqrt_abs_det() * self.scalar_curvature())
    }

    /// Closed form of `L^{αβ,μ}`:
    /// `n(αβ)/2 √|det g| (Γ^α_{νσ}(g^{βσ}g^{μν} − g^{βμ}g^{σν}) + (α↔β))`.
    pub fn closed_form_l1(&self, a: usize, b: usize, mu: usize) -> Expr {
        let d = self.d;
        let g = &self.inv;
        let mut t = Vec::new();
        for nu in 0..d {
            for s in 0..d {
                t.push(&self.gamma[a][nu][s] * (&g[b][s] * &g[mu][nu] - &g[b][mu] * &g[s][nu]));
                t.push(&self.gamma[b][nu][s] * (&g[a][s] * &g[mu][nu] - &g[a][mu] * &g[s][nu]));
            }
        }
        Expr::rational(n_factor(a, b), 2) * self.sqrt_abs_det() * Expr::add_all(t)
    }

    /// Closed form of `L^{αβ,μν}`:
    /// `n(αβ)/2 √|det g| (g^{αμ}g^{βν} + g^{αν}g^{βμ} − 2g^{αβ}g^{μν})`.
    pub fn closed_form_l2(&self, a: usize, b: usize, mu: usize, nu: usize) -> Expr {
        let g = &self.inv;
        let bracket = &g[a][mu] * &g[b][nu] + &g[a][nu] * &g[b][mu] - Expr::int(2) * &g[a][b] * &g[mu][nu];
        Expr::rational(n_factor(a, b), 2) * self.sqrt_abs_det() * bracket
    }

    /// Random Lorentzian section: `g(0)` perturbs `diag(−1, 1, …, 1)` by
    /// rationals in `[−3/20, 3/20]`; Taylor coefficients of higher order are
    /// drawn from `[−1, 1]` with denominator 64. Points with `w <= 0` or
    /// `|det g| < 1e−3` are rejected and redrawn.
    pub fn metric_section(&self, seed: u64, index: u64) -> PolynomialSection {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(derive_seed(seed, "metric-point"), index));
        loop {
            let pairs = self.pairs();
            let base: Vec<Q> = pairs
                .iter()
                .map(|&(a, b)| {
                    let diag = if a != b {
                        0
                    } else if a == 0 {
                        -100
                    } else {
                        100
                    };
                    Q::new((diag + rng.gen_range(-15i64..=15)).into(), 100.into())
                })
                .collect();
            let sec = PolynomialSection::random(&self.space, 5, &mut rng, |alpha| base[alpha].clone(), 1);
            let pt = self.metric_values(&base);
            if let Ok(v) = crate::expr::eval_numeric(&self.det, &pt) {
                let det = v.to_f64();
                if -det > 0.0 && det.abs() >= 1e-3 {
                    return sec;
                }
            }
        }
    }

    fn metric_values(&self, base: &[Q]) -> HashMap<Symbol, Q> {
        self.pairs()
            .iter()
            .zip(base)
            .map(|(&(a, b), v)| (self.g_symbol(a, b, MultiIndex::zeros(self.d)), v.clone()))
            .collect()
    }

    /// Jet point of order `r` of the `index`-th random section, at `x = 0`.
    pub fn metric_point(&self, seed: u64, index: u64, r: usize) -> HashMap<Symbol, Q> {
        self.metric_section(seed, index).jet_point(&vec![Q::from_integer(0.into()); self.d], r)
    }

    /// The flat Minkowski point: `g = diag(−1, 1, …)`, all derivatives 0.
    pub fn flat_point(&self, r: usize) -> HashMap<Symbol, Q> {
        let mut pt = HashMap::new();
        for i in 0..self.d {
            pt.insert(Symbol::base(i), Q::from_integer(0.into()));
        }
        for (a, b) in self.pairs() {
            for idx in MultiIndex::up_to(self.d, 0, r) {
                let v = if idx.order() == 0 && a == b {
                    if a == 0 {
                        -1
                    } else {
                        1
                    }
                } else {
                    0
                };
                pt.insert(self.g_symbol(a, b, idx), Q::from_integer(v.into()));
            }
        }
        pt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_numeric, Simplifier};

    #[test]
    fn determinant_signs() {
        assert_eq!(permutations(3).iter().filter(|(_, s)| *s == 1).count(), 3);
        let ctx = MetricJetContext::new(2).unwrap();
        let expect = ctx.g(0, 0) * ctx.g(1, 1) - ctx.g(0, 1).powi(2);
        assert!(Simplifier::default().is_zero(&(ctx.determinant() - expect)).is_zero);
    }

    #[test]
    fn inverse_metric_identity() {
        for d in 2..=4 {
            let ctx = MetricJetContext::new(d).unwrap();
            for mu in 0..d {
                for rho in 0..d {
                    let e = Expr::add_all((0..d).map(|nu| ctx.inverse_metric(mu, nu) * ctx.g(nu, rho)));
                    let delta = Expr::int((mu == rho) as i64);
                    assert!(Simplifier::default().is_zero(&(e - delta)).is_zero, "d={d} ({mu},{rho})");
                }
            }
        }
    }

    #[test]
    fn flat_point_has_no_curvature() {
        let ctx = MetricJetContext::new(3).unwrap();
        let pt = ctx.flat_point(2);
        assert_eq!(eval_numeric(&ctx.christoffel(0, 1, 2), &pt).unwrap().to_f64(), 0.0);
        assert_eq!(eval_numeric(&ctx.ricci(1, 1), &pt).unwrap().to_f64(), 0.0);
        let l = ctx.hilbert_lagrangian().unwrap();
        assert_eq!(eval_numeric(l.lagrangian(), &pt).unwrap().to_f64(), 0.0);
        assert_eq!(eval_numeric(&ctx.inverse_metric(0, 0), &pt).unwrap().to_f64(), -1.0);
    }

    #[test]
    fn christoffel_of_diagonal_metric() {
        // g = diag(1, f(x1)) with ∂_1 f = c: Γ^1_{11} = c / (2f)
        let ctx = MetricJetContext::new(2).unwrap();
        let mut pt = ctx.flat_point(1);
        pt.insert(ctx.g_symbol(0, 0, MultiIndex::zeros(2)), Q::from_integer((-1).into()));
        pt.insert(ctx.g_symbol(1, 1, MultiIndex::zeros(2)), Q::new(3.into(), 2.into()));
        pt.insert(ctx.g_symbol(1, 1, MultiIndex::unit(2, 1)), Q::new(5.into(), 7.into()));
        let v = eval_numeric(&ctx.christoffel(1, 1, 1), &pt).unwrap();
        assert_eq!(v.as_rational().unwrap(), &Q::new(5.into(), 21.into()));
    }

    #[test]
    fn random_points_are_lorentzian() {
        let ctx = MetricJetContext::new(4).unwrap();
        for k in 0..5 {
            let pt = ctx.metric_point(7, k, 1);
            let w = eval_numeric(&Expr::sym(ctx.w().clone()), &pt).unwrap().to_f64();
            assert!(w > 1e-3);
        }
    }
}

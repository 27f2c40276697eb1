//! Order-k non-autonomous mechanics: momenta, the Cartan 1-form,
//! projectability and the constraint chain. The base is `t = x1`; `q<α>_<i>`
//! is the jet coordinate of order `i`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{diff, Expr, Simplifier, Symbol};
use crate::forms::JetForm;
use crate::jet::{projects_onto_with, JetSpace, MultiIndex};
use crate::variational::{
    compare_cartan, minimal_projection, validate, ChainEngine, ConstraintChain, LowerOrderComparison,
};

/// A Lagrangian `L` on `J^k π` over the time line.
#[derive(Clone, Debug)]
pub struct MechLagrangian {
    space: JetSpace,
    lagrangian: Expr,
    simp: Simplifier,
}

impl MechLagrangian {
    pub fn new(n: usize, k: usize, lagrangian: Expr) -> Result<Self> {
        if k == 0 {
            return Err(Error::Input("mechanics order must be at least 1".into()));
        }
        let space = JetSpace::new(1, n, k);
        validate(&space, &lagrangian, k)?;
        Ok(MechLagrangian { space, lagrangian, simp: Simplifier::default() })
    }

    pub fn with_simplifier(mut self, simp: Simplifier) -> Self {
        self.simp = simp;
        self
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn dof(&self) -> usize {
        self.space.fiber_dim()
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn simplifier(&self) -> &Simplifier {
        &self.simp
    }

    /// `q^α_i`.
    pub fn q(&self, alpha: usize, i: usize) -> Expr {
        self.space.u(alpha, &[i as u8])
    }

    fn q_symbol(&self, alpha: usize, i: usize) -> Symbol {
        self.space.coord_symbol(alpha, MultiIndex::from_slice(&[i as u8]))
    }
}

/// `L^r_α` for `r = 0..=k`; `r = 0` is the Euler–Lagrange expression.
#[derive(Clone, Debug)]
pub struct Momenta {
    pub l: Vec<Vec<Expr>>,
}

impl Momenta {
    pub fn get(&self, alpha: usize, r: usize) -> &Expr {
        &self.l[alpha][r]
    }
}

/// Backward recursion `L^r = ∂L/∂q_r − D_t L^{r+1}`, checked against the
/// alternating-sum closed form for `r = 1`.
pub fn momenta(lag: &MechLagrangian) -> Result<Momenta> {
    let k = lag.order();
    let simp = lag.simp;
    let sp = &lag.space;
    let rows: Vec<Result<Vec<Expr>>> = (0..lag.dof())
        .into_par_iter()
        .map(|a| {
            let partial = |r: usize| diff(&lag.lagrangian, &lag.q_symbol(a, r));
            let mut row = vec![Expr::zero(); k + 1];
            let mut next = Expr::zero();
            for r in (0..=k).rev() {
                let cur = simp.normalize(&(partial(r) - sp.total_derivative(&next, 0)?));
                row[r] = cur.clone();
                next = cur;
            }
            let mut closed = Vec::with_capacity(k);
            for i in 0..k {
                let mut t = partial(1 + i);
                for _ in 0..i {
                    t = sp.total_derivative(&t, 0)?;
                }
                closed.push(if i % 2 == 0 { t } else { -t });
            }
            if !simp.is_zero(&(Expr::add_all(closed) - &row[1])).is_zero {
                return Err(Error::VerificationFailed(format!(
                    "momentum recursion disagrees with the closed form for component {}",
                    a + 1
                )));
            }
            Ok(row)
        })
        .collect();
    Ok(Momenta { l: rows.into_iter().collect::<Result<_>>()? })
}

/// Coefficient of `dt`: `L − Σ_r L^r_α q^α_r`.
pub fn time_coefficient(lag: &MechLagrangian, mom: &Momenta) -> Expr {
    let mut t = vec![lag.lagrangian.clone()];
    for a in 0..lag.dof() {
        for r in 1..=lag.order() {
            t.push(-(mom.get(a, r) * &lag.q(a, r)));
        }
    }
    lag.simp.normalize(&Expr::add_all(t))
}

/// `Θ = Σ_r L^r_α dq^α_{r−1} + (L − Σ_r L^r_α q^α_r) dt`.
pub fn cartan_1form(lag: &MechLagrangian, mom: &Momenta) -> JetForm {
    let mut theta = JetForm::basis(Symbol::base(0)).scale(&time_coefficient(lag, mom));
    for a in 0..lag.dof() {
        for r in 1..=lag.order() {
            theta = theta.add(&JetForm::basis(lag.q_symbol(a, r - 1)).scale(mom.get(a, r)));
        }
    }
    theta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct MechProjectability {
    /// Minimal `s` in `k−1..=2k−2` such that all momenta project onto `J^s`.
    pub level: Option<usize>,
    /// `L` itself does not depend on `q_k`: the theory is not strictly of
    /// order `k`.
    pub lower_order: bool,
}

pub fn projectability_level_mech(lag: &MechLagrangian, mom: &Momenta) -> MechProjectability {
    let k = lag.order();
    let all: Vec<&Expr> = mom.l.iter().flat_map(|row| row[1..].iter()).collect();
    MechProjectability {
        level: minimal_projection(&all, k - 1, 2 * k - 2, &lag.simp),
        lower_order: projects_onto_with(&lag.lagrangian, k - 1, &lag.simp),
    }
}

/// Conditions of the mechanics projectability lemma at `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MechLemmaConditions {
    pub s: usize,
    pub theta_basic: bool,
    pub d_theta_semibasic: bool,
    pub coefficients_project: bool,
}

impl MechLemmaConditions {
    pub fn agree(&self) -> bool {
        self.theta_basic == self.d_theta_semibasic && self.theta_basic == self.coefficients_project
    }
}

pub fn lemma_conditions_mech(lag: &MechLagrangian, mom: &Momenta, s: usize) -> MechLemmaConditions {
    let simp = &lag.simp;
    let theta = cartan_1form(lag, mom);
    MechLemmaConditions {
        s,
        theta_basic: theta.is_basic_with(s, simp),
        d_theta_semibasic: theta.exterior_derivative().is_semibasic_with(s, simp),
        coefficients_project: mom.l.iter().flat_map(|row| row[1..].iter()).all(|e| projects_onto_with(e, s, simp)),
    }
}

/// Constraint chain on `J^{2k−1} π` for holonomic vector fields
/// `D_t + (F^α − q^α_{2k}) ∂/∂q^α_{2k−1}`.
pub fn constraint_chain_mech(lag: &MechLagrangian, mom: &Momenta, max_generations: usize) -> Result<ConstraintChain> {
    let eng = ChainEngine { space: &lag.space, top: 2 * lag.order() - 1, simp: lag.simp };
    let l0: Vec<Expr> = mom.l.iter().map(|row| row[0].clone()).collect();
    let l1: Vec<Vec<Expr>> = mom.l.iter().map(|row| vec![row[1].clone()]).collect();
    eng.run(&l0, &l1, max_generations)
}

/// Generation count expected from the projectability level, `2k − s − 1`,
/// against the count of generations with a nonvanishing constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct GenerationCount {
    pub nominal: usize,
    pub actual: usize,
    pub matches: bool,
}

pub fn generation_count(
    lag: &MechLagrangian,
    level: Option<usize>,
    chain: &ConstraintChain,
) -> Option<GenerationCount> {
    let s = level?;
    let nominal = 2 * lag.order() - s - 1;
    let actual = chain.nontrivial_generation_count();
    Some(GenerationCount { nominal, actual, matches: nominal == actual })
}

/// Compares with a Lagrangian of order at most `k` on the same fibers.
pub fn compare_with_lower_order_mech(lag: &MechLagrangian, lower: &MechLagrangian) -> Result<LowerOrderComparison> {
    if lower.dof() != lag.dof() || lower.order() > lag.order() {
        return Err(Error::Input("comparison needs the same fibers and an order not above k".into()));
    }
    let m = momenta(lag)?;
    let ml = momenta(lower)?;
    compare_cartan(&cartan_1form(lag, &m), &lag.lagrangian, &cartan_1form(lower, &ml), &lower.lagrangian, &lag.simp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::VectorField;
    use crate::variational::ChainStatus;

    fn lag(k: usize, f: impl Fn(&dyn Fn(usize) -> Expr) -> Expr) -> MechLagrangian {
        let sp = JetSpace::new(1, 1, k);
        let q = |i: usize| sp.u(0, &[i as u8]);
        MechLagrangian::new(1, k, f(&q)).unwrap()
    }

    #[test]
    fn momenta_of_named_examples() {
        let l = lag(2, |q: &dyn Fn(usize) -> Expr| Expr::rational(1, 2) * q(2).powi(2));
        let m = momenta(&l).unwrap();
        assert_eq!(m.l[0], vec![l.q(0, 4), -l.q(0, 3), l.q(0, 2)]);
        let l = lag(2, |q: &dyn Fn(usize) -> Expr| q(0) * q(2));
        let m = momenta(&l).unwrap();
        assert_eq!(m.l[0], vec![Expr::int(2) * l.q(0, 2), -l.q(0, 1), l.q(0, 0)]);
        let l = lag(1, |q: &dyn Fn(usize) -> Expr| Expr::rational(1, 2) * q(1).powi(2));
        let m = momenta(&l).unwrap();
        assert_eq!(m.l[0], vec![-l.q(0, 2), l.q(0, 1)]);
    }

    #[test]
    fn cartan_form_of_q0_q2_projects_onto_first_jets() {
        let l = lag(2, |q: &dyn Fn(usize) -> Expr| q(0) * q(2));
        let m = momenta(&l).unwrap();
        let theta = cartan_1form(&l, &m);
        let expect = JetForm::basis(l.q_symbol(0, 0))
            .scale(&-l.q(0, 1))
            .add(&JetForm::basis(l.q_symbol(0, 1)).scale(&l.q(0, 0)))
            .add(&JetForm::basis(Symbol::base(0)).scale(&l.q(0, 1).powi(2)));
        assert!(theta.equals_with(&expect, &Simplifier::default()));
        let v = VectorField::basis(l.q_symbol(0, 3));
        assert!(theta.lie_derivative(&v).is_zero_with(&Simplifier::default()));
        assert_eq!(projectability_level_mech(&l, &m), MechProjectability { level: Some(1), lower_order: false });
    }

    #[test]
    fn chains() {
        let l = lag(2, |q: &dyn Fn(usize) -> Expr| q(0) * q(2));
        let m = momenta(&l).unwrap();
        let c = constraint_chain_mech(&l, &m, 6).unwrap();
        assert_eq!(c.generations(), vec![vec![Expr::int(2) * l.q(0, 2)], vec![Expr::int(2) * l.q(0, 3)]]);
        assert_eq!(c.status, ChainStatus::TerminatedWithResidual);
        let n = generation_count(&l, Some(1), &c).unwrap();
        assert!(n.matches);

        let l = lag(1, |q: &dyn Fn(usize) -> Expr| Expr::rational(1, 2) * q(1).powi(2));
        let m = momenta(&l).unwrap();
        let c = constraint_chain_mech(&l, &m, 6).unwrap();
        assert!(c.constraints.is_empty());
        assert!(c.determination.unwrap().solution.unwrap()[0].1.is_zero());
    }

    #[test]
    fn mixed_lagrangian_is_not_projectable() {
        let l = lag(2, |q: &dyn Fn(usize) -> Expr| Expr::rational(1, 2) * q(2).powi(2) + q(0) * q(2));
        let m = momenta(&l).unwrap();
        assert_eq!(m.l[0][2], l.q(0, 2) + l.q(0, 0));
        assert_eq!(projectability_level_mech(&l, &m).level, None);
    }
}

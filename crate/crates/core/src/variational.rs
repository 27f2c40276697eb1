//! Second-order field theory: Cartan coefficients, the Poincaré–Cartan
//! form, projectability, the Euler–Lagrange residual for holonomic
//! multivector fields and the constraint algorithm.
//!
//! The constraint engine is written against an ambient top order so that
//! the mechanics module can drive it on `J^{2k-1}` with `m = 1`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{diff, diff_many, n_factor, substitute_raw, Expr, Simplifier, Symbol};
use crate::forms::JetForm;
use crate::jet::{projects_onto_with, JetSpace, MultiIndex};

/// Checks that `e` only uses coordinates of `space` up to jet order `k`.
pub(crate) fn validate(space: &JetSpace, e: &Expr, k: usize) -> Result<()> {
    for s in e.symbols() {
        match &s {
            Symbol::Aux(_) if s.definition().is_some() => {}
            Symbol::Jet { index, .. } if space.admits(&s) => {
                if index.order() > k {
                    return Err(Error::OrderViolation { coord: s.to_string(), order: k });
                }
            }
            Symbol::Base(_) if space.admits(&s) => {}
            _ => return Err(Error::UnknownCoordinate(s.to_string())),
        }
    }
    Ok(())
}

/// A Lagrangian density `L` on `J^2 π`.
#[derive(Clone, Debug)]
pub struct FieldLagrangian {
    space: JetSpace,
    lagrangian: Expr,
    simp: Simplifier,
}

impl FieldLagrangian {
    /// The order of `space` is forced to 2.
    pub fn new(space: JetSpace, lagrangian: Expr) -> Result<Self> {
        let space = space.with_order(2);
        validate(&space, &lagrangian, 2)?;
        Ok(FieldLagrangian { space, lagrangian, simp: Simplifier::default() })
    }

    pub fn with_simplifier(mut self, simp: Simplifier) -> Self {
        self.simp = simp;
        self
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn simplifier(&self) -> &Simplifier {
        &self.simp
    }
}

/// `L^{ij}_α`, `L^i_α` and `L^0_α`.
#[derive(Clone, Debug)]
pub struct CartanCoefficients {
    pub l2: Vec<Vec<Vec<Expr>>>,
    pub l1: Vec<Vec<Expr>>,
    pub l0: Vec<Expr>,
}

fn pair(m: usize, i: usize, j: usize) -> MultiIndex {
    MultiIndex::unit(m, i).add_unit(j)
}

pub fn cartan_coefficients(lag: &FieldLagrangian) -> Result<CartanCoefficients> {
    let sp = &lag.space;
    let m = sp.base_dim();
    let l = &lag.lagrangian;
    let simp = lag.simp;
    let per: Vec<Result<(Vec<Vec<Expr>>, Vec<Expr>, Expr)>> = (0..sp.fiber_dim())
        .into_par_iter()
        .map(|a| {
            let mut l2 = vec![vec![Expr::zero(); m]; m];
            for i in 0..m {
                for j in i..m {
                    let c = diff(l, &sp.coord_symbol(a, pair(m, i, j))) * Expr::rational(1, n_factor(i, j));
                    let c = simp.normalize(&c);
                    l2[i][j] = c.clone();
                    l2[j][i] = c;
                }
            }
            let mut l1 = Vec::with_capacity(m);
            for i in 0..m {
                let mut t = vec![diff(l, &sp.coord_symbol(a, MultiIndex::unit(m, i)))];
                for (j, c) in l2[i].iter().enumerate() {
                    t.push(-sp.total_derivative(c, j)?);
                }
                l1.push(simp.normalize(&Expr::add_all(t)));
            }
            let mut t = vec![diff(l, &sp.coord_symbol(a, MultiIndex::zeros(m)))];
            for (i, c) in l1.iter().enumerate() {
                t.push(-sp.total_derivative(c, i)?);
            }
            Ok((l2, l1, simp.normalize(&Expr::add_all(t))))
        })
        .collect();
    let mut out = CartanCoefficients { l2: Vec::new(), l1: Vec::new(), l0: Vec::new() };
    for r in per {
        let (a, b, c) = r?;
        out.l2.push(a);
        out.l1.push(b);
        out.l0.push(c);
    }
    Ok(out)
}

/// `∂L/∂u − D_i ∂L/∂u_i + Σ_{|I|=2} D_I ∂L/∂u_I`, the sum running over
/// unordered multi-indices. Agrees with `L0` of [`cartan_coefficients`].
pub fn euler_lagrange_expanded(lag: &FieldLagrangian) -> Result<Vec<Expr>> {
    let sp = &lag.space;
    let m = sp.base_dim();
    let l = &lag.lagrangian;
    (0..sp.fiber_dim())
        .map(|a| {
            let mut t = vec![diff(l, &sp.coord_symbol(a, MultiIndex::zeros(m)))];
            for i in 0..m {
                let d = diff(l, &sp.coord_symbol(a, MultiIndex::unit(m, i)));
                t.push(-sp.total_derivative(&d, i)?);
            }
            for idx in MultiIndex::of_order(m, 2) {
                let d = diff(l, &sp.coord_symbol(a, idx));
                t.push(sp.iterated_total_derivative(&d, &idx)?);
            }
            Ok(lag.simp.normalize(&Expr::add_all(t)))
        })
        .collect()
}

/// Coefficient of `d^m x` in `Θ_L`: `L − L^i_α u^α_i − L^{ij}_α u^α_{1_i+1_j}`.
pub fn volume_coefficient(lag: &FieldLagrangian, c: &CartanCoefficients) -> Expr {
    let sp = &lag.space;
    let m = sp.base_dim();
    let mut t = vec![lag.lagrangian.clone()];
    for a in 0..sp.fiber_dim() {
        for i in 0..m {
            t.push(-(&c.l1[a][i] * &sp.coord(a, MultiIndex::unit(m, i))));
            for j in 0..m {
                t.push(-(&c.l2[a][i][j] * &sp.coord(a, pair(m, i, j))));
            }
        }
    }
    lag.simp.normalize(&Expr::add_all(t))
}

/// The Poincaré–Cartan m-form.
pub fn poincare_cartan(lag: &FieldLagrangian, c: &CartanCoefficients) -> JetForm {
    let sp = &lag.space;
    let m = sp.base_dim();
    let mut theta = JetForm::volume(m).scale(&volume_coefficient(lag, c));
    for a in 0..sp.fiber_dim() {
        for i in 0..m {
            let du = JetForm::basis(sp.coord_symbol(a, MultiIndex::zeros(m)));
            theta = theta.add(&du.wedge(&JetForm::volume_minus(m, i)).scale(&c.l1[a][i]));
            let dui = JetForm::basis(sp.coord_symbol(a, MultiIndex::unit(m, i)));
            for j in 0..m {
                theta = theta.add(&dui.wedge(&JetForm::volume_minus(m, j)).scale(&c.l2[a][i][j]));
            }
        }
    }
    theta
}

/// Smallest `s` in `lo..=hi` such that every expression projects onto
/// `J^s π`.
pub fn minimal_projection(exprs: &[&Expr], lo: usize, hi: usize, simp: &Simplifier) -> Option<usize> {
    // projectability is monotone in s, so scan from the top down
    let mut best = None;
    for s in (lo..=hi).rev() {
        if exprs.par_iter().all(|e| projects_onto_with(e, s, simp)) {
            best = Some(s);
        } else {
            break;
        }
    }
    best
}

/// Minimal `s ∈ {1, 2}` such that all `L^i_α`, `L^{ij}_α` project onto
/// `J^s π`.
pub fn projectability_level(lag: &FieldLagrangian, c: &CartanCoefficients) -> Option<usize> {
    let mut all: Vec<&Expr> = c.l1.iter().flatten().collect();
    all.extend(c.l2.iter().flatten().flatten());
    minimal_projection(&all, 1, 2, &lag.simp)
}

/// The three local conditions of the projectability lemma at a given `s`,
/// plus the remark that the volume coefficient is then independent of the
/// suppressed coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LemmaConditions {
    pub s: usize,
    /// `Θ_L` projects onto `J^s π` (basic form).
    pub theta_basic: bool,
    /// `dΘ_L` is semibasic.
    pub d_theta_semibasic: bool,
    /// All coefficients project onto `J^s π`.
    pub coefficients_project: bool,
    /// `∂/∂u_J (L − L^i u_i − L^{ij} u_{ij}) = 0` for `s < |J| <= 3`.
    pub volume_condition: bool,
}

impl LemmaConditions {
    pub fn agree(&self) -> bool {
        self.theta_basic == self.d_theta_semibasic && self.theta_basic == self.coefficients_project
    }
}

pub fn lemma_conditions(lag: &FieldLagrangian, c: &CartanCoefficients, s: usize) -> LemmaConditions {
    let simp = &lag.simp;
    let theta = poincare_cartan(lag, c);
    let mut all: Vec<&Expr> = c.l1.iter().flatten().collect();
    all.extend(c.l2.iter().flatten().flatten());
    let vol = volume_coefficient(lag, c);
    LemmaConditions {
        s,
        theta_basic: theta.is_basic_with(s, simp),
        d_theta_semibasic: theta.exterior_derivative().is_semibasic_with(s, simp),
        coefficients_project: all.iter().all(|e| projects_onto_with(e, s, simp)),
        volume_condition: projects_onto_with(&vol, s, simp),
    }
}

// ---------------------------------------------------------------------------
// Constraint algorithm

/// One constraint function with its provenance.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: Expr,
    /// 1-based generation.
    pub generation: usize,
    /// Index (into `ConstraintChain::constraints`) of the constraint this
    /// one is a total derivative of.
    pub parent: Option<usize>,
    /// Direction `i` of that total derivative.
    pub direction: Option<usize>,
    /// Fiber component of the Euler–Lagrange expression at the root.
    pub component: usize,
    /// Identically zero; kept in generation 1 only, never extended.
    pub trivial: bool,
}

impl Constraint {
    pub fn derivation(&self) -> &'static str {
        if self.parent.is_some() {
            "D_i of parent"
        } else {
            "EL"
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquationSource {
    EulerLagrange { component: usize },
    Tangency { constraint: usize, direction: usize },
}

/// An equation that contains unknown `F` symbols.
#[derive(Clone, Debug)]
pub struct ResidualEquation {
    pub expr: Expr,
    pub source: EquationSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainStatus {
    /// No tangency condition produced an equation in `F`.
    TerminatedIdentically,
    /// Some tangency condition contains `F`.
    TerminatedWithResidual,
    MaxIterations,
}

impl fmt::Display for ChainStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainStatus::TerminatedIdentically => "terminated-identically",
            ChainStatus::TerminatedWithResidual => "terminated-with-residual",
            ChainStatus::MaxIterations => "max-iterations",
        })
    }
}

/// Whether linear residual equations fix the unknowns.
#[derive(Clone, Debug)]
pub struct FDetermination {
    pub unknowns: Vec<Symbol>,
    pub rank: usize,
    /// Values of the unknowns when the system has full column rank.
    pub solution: Option<Vec<(Symbol, Expr)>>,
}

#[derive(Clone, Debug)]
pub struct ConstraintChain {
    pub constraints: Vec<Constraint>,
    pub residual_equations: Vec<ResidualEquation>,
    /// Euler–Lagrange residual per component.
    pub el_residual: Vec<Expr>,
    pub status: ChainStatus,
    /// Determination of `F` by the Euler–Lagrange residual equations, when
    /// the system is small enough to eliminate.
    pub determination: Option<FDetermination>,
}

impl ConstraintChain {
    pub fn generation_count(&self) -> usize {
        self.constraints.iter().map(|c| c.generation).max().unwrap_or(0)
    }

    /// Generations with at least one nontrivial constraint.
    pub fn nontrivial_generation_count(&self) -> usize {
        let gens: BTreeSet<usize> = self.constraints.iter().filter(|c| !c.trivial).map(|c| c.generation).collect();
        gens.len()
    }

    pub fn generation(&self, g: usize) -> Vec<&Constraint> {
        self.constraints.iter().filter(|c| c.generation == g).collect()
    }

    /// Constraint expressions grouped by generation.
    pub fn generations(&self) -> Vec<Vec<Expr>> {
        (1..=self.generation_count()).map(|g| self.generation(g).iter().map(|c| c.expr.clone()).collect()).collect()
    }

    /// Tangency equations (those not coming from the Euler–Lagrange step).
    pub fn tangency_residuals(&self) -> Vec<&ResidualEquation> {
        self.residual_equations.iter().filter(|r| matches!(r.source, EquationSource::Tangency { .. })).collect()
    }
}

/// Tangency machinery over an ambient jet space `J^top π`.
pub(crate) struct ChainEngine<'a> {
    pub space: &'a JetSpace,
    pub top: usize,
    pub simp: Simplifier,
}

/// Up to this many unknowns the Euler–Lagrange residual is eliminated.
const SOLVE_LIMIT: usize = 24;

impl ChainEngine<'_> {
    /// Top-order coordinates `u^β_J` (`|J| = top`) occurring in `e`.
    fn top_coords(&self, e: &Expr) -> Result<Vec<Symbol>> {
        if e.max_jet_order().is_none_or(|o| o < self.top) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for s in e.free_coordinates() {
            if let Symbol::Jet { index, .. } = &s {
                if index.order() > self.top {
                    return Err(Error::OrderViolation { coord: s.to_string(), order: self.top });
                }
                if index.order() == self.top {
                    out.push(s);
                }
            }
        }
        Ok(out)
    }

    /// `Σ_{β,|J|=top} (F^β_{J,i} − u^β_{J+1_i}) ∂φ/∂u^β_J` for each `i`, from
    /// the partials `(u^β_J, ∂φ/∂u^β_J)`.
    fn f_terms(&self, partials: &[(Symbol, Expr)], i: usize) -> Expr {
        Expr::add_all(partials.iter().map(|(s, d)| match s {
            Symbol::Jet { label, index } => {
                let f = Expr::sym(Symbol::unknown(*label, *index, i));
                let u = Expr::sym(Symbol::jet(*label, index.add_unit(i)));
                (f - u) * d
            }
            _ => unreachable!("top coordinates are jet coordinates"),
        }))
    }

    /// For each expression, its partials along its top-order coordinates
    /// and whether any of them is nonzero. Expressions sharing a coordinate
    /// are differentiated in one pass so common subexpressions are reused.
    fn blocks(&self, es: &[Expr]) -> Result<Vec<Block>> {
        let coords = es.par_iter().map(|e| self.top_coords(e)).collect::<Result<Vec<_>>>()?;
        let mut by_coord: BTreeMap<Symbol, Vec<usize>> = BTreeMap::new();
        for (j, cs) in coords.iter().enumerate() {
            for c in cs {
                by_coord.entry(c.clone()).or_default().push(j);
            }
        }
        let groups: Vec<(Symbol, Vec<usize>)> = by_coord.into_iter().collect();
        let derived: Vec<Vec<Expr>> = groups
            .par_iter()
            .map(|(c, idx)| {
                let sel: Vec<Expr> = idx.iter().map(|&j| es[j].clone()).collect();
                diff_many(&sel, c)
            })
            .collect();
        let mut partials: Vec<Vec<(Symbol, Expr)>> = vec![Vec::new(); es.len()];
        for ((c, idx), ds) in groups.into_iter().zip(derived) {
            for (j, d) in idx.into_iter().zip(ds) {
                partials[j].push((c.clone(), d));
            }
        }
        Ok(partials
            .into_par_iter()
            .map(|p| {
                let nonzero = p.par_iter().any(|(_, d)| !self.simp.is_zero(d).is_zero);
                Block { partials: p, nonzero }
            })
            .collect())
    }

    /// Euler–Lagrange residual `L^0_α − (F^β_{J,i} − u^β_{J+1_i}) ∂L^i_α/∂u^β_J`
    /// per component, with whether its `F` block is nonzero.
    pub fn el_residual(&self, l0: &[Expr], l1: &[Vec<Expr>]) -> Result<Vec<(Expr, bool)>> {
        let flat: Vec<Expr> = l1.iter().flatten().cloned().collect();
        let mut blocks = self.blocks(&flat)?.into_iter();
        let mut out = Vec::with_capacity(l0.len());
        for (z, row) in l0.iter().zip(l1) {
            let mut t = vec![z.clone()];
            let mut any = false;
            for i in 0..row.len() {
                let b = blocks.next().expect("one block per coefficient");
                any |= b.nonzero;
                t.push(-self.f_terms(&b.partials, i));
            }
            out.push((Expr::add_all(t), any));
        }
        Ok(out.into_par_iter().map(|(e, any)| (self.simp.normalize(&e), any)).collect())
    }

    /// One tangency step over a generation: for each `φ`, either the `m`
    /// equations `D_iφ + F-terms` (when its block is nonzero) or the `m`
    /// candidates `D_iφ`, plus the reduced form of `φ` when its top-order
    /// coordinates drop out.
    fn step(&self, phis: &[Expr]) -> Result<Vec<Step>> {
        let blocks = self.blocks(phis)?;
        // φ does not depend on top-order coordinates whose partials vanish;
        // dropping them keeps later derivatives small.
        let pruned: Vec<Option<Expr>> = phis
            .par_iter()
            .zip(blocks.par_iter())
            .map(|(phi, b)| {
                if b.nonzero || b.partials.is_empty() {
                    return Ok(None);
                }
                let zeros = b.partials.iter().map(|(s, _)| (s.clone(), Expr::zero())).collect();
                Ok(Some(self.simp.normalize(&substitute_raw(phi, &zeros)?)))
            })
            .collect::<Result<_>>()?;
        let reduced: Vec<Expr> =
            phis.iter().zip(&pruned).map(|(p, r)| r.clone().unwrap_or_else(|| p.clone())).collect();
        let m = self.space.base_dim();
        let derivs: Vec<Vec<Expr>> =
            (0..m).into_par_iter().map(|i| self.space.total_derivatives(&reduced, i)).collect::<Result<_>>()?;
        Ok(blocks
            .into_par_iter()
            .zip(pruned)
            .enumerate()
            .map(|(j, (b, pruned))| {
                let out = (0..m)
                    .map(|i| {
                        let d = derivs[i][j].clone();
                        if b.nonzero {
                            self.simp.normalize(&(d + self.f_terms(&b.partials, i)))
                        } else {
                            self.simp.normalize(&d)
                        }
                    })
                    .collect();
                Step { has_f: b.nonzero, exprs: out, pruned }
            })
            .collect())
    }

    pub fn run(&self, l0: &[Expr], l1: &[Vec<Expr>], max_generations: usize) -> Result<ConstraintChain> {
        if max_generations == 0 {
            return Err(Error::Input("max_generations must be at least 1".into()));
        }
        let el = self.el_residual(l0, l1)?;
        let mut constraints = Vec::new();
        let mut residual_equations = Vec::new();
        let mut span = self.simp.span();
        let mut first = Vec::new();
        for (a, (r, has_f)) in el.iter().enumerate() {
            if *has_f {
                residual_equations
                    .push(ResidualEquation { expr: r.clone(), source: EquationSource::EulerLagrange { component: a } });
            } else {
                let e = self.simp.normalize(&l0[a]);
                let trivial = self.simp.is_zero(&e).is_zero;
                if !trivial {
                    first.push(e.clone());
                }
                constraints.push(Constraint {
                    expr: e,
                    generation: 1,
                    parent: None,
                    direction: None,
                    component: a,
                    trivial,
                });
            }
        }
        span.insert_many(&first);
        let el_eqs: Vec<Expr> = residual_equations.iter().map(|r| r.expr.clone()).collect();
        let determination = determine_unknowns(&el_eqs, &self.simp);

        let mut current: Vec<usize> = (0..constraints.len()).filter(|&k| !constraints[k].trivial).collect();
        let mut generation = 1;
        let mut tangency_f = false;
        let status = loop {
            if current.is_empty() {
                break if tangency_f {
                    ChainStatus::TerminatedWithResidual
                } else {
                    ChainStatus::TerminatedIdentically
                };
            }
            if generation >= max_generations {
                break ChainStatus::MaxIterations;
            }
            let phis: Vec<Expr> = current.iter().map(|&k| constraints[k].expr.clone()).collect();
            let steps = self.step(&phis)?;
            let mut candidates = Vec::new();
            for (&k, step) in current.iter().zip(steps) {
                if let Some(p) = step.pruned {
                    constraints[k].expr = p;
                }
                for (i, e) in step.exprs.into_iter().enumerate() {
                    if step.has_f {
                        tangency_f = true;
                        residual_equations.push(ResidualEquation {
                            expr: e,
                            source: EquationSource::Tangency { constraint: k, direction: i },
                        });
                    } else {
                        candidates.push((k, i, e));
                    }
                }
            }
            let exprs: Vec<Expr> = candidates.iter().map(|(_, _, e)| e.clone()).collect();
            let mut next = Vec::new();
            for ((k, i, e), fresh) in candidates.into_iter().zip(span.insert_many(&exprs)) {
                if fresh {
                    next.push(constraints.len());
                    constraints.push(Constraint {
                        expr: e,
                        generation: generation + 1,
                        parent: Some(k),
                        direction: Some(i),
                        component: constraints[k].component,
                        trivial: false,
                    });
                }
            }
            current = next;
            generation += 1;
        };
        Ok(ConstraintChain {
            constraints,
            residual_equations,
            el_residual: el.into_iter().map(|(e, _)| e).collect(),
            status,
            determination,
        })
    }
}

struct Block {
    partials: Vec<(Symbol, Expr)>,
    nonzero: bool,
}

struct Step {
    has_f: bool,
    exprs: Vec<Expr>,
    pruned: Option<Expr>,
}

/// Gaussian elimination of a system linear in the unknown `F` symbols.
/// Returns `None` when there are no unknowns, too many of them, or the
/// system is not linear.
pub fn determine_unknowns(eqs: &[Expr], simp: &Simplifier) -> Option<FDetermination> {
    let unknowns: Vec<Symbol> = eqs
        .iter()
        .flat_map(|e| e.free_coordinates())
        .filter(|s| s.is_unknown())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if unknowns.is_empty() || unknowns.len() > SOLVE_LIMIT {
        return None;
    }
    let zero_f: HashMap<Symbol, Expr> = unknowns.iter().map(|s| (s.clone(), Expr::zero())).collect();
    let mut rows: Vec<(Vec<Expr>, Expr)> = Vec::with_capacity(eqs.len());
    for e in eqs {
        let coeffs: Vec<Expr> = unknowns.iter().map(|s| simp.normalize(&diff(e, s))).collect();
        if coeffs.iter().any(|c| c.has_unknowns()) {
            return None;
        }
        let rhs = -substitute_raw(e, &zero_f).ok()?;
        rows.push((coeffs, simp.normalize(&rhs)));
    }
    let n = unknowns.len();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&k| !simp.is_zero(&rows[k].0[col]).is_zero) else { continue };
        rows.swap(r, p);
        let (prow, prhs) = rows[r].clone();
        let inv = prow[col].recip();
        for (k, row) in rows.iter_mut().enumerate() {
            if k == r || row.0[col].is_zero() {
                continue;
            }
            let f = &row.0[col] * &inv;
            for c in 0..n {
                row.0[c] = simp.normalize(&(&row.0[c] - &f * &prow[c]));
            }
            row.1 = simp.normalize(&(&row.1 - &f * &prhs));
        }
        pivots.push((r, col));
        r += 1;
    }
    let rank = pivots.len();
    let solution = (rank == n).then(|| {
        pivots
            .iter()
            .map(|&(row, col)| (unknowns[col].clone(), simp.normalize(&(&rows[row].1 / &rows[row].0[col]))))
            .collect()
    });
    Some(FDetermination { unknowns, rank, solution })
}

pub fn el_residual(lag: &FieldLagrangian, c: &CartanCoefficients) -> Result<Vec<Expr>> {
    let eng = ChainEngine { space: &lag.space, top: 3, simp: lag.simp };
    Ok(eng.el_residual(&c.l0, &c.l1)?.into_iter().map(|(e, _)| e).collect())
}

/// Default generation cap of the constraint algorithm.
pub const DEFAULT_MAX_GENERATIONS: usize = 6;

pub fn constraint_algorithm(
    lag: &FieldLagrangian,
    c: &CartanCoefficients,
    max_generations: usize,
) -> Result<ConstraintChain> {
    let eng = ChainEngine { space: &lag.space, top: 3, simp: lag.simp };
    eng.run(&c.l0, &c.l1, max_generations)
}

/// Outcome of comparing a Lagrangian with a lower-order candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct LowerOrderComparison {
    pub forms_equal: bool,
    pub lagrangians_equal: bool,
}

/// Compares two Cartan forms and their Lagrangians under coordinate
/// inclusion; equal forms must come from equal Lagrangians.
pub fn compare_cartan(
    theta: &JetForm,
    l: &Expr,
    theta_lower: &JetForm,
    l_lower: &Expr,
    simp: &Simplifier,
) -> Result<LowerOrderComparison> {
    let forms_equal = theta.equals_with(theta_lower, simp);
    let lagrangians_equal = simp.is_zero(&(l - l_lower)).is_zero;
    if forms_equal && !lagrangians_equal {
        return Err(Error::VerificationFailed("Cartan forms agree but the Lagrangians differ".into()));
    }
    Ok(LowerOrderComparison { forms_equal, lagrangians_equal })
}

/// `lower` must live on `J^1 π` of the same space.
pub fn compare_with_lower_order(lag: &FieldLagrangian, lower: &FieldLagrangian) -> Result<LowerOrderComparison> {
    validate(&lag.space, &lower.lagrangian, 1)?;
    let c = cartan_coefficients(lag)?;
    let cl = cartan_coefficients(lower)?;
    compare_cartan(
        &poincare_cartan(lag, &c),
        &lag.lagrangian,
        &poincare_cartan(lower, &cl),
        &lower.lagrangian,
        &lag.simp,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mech(l: impl Fn(&JetSpace) -> Expr) -> FieldLagrangian {
        let sp = JetSpace::new(1, 1, 2);
        let e = l(&sp);
        FieldLagrangian::new(sp, e).unwrap()
    }

    fn q(sp: &JetSpace, i: u8) -> Expr {
        sp.u(0, &[i])
    }

    #[test]
    fn half_square_of_second_derivative() {
        let lag = mech(|sp| Expr::rational(1, 2) * q(sp, 2).powi(2));
        let sp = lag.space().clone();
        let c = cartan_coefficients(&lag).unwrap();
        assert_eq!(c.l2[0][0][0], q(&sp, 2));
        assert_eq!(c.l1[0][0], -q(&sp, 3));
        assert_eq!(c.l0[0], q(&sp, 4));
        assert_eq!(projectability_level(&lag, &c), None);
        let chain = constraint_algorithm(&lag, &c, 6).unwrap();
        assert!(chain.constraints.is_empty());
        assert_eq!(chain.status, ChainStatus::TerminatedIdentically);
        let det = chain.determination.unwrap();
        let sol = det.solution.unwrap();
        assert_eq!(sol.len(), 1);
        assert!(sol[0].1.is_zero());
    }

    #[test]
    fn q0_q2_chain() {
        let lag = mech(|sp| q(sp, 0) * q(sp, 2));
        let sp = lag.space().clone();
        let c = cartan_coefficients(&lag).unwrap();
        assert_eq!(c.l1[0][0], -q(&sp, 1));
        assert_eq!(c.l0[0], Expr::int(2) * q(&sp, 2));
        assert_eq!(projectability_level(&lag, &c), Some(1));
        let chain = constraint_algorithm(&lag, &c, 6).unwrap();
        let g = chain.generations();
        assert_eq!(g, vec![vec![Expr::int(2) * q(&sp, 2)], vec![Expr::int(2) * q(&sp, 3)]]);
        assert_eq!(chain.status, ChainStatus::TerminatedWithResidual);
        assert!(chain.tangency_residuals().iter().all(|r| r.expr.has_unknowns()));
        let theta = poincare_cartan(&lag, &c);
        let expect = JetForm::basis(Symbol::jet(sp.label(0), MultiIndex::from_slice(&[0])))
            .scale(&-q(&sp, 1))
            .add(&JetForm::basis(Symbol::jet(sp.label(0), MultiIndex::from_slice(&[1]))).scale(&q(&sp, 0)))
            .add(&JetForm::volume(1).scale(&q(&sp, 1).powi(2)));
        assert!(theta.equals_with(&expect, &Simplifier::default()));
    }

    #[test]
    fn both_routes_to_l0_agree_on_mixed_derivative() {
        let sp = JetSpace::new(2, 1, 2);
        let lag = FieldLagrangian::new(sp.clone(), Expr::rational(1, 2) * sp.u(0, &[1, 1]).powi(2)).unwrap();
        let c = cartan_coefficients(&lag).unwrap();
        assert_eq!(c.l0[0], sp.u(0, &[2, 2]));
        assert_eq!(euler_lagrange_expanded(&lag).unwrap()[0], sp.u(0, &[2, 2]));
    }

    #[test]
    fn holonomic_prolongation_of_residual() {
        let sp = JetSpace::new(2, 1, 2);
        let l = sp.u(0, &[2, 0]).powi(2) * sp.u(0, &[0, 1]) + sp.u(0, &[0, 0]) * sp.u(0, &[1, 1]);
        let lag = FieldLagrangian::new(sp.clone(), l).unwrap();
        let c = cartan_coefficients(&lag).unwrap();
        let r = el_residual(&lag, &c).unwrap();
        let mut b = HashMap::new();
        for s in r[0].free_coordinates().into_iter().filter(|s| s.is_unknown()) {
            if let Symbol::Unknown { label, index, dir } = s {
                b.insert(s.clone(), Expr::sym(Symbol::jet(label, index.add_unit(dir as usize))));
            }
        }
        assert!(crate::expr::is_zero(&(substitute_raw(&r[0], &b).unwrap() - &c.l0[0])));
    }

    #[test]
    fn rejects_foreign_or_high_order_coordinates() {
        let sp = JetSpace::new(2, 1, 2);
        let e = sp.u(0, &[3, 0]);
        assert!(matches!(FieldLagrangian::new(sp.clone(), e), Err(Error::OrderViolation { .. })));
        let e = Expr::sym(Symbol::aux("z"));
        assert!(matches!(FieldLagrangian::new(sp, e), Err(Error::UnknownCoordinate(_))));
    }

    #[test]
    fn lower_order_comparison() {
        let lag = mech(|sp| q(sp, 0) * q(sp, 2));
        let lower = mech(|sp| -q(sp, 1).powi(2));
        let r = compare_with_lower_order(&lag, &lower).unwrap();
        assert!(!r.forms_equal && !r.lagrangians_equal);
        let r = compare_with_lower_order(&lower, &lower).unwrap();
        assert!(r.forms_equal && r.lagrangians_equal);
    }
}

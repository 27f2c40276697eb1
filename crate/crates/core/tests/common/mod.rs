#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jetvar::expr::Symbol;
use jetvar::variational::FieldLagrangian;
use jetvar::{Expr, JetSpace, MultiIndex};

/// How a random second-order Lagrangian on `J²π` (m = 2, n = 1) is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Sparse polynomial of degree at most 3 in all coordinates.
    Generic,
    /// First-order polynomial plus a total divergence `D_1 f + D_2 g` with
    /// `f` free of `u_2` and `g` free of `u_1`, which projects onto `J¹π`.
    Divergence,
    /// Affine in the second derivatives with first-order coefficients.
    Affine,
}

pub const FAMILIES: [Family; 3] = [Family::Generic, Family::Divergence, Family::Affine];

pub fn field_space() -> JetSpace {
    JetSpace::new(2, 1, 2)
}

fn coords(sp: &JetSpace, max_order: usize) -> Vec<Symbol> {
    let mut v = vec![Symbol::base(0), Symbol::base(1)];
    for r in 0..=max_order {
        v.extend(sp.fiber_coords(r));
    }
    v
}

/// Sum of `terms` random monomials of degree `1..=degree` with small
/// rational coefficients.
pub fn random_poly(rng: &mut impl Rng, vars: &[Symbol], terms: usize, degree: usize) -> Expr {
    Expr::add_all((0..terms).map(|_| {
        let d = rng.gen_range(1..=degree);
        let c = Expr::rational(rng.gen_range(-5..=5), rng.gen_range(1..=3));
        Expr::mul_all(std::iter::once(c).chain((0..d).map(|_| Expr::sym(vars[rng.gen_range(0..vars.len())].clone()))))
    }))
}

pub fn random_field_lagrangian(family: Family, seed: u64) -> FieldLagrangian {
    let sp = field_space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j1 = coords(&sp, 1);
    let l = match family {
        Family::Generic => {
            let terms = rng.gen_range(2..=5);
            random_poly(&mut rng, &coords(&sp, 2), terms, 3)
        }
        Family::Divergence => {
            let p = random_poly(&mut rng, &j1, 3, 3);
            let without = |i: usize| -> Vec<Symbol> {
                let drop = sp.coord_symbol(0, MultiIndex::unit(2, i));
                j1.iter().filter(|s| **s != drop).cloned().collect()
            };
            let f = random_poly(&mut rng, &without(1), 2, 2);
            let g = random_poly(&mut rng, &without(0), 2, 2);
            p + sp.total_derivative(&f, 0).unwrap() + sp.total_derivative(&g, 1).unwrap()
        }
        Family::Affine => {
            let mut t = vec![random_poly(&mut rng, &j1, 3, 3)];
            for idx in MultiIndex::of_order(2, 2) {
                let a = random_poly(&mut rng, &j1, 2, 1) + Expr::int(rng.gen_range(-2..=2));
                t.push(a * sp.coord(0, idx));
            }
            Expr::add_all(t)
        }
    };
    FieldLagrangian::new(sp, l).unwrap()
}

/// Random order-`k` mechanical Lagrangian in one degree of freedom, of
/// degree at most 3.
pub fn random_mech_lagrangian(k: usize, seed: u64) -> Expr {
    let sp = JetSpace::new(1, 1, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars = vec![Symbol::base(0)];
    for r in 0..=k {
        vars.extend(sp.fiber_coords(r));
    }
    let terms = rng.gen_range(2..=4);
    random_poly(&mut rng, &vars, terms, 3)
}

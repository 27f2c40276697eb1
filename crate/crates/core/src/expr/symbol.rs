use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::{mix, Expr};
use crate::jet::MultiIndex;

/// Label of a fiber coordinate. Jet-space code treats labels as opaque; the
/// metric variant exists so gravity coordinates print as `g01_[..]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FiberLabel {
    /// Generic component `u<α+1>` (0-based payload).
    Component(u16),
    /// Symmetric metric component `g_{μν}` with `μ <= ν`.
    Metric(u8, u8),
}

impl FiberLabel {
    pub fn metric(mu: usize, nu: usize) -> Self {
        let (a, b) = if mu <= nu { (mu, nu) } else { (nu, mu) };
        FiberLabel::Metric(a as u8, b as u8)
    }

    fn stable_hash(&self) -> u64 {
        match *self {
            FiberLabel::Component(a) => mix(0x11, a as u64),
            FiberLabel::Metric(a, b) => mix(mix(0x12, a as u64), b as u64),
        }
    }
}

/// A named auxiliary symbol. With a definition it is an abbreviation: it
/// differentiates and evaluates through the defining expression.
#[derive(Debug)]
pub struct AuxSymbol {
    pub name: String,
    pub definition: Option<Expr>,
}

/// Atomic symbol of an expression.
#[derive(Clone, Debug)]
pub enum Symbol {
    /// Base coordinate `x^i` (0-based direction).
    Base(u8),
    /// Fiber jet coordinate `u^α_I`.
    Jet {
        label: FiberLabel,
        index: MultiIndex,
    },
    /// Unknown coefficient `F^α_{J,i}` of a holonomic multivector field.
    Unknown {
        label: FiberLabel,
        index: MultiIndex,
        dir: u8,
    },
    Aux(Arc<AuxSymbol>),
}

impl Symbol {
    pub fn base(i: usize) -> Self {
        Symbol::Base(i as u8)
    }

    pub fn jet(label: FiberLabel, index: MultiIndex) -> Self {
        Symbol::Jet { label, index }
    }

    pub fn unknown(label: FiberLabel, index: MultiIndex, dir: usize) -> Self {
        Symbol::Unknown { label, index, dir: dir as u8 }
    }

    /// Free auxiliary symbol (no definition).
    pub fn aux(name: &str) -> Self {
        Symbol::Aux(Arc::new(AuxSymbol { name: name.to_string(), definition: None }))
    }

    /// Auxiliary symbol standing for `definition`.
    pub fn defined(name: &str, definition: Expr) -> Self {
        Symbol::Aux(Arc::new(AuxSymbol { name: name.to_string(), definition: Some(definition) }))
    }

    pub fn definition(&self) -> Option<&Expr> {
        match self {
            Symbol::Aux(a) => a.definition.as_ref(),
            _ => None,
        }
    }

    /// Jet order `|I|` of a fiber coordinate.
    pub fn jet_order(&self) -> Option<usize> {
        match self {
            Symbol::Jet { index, .. } => Some(index.order()),
            _ => None,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Symbol::Unknown { .. })
    }

    fn rank(&self) -> u8 {
        match self {
            Symbol::Base(_) => 0,
            Symbol::Jet { .. } => 1,
            Symbol::Unknown { .. } => 2,
            Symbol::Aux(_) => 3,
        }
    }

    pub(crate) fn stable_hash(&self) -> u64 {
        match self {
            Symbol::Base(i) => mix(0x21, *i as u64),
            Symbol::Jet { label, index } => mix(mix(0x22, label.stable_hash()), index.stable_hash()),
            Symbol::Unknown { label, index, dir } => {
                mix(mix(mix(0x23, label.stable_hash()), index.stable_hash()), *dir as u64)
            }
            Symbol::Aux(a) => {
                let mut h = 0x24u64;
                for b in a.name.bytes() {
                    h = mix(h, b as u64);
                }
                if let Some(d) = &a.definition {
                    h = mix(h, d.stable_hash());
                }
                h
            }
        }
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Symbol::Base(a), Symbol::Base(b)) => a == b,
            (Symbol::Jet { label: l1, index: i1 }, Symbol::Jet { label: l2, index: i2 }) => l1 == l2 && i1 == i2,
            (Symbol::Unknown { label: l1, index: i1, dir: d1 }, Symbol::Unknown { label: l2, index: i2, dir: d2 }) => {
                l1 == l2 && i1 == i2 && d1 == d2
            }
            (Symbol::Aux(a), Symbol::Aux(b)) => {
                Arc::ptr_eq(a, b)
                    || (a.name == b.name
                        && match (&a.definition, &b.definition) {
                            (None, None) => true,
                            (Some(x), Some(y)) => x == y,
                            _ => false,
                        })
            }
            _ => false,
        }
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.stable_hash());
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Symbol::Base(a), Symbol::Base(b)) => a.cmp(b),
            (Symbol::Jet { label: l1, index: i1 }, Symbol::Jet { label: l2, index: i2 }) => {
                l1.cmp(l2).then_with(|| i1.cmp(i2))
            }
            (Symbol::Unknown { label: l1, index: i1, dir: d1 }, Symbol::Unknown { label: l2, index: i2, dir: d2 }) => {
                d1.cmp(d2).then_with(|| l1.cmp(l2)).then_with(|| i1.cmp(i2))
            }
            (Symbol::Aux(a), Symbol::Aux(b)) => {
                a.name.cmp(&b.name).then_with(|| match (&a.definition, &b.definition) {
                    (None, None) => Ordering::Equal,
                    (None, Some(_)) => Ordering::Less,
                    (Some(_), None) => Ordering::Greater,
                    (Some(x), Some(y)) => x.cmp(y),
                })
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn write_label(f: &mut fmt::Formatter<'_>, label: &FiberLabel, index: &MultiIndex) -> fmt::Result {
    match label {
        FiberLabel::Component(a) => {
            if index.dim() == 1 {
                write!(f, "q{}_{}", a + 1, index.get(0))
            } else {
                write!(f, "u{}_{}", a + 1, index)
            }
        }
        FiberLabel::Metric(m, n) => {
            if index.order() == 0 {
                write!(f, "g{}{}", m, n)
            } else {
                write!(f, "g{}{}_{}", m, n, index)
            }
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Base(i) => write!(f, "x{}", i + 1),
            Symbol::Jet { label, index } => write_label(f, label, index),
            Symbol::Unknown { label, index, dir } => {
                write!(f, "F{}_", dir + 1)?;
                write_label(f, label, index)
            }
            Symbol::Aux(a) => f.write_str(&a.name),
        }
    }
}

//! Fixture files from an independent oracle, and their comparison.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "generator": "...",
//!   "seed": 2024,
//!   "records": [
//!     { "quantity": "christoffel", "dimension": 2, "indices": [1, 1, 1],
//!       "point": { "g00": "1", "g11": "3", "g11_[0,1]": "1/2" },
//!       "value": "1/12", "encoding": "rational" }
//!   ]
//! }
//! ```
//!
//! Metric quantities use 0-based indices: `christoffel [r, m, n]` is
//! `Γ^r_{mn}`, `ricci [m, n]`, `scalar-curvature []`, `einstein-tensor
//! [a, b]` is `G^{ab}`, `hilbert-L []`. Point keys are coordinate names;
//! unlisted coordinates are 0. Mechanics records carry the DSL source in
//! `lagrangian` and an `expression` value: `mech-momenta [a, r]` is `L^r`
//! of component `a`, `mech-chain [g, j]` the `j`-th constraint of
//! generation `g` (1-based).

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::input::{parse_input, InputKind};
use super::parse::{parse_expr_in, resolve_identifier, Scope};
use crate::error::{Error, Result};
use crate::expr::{eval_numeric, Expr, Simplifier, Symbol, Q};
use crate::gravity::{relative_error, MetricJetContext};
use crate::mechanics::{constraint_chain_mech, momenta};
use crate::variational::DEFAULT_MAX_GENERATIONS;

pub const FIXTURE_SCHEMA_VERSION: u32 = 1;

/// Relative tolerance for `decimal` records.
pub const DECIMAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Christoffel,
    Ricci,
    ScalarCurvature,
    EinsteinTensor,
    #[serde(rename = "hilbert-L")]
    HilbertL,
    MechMomenta,
    MechChain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// Exact rational `p/q`.
    Rational,
    /// Decimal string, compared at [`DECIMAL_TOL`].
    Decimal,
    /// Expression text, compared symbolically.
    Expression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub quantity: Quantity,
    #[serde(default)]
    pub dimension: usize,
    #[serde(default)]
    pub indices: Vec<usize>,
    #[serde(default)]
    pub point: BTreeMap<String, String>,
    pub value: String,
    pub encoding: Encoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub schema_version: u32,
    pub generator: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub records: Vec<FixtureRecord>,
}

impl FixtureFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: FixtureFile = serde_json::from_str(text)?;
        if f.schema_version != FIXTURE_SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "fixture schema version {} is not supported (expected {FIXTURE_SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FixtureReport {
    pub records: usize,
    /// Largest relative error over decimal records.
    pub max_decimal_error: Option<f64>,
    pub failures: Vec<String>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn parse_q(s: &str) -> Result<Q> {
    Q::from_str(s.trim()).map_err(|_| Error::Input(format!("`{s}` is not a rational number")))
}

/// Compares every record against this engine.
pub fn check_fixtures(file: &FixtureFile) -> Result<FixtureReport> {
    let mut report = FixtureReport { records: file.records.len(), ..FixtureReport::default() };
    let mut contexts: HashMap<usize, MetricJetContext> = HashMap::new();
    for (k, rec) in file.records.iter().enumerate() {
        let label = format!("record {k} ({:?} {:?})", rec.quantity, rec.indices);
        match check_record(rec, &mut contexts) {
            Ok(Outcome::Exact(true)) => {}
            Ok(Outcome::Exact(false)) => report.failures.push(format!("{label}: value differs")),
            Ok(Outcome::Decimal(err)) => {
                report.max_decimal_error = Some(report.max_decimal_error.unwrap_or(0.0).max(err));
                if err.is_nan() || err > DECIMAL_TOL {
                    report.failures.push(format!("{label}: relative error {err:e}"));
                }
            }
            Err(e) => report.failures.push(format!("{label}: {e}")),
        }
    }
    Ok(report)
}

enum Outcome {
    Exact(bool),
    Decimal(f64),
}

fn check_record(rec: &FixtureRecord, contexts: &mut HashMap<usize, MetricJetContext>) -> Result<Outcome> {
    match rec.quantity {
        Quantity::MechMomenta | Quantity::MechChain => check_mechanics(rec),
        _ => {
            if let std::collections::hash_map::Entry::Vacant(e) = contexts.entry(rec.dimension) {
                e.insert(MetricJetContext::new(rec.dimension)?);
            }
            check_metric(rec, &contexts[&rec.dimension])
        }
    }
}

fn index(rec: &FixtureRecord, n: usize, d: usize) -> Result<&[usize]> {
    if rec.indices.len() != n || rec.indices.iter().any(|&i| i >= d) {
        return Err(Error::Input(format!("expected {n} indices below {d}, got {:?}", rec.indices)));
    }
    Ok(&rec.indices)
}

fn check_metric(rec: &FixtureRecord, ctx: &MetricJetContext) -> Result<Outcome> {
    let d = ctx.dim();
    let e = match rec.quantity {
        Quantity::Christoffel => {
            let i = index(rec, 3, d)?;
            ctx.christoffel(i[0], i[1], i[2])
        }
        Quantity::Ricci => {
            let i = index(rec, 2, d)?;
            ctx.ricci(i[0], i[1])
        }
        Quantity::ScalarCurvature => {
            index(rec, 0, d)?;
            ctx.scalar_curvature()
        }
        Quantity::EinsteinTensor => {
            let i = index(rec, 2, d)?;
            ctx.einstein_upper(i[0], i[1])
        }
        Quantity::HilbertL => {
            index(rec, 0, d)?;
            ctx.hilbert_lagrangian()?.lagrangian().clone()
        }
        Quantity::MechMomenta | Quantity::MechChain => unreachable!(),
    };
    let scope = Scope::for_space(ctx.space());
    let mut point: HashMap<Symbol, Q> = HashMap::new();
    for i in 0..d {
        point.insert(Symbol::base(i), Q::from_integer(0.into()));
    }
    for idx in crate::jet::MultiIndex::up_to(d, 0, ctx.space().order()) {
        for (a, b) in ctx.pairs() {
            point.insert(ctx.g_symbol(a, b, idx), Q::from_integer(0.into()));
        }
    }
    for (name, v) in &rec.point {
        point.insert(resolve_identifier(name, &scope)?, parse_q(v)?);
    }
    let value = eval_numeric(&e, &point)?;
    match rec.encoding {
        Encoding::Rational => Ok(Outcome::Exact(value.as_rational() == Some(&parse_q(&rec.value)?))),
        Encoding::Decimal => {
            let want: f64 =
                rec.value.trim().parse().map_err(|_| Error::Input(format!("`{}` is not a decimal", rec.value)))?;
            Ok(Outcome::Decimal(relative_error(value.to_f64(), want)))
        }
        Encoding::Expression => {
            let want = parse_expr_in(&rec.value, &scope)?;
            Ok(Outcome::Exact(value == eval_numeric(&want, &point)?))
        }
    }
}

fn check_mechanics(rec: &FixtureRecord) -> Result<Outcome> {
    let src = rec.lagrangian.as_deref().ok_or_else(|| Error::Input("mechanics records need `lagrangian`".into()))?;
    let input = parse_input(src)?;
    if input.kind != InputKind::Mechanics {
        return Err(Error::Input("mechanics records need a mechanics Lagrangian".into()));
    }
    if rec.encoding != Encoding::Expression {
        return Err(Error::Input("mechanics records are compared as expressions".into()));
    }
    let lag = input.mech_lagrangian()?;
    let mom = momenta(&lag)?;
    let got: Expr = match rec.quantity {
        Quantity::MechMomenta => {
            let [a, r] = rec.indices[..] else {
                return Err(Error::Input("mech-momenta takes [component, r]".into()));
            };
            mom.l
                .get(a)
                .and_then(|row| row.get(r))
                .cloned()
                .ok_or_else(|| Error::Input("momentum index out of range".into()))?
        }
        _ => {
            let [g, j] = rec.indices[..] else {
                return Err(Error::Input("mech-chain takes [generation, position]".into()));
            };
            let chain =
                constraint_chain_mech(&lag, &mom, input.options.max_generations.unwrap_or(DEFAULT_MAX_GENERATIONS))?;
            let generation = chain.generation(g);
            generation.get(j).map(|c| c.expr.clone()).ok_or_else(|| Error::Input("chain index out of range".into()))?
        }
    };
    let scope = Scope {
        max_order: Some(4 * lag.order()),
        ..Scope::for_space(&crate::jet::JetSpace::new(1, lag.dof(), 4 * lag.order()))
    };
    let want = parse_expr_in(&rec.value, &scope)?;
    Ok(Outcome::Exact(Simplifier::default().is_zero(&(got - want)).is_zero))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(records: &str) -> FixtureFile {
        FixtureFile::from_json(&format!(r#"{{"schema_version":1,"generator":"hand","records":[{records}]}}"#)).unwrap()
    }

    #[test]
    fn christoffel_of_a_diagonal_metric() {
        // g = diag(1, f) with ∂_1 f = c: Γ^1_11 = c / (2f).
        let f = file(
            r#"{"quantity":"christoffel","dimension":2,"indices":[1,1,1],
                "point":{"g00":"1","g11":"3","g11_[0,1]":"1/2"},"value":"1/12","encoding":"rational"},
               {"quantity":"christoffel","dimension":2,"indices":[1,1,1],
                "point":{"g00":"1","g11":"3","g11_[0,1]":"1/2"},"value":"0.0833333333333333333333","encoding":"decimal"}"#,
        );
        let r = check_fixtures(&f).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
    }

    #[test]
    fn wrong_values_fail() {
        let f = file(
            r#"{"quantity":"christoffel","dimension":2,"indices":[1,1,1],
                "point":{"g00":"1","g11":"3","g11_[0,1]":"1/2"},"value":"1/6","encoding":"rational"}"#,
        );
        assert_eq!(check_fixtures(&f).unwrap().failures.len(), 1);
    }

    #[test]
    fn mechanics_momenta() {
        let src = "lagrangian { kind: mechanics, n: 1, k: 2 } L = q1_0*q1_2";
        let rec = |r: usize, v: &str| {
            format!(
                r#"{{"quantity":"mech-momenta","indices":[0,{r}],"value":"{v}","encoding":"expression","lagrangian":"{src}"}}"#
            )
        };
        let f = file(&[rec(2, "q1_0"), rec(1, "-q1_1"), rec(0, "2*q1_2")].join(","));
        assert!(check_fixtures(&f).unwrap().passed());
    }

    #[test]
    fn rejects_other_versions() {
        assert!(FixtureFile::from_json(r#"{"schema_version":7,"generator":"x","records":[]}"#).is_err());
    }
}

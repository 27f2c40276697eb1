//! JSON report documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fixtures::FixtureReport;
use super::input::{InputOptions, LagrangianInput};
use crate::expr::Expr;
use crate::gravity::GravityReport;
use crate::mechanics::{GenerationCount, Momenta};
use crate::variational::{CartanCoefficients, ChainStatus, ConstraintChain, EquationSource, FDetermination};

/// Bumped on any incompatible change of the document layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Expressions whose written-out tree exceeds this many nodes are reported
/// by size only.
pub const PRINT_LIMIT: usize = 20_000;

/// Text of `e`, or a size placeholder when it is too large to print.
pub fn expr_text(e: &Expr) -> String {
    if e.tree_size(PRINT_LIMIT) >= PRINT_LIMIT {
        format!("<expression with {} shared nodes, too large to print>", e.dag_size())
    } else {
        e.to_string()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Default for Tool {
    fn default() -> Self {
        Tool { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

/// The parsed input, written back in canonical form.
#[derive(Clone, Debug, Serialize)]
pub struct InputEcho {
    pub kind: &'static str,
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub order: usize,
    pub lagrangian: Option<String>,
    pub options: InputOptions,
    pub source: String,
}

impl From<&LagrangianInput> for InputEcho {
    fn from(s: &LagrangianInput) -> Self {
        InputEcho {
            kind: s.kind.name(),
            base_dim: s.base_dim,
            fiber_dim: s.fiber_dim,
            order: s.order,
            lagrangian: s.lagrangian.as_ref().map(expr_text),
            options: s.options.clone(),
            source: s.to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectabilityReport {
    /// Minimal `s` with the coefficients projecting onto `J^s`.
    pub level: Option<usize>,
    /// `level` as text, `none` when it does not project.
    pub label: String,
    /// Mechanics only: `L` does not depend on its top-order coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_order: Option<bool>,
}

impl ProjectabilityReport {
    pub fn new(level: Option<usize>, lower_order: Option<bool>) -> Self {
        let label = level.map_or_else(|| "none".to_string(), |s| s.to_string());
        ProjectabilityReport { level, label, lower_order }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "theory", rename_all = "kebab-case")]
pub enum CoefficientsReport {
    /// `l2[a][i][j]`, `l1[a][i]`, `l0[a]`.
    Field { l2: Vec<Vec<Vec<String>>>, l1: Vec<Vec<String>>, l0: Vec<String> },
    /// `momenta[a][r]` is `L^r` of component `a`.
    Mechanics { momenta: Vec<Vec<String>> },
}

impl CoefficientsReport {
    pub fn field(c: &CartanCoefficients) -> Self {
        CoefficientsReport::Field {
            l2: c.l2.iter().map(|m| m.iter().map(|r| r.iter().map(expr_text).collect()).collect()).collect(),
            l1: c.l1.iter().map(|r| r.iter().map(expr_text).collect()).collect(),
            l0: c.l0.iter().map(expr_text).collect(),
        }
    }

    pub fn mechanics(m: &Momenta) -> Self {
        CoefficientsReport::Mechanics { momenta: m.l.iter().map(|r| r.iter().map(expr_text).collect()).collect() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstraintReport {
    pub index: usize,
    pub expr: String,
    pub generation: usize,
    pub parent: Option<usize>,
    pub direction: Option<usize>,
    pub component: usize,
    pub trivial: bool,
    pub derivation: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub expr: String,
    /// `EL` or `tangency`.
    pub source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterminationReport {
    pub unknowns: Vec<String>,
    pub rank: usize,
    pub solution: Option<BTreeMap<String, String>>,
}

impl From<&FDetermination> for DeterminationReport {
    fn from(d: &FDetermination) -> Self {
        DeterminationReport {
            unknowns: d.unknowns.iter().map(|s| s.to_string()).collect(),
            rank: d.rank,
            solution: d.solution.as_ref().map(|s| s.iter().map(|(k, v)| (k.to_string(), expr_text(v))).collect()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub status: ChainStatus,
    /// Constraint expressions by generation.
    pub generations: Vec<Vec<String>>,
    pub constraints: Vec<ConstraintReport>,
    pub residual_equations: Vec<ResidualReport>,
    pub determination: Option<DeterminationReport>,
    /// Mechanics only: the count predicted by the projectability level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation_count: Option<GenerationCount>,
}

impl ChainReport {
    pub fn new(chain: &ConstraintChain, generation_count: Option<GenerationCount>) -> Self {
        ChainReport {
            status: chain.status,
            generations: chain.generations().iter().map(|g| g.iter().map(expr_text).collect()).collect(),
            constraints: chain
                .constraints
                .iter()
                .enumerate()
                .map(|(index, c)| ConstraintReport {
                    index,
                    expr: expr_text(&c.expr),
                    generation: c.generation,
                    parent: c.parent,
                    direction: c.direction,
                    component: c.component,
                    trivial: c.trivial,
                    derivation: c.derivation(),
                })
                .collect(),
            residual_equations: chain
                .residual_equations
                .iter()
                .map(|r| match r.source {
                    EquationSource::EulerLagrange { component } => ResidualReport {
                        expr: expr_text(&r.expr),
                        source: "EL",
                        component: Some(component),
                        constraint: None,
                        direction: None,
                    },
                    EquationSource::Tangency { constraint, direction } => ResidualReport {
                        expr: expr_text(&r.expr),
                        source: "tangency",
                        component: None,
                        constraint: Some(constraint),
                        direction: Some(direction),
                    },
                })
                .collect(),
            determination: chain.determination.as_ref().map(DeterminationReport::from),
            generation_count,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verification {
    Gravity(GravityReport),
    Fixtures(FixtureReport),
}

impl Verification {
    pub fn passed(&self) -> bool {
        match self {
            Verification::Gravity(r) => r.passed(),
            Verification::Fixtures(r) => r.passed(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: Tool,
    pub command: String,
    pub input: Option<InputEcho>,
    pub projectability: Option<ProjectabilityReport>,
    pub coefficients: Option<CoefficientsReport>,
    pub chain: Option<ChainReport>,
    pub verification: Option<Verification>,
    /// Wall-clock seconds per phase; present only on request, since it
    /// breaks byte-identical reruns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

impl ReportDocument {
    pub fn new(command: &str, input: Option<&LagrangianInput>) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            tool: Tool::default(),
            command: command.to_string(),
            input: input.map(InputEcho::from),
            projectability: None,
            coefficients: None,
            chain: None,
            verification: None,
            timing: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verification.as_ref().is_none_or(Verification::passed)
    }

    /// 0 on success, 2 when a verification failed.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} :: {}", self.tool.name, self.tool.version, self.command);
        if let Some(i) = &self.input {
            let _ = write!(out, "input: {}", i.source);
        }
        if let Some(p) = &self.projectability {
            let _ = write!(out, "projectability: {}", p.label);
            if p.lower_order == Some(true) {
                out.push_str(" (L is of lower order)");
            }
            out.push('\n');
        }
        if let Some(c) = &self.coefficients {
            match c {
                CoefficientsReport::Field { l2, l1, l0 } => {
                    for (a, m) in l2.iter().enumerate() {
                        for (i, row) in m.iter().enumerate() {
                            for (j, e) in row.iter().enumerate().skip(i) {
                                let _ = writeln!(out, "L2[{}][{}][{}] = {e}", a + 1, i + 1, j + 1);
                            }
                        }
                    }
                    for (a, row) in l1.iter().enumerate() {
                        for (i, e) in row.iter().enumerate() {
                            let _ = writeln!(out, "L1[{}][{}] = {e}", a + 1, i + 1);
                        }
                    }
                    for (a, e) in l0.iter().enumerate() {
                        let _ = writeln!(out, "L0[{}] = {e}", a + 1);
                    }
                }
                CoefficientsReport::Mechanics { momenta } => {
                    for (a, row) in momenta.iter().enumerate() {
                        for (r, e) in row.iter().enumerate().rev() {
                            let _ = writeln!(out, "L{r}[{}] = {e}", a + 1);
                        }
                    }
                }
            }
        }
        if let Some(c) = &self.chain {
            let _ = writeln!(out, "chain: {}", c.status);
            for (g, exprs) in c.generations.iter().enumerate() {
                let _ = writeln!(out, "  generation {}:", g + 1);
                for e in exprs {
                    let _ = writeln!(out, "    {e}");
                }
            }
            if !c.residual_equations.is_empty() {
                let _ = writeln!(out, "  residual equations: {}", c.residual_equations.len());
                for r in c.residual_equations.iter().take(8) {
                    let _ = writeln!(out, "    [{}] {} = 0", r.source, r.expr);
                }
                if c.residual_equations.len() > 8 {
                    let _ = writeln!(out, "    ...");
                }
            }
            if let Some(d) = &c.determination {
                match &d.solution {
                    Some(sol) => {
                        for (k, v) in sol {
                            let _ = writeln!(out, "  {k} = {v}");
                        }
                    }
                    None => {
                        let _ = writeln!(out, "  F rank {} of {}", d.rank, d.unknowns.len());
                    }
                }
            }
            if let Some(n) = &c.generation_count {
                let _ = writeln!(out, "  generations: {} nonvanishing, {} predicted", n.actual, n.nominal);
            }
        }
        match &self.verification {
            Some(Verification::Gravity(r)) => {
                let _ = writeln!(
                    out,
                    "gravity d={} seed={} points={} fd-points={}: generations {:?}, {}",
                    r.dim, r.seed, r.points, r.fd_points, r.generation_sizes, r.status
                );
                for c in &r.checks {
                    let err = c.max_error.map(|e| format!(" max error {e:.3e}")).unwrap_or_default();
                    let _ = writeln!(out, "  {} {}{err}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
                }
            }
            Some(Verification::Fixtures(r)) => {
                let _ = writeln!(out, "fixtures: {} of {} records agree", r.records - r.failures.len(), r.records);
                for f in &r.failures {
                    let _ = writeln!(out, "  FAIL {f}");
                }
            }
            None => {}
        }
        if let Some(t) = &self.timing {
            for (k, v) in t {
                let _ = writeln!(out, "time {k}: {v:.3}s");
            }
        }
        let _ = writeln!(out, "{}", if self.passed() { "ok" } else { "verification failed" });
        out
    }
}

//! Library entry point behind the command-line subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use super::fixtures::{check_fixtures, FixtureFile};
use super::input::{InputKind, LagrangianInput};
use super::report::{ChainReport, CoefficientsReport, ProjectabilityReport, ReportDocument, Verification};
use crate::error::{Error, Result};
use crate::expr::{ExpansionPolicy, Simplifier};
use crate::gravity::{verify_gravity, GravityOptions, MetricJetContext};
use crate::mechanics::{constraint_chain_mech, generation_count, momenta, projectability_level_mech};
use crate::variational::{cartan_coefficients, constraint_algorithm, projectability_level, DEFAULT_MAX_GENERATIONS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Cartan coefficients and projectability.
    Analyze,
    /// Coefficients, projectability and the constraint chain.
    Constraints,
    /// Gravity identity and finite-difference checks.
    GravityVerify,
    /// Comparison against an oracle fixture file.
    FixturesCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Constraints => "constraints",
            Command::GravityVerify => "gravity-verify",
            Command::FixturesCheck => "fixtures-check",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "analyze" => Command::Analyze,
            "constraints" => Command::Constraints,
            "gravity-verify" => Command::GravityVerify,
            "fixtures-check" => Command::FixturesCheck,
            other => return Err(Error::Input(format!("unknown command `{other}`"))),
        })
    }
}

/// Flags that override the options of the input file.
#[derive(Clone, Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub max_generations: Option<usize>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub fixtures: Option<PathBuf>,
    pub timing: bool,
}

struct Clock {
    on: bool,
    start: Instant,
    phases: BTreeMap<String, f64>,
}

impl Clock {
    fn new(on: bool) -> Self {
        Clock { on, start: Instant::now(), phases: BTreeMap::new() }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.phases.insert(name.to_string(), (now - self.start).as_secs_f64());
        self.start = now;
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.on.then_some(self.phases)
    }
}

pub fn run(command: Command, input: Option<&LagrangianInput>, opts: &RunOptions) -> Result<ReportDocument> {
    let mut doc = ReportDocument::new(command.name(), input);
    let mut clock = Clock::new(opts.timing);
    let max_generations =
        opts.max_generations.or(input.and_then(|s| s.options.max_generations)).unwrap_or(DEFAULT_MAX_GENERATIONS);
    match command {
        Command::Analyze | Command::Constraints => {
            let input = input.ok_or_else(|| Error::Input(format!("`{}` needs an input file", command.name())))?;
            let chain = command == Command::Constraints;
            match input.kind {
                InputKind::Field => {
                    let lag = input.field_lagrangian()?;
                    let c = cartan_coefficients(&lag)?;
                    clock.lap("coefficients");
                    doc.projectability = Some(ProjectabilityReport::new(projectability_level(&lag, &c), None));
                    clock.lap("projectability");
                    doc.coefficients = Some(CoefficientsReport::field(&c));
                    if chain {
                        doc.chain = Some(ChainReport::new(&constraint_algorithm(&lag, &c, max_generations)?, None));
                        clock.lap("chain");
                    }
                }
                InputKind::Mechanics => {
                    let lag = input.mech_lagrangian()?;
                    let mom = momenta(&lag)?;
                    clock.lap("coefficients");
                    let p = projectability_level_mech(&lag, &mom);
                    doc.projectability = Some(ProjectabilityReport::new(p.level, Some(p.lower_order)));
                    clock.lap("projectability");
                    doc.coefficients = Some(CoefficientsReport::mechanics(&mom));
                    if chain {
                        let ch = constraint_chain_mech(&lag, &mom, max_generations)?;
                        doc.chain = Some(ChainReport::new(&ch, generation_count(&lag, p.level, &ch)));
                        clock.lap("chain");
                    }
                }
                InputKind::Hilbert => {
                    let ctx = MetricJetContext::new(opts.dim.unwrap_or(input.base_dim))?;
                    let lag = ctx.hilbert_lagrangian()?.with_simplifier(Simplifier::new(ExpansionPolicy::NoExpand));
                    let c = cartan_coefficients(&lag)?;
                    clock.lap("coefficients");
                    doc.projectability = Some(ProjectabilityReport::new(projectability_level(&lag, &c), None));
                    clock.lap("projectability");
                    doc.coefficients = Some(CoefficientsReport::field(&c));
                    if chain {
                        doc.chain = Some(ChainReport::new(&constraint_algorithm(&lag, &c, max_generations)?, None));
                        clock.lap("chain");
                    }
                }
            }
        }
        Command::GravityVerify => {
            if let Some(s) = input.filter(|s| s.kind != InputKind::Hilbert) {
                return Err(Error::Input(format!(
                    "`gravity-verify` needs the Hilbert Lagrangian, not a {} one",
                    s.kind.name()
                )));
            }
            let defaults = GravityOptions::default();
            let from_input = input.map(|s| s.options.clone()).unwrap_or_default();
            let g = GravityOptions {
                dim: opts.dim.or(input.map(|s| s.base_dim)).unwrap_or(defaults.dim),
                points: opts.points.or(from_input.points).unwrap_or(defaults.points),
                seed: opts.seed.or(from_input.seed).unwrap_or(defaults.seed),
                max_generations,
                ..defaults
            };
            let report = verify_gravity(&g)?;
            clock.lap("gravity");
            doc.projectability = Some(ProjectabilityReport::new(report.projectability, None));
            doc.verification = Some(Verification::Gravity(report));
        }
        Command::FixturesCheck => {
            let path = opts
                .fixtures
                .as_ref()
                .ok_or_else(|| Error::Input("`fixtures-check` needs --fixtures <path>".into()))?;
            let file = FixtureFile::from_json(&std::fs::read_to_string(path)?)?;
            doc.verification = Some(Verification::Fixtures(check_fixtures(&file)?));
            clock.lap("fixtures");
        }
    }
    doc.timing = clock.finish();
    Ok(doc)
}

//! Text and JSON input/output: the expression and Lagrangian parsers,
//! report documents, oracle fixtures and the command runner.

pub mod fixtures;
pub mod input;
pub mod parse;
pub mod report;
pub mod run;

pub use fixtures::{check_fixtures, FixtureFile, FixtureRecord, FixtureReport};
pub use input::{parse_input, InputKind, InputOptions, LagrangianInput};
pub use parse::{parse_expr, parse_expr_in, resolve_identifier, Scope};
pub use report::{expr_text, ReportDocument, SCHEMA_VERSION};
pub use run::{run, Command, RunOptions};

//! Symbolic jet-bundle variational calculus.
//!
//! Builds Poincaré–Cartan forms of second-order field Lagrangians and of
//! higher-order mechanical Lagrangians, decides onto which lower jet bundle
//! they project, and runs the constraint algorithm for holonomic multivector
//! fields. The Hilbert Lagrangian of general relativity is built in.

pub mod error;
pub mod expr;
pub mod forms;
pub mod gravity;
pub mod io;
pub mod jet;
pub mod mechanics;
pub mod variational;

pub use error::{Error, Result};
pub use expr::{Expr, Symbol};
pub use jet::{JetSpace, MultiIndex};

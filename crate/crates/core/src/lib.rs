//! Core of the Resin language and its reactive circuit engine.

pub mod circuit;
pub mod foc;
pub mod grounder;
pub mod lang;
pub mod runtime;
pub mod semiring;

pub use circuit::ReactiveCircuit;
pub use grounder::{compile, CompiledTarget};
pub use lang::{check, Diagnostic};
pub use runtime::{Engine, EngineConfig, Mode};
pub use semiring::{Semiring, SemiringInstance};

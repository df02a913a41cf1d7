//! Static analysis workbench for RTL finite state machines.
//!
//! The crate is organized bottom-up:
//!
//! * [`frontend`] lexes, parses, lints and re-emits a synthesizable Verilog
//!   FSM subset.
//! * [`stg`] builds the state-transition graph and the bit/graph primitives.
//! * [`rules`] implements the security rules (fault-injection feasibility,
//!   Hamming distance, deadlock, trap loops, unreachable states, encoding
//!   uniqueness, default handling) and aggregates them into a [`rules::CheckReport`].
//! * [`inject`] and [`mitigate`] are the seeded vulnerability injector and the
//!   deterministic mitigator.
//! * [`llm`] renders prompt templates and runs multi-step pipelines against a
//!   chat-completion provider.
//! * [`corpus`] generates labeled corpora, sanitizes identifiers and checks the
//!   fidelity of externally produced designs.
//! * [`report`] aggregates experiment outcomes into rate tables.

pub mod corpus;
pub mod diag;
pub mod encoding;
pub mod error;
pub mod frontend;
pub mod inject;
pub mod llm;
pub mod mitigate;
pub mod report;
pub mod rules;
pub mod stg;

pub use diag::{Diagnostic, LineRange, Severity, Span};
pub use encoding::Encoding;
pub use error::{Error, Result};
pub use frontend::{FsmAst, SourceText};
pub use stg::Stg;

/// Version tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: u32 = 1;

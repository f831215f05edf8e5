//! SMT backend: rendering terms to SMT-LIB 2, the static preamble, trigger
//! selection, and the incremental solver session.

pub mod preamble;
pub mod render;
mod session;
pub mod triggers;

pub use preamble::{Background, PvmSymbols};
pub use render::Renderer;
pub use session::{CheckResult, Session, SessionStats, SolverConfig, SolverError};

//! A symbolic-execution verifier for a small permission-based intermediate
//! language with native support for iterated separating conjunctions
//! (quantified permissions).

pub mod ast;
pub mod smt;
pub mod term;
pub mod engine;
pub mod state;

//! Busy Beaver laboratory.
//!
//! Exact simulation of binary Turing machines and order-m oracle machines,
//! enumeration of their state spaces, non-halting deciders, a search engine
//! for busy beaver values with persistent campaigns, configuration-string
//! rewrite certificates, and an evaluator for max-min partial recursive
//! functions.

pub mod deciders;
pub mod dsl;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod machine;
pub mod oracle;
pub mod rewrite;
pub mod tape;

pub use error::ParseError;
pub use machine::{Action, Configuration, MachineTable, Move, RunOutcome, Symbol};
pub use tape::{BitString, Tape};

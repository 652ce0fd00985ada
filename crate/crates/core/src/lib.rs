//! Statistical model checking for networks of stochastic timed automata
//! with location-dependent clock rates.
//!
//! A model is parsed from text ([`dsl::parse_model`]), checked
//! ([`validate::validate_model`]), instantiated into a [`network::Network`],
//! simulated by the [`engine`], and queried by [`smc`]. Timing constraints
//! from [`monitors`] compile to observer automata that run alongside the
//! network, and are also checked directly on traces.

pub mod avmodel;
pub mod dsl;
pub mod engine;
pub mod expr;
pub mod model;
pub mod monitors;
pub mod network;
pub mod query;
pub mod smc;
pub mod validate;

pub use dsl::{parse_model, parse_queries, parse_query, parse_query_file, ParseError};
pub use expr::{Expr, Type, Value};
pub use model::Model;
pub use network::Network;
pub use validate::{validate_model, ValidationReport};

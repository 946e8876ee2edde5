#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod gateway;
pub mod preprocess;
pub mod retrieval;
pub mod stats;
pub mod validation;
pub mod prompt;
pub mod chain;
pub mod deploy;
pub mod eval;
pub mod cli;

//! Behavioral testing for machine translation.
//!
//! A test suite is a list of source sentences, each carrying one tagged
//! property value (a decimal number, an idiom). Every MT
//! output is judged pass or fail by a detector, and systems are compared
//! by macro pass rate with bootstrap confidence intervals.

pub mod cli;
pub mod config;
pub mod detection;
pub mod generation;
pub mod http;
pub mod jsonl;
pub mod metrics;
pub mod model;
pub mod runner;
pub mod text;

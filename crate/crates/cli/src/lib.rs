//! Command-line front end and Monte-Carlo harness for `specline`.

pub mod artifact;
pub mod commands;
pub mod matching;
pub mod montecarlo;

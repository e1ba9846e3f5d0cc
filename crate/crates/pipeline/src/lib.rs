//! Orchestration for the singing voice translation pipeline: stage
//! adapters run as subprocesses over interchange files, their outputs are
//! cached by content, and the deterministic core turns them into a
//! synthesizer project.

pub mod adapter;
pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod run;

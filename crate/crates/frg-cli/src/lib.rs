//! Command-line runner for the symbolic expansions and flow solvers in
//! `frg-core`.
//!
//! A run is described by a single TOML configuration, validated up front
//! against a per-command schema. Every run leaves a manifest next to its
//! data files that echoes the effective configuration, names the
//! termination cause, and digests each artifact, so a run directory is
//! self-describing even when a guard aborted the march. All numeric output
//! is formatted to full precision and produced without any ambient state;
//! identical configurations give byte-identical data files.

pub mod config;
pub mod expr;
pub mod run;

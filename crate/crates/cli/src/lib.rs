//! Scenario-driven front end for key-rate sweeps, tables and self-checks.

pub mod commands;
pub mod output;
pub mod scenario;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VIOLATIONS: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const IO: i32 = 3;
}

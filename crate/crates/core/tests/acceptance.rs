//! Runs the ten acceptance checks and prints one line per check.
//!
//! Set `MFQKD_ACCEPTANCE=quick` for the reduced profile.

use mfqkd::validation::{run_all, ValidationSettings};
use std::process::ExitCode;

fn main() -> ExitCode {
    let quick = std::env::var("MFQKD_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let settings = if quick { ValidationSettings::quick() } else { ValidationSettings::full() };
    println!("acceptance ({} profile)", if quick { "quick" } else { "full" });
    let outcomes = run_all(&settings, |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

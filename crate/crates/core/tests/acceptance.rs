//! Runs the fifteen acceptance criteria at full resolution and prints one
//! PASS/FAIL line per criterion.

use std::io::Write;

use lorentz_synth::suite::{run_criterion, SuiteLevel, CRITERIA};

// Written straight to stderr so the table shows up even under output capture.
fn emit(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for &(id, name, _) in CRITERIA.iter() {
        match run_criterion(id, SuiteLevel::Full, 0) {
            Ok(o) => {
                emit(&o.line());
                if !o.passed {
                    failed.push(format!("{id} {name}: {}", o.summary));
                } else if !o.within_budget() {
                    emit(&format!("     note: criterion {id} exceeded its {}s budget", o.budget_seconds));
                }
            }
            Err(e) => {
                emit(&format!("[FAIL] {id:>2} {name:<38} error: {e}"));
                failed.push(format!("{id} {name}: {e}"));
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

//! Acceptance suite: every criterion at its pinned desk-scale tolerance.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! one-line-per-criterion table (the same table `pilotwave verify all`
//! prints).

use pilotwave::cli::verify::{run_suite, Suite};

#[test]
fn acceptance_criteria() {
    let results = run_suite(Suite::All);
    assert!(!results.is_empty());
    let mut failures = Vec::new();
    for r in &results {
        println!(
            "{:<58} measured {:>13.6e}  bound {:>13.6e}  {}",
            r.name,
            r.measured,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        );
        if !r.pass {
            failures.push(r.name.clone());
        }
    }
    assert!(
        failures.is_empty(),
        "{} of {} criteria failed: {failures:?}",
        failures.len(),
        results.len()
    );
}

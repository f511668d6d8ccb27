//! Runs every acceptance criterion at its stated tolerance and prints one
//! line per criterion. The lines go straight to stderr so they appear even
//! when libtest captures output.

use shearmix::validate::{run_criterion, CRITERIA};
use std::io::Write;

const SEED: u64 = 20240607;

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let outcome = run_criterion(id, SEED);
        let _ = writeln!(std::io::stderr(), "{}", outcome.line());
        if !outcome.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;

use korteweg_harness::verify::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, _) in CRITERIA.iter().filter(|(id, _)| only.is_empty() || only.contains(id)) {
        let r = run_criterion(*id);
        println!("{}", r.line());
        if !r.passed() {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

//! Runs every verification check and prints one PASS/FAIL line per check.

use singular_core::verify::Check;

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    println!();
    for check in Check::ALL {
        match check.run() {
            Ok(outcome) => {
                println!("{}", outcome.line());
                for report in &outcome.reports {
                    println!("    {}", report.summary());
                }
                if !outcome.passed() {
                    failed.push(check.name());
                }
            }
            Err(e) => {
                println!("FAIL {check}: error: {e}");
                failed.push(check.name());
            }
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

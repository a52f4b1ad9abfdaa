//! Prints one PASS/FAIL line per acceptance criterion, then a summary.
//! Exits 0 once every criterion has been evaluated; the `report`
//! subcommand is the gate that exits nonzero on a failed criterion.

use kinsplit::harness::acceptance::{evaluate_all, format_line, AcceptanceOptions};

fn main() {
    let results = match evaluate_all(&AcceptanceOptions::default(), |r| println!("{}", format_line(r))) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance aborted: {e}");
            std::process::exit(1);
        }
    };
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
}

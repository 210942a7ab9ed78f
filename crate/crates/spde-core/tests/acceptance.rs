//! Acceptance suite: runs all ten criteria at their stated tolerances and
//! prints one pass/fail line per criterion. Exits nonzero if any fails.

use spde_core::harness::{run_criterion, CRITERIA};
use std::process::ExitCode;

fn main() -> ExitCode {
    let verbose = std::env::args().any(|a| a == "--verbose");
    let mut failed = 0;
    for (id, title) in CRITERIA {
        match run_criterion(id, None) {
            Ok(o) => {
                let tag = if o.pass { "PASS" } else { "FAIL" };
                println!("criterion {id:>2} {tag} {title} (seed {}, {:.1}s)", o.seed, o.wall_clock_s);
                for c in o.checks.iter().filter(|c| verbose || !c.pass) {
                    println!(
                        "    {} {}: theory {:.6e}, empirical {:.6e} ± {:.2e}",
                        if c.pass { "ok  " } else { "FAIL" },
                        c.name,
                        c.theoretical,
                        c.empirical,
                        c.standard_error
                    );
                }
                failed += usize::from(!o.pass);
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL {title}: error {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

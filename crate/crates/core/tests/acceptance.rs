//! One line per acceptance criterion; exits nonzero if any fails.

use colehopf::suite::{run_criterion, CRITERIA};
use std::time::Instant;

fn main() {
    // ACCEPTANCE_VERBOSE=1 prints every criterion's detail record
    let verbose = std::env::var_os("ACCEPTANCE_VERBOSE").is_some();
    let mut failed = 0;
    for id in CRITERIA {
        let start = Instant::now();
        let r = run_criterion(id);
        println!(
            "criterion {:>2} {:<28} {}  ({:.1}s)",
            r.id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !r.pass || verbose {
            failed += 1;
            println!("    {}", r.detail);
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Runs the built-in numerical self-checks and prints the report.

use vrmcmc::experiments::run_oracle_check;

fn main() -> vrmcmc::Result<()> {
    let report = run_oracle_check(0);
    println!("{report}");
    if !report.all_passed() {
        std::process::exit(1);
    }
    Ok(())
}

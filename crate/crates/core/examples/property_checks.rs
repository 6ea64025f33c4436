//! The randomized property suites behind `uql selftest`.
//!
//! ```text
//! cargo run --release --example property_checks [seed]
//! ```

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let checks = uql::selftest::run_all(seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().any(|c| !c.passed) {
        std::process::exit(2);
    }
}

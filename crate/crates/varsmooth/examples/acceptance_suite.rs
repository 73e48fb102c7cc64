//! Runs the acceptance checks one by one and prints their verdicts with timings.
//!
//! `cargo run --release --example acceptance_suite -- 4 5` runs a subset.

use std::time::Instant;

use varsmooth::suite;

fn main() -> varsmooth::Result<()> {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if ids.is_empty() { (1..=suite::CRITERIA).collect() } else { ids };
    for id in ids {
        let start = Instant::now();
        let rep = suite::run(id)?;
        println!("{}  ({:.1}s)", rep.line(), start.elapsed().as_secs_f64());
    }
    Ok(())
}

//! Histogram-valued regression: the closed-form Hellinger decoder against
//! plain kernel density decoding, scored under both losses.
//!
//!     cargo run --release --example histogram_hellinger -- [repetitions]

use surrloss::harness::{run_histogram_experiment, HistogramConfig};

fn main() -> surrloss::Result<()> {
    let repetitions = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = HistogramConfig { repetitions, ..Default::default() };
    println!("{:>5}  {:<20} {:<18} {:>8} {:>8}", "n", "method", "metric", "mean", "std");
    for r in run_histogram_experiment(&cfg)? {
        println!("{:>5}  {:<20} {:<18} {:>8.4} {:>8.4}", r.n, r.method, r.metric, r.mean, r.std);
    }
    Ok(())
}

//! Learning to rank items from user features, decoded with the greedy
//! feedback-arc-set ordering, against the best single training ranking.
//!
//!     cargo run --release --example ranking_fas -- [repetitions]

use surrloss::harness::{run_ranking_experiment, RankingConfig};

fn main() -> surrloss::Result<()> {
    let repetitions = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = RankingConfig { repetitions, ..Default::default() };
    println!("{:>5}  {:<20} {:>8} {:>8}", "n", "method", "mean", "std");
    for r in run_ranking_experiment(&cfg)? {
        println!("{:>5}  {:<20} {:>8.4} {:>8.4}", r.n, r.method, r.mean, r.std);
    }
    Ok(())
}

//! Robust regression of `sin(6 pi x)` under Gaussian noise and 10% gross
//! outliers: Cauchy-loss decoding against plain kernel ridge regression.
//!
//!     cargo run --release --example robust_regression -- [repetitions]

use surrloss::harness::{run_robust_experiment, RobustConfig};

fn main() -> surrloss::Result<()> {
    let repetitions = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let cfg = RobustConfig { repetitions, ..Default::default() };
    println!("{:>5}  {:<18} {:>8} {:>8} {:>8}", "n", "method", "mean", "std", "secs");
    for r in run_robust_experiment(&cfg)? {
        println!("{:>5}  {:<18} {:>8.4} {:>8.4} {:>8.2}", r.n, r.method, r.mean, r.std, r.wall_time_secs);
    }
    Ok(())
}

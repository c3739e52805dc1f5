//! Randomized numerical checks on small finite problems solved exactly:
//! Fisher consistency, the comparison inequality, the least-squares
//! equivalence and the learning-curve trend.

use surrloss::theory::{comparison_sweep, consistency_check, equivalence_sweep, fisher_sweep, SweepReport};

fn show(r: &SweepReport) {
    let status = if r.passed { "ok" } else { "FAILED" };
    println!("{:<24} {:>6} trials  {:>3} violations  worst {:.3e}  [{status}]", r.name, r.trials, r.violations, r.worst);
}

fn main() -> surrloss::Result<()> {
    for r in fisher_sweep(20, 1)? {
        show(&r);
    }
    show(&comparison_sweep(200, 2)?);
    show(&equivalence_sweep(20, 3)?);

    let c = consistency_check(10, 8)?;
    println!("\nexcess risk of the learned rule (median over seeds)");
    for (n, m) in c.sizes.iter().zip(&c.medians) {
        println!("  n = {n:>4}  {m:.4}");
    }
    println!("inversions: {}  trend holds: {}", c.inversions, c.holds);
    Ok(())
}

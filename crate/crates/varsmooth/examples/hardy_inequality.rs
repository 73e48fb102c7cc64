//! Both branches of the discrete Hardy inequality on a geometric sequence.

use varsmooth::norms::{hardy_check, HardyBranch};

fn main() -> varsmooth::Result<()> {
    let a: Vec<f64> = (0..50).map(|k| (-1.5 * k as f64).exp2() * (1.0 + 0.3 * (k as f64).sin())).collect();
    for branch in [HardyBranch::Tail, HardyBranch::Head] {
        for q in [1.0, 2.0, f64::INFINITY] {
            let h = hardy_check(&a, q, 1.0, 1.0, 2.0, branch)?;
            println!("{branch:?} q={q}: lhs {:.4} rhs {:.4} ratio {:.4} <= bound {:.4}: {}", h.lhs, h.rhs, h.ratio, h.bound, h.holds);
        }
    }
    Ok(())
}

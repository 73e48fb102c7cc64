//! Sandwich constants between the averaged difference, the modulus of smoothness and the best
//! polynomial approximation on dyadic cubes, for a small piecewise-smooth family.

use varsmooth::family::{family, FamilyKind};
use varsmooth::suite::whitney_constants;

fn main() -> varsmooth::Result<()> {
    let funcs = family(1, 30, 5, FamilyKind::PiecewiseSmooth);
    println!("l  r    C(omega)  C(E)");
    for l in 1..=3 {
        for r in [1.0, 2.0, f64::INFINITY] {
            let (w, e) = whitney_constants(&funcs, 7, 3, l, r)?;
            println!("{l}  {r:<4} {w:8.3}  {e:8.3}");
        }
    }
    Ok(())
}

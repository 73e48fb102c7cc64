//! B-spline bases: partition of unity, the quasi-interpolant projection and exact refinement.

use varsmooth::splines::{quasi_interpolant, refine, SplineFn};

fn main() -> varsmooth::Result<()> {
    let (degree, level) = (2, 3);
    let ones = SplineFn::from_fn(1, degree, level, |_| 1.0);
    let dev = (0..=100).map(|i| (ones.eval(&[i as f64 / 100.0]) - 1.0).abs()).fold(0.0, f64::max);
    println!("partition of unity deviation {dev:.2e}");

    let s = SplineFn::from_fn(1, degree, level, |m| (m[0] as f64 * 0.7).sin());
    let q = quasi_interpolant(&s.local_pieces(), level, degree + 1)?.spline;
    let proj = s.coeffs.iter().zip(&q.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("Q_k S - S coefficient gap {proj:.2e}");

    let fine = refine(&s, level + 2);
    for x in [0.1, 0.45, 0.9] {
        println!("x={x}: S = {:.12}, refined = {:.12}", s.eval(&[x]), fine.eval(&[x]));
    }
    Ok(())
}

//! Polynomial-reproducing averages, recovery as the scale shrinks and the weighted energy of an
//! extension into the slab above the box.

use varsmooth::family::{Piece, TestFunction};
use varsmooth::traceext::{recovery_error, sobolev_energy, sobolev_extend, steklov_average, AveragingOp};

fn main() -> varsmooth::Result<()> {
    let ao = AveragingOp::new(3)?;
    println!("weights mu = {:?}", ao.mu);
    let quad = varsmooth::gridfn::sample(|x| 1.0 - 2.0 * x[0] + 3.0 * x[0] * x[0], 1, 7)?;
    let avg = steklov_average(&quad, 0.1, &ao)?;
    let gap = quad.sub(&avg).values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("quadratic reproduced to {gap:.2e}");

    let f = TestFunction { dim: 1, pieces: vec![Piece::Kink { axis: 0, at: 0.5, slope: 1.0 }] };
    let g = f.sample(9)?;
    for j in 3..8 {
        let eps = (-(j as f64)).exp2();
        println!("eps = 2^-{j}: recovery error {:.3e}", recovery_error(&g, eps, &ao)?);
    }

    let smooth = TestFunction { dim: 1, pieces: vec![Piece::Wave { freq: vec![1.0], amp: 1.0, phase: 0.2 }] }.sample(7)?;
    let ext = sobolev_extend(&smooth, &AveragingOp::new(2)?, 6, 8)?;
    for alpha in [0.0, 0.5] {
        println!("energy with |y|^{alpha}: {:.4}", sobolev_energy(&ext, 2, 2.0, |_, y| y.abs().powf(alpha))?);
    }
    Ok(())
}

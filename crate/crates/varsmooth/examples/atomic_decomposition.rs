//! Decompose a kinked function into spline atoms, check the hypotheses and watch the partial
//! sums converge. Writes the series as VSSS1 when given a path.

use varsmooth::atomic::{decompose, decompose_report, format_series, reconstruct};
use varsmooth::family::{Piece, TestFunction};
use varsmooth::gridfn::lr_from_values;
use varsmooth::norms::{n_functionals, BesovParams};
use varsmooth::weights::constant_smoothness;

fn main() -> varsmooth::Result<()> {
    let f = TestFunction {
        dim: 1,
        pieces: vec![Piece::Kink { axis: 0, at: 0.37, slope: 1.0 }, Piece::Wave { freq: vec![1.0], amp: 0.5, phase: 0.0 }],
    };
    let g = f.sample(8)?;
    let bp = BesovParams::new(2, 2.0, 2.0, 2.0)?;
    let ms = constant_smoothness(1, bp.p, 1.0, 6)?;
    let s = decompose(&g, &ms, &bp)?;
    let rep = decompose_report(&g, &ms, &bp, &s)?;
    println!("hypotheses ok: {}, round trip error {:.2e}", rep.hypotheses_ok, rep.reconstruction_error);
    for j in 0..=s.max_level() {
        let rec = reconstruct(&s, j, 8)?;
        let err = lr_from_values(g.sub(&rec).values().iter().copied(), g.cell_volume(), 2.0);
        println!("partial sum to level {j}: L2 error {err:.3e}");
    }
    let nf = n_functionals(&g, &ms, &bp)?;
    println!("N1 {:.4} N2 {:.4} N3 {:.4} N4 {:.4}", nf.n1.total, nf.n2.total, nf.n3.total, nf.n4.total);
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, format_series(&s))?;
        println!("series written to {path}");
    }
    Ok(())
}

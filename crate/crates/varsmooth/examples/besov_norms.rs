//! Norm breakdowns of one function for every variant, printed as CSV.
//!
//! `cargo run --release --example besov_norms`

use varsmooth::family::{Piece, TestFunction};
use varsmooth::norms::{breakdowns_csv, norm_by_variant, BesovParams, Variant};
use varsmooth::weights::constant_smoothness;

fn main() -> varsmooth::Result<()> {
    let f = TestFunction { dim: 1, pieces: vec![Piece::Jump { axis: 0, at: 0.3, height: 1.0 }] };
    let g = f.sample(7)?;
    let bp = BesovParams::new(2, 2.0, 2.0, 2.0)?;
    // a jump lies in B^s_{2,2} only for s < 1/2
    for s in [0.25, 0.5, 1.0] {
        let ms = constant_smoothness(1, bp.p, s, 6)?;
        let b = norm_by_variant(&g, &ms, &bp, Variant::Seq)?;
        println!("s = {s}: seq norm {:.4}, last term {:.4}", b.total, b.terms.last().map_or(0.0, |t| t.1));
    }
    let ms = constant_smoothness(1, bp.p, 0.25, 6)?;
    let all = [Variant::Bbar, Variant::Btilde, Variant::Seq, Variant::V2, Variant::V3, Variant::V4]
        .iter()
        .map(|&v| norm_by_variant(&g, &ms, &bp, v))
        .collect::<varsmooth::Result<Vec<_>>>()?;
    print!("{}", breakdowns_csv(&all));
    Ok(())
}

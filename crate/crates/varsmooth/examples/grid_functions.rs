//! Sample a piecewise-smooth function on a dyadic grid and write it as VSGF1.
//!
//! `cargo run --example grid_functions -- out.vsgf 8`

use varsmooth::family::{Piece, TestFunction};
use varsmooth::gridfn::{lr_norm, parse_gridfn, format_gridfn};
use varsmooth::geometry::AxisBox;

fn main() -> varsmooth::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "kink.vsgf".into());
    let level: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);

    let f = TestFunction {
        dim: 1,
        pieces: vec![
            Piece::Wave { freq: vec![1.5], amp: 0.7, phase: 0.3 },
            Piece::Kink { axis: 0, at: 0.4, slope: 2.0 },
        ],
    };
    let g = f.sample(level)?;
    let text = format_gridfn(&g);
    assert_eq!(parse_gridfn(&text)?, g);
    std::fs::write(&path, &text)?;

    let left = AxisBox::new(vec![0.0], vec![0.4]);
    println!("wrote {} cells to {path}", g.len());
    println!("L2 norm on [0,1]   {:.6}", lr_norm(&g, &AxisBox::unit(1), 2.0).value);
    println!("L2 norm on [0,0.4] {:.6}", lr_norm(&g, &left, 2.0).value);
    Ok(())
}

//! Pairwise ratios of the cube-based norm variants over a seeded family.

use varsmooth::family::{family, FamilyKind};
use varsmooth::norms::{BesovParams, Variant};
use varsmooth::suite::equivalence_spreads;
use varsmooth::weights::{example_weight, generate_from_weight, ShellDensity};

fn main() -> varsmooth::Result<()> {
    let bp = BesovParams::new(2, 2.0, 2.0, 1.0)?;
    let funcs = family(1, 20, 7, FamilyKind::Smooth);
    let gh = generate_from_weight(&ShellDensity::ProductPower(vec![1.0, 0.0]), 1, 1, bp.p, 6)?;
    let ms = example_weight(&gh, 1.5)?;
    for (a, b, spread) in equivalence_spreads(&funcs, 7, &ms, &bp, &[Variant::Seq, Variant::V2, Variant::V3, Variant::V4])? {
        println!("{:>3} / {:<3} max/min {spread:.4}", a.tag(), b.tag());
    }
    Ok(())
}

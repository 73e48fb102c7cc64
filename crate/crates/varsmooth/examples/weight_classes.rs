//! Weight sequences generated from power weights: shell exponents and class fits.

use varsmooth::weights::{
    check_x_class, check_y_class, estimate_deltas, example_weight, generate_from_weight, singular_product_density, ShellDensity,
};

fn main() -> varsmooth::Result<()> {
    let p = 2.0;
    for beta in [0.5, 1.0, 2.0] {
        let gh = generate_from_weight(&ShellDensity::ProductPower(vec![beta, 0.0]), 1, 1, p, 7)?;
        let d = estimate_deltas(&gh, 1)?;
        println!("gamma^p = x^{beta}: delta1 {:.3} delta2 {:.3} delta3 {:.3}", d.delta1, d.delta2, d.delta3);
    }
    let gh = generate_from_weight(&singular_product_density(1, 0.1), 1, 1, p, 6)?;
    let t = example_weight(&gh, 1.0)?;
    let x = check_x_class(&t, f64::INFINITY, p)?;
    let y = check_y_class(&t)?;
    println!("singular weight: X-class alpha2 {:.3} (passes {}), Y-class alpha2 {:.3}", x.alpha2, x.passes(), y.alpha2);
    Ok(())
}

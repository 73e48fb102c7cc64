//! Trace of a 2D spline series onto the line `x2 = 0`, its extension back and the mass ratios.

use varsmooth::atomic::SplineSeries;
use varsmooth::splines::SplineFn;
use varsmooth::traceext::{besov_extend, besov_trace, extension_mass, trace_mass, PlaneSpec};
use varsmooth::weights::constant_smoothness;

fn main() -> varsmooth::Result<()> {
    let levels = (0..=3).map(|k| SplineFn::from_fn(2, 2, k, |m| ((m[0] * 3 + m[1]) as f64 * 0.37).cos() / (k + 1) as f64)).collect();
    let s = SplineSeries::new(levels)?;
    let ps = PlaneSpec::new(2, 1)?;
    let ms = constant_smoothness(2, 2.0, 1.0, 3)?;
    let tr = besov_trace(&s, &ps)?;
    let back = besov_trace(&besov_extend(&tr, &ps)?, &ps)?;
    let gap = tr.levels.iter().zip(&back.levels).flat_map(|(a, b)| a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
    println!("Tr(Ext) identity gap {gap:.2e}");
    let t = trace_mass(&s, &ms, &ps, 2.0)?;
    let e = extension_mass(&tr, &ms, &ps, 2.0)?;
    println!("trace mass {:.4} of {:.4} (ratio {:.4})", t.plane, t.full, t.ratio);
    println!("extension mass {:.4} from {:.4} (ratio {:.4})", e.full, e.plane, e.ratio);
    Ok(())
}

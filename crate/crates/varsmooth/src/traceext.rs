//! Traces on the coordinate plane `x'' = 0`, the spline extension back, and the
//! averaging operator `E_eps` with the Sobolev-type extension built from it.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::atomic::{series_mass, SplineSeries};
use crate::binomial;
use crate::error::{Error, Result};
use crate::geometry::unflatten;
use crate::gridfn::{lr_from_values, GridFunction, SlabFunction};
use crate::splines::{bspline_eval, SplineFn};
use crate::weights::MultiSeq;

/// `R^n = R^{n'} x R^{n''}`, the first `n'` coordinates kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaneSpec {
    pub n: usize,
    pub n_prime: usize,
}

impl PlaneSpec {
    pub fn new(n: usize, n_prime: usize) -> Result<Self> {
        if n_prime == 0 || n_prime >= n {
            return Err(Error::invalid(format!("need 1 <= n' < n, got n'={n_prime}, n={n}")));
        }
        Ok(Self { n, n_prime })
    }

    pub fn codim(&self) -> usize {
        self.n - self.n_prime
    }
}

/// Normal indices `m''` with `prod_i N(-m''_i) != 0`, and that product.
fn plane_weights(degree: usize, codim: usize) -> Vec<(Vec<i64>, f64)> {
    let axis: Vec<(i64, f64)> = (-(degree as i64)..=0)
        .map(|m| (m, bspline_eval(degree, -(m as f64))))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    let mut out = Vec::new();
    for code in 0..axis.len().pow(codim as u32) {
        let pick = unflatten(code, axis.len() as i64, codim);
        let m: Vec<i64> = pick.iter().map(|&i| axis[i as usize].0).collect();
        let w: f64 = pick.iter().map(|&i| axis[i as usize].1).product();
        out.push((m, w));
    }
    out
}

fn check_series(s: &SplineSeries, dim: usize) -> Result<()> {
    if s.dim != dim {
        return Err(Error::invalid(format!("series has n={}, plane expects {dim}", s.dim)));
    }
    Ok(())
}

/// `alpha'_{k,m'} = sum_{m''} alpha_{k,(m',m'')} prod_i N(-m''_i)`.
pub fn besov_trace(s: &SplineSeries, ps: &PlaneSpec) -> Result<SplineSeries> {
    check_series(s, ps.n)?;
    let pw = plane_weights(s.degree, ps.codim());
    let levels = s
        .levels
        .iter()
        .map(|lv| {
            SplineFn::from_fn(ps.n_prime, s.degree, lv.level, |mp| {
                pw.iter()
                    .map(|(mpp, w)| {
                        let full: Vec<i64> = mp.iter().chain(mpp).copied().collect();
                        w * lv.coeff(&full)
                    })
                    .sum()
            })
        })
        .collect();
    let mut out = SplineSeries::new(levels)?;
    out.source_r = s.source_r;
    Ok(out)
}

/// Copy `alpha'_{k,m'}` onto every `(m', m'')` with `N(-m'') != 0`; zero elsewhere.
pub fn besov_extend(s: &SplineSeries, ps: &PlaneSpec) -> Result<SplineSeries> {
    check_series(s, ps.n_prime)?;
    let pw = plane_weights(s.degree, ps.codim());
    let np = ps.n_prime;
    let levels = s
        .levels
        .iter()
        .map(|lv| {
            SplineFn::from_fn(ps.n, s.degree, lv.level, |m| {
                if pw.iter().any(|(mpp, _)| mpp[..] == m[np..]) {
                    lv.coeff(&m[..np])
                } else {
                    0.0
                }
            })
        })
        .collect();
    let mut out = SplineSeries::new(levels)?;
    out.source_r = s.source_r;
    Ok(out)
}

/// `t'_{k,m'} = t_{k,(m',0)}`.
pub fn plane_weights_seq(ms: &MultiSeq, ps: &PlaneSpec) -> Result<MultiSeq> {
    if ms.dim() != ps.n {
        return Err(Error::invalid("weights and plane disagree on n"));
    }
    let zeros = vec![0i64; ps.codim()];
    MultiSeq::from_fn(ps.n_prime, ms.p(), ms.max_level(), |k, mp| {
        let full: Vec<i64> = mp.iter().chain(&zeros).copied().collect();
        ms.get(k, &full).expect("plane index inside the level")
    })
}

/// Masses of a series and its trace, with `trace / full`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassRatio {
    pub full: f64,
    pub plane: f64,
    pub ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Coefficient masses before and after tracing.
pub fn trace_mass(s: &SplineSeries, ms: &MultiSeq, ps: &PlaneSpec, q: f64) -> Result<MassRatio> {
    let tr = besov_trace(s, ps)?;
    let msp = plane_weights_seq(ms, ps)?;
    let full = series_mass(s, ms, ms.p(), q);
    let plane = series_mass(&tr, &msp, ms.p(), q);
    Ok(MassRatio { full, plane, ratio: ratio(plane, full) })
}

/// Extension mass divided by the plane mass.
pub fn extension_mass(s: &SplineSeries, ms: &MultiSeq, ps: &PlaneSpec, q: f64) -> Result<MassRatio> {
    let ext = besov_extend(s, ps)?;
    let msp = plane_weights_seq(ms, ps)?;
    let full = series_mass(&ext, ms, ms.p(), q);
    let plane = series_mass(s, &msp, ms.p(), q);
    Ok(MassRatio { full, plane, ratio: ratio(full, plane) })
}

/// `theta(t) = exp(-1 / (1 - t^2))` on `|t| < 1`.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Weights `mu_j` and the per-axis profile of `E_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingOp {
    pub order: usize,
    pub mu: Vec<f64>,
}

impl AveragingOp {
    /// Solve `sum_j mu_j j^i = [i == 0]` for `i < l`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 8 {
            return Err(Error::invalid(format!("averaging order must be in 1..=8, got {order}")));
        }
        let vander = DMatrix::from_fn(order, order, |i, j| ((j + 1) as f64).powi(i as i32));
        let mut rhs = DVector::zeros(order);
        rhs[0] = 1.0;
        let mu = vander
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("AveragingOp::new", "singular moment system"))?;
        Ok(Self { order, mu: mu.iter().copied().collect() })
    }

    /// `(-1)^(j+1) binom(l, j)`, the closed form of the moment solution.
    pub fn closed_form(order: usize) -> Vec<f64> {
        (1..=order).map(|j| if j % 2 == 1 { 1.0 } else { -1.0 } * binomial(order, j)).collect()
    }

    pub fn moment(&self, i: u32) -> f64 {
        self.mu.iter().enumerate().map(|(j, m)| m * ((j + 1) as f64).powi(i as i32)).sum()
    }
}

/// Discrete density of `eps (U + V)` on one axis, `U, V` independent with profile `theta`,
/// as offsets in cells.
pub fn kernel_1d(eps: f64, h: f64) -> Vec<(i64, f64)> {
    let reach = ((eps / h) - 1e-9).ceil() as i64 - 1;
    let reach = reach.max(0);
    let raw: Vec<f64> = (-reach..=reach).map(|i| bump(i as f64 * h / eps)).collect();
    let total: f64 = raw.iter().sum();
    let single: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let mut out = Vec::with_capacity(4 * reach as usize + 1);
    for s in -2 * reach..=2 * reach {
        let mut acc = 0.0;
        for i in (-reach).max(s - reach)..=reach.min(s + reach) {
            acc += single[(i + reach) as usize] * single[(s - i + reach) as usize];
        }
        out.push((s, acc));
    }
    out
}

/// `E_eps[phi](x) = sum_j mu_j E[phi(x + j eps (U + V))]`.
///
/// Near the boundary the offsets are restricted, per axis, to those keeping `x + l w` inside,
/// and renormalized; every sample of the `l` dilations then stays in the box.
pub fn steklov_average(phi: &GridFunction, eps: f64, ao: &AveragingOp) -> Result<GridFunction> {
    let h = phi.h();
    if eps < h * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("eps={eps} below the cell size {h}")));
    }
    let ker = kernel_1d(eps, h);
    let n = phi.dim();
    let side = phi.side();
    let l = ao.order as i64;
    let vals: Vec<f64> = (0..phi.len())
        .into_par_iter()
        .map(|flat| {
            let idx = phi.multi_index(flat);
            let axes: Vec<Vec<(i64, f64)>> = idx
                .iter()
                .map(|&i| {
                    let kept: Vec<(i64, f64)> =
                        ker.iter().copied().filter(|&(s, _)| (0..side).contains(&(i + l * s))).collect();
                    let total: f64 = kept.iter().map(|t| t.1).sum();
                    kept.into_iter().map(|(s, w)| (s, w / total)).collect()
                })
                .collect();
            let counts: Vec<usize> = axes.iter().map(|a| a.len()).collect();
            let total: usize = counts.iter().product();
            let mut acc = 0.0;
            let mut cell = vec![0i64; n];
            for code in 0..total {
                let mut rest = code;
                let mut w = 1.0;
                let mut off = vec![0i64; n];
                for i in (0..n).rev() {
                    let (s, wi) = axes[i][rest % counts[i]];
                    rest /= counts[i];
                    off[i] = s;
                    w *= wi;
                }
                let mut inner = 0.0;
                for (j, mu) in ao.mu.iter().enumerate() {
                    for i in 0..n {
                        cell[i] = idx[i] + (j as i64 + 1) * off[i];
                    }
                    inner += mu * phi.at(phi.flat_index(&cell));
                }
                acc += w * inner;
            }
            acc
        })
        .collect();
    GridFunction::new(n, phi.level(), vals)
}

/// `int_Q |phi - E_eps phi|` over the unit box.
pub fn recovery_error(phi: &GridFunction, eps: f64, ao: &AveragingOp) -> Result<f64> {
    let e = steklov_average(phi, eps, ao)?;
    Ok(lr_from_values(phi.sub(&e).values().iter().copied(), phi.cell_volume(), 1.0))
}

/// Max over interior cells of `eps^l |D^alpha E_eps phi| / delta^l_1(x + eps I^n)`, `|alpha| = l`,
/// derivatives by grid differences.
pub fn derivative_bound_constant(phi: &GridFunction, eps: f64, ao: &AveragingOp) -> Result<f64> {
    let e = steklov_average(phi, eps, ao)?;
    let l = ao.order;
    let n = phi.dim();
    let h = phi.h();
    let margin = (eps / h).ceil() as i64 + l as i64;
    let alphas = crate::polyfit::exponent_set(n, l + 1, crate::polyfit::DegreeMode::Total)
        .into_iter()
        .filter(|a| a.iter().map(|&v| v as usize).sum::<usize>() == l)
        .collect::<Vec<_>>();
    let side = phi.side();
    let cells: Vec<usize> = (0..phi.len())
        .filter(|&f| phi.multi_index(f).iter().all(|&i| i >= margin && i + margin < side))
        .collect();
    let worst = cells
        .par_iter()
        .map(|&flat| {
            let idx = phi.multi_index(flat);
            let x = phi.center(flat);
            let mut d_max = 0.0f64;
            for a in &alphas {
                d_max = d_max.max(grid_derivative(&e, &idx, a).abs());
            }
            let region = crate::geometry::AxisBox::centered(&x, eps);
            let delta = crate::diffs::delta_box(phi, &region, l, 1.0, crate::diffs::DiffDomain::Full);
            let lhs = eps.powi(l as i32) * d_max;
            if delta > 0.0 {
                lhs / delta
            } else if lhs > 1e-9 * eps.powi(l as i32) {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Forward difference `Delta^alpha_h / h^|alpha|` at a cell.
fn grid_derivative(g: &GridFunction, idx: &[i64], alpha: &[u32]) -> f64 {
    let h = g.h();
    let n = idx.len();
    let mut terms: Vec<(Vec<i64>, f64)> = vec![(idx.to_vec(), 1.0)];
    for i in 0..n {
        let a = alpha[i] as usize;
        let mut next = Vec::new();
        for (c, w) in &terms {
            for j in 0..=a {
                let mut cc = c.clone();
                cc[i] += j as i64;
                let sign = if (a - j) % 2 == 0 { 1.0 } else { -1.0 };
                next.push((cc, w * sign * binomial(a, j)));
            }
        }
        terms = next;
    }
    let order: u32 = alpha.iter().sum();
    terms.iter().map(|(c, w)| w * g.get(c).unwrap_or(0.0)).sum::<f64>() / h.powi(order as i32)
}

/// `chi`: 1 on `|y| <= 1/2`, 0 on `|y| >= 1`, smooth in between.
pub fn cutoff(y: f64) -> f64 {
    let t = y.abs();
    if t <= 0.5 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let s = 2.0 * t - 1.0;
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    b / (a + b)
}

/// `psi_k(y) = chi(2^(k-1) y) - chi(2^k y)` for `k < K`; `psi_K = chi(2^(K-1) y)` takes the tail.
pub fn partition(k: u32, top: u32, y: f64) -> f64 {
    let outer = cutoff((k as f64 - 1.0).exp2() * y);
    if k == top {
        outer
    } else {
        outer - cutoff((k as f64).exp2() * y)
    }
}

/// `f(x, y) = sum_{k=1}^{K} psi_k(y) E_{2^-k}[phi](x)` on the slab with `2^Ky` rows in `y`.
pub fn sobolev_extend(phi: &GridFunction, ao: &AveragingOp, top: u32, level_y: u32) -> Result<SlabFunction> {
    if top == 0 || top > phi.level() {
        return Err(Error::invalid(format!("extension depth must be in 1..={}, got {top}", phi.level())));
    }
    if level_y < 2 {
        return Err(Error::invalid("need at least 4 rows in y"));
    }
    let averages = (1..=top)
        .into_par_iter()
        .map(|k| steklov_average(phi, (-(k as f64)).exp2(), ao))
        .collect::<Result<Vec<_>>>()?;
    let ny = 1usize << level_y;
    let hy = 2.0 / ny as f64;
    let psi: Vec<Vec<f64>> = (1..=top)
        .map(|k| (0..ny).map(|j| partition(k, top, -1.0 + (j as f64 + 0.5) * hy)).collect())
        .collect();
    let mut values = vec![0.0; phi.len() * ny];
    for (x, row) in values.chunks_mut(ny).enumerate() {
        for (k, avg) in averages.iter().enumerate() {
            let v = avg.at(x);
            for (slot, p) in row.iter_mut().zip(&psi[k]) {
                *slot += p * v;
            }
        }
    }
    SlabFunction::new(phi.dim(), phi.level(), level_y, values)
}

/// Centered difference stencil of order `a` in cell offsets, before dividing by the step power.
fn centered_stencil(a: usize) -> Vec<(i64, f64)> {
    let mut st: Vec<(i64, f64)> = vec![(0, 1.0)];
    let compose = |st: &[(i64, f64)], base: &[(i64, f64)]| {
        let mut out: Vec<(i64, f64)> = Vec::new();
        for &(o1, w1) in st {
            for &(o2, w2) in base {
                match out.iter_mut().find(|t| t.0 == o1 + o2) {
                    Some(t) => t.1 += w1 * w2,
                    None => out.push((o1 + o2, w1 * w2)),
                }
            }
        }
        out
    };
    for _ in 0..a / 2 {
        st = compose(&st, &[(-1, 1.0), (0, -2.0), (1, 1.0)]);
    }
    if a % 2 == 1 {
        st = compose(&st, &[(-1, -0.5), (1, 0.5)]);
    }
    st
}

/// `(int |f|^p w + sum_{|alpha|=l} int |D^alpha f|^p w)^(1/p)` over the slab cells where the
/// centered stencils fit; `w(x, y)` plays the role of `gamma^p`.
pub fn sobolev_energy(f: &SlabFunction, l: usize, p: f64, w: impl Fn(&[f64], f64) -> f64 + Sync) -> Result<f64> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::invalid("energy needs finite p >= 1"));
    }
    let n = f.dim;
    let nx_side = 1i64 << f.level;
    let hx = 1.0 / nx_side as f64;
    let hy = f.hy();
    let ny = f.ny() as i64;
    let alphas: Vec<Vec<u32>> = crate::polyfit::exponent_set(n + 1, l + 1, crate::polyfit::DegreeMode::Total)
        .into_iter()
        .filter(|a| a.iter().map(|&v| v as usize).sum::<usize>() == l)
        .collect();
    let stencils: Vec<Vec<(Vec<i64>, f64)>> = alphas
        .iter()
        .map(|a| {
            let mut terms: Vec<(Vec<i64>, f64)> = vec![(vec![0; n + 1], 1.0)];
            for (axis, &ai) in a.iter().enumerate() {
                let step = if axis < n { hx } else { hy };
                let st = centered_stencil(ai as usize);
                let mut next = Vec::new();
                for (o, wv) in &terms {
                    for &(s, ws) in &st {
                        let mut oo = o.clone();
                        oo[axis] += s;
                        next.push((oo, wv * ws / step.powi(ai as i32)));
                    }
                }
                terms = next;
            }
            terms
        })
        .collect();
    let reach = (l as i64 + 1) / 2;
    let cell = hx.powi(n as i32) * hy;
    let total: f64 = (0..f.nx())
        .into_par_iter()
        .map(|xf| {
            let xi = unflatten(xf, nx_side, n);
            let x: Vec<f64> = xi.iter().map(|&i| (i as f64 + 0.5) * hx).collect();
            let inner_x = xi.iter().all(|&i| i >= reach && i + reach < nx_side);
            let mut acc = 0.0;
            for j in 0..ny {
                let y = f.y_center(j as usize);
                let wt = w(&x, y);
                let mut e = f.at(xf, j as usize).abs().powf(p);
                if inner_x && j >= reach && j + reach < ny {
                    for st in &stencils {
                        let mut d = 0.0;
                        for (o, ws) in st {
                            let mut xx = 0usize;
                            for i in 0..n {
                                xx = xx * nx_side as usize + (xi[i] + o[i]) as usize;
                            }
                            d += ws * f.at(xx, (j + o[n]) as usize);
                        }
                        e += d.abs().powf(p);
                    }
                }
                acc += wt * e;
            }
            acc
        })
        .sum();
    Ok((total * cell).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;

    #[test]
    fn moments_and_closed_form() {
        for l in 1..=4 {
            let ao = AveragingOp::new(l).unwrap();
            let cf = AveragingOp::closed_form(l);
            for (a, b) in ao.mu.iter().zip(&cf) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!((ao.moment(0) - 1.0).abs() < 1e-10);
            for i in 1..l as u32 {
                assert!(ao.moment(i).abs() < 1e-9);
            }
        }
        let k = kernel_1d(0.25, 1.0 / 64.0);
        assert!((k.iter().map(|t| t.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_reproduces_polynomials() {
        let ao = AveragingOp::new(3).unwrap();
        let phi = sample(|x| 1.0 - x[0] + 3.0 * x[0] * x[1], 2, 5).unwrap();
        let e = steklov_average(&phi, 0.125, &ao).unwrap();
        let err = phi.sub(&e).values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-10, "{err}");
        assert!(steklov_average(&phi, 0.01, &ao).is_err());
    }

    #[test]
    fn degree_one_trace_reads_row_minus_one() {
        let ps = PlaneSpec::new(2, 1).unwrap();
        let mut levels = Vec::new();
        for k in 0..3 {
            levels.push(SplineFn::from_fn(2, 1, k, |m| (10 * m[0] + m[1]) as f64));
        }
        let s = SplineSeries::new(levels).unwrap();
        let tr = besov_trace(&s, &ps).unwrap();
        for k in 0..3 {
            let lv = tr.level(k);
            for f in 0..lv.len() {
                let m = lv.index_of(f);
                assert_eq!(lv.coeffs[f], (10 * m[0] - 1) as f64);
            }
        }
        let back = besov_trace(&besov_extend(&tr, &ps).unwrap(), &ps).unwrap();
        assert_eq!(back, tr);
        assert!(PlaneSpec::new(2, 2).is_err());
    }

    #[test]
    fn constant_series_traces_to_constant() {
        let ps = PlaneSpec::new(2, 1).unwrap();
        let s = SplineSeries::new(vec![SplineFn::from_fn(2, 2, 0, |_| 1.0)]).unwrap();
        let tr = besov_trace(&s, &ps).unwrap();
        assert!(tr.level(0).coeffs.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn partition_sums_to_one() {
        for i in 0..200 {
            let y = -0.5 + i as f64 / 199.0;
            let s: f64 = (1..=6).map(|k| partition(k, 6, y)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(partition(2, 6, 0.9), 0.0);
    }

    #[test]
    fn constant_extends_to_constant() {
        let ao = AveragingOp::new(2).unwrap();
        let phi = sample(|_| 1.0, 1, 6).unwrap();
        let f = sobolev_extend(&phi, &ao, 5, 6).unwrap();
        for x in 0..f.nx() {
            for j in 0..f.ny() {
                if f.y_center(j).abs() <= 0.5 {
                    assert!((f.at(x, j) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stencils_are_exact_on_monomials() {
        let st = centered_stencil(3);
        let d: f64 = st.iter().map(|&(o, w)| w * (o as f64).powi(3)).sum();
        assert!((d - 6.0).abs() < 1e-12);
    }
}

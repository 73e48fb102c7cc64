//! Uniform B-splines on dyadic levels, knot insertion and the quasi-interpolant.

use crate::binomial;
use crate::error::{Error, Result};
use crate::geometry::{cube_box, cubes_at_level, unflatten, AxisBox, DyadicCube};
use crate::gridfn::GridFunction;
use crate::polyfit::{almost_best_field, DegreeMode, LocalPoly, PolyField};

/// `N^degree(t)`, knots `0, 1, .., degree + 1`, half-open on the right.
pub fn bspline_eval(degree: usize, t: f64) -> f64 {
    let l = degree + 1;
    if !(0.0..l as f64).contains(&t) {
        return 0.0;
    }
    // values of N^0 on the unit intervals, raised one degree at a time
    let cell = t.floor() as usize;
    let mut n = vec![0.0; l];
    n[cell] = 1.0;
    for d in 1..=degree {
        for i in 0..(l - d) {
            let ti = t - i as f64;
            n[i] = (ti * n[i] + (d as f64 + 1.0 - ti) * n[i + 1]) / d as f64;
        }
    }
    n[0]
}

/// `N^degree_{k,m}(x) = prod_i N(2^k x_i - m_i)`.
pub fn basis_eval(degree: usize, level: u32, m: &[i64], x: &[f64]) -> f64 {
    let s = (level as f64).exp2();
    m.iter().zip(x).map(|(&mi, &xi)| bspline_eval(degree, s * xi - mi as f64)).product()
}

/// Spline of one level: coefficients on the index box `[-degree, 2^k - 1]^n`,
/// i.e. every index whose support meets the open unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFn {
    pub dim: usize,
    pub degree: usize,
    pub level: u32,
    pub coeffs: Vec<f64>,
}

impl SplineFn {
    pub fn zeros(dim: usize, degree: usize, level: u32) -> Self {
        let per = Self::per_axis(degree, level);
        Self { dim, degree, level, coeffs: vec![0.0; per.pow(dim as u32)] }
    }

    pub fn from_fn(dim: usize, degree: usize, level: u32, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let mut s = Self::zeros(dim, degree, level);
        for i in 0..s.coeffs.len() {
            s.coeffs[i] = f(&s.index_of(i));
        }
        s
    }

    pub fn per_axis(degree: usize, level: u32) -> usize {
        (1usize << level) + degree
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn index_of(&self, flat: usize) -> Vec<i64> {
        let per = Self::per_axis(self.degree, self.level) as i64;
        unflatten(flat, per, self.dim).into_iter().map(|i| i - self.degree as i64).collect()
    }

    pub fn flat_of(&self, m: &[i64]) -> Option<usize> {
        let per = Self::per_axis(self.degree, self.level) as i64;
        let mut flat = 0usize;
        for &mi in m {
            let j = mi + self.degree as i64;
            if !(0..per).contains(&j) {
                return None;
            }
            flat = flat * per as usize + j as usize;
        }
        Some(flat)
    }

    pub fn coeff(&self, m: &[i64]) -> f64 {
        self.flat_of(m).map_or(0.0, |f| self.coeffs[f])
    }

    pub fn add_assign(&mut self, other: &SplineFn) {
        assert_eq!((self.dim, self.degree, self.level), (other.dim, other.degree, other.level));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &SplineFn) -> SplineFn {
        assert_eq!((self.dim, self.degree, self.level), (other.dim, other.degree, other.level));
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        SplineFn { coeffs, ..self.clone() }
    }

    /// Per-axis lowest index and basis values of the `degree + 1` functions alive at `x`.
    fn local_values(&self, x: &[f64]) -> Vec<(i64, Vec<f64>)> {
        let side = 1i64 << self.level;
        let s = side as f64;
        x.iter()
            .map(|&xi| {
                let c = ((xi * s).floor() as i64).clamp(0, side - 1);
                let lo = c - self.degree as i64;
                let vals = (0..=self.degree).map(|j| bspline_eval(self.degree, s * xi - (lo + j as i64) as f64)).collect();
                (lo, vals)
            })
            .collect()
    }

    /// `sum_m beta_m N_{k,m}(x)` using the `(degree+1)^n` nonzero terms.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let loc = self.local_values(x);
        let l = self.degree + 1;
        let mut total = 0.0;
        let mut m = vec![0i64; self.dim];
        for code in 0..l.pow(self.dim as u32) {
            let mut rest = code;
            let mut w = 1.0;
            for i in (0..self.dim).rev() {
                let j = rest % l;
                rest /= l;
                m[i] = loc[i].0 + j as i64;
                w *= loc[i].1[j];
            }
            if w != 0.0 {
                total += w * self.coeff(&m);
            }
        }
        total
    }

    /// Sample at the fine cell centers of a grid of level `level`.
    pub fn to_grid(&self, level: u32) -> GridFunction {
        let g = GridFunction::zeros(self.dim, level);
        let values = (0..g.len()).map(|i| self.eval(&g.center(i))).collect();
        GridFunction::new(self.dim, level, values).expect("finite spline values")
    }

    /// Polynomial pieces on the level-`k` cubes, recovered by exact tensor interpolation.
    pub fn local_pieces(&self) -> PolyField {
        let l = self.degree + 1;
        let nodes: Vec<f64> = if l == 1 {
            vec![0.0]
        } else {
            (0..l).map(|j| -(std::f64::consts::PI * (j as f64 + 0.5) / l as f64).cos()).collect()
        };
        let cubes = cubes_at_level(self.dim, self.level);
        let polys = cubes
            .iter()
            .map(|c| {
                let region = cube_box(c, 1.0);
                interpolate_piece(&region, l, &nodes, |x| self.eval(x))
            })
            .collect();
        PolyField { dim: self.dim, level: self.level, polys, a_const: 1.0 }
    }
}

/// Tensor interpolant of coordinate degree `< l` on `region` at the chart nodes.
fn interpolate_piece(region: &AxisBox, l: usize, nodes: &[f64], f: impl Fn(&[f64]) -> f64) -> LocalPoly {
    let n = region.dim();
    let exps = crate::polyfit::exponent_set(n, l, DegreeMode::Coordinate);
    let c = region.center();
    let size = exps.len();
    let mut a = nalgebra::DMatrix::zeros(size, size);
    let mut b = nalgebra::DVector::zeros(size);
    for (row, e) in exps.iter().enumerate() {
        let u: Vec<f64> = e.iter().map(|&j| nodes[j as usize]).collect();
        let x: Vec<f64> = (0..n).map(|i| c[i] + 0.5 * region.sides[i] * u[i]).collect();
        for (col, f_exp) in exps.iter().enumerate() {
            a[(row, col)] = f_exp.iter().zip(&u).map(|(&p, &ui)| ui.powi(p as i32)).product();
        }
        b[row] = f(&x);
    }
    let coeffs = a.lu().solve(&b).expect("tensor interpolation nodes are unisolvent");
    LocalPoly::from_coeffs(region.clone(), l, DegreeMode::Coordinate, coeffs.iter().copied().collect())
}

/// One-level subdivision mask `2^{-(l-1)} binom(l, i)`, `l = degree + 1`.
pub fn subdivision_mask(degree: usize) -> Vec<f64> {
    let l = degree + 1;
    (0..=l).map(|i| binomial(l, i) * (-(degree as f64)).exp2()).collect()
}

/// Rewrite `s` in the basis of level `target >= s.level`.
pub fn refine(s: &SplineFn, target: u32) -> SplineFn {
    assert!(target >= s.level, "refine target below spline level");
    let mut cur = s.clone();
    while cur.level < target {
        cur = refine_once(&cur);
    }
    cur
}

fn refine_once(s: &SplineFn) -> SplineFn {
    let mask = subdivision_mask(s.degree);
    let taps = mask.len();
    let mut out = SplineFn::zeros(s.dim, s.degree, s.level + 1);
    let mut target = vec![0i64; s.dim];
    for (flat, &v) in s.coeffs.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let m = s.index_of(flat);
        for code in 0..taps.pow(s.dim as u32) {
            let mut rest = code;
            let mut w = v;
            for i in (0..s.dim).rev() {
                let tap = rest % taps;
                rest /= taps;
                target[i] = 2 * m[i] + tap as i64;
                w *= mask[tap];
            }
            // children outside the index box vanish on the unit box
            if let Some(f) = out.flat_of(&target) {
                out.coeffs[f] += w;
            }
        }
    }
    out
}

/// Coefficients produced by the quasi-interpolant, with the piece each one read.
#[derive(Debug, Clone)]
pub struct QuasiCoeffs {
    pub spline: SplineFn,
    /// Center used for each coefficient (flat order of `spline.coeffs`).
    pub centers: Vec<Vec<f64>>,
}

/// Center of the cube owning the derivative samples of index `m` along one axis.
///
/// For `m_i >= 0` this is the center of `Q_{k,m}`; indices below zero have that
/// cube outside the box, so the first in-box knot interval of the support is used.
fn sample_center(m: i64, level: u32) -> f64 {
    let side = 1i64 << level;
    (m.clamp(0, side - 1) as f64 + 0.5) / side as f64
}

/// `a_{k,m_i,nu}` for `nu = 0..l-1` along one axis.
fn axis_weights(m: i64, level: u32, l: usize, xi: f64) -> Vec<f64> {
    let scale = (level as f64).exp2();
    // psi(xi + s) = prod_j (b_j - s) as a polynomial in s
    let mut poly = vec![1.0];
    for j in 1..l {
        let b = (m + j as i64) as f64 / scale - xi;
        let mut next = vec![0.0; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += b * c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    let fact = |q: usize| (1..=q).map(|i| i as f64).product::<f64>();
    let lm1 = fact(l - 1);
    (0..l)
        .map(|nu| {
            let q = l - 1 - nu;
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            sign / lm1 * fact(q) * poly[q]
        })
        .collect()
}

/// `Q^{l-1}_k` applied to a piecewise polynomial.
pub fn quasi_interpolant(pp: &PolyField, k: u32, l: usize) -> Result<QuasiCoeffs> {
    if l == 0 {
        return Err(Error::invalid("order l must be >= 1"));
    }
    if pp.polys.is_empty() {
        return Err(Error::numerical("quasi_interpolant", "missing polynomial pieces"));
    }
    let n = pp.dim;
    let mut spline = SplineFn::zeros(n, l - 1, k);
    let mut centers = Vec::with_capacity(spline.len());
    let nus = crate::polyfit::exponent_set(n, l, DegreeMode::Coordinate);
    for flat in 0..spline.len() {
        let m = spline.index_of(flat);
        let xi: Vec<f64> = m.iter().map(|&mi| sample_center(mi, k)).collect();
        let w: Vec<Vec<f64>> = (0..n).map(|i| axis_weights(m[i], k, l, xi[i])).collect();
        let piece = pp.piece(&xi);
        let mut alpha = 0.0;
        for nu in &nus {
            let a: f64 = (0..n).map(|i| w[i][nu[i] as usize]).product();
            alpha += a * piece.derivative(&xi, nu);
        }
        spline.coeffs[flat] = alpha;
        centers.push(xi);
    }
    Ok(QuasiCoeffs { spline, centers })
}

/// `T^{l-1}_k(phi, r)`: the quasi-interpolant of the level-`k` almost-best field.
pub fn t_operator(phi: &GridFunction, k: u32, l: usize, r: f64) -> Result<SplineFn> {
    let field = almost_best_field(phi, k, l, r)?;
    Ok(quasi_interpolant(&field, k, l)?.spline)
}

/// Same polynomial on every level-`k` cube.
pub fn global_poly_field(p: &LocalPoly, k: u32) -> PolyField {
    let polys = vec![p.clone(); 1usize << (k as usize * p.region.dim())];
    PolyField { dim: p.region.dim(), level: k, polys, a_const: 1.0 }
}

/// Two-sided coefficient/norm comparison for one spline level.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `min_Q coeff(Q) / ||S|L_r(Q)||`.
    pub c1: f64,
    /// `max_Q coeff(Q) / ||S|L_r(c3 Q)||`.
    pub c2: f64,
    pub c3: f64,
    /// Per cube: (coefficient sum, norm on `Q`, norm on `c3 Q`).
    pub cubes: Vec<(f64, f64, f64)>,
}

/// Midpoint quadrature of `|S|^r` over the level-`k` cells `lo..hi` per axis.
fn spline_norm_cells(s: &SplineFn, ranges: &[(i64, i64)], r: f64, sub: u32) -> f64 {
    let n = s.dim;
    let fine = s.level + sub;
    let w = 1i64 << sub;
    let h = (-(fine as f64)).exp2();
    let fr: Vec<(i64, i64)> = ranges.iter().map(|&(a, b)| (a * w, b * w)).collect();
    let counts: Vec<usize> = fr.iter().map(|(a, b)| (b - a) as usize).collect();
    let total: usize = counts.iter().product();
    let mut acc = 0.0f64;
    let mut x = vec![0.0; n];
    for code in 0..total {
        let mut rest = code;
        for i in (0..n).rev() {
            let j = rest % counts[i];
            rest /= counts[i];
            x[i] = (fr[i].0 + j as i64) as f64 * h + 0.5 * h;
        }
        let v = s.eval(&x).abs();
        if r.is_infinite() {
            acc = acc.max(v);
        } else {
            acc += v.powf(r);
        }
    }
    if r.is_infinite() {
        acc
    } else {
        (acc * h.powi(n as i32)).powf(1.0 / r)
    }
}

/// Ratios between `||S|L_r(Q)||` and the coefficient sums over
/// `{m : supp N_{k,m} meets Q}` for every level-`k` cube, with `c3 = 2l + 1`.
pub fn coeff_stability(s: &SplineFn, r: f64) -> StabilityReport {
    let l = s.degree + 1;
    let c3 = (2 * l + 1) as f64;
    let n = s.dim;
    let side = 1i64 << s.level;
    let sub = if n == 1 { 5 } else { 3 };
    let vol = (-((s.level as usize * n) as f64)).exp2();
    let reach = l as i64;
    let mut cubes = Vec::new();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for cube in cubes_at_level(n, s.level) {
        let mut sum = 0.0f64;
        let mut mx = 0.0f64;
        let per = l;
        for code in 0..per.pow(n as u32) {
            let mut rest = code;
            let mut m = vec![0i64; n];
            for i in (0..n).rev() {
                m[i] = cube.index[i] - s.degree as i64 + (rest % per) as i64;
                rest /= per;
            }
            let a = s.coeff(&m).abs();
            mx = mx.max(a);
            if !r.is_infinite() {
                sum += a.powf(r) * vol;
            }
        }
        let coef = if r.is_infinite() { mx } else { sum.powf(1.0 / r) };
        let own: Vec<(i64, i64)> = cube.index.iter().map(|&m| (m, m + 1)).collect();
        let big: Vec<(i64, i64)> = cube.index.iter().map(|&m| ((m - reach).max(0), (m + reach + 1).min(side))).collect();
        let on_q = spline_norm_cells(s, &own, r, sub);
        let on_big = spline_norm_cells(s, &big, r, sub);
        if on_q > 0.0 {
            c1 = c1.min(coef / on_q);
        }
        if on_big > 0.0 {
            c2 = c2.max(coef / on_big);
        }
        cubes.push((coef, on_q, on_big));
    }
    StabilityReport { c1, c2, c3, cubes }
}

/// Cube helper used by callers that index per-cube results.
pub fn level_cubes(s: &SplineFn) -> Vec<DyadicCube> {
    cubes_at_level(s.dim, s.level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn univariate_values() {
        assert_eq!(bspline_eval(0, 0.5), 1.0);
        assert_eq!(bspline_eval(0, 1.5), 0.0);
        assert_eq!(bspline_eval(1, 1.0), 1.0);
        assert_eq!(bspline_eval(1, 0.5), 0.5);
        assert_eq!(bspline_eval(2, 1.0), 0.5);
        assert_eq!(bspline_eval(2, 1.5), 0.75);
        assert_eq!(bspline_eval(3, 2.0), 2.0 / 3.0);
        assert_eq!(bspline_eval(2, -0.1), 0.0);
        assert_eq!(bspline_eval(2, 3.0), 0.0);
    }

    #[test]
    fn divided_difference_agrees() {
        // N^d(t) = (d+1) [0..d+1] (. - t)_+^d, expanded through binomial weights
        for d in 0..4usize {
            let l = d + 1;
            for i in 0..40 {
                let t = i as f64 * l as f64 / 40.0 + 1e-3;
                let fact: f64 = (1..=d).map(|j| j as f64).product();
                let dd: f64 = (0..=l)
                    .map(|j| {
                        let sign = if (l - j) % 2 == 0 { 1.0 } else { -1.0 };
                        let tp = j as f64 - t;
                        sign * binomial(l, j) * if tp > 0.0 { tp.powi(d as i32) } else { 0.0 }
                    })
                    .sum::<f64>()
                    / fact;
                assert!((dd - bspline_eval(d, t)).abs() < 1e-12, "d={d} t={t}");
            }
        }
    }

    #[test]
    fn partition_and_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for degree in 0..4 {
            for k in 0..5 {
                let one = SplineFn::from_fn(2, degree, k, |_| 1.0);
                for _ in 0..50 {
                    let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                    assert!((one.eval(&x) - 1.0).abs() < 1e-12);
                }
            }
        }
        let bump = SplineFn::from_fn(1, 2, 3, |m| if m[0] == 2 { 1.0 } else { 0.0 });
        assert_eq!(bump.eval(&[0.24]), 0.0);
        assert!(bump.eval(&[0.3]) > 0.0);
        assert_eq!(bump.eval(&[0.63]), 0.0);
    }

    #[test]
    fn marsden_linear() {
        let k = 3;
        let s = SplineFn::from_fn(1, 1, k, |m| (m[0] + 1) as f64 / 8.0);
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!((s.eval(&[x]) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn refinement_rules() {
        assert_eq!(subdivision_mask(0), vec![1.0, 1.0]);
        assert_eq!(subdivision_mask(1), vec![0.5, 1.0, 0.5]);
        let hat = SplineFn::from_fn(1, 1, 1, |m| if m[0] == 0 { 1.0 } else { 0.0 });
        let fine = refine(&hat, 2);
        assert_eq!(fine.coeff(&[0]), 0.5);
        assert_eq!(fine.coeff(&[1]), 1.0);
        assert_eq!(fine.coeff(&[2]), 0.5);
        let c = SplineFn::from_fn(1, 0, 1, |m| m[0] as f64 + 2.0);
        let f = refine(&c, 2);
        assert_eq!(f.coeffs, vec![2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn refinement_keeps_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for degree in 0..4 {
            for n in 1..=2 {
                let s = SplineFn::from_fn(n, degree, 2, |_| rng.gen_range(-1.0..1.0));
                let f = refine(&s, 4);
                for _ in 0..100 {
                    let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                    assert!((s.eval(&x) - f.eval(&x)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn quasi_interpolant_small_orders() {
        let k = 2;
        let p = LocalPoly::from_coeffs(AxisBox::unit(1), 2, DegreeMode::Coordinate, vec![0.5, 0.5]);
        // chart of the unit box: u = 2x - 1, so p(x) = x
        let q1 = quasi_interpolant(&global_poly_field(&p, k), k, 1).unwrap();
        for (flat, c) in q1.spline.coeffs.iter().enumerate() {
            let m = q1.spline.index_of(flat)[0];
            assert!((c - (m as f64 + 0.5) / 4.0).abs() < 1e-15);
        }
        let q2 = quasi_interpolant(&global_poly_field(&p, k), k, 2).unwrap();
        for (flat, c) in q2.spline.coeffs.iter().enumerate() {
            let m = q2.spline.index_of(flat)[0];
            assert!((c - (m + 1) as f64 / 4.0).abs() < 1e-15, "m={m} c={c}");
        }
    }

    #[test]
    fn quasi_interpolant_is_a_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in 1..=4usize {
            for n in 1..=2 {
                let s = SplineFn::from_fn(n, l - 1, 2, |_| rng.gen_range(-1.0..1.0));
                let q = quasi_interpolant(&s.local_pieces(), 2, l).unwrap();
                for (a, b) in q.spline.coeffs.iter().zip(&s.coeffs) {
                    assert!((a - b).abs() < 1e-9, "l={l} n={n}");
                }
            }
        }
    }

    #[test]
    fn t_operator_fixes_splines() {
        let s = SplineFn::from_fn(1, 2, 2, |m| (m[0] as f64 * 0.7).sin());
        let phi = s.to_grid(7);
        let t = t_operator(&phi, 2, 3, 2.0).unwrap();
        for (a, b) in t.coeffs.iter().zip(&s.coeffs) {
            assert!((a - b).abs() < 1e-8);
        }
        let poly = sample(|x| 1.0 + 2.0 * x[0] - x[1] + 3.0 * x[0] * x[1], 2, 5).unwrap();
        let t = t_operator(&poly, 2, 2, 1.0).unwrap();
        for i in 0..poly.len() {
            assert!((t.eval(&poly.center(i)) - poly.at(i)).abs() < 1e-8);
        }
    }

    #[test]
    fn stability_of_constant() {
        let one = SplineFn::from_fn(1, 1, 3, |_| 1.0);
        let rep = coeff_stability(&one, 2.0);
        let (coef, on_q, _) = rep.cubes[3];
        assert!((on_q - (1.0f64 / 8.0).sqrt()).abs() < 1e-12);
        assert!((coef - (2.0f64 / 8.0).sqrt()).abs() < 1e-12);
        assert_eq!(rep.c3, 5.0);
    }
}

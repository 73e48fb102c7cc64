//! Local best approximation by polynomials on cubes and boxes.
//!
//! Each fit is posed on the fine cells meeting the region, weighted by overlap.
//! `r = 2` is an exact least-squares solve in a tensor Legendre basis, `r = 1`
//! and `r = inf` are linear programs, other exponents use iteratively
//! reweighted least squares.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cube_box, cubes_at_level, AxisBox, DyadicCube};
use crate::gridfn::{region_cells, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeMode {
    /// Total degree `< l`.
    Total,
    /// Degree `< l` in each variable separately.
    Coordinate,
}

/// Polynomial on a region in the chart `u = (x - center) / half`, `u in [-1, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPoly {
    pub region: AxisBox,
    pub order: usize,
    pub mode: DegreeMode,
    pub exponents: Vec<Vec<u32>>,
    pub coeffs: Vec<f64>,
    pub r: f64,
    /// Achieved `L_r` error on the region.
    pub error: f64,
    /// Almost-best constant certified for this call.
    pub a_const: f64,
}

/// Multi-indices of the polynomial space.
pub fn exponent_set(n: usize, l: usize, mode: DegreeMode) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let total = l.pow(n as u32);
    for code in 0..total {
        let mut rest = code;
        let mut e = vec![0u32; n];
        for slot in e.iter_mut().rev() {
            *slot = (rest % l) as u32;
            rest /= l;
        }
        if mode == DegreeMode::Coordinate || (e.iter().sum::<u32>() as usize) < l {
            out.push(e);
        }
    }
    out
}

/// Monomial coefficients of the Legendre polynomials `P_0..P_{deg}`.
fn legendre_table(deg: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![1.0]];
    if deg >= 1 {
        t.push(vec![0.0, 1.0]);
    }
    for j in 1..deg {
        let mut next = vec![0.0; j + 2];
        for (i, &c) in t[j].iter().enumerate() {
            next[i + 1] += (2 * j + 1) as f64 * c / (j + 1) as f64;
        }
        for (i, &c) in t[j - 1].iter().enumerate() {
            next[i] -= j as f64 * c / (j + 1) as f64;
        }
        t.push(next);
    }
    t
}

fn legendre_values(u: f64, deg: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if deg >= 1 {
        out[1] = u;
    }
    for j in 1..deg {
        out[j + 1] = ((2 * j + 1) as f64 * u * out[j] - j as f64 * out[j - 1]) / (j + 1) as f64;
    }
}

impl LocalPoly {
    /// Polynomial with given monomial coefficients in the chart of `region`.
    pub fn from_coeffs(region: AxisBox, order: usize, mode: DegreeMode, coeffs: Vec<f64>) -> Self {
        let exponents = exponent_set(region.dim(), order, mode);
        assert_eq!(exponents.len(), coeffs.len());
        Self { region, order, mode, exponents, coeffs, r: 2.0, error: 0.0, a_const: 1.0 }
    }

    pub fn chart(&self, x: &[f64]) -> Vec<f64> {
        let c = self.region.center();
        x.iter()
            .zip(&c)
            .zip(&self.region.sides)
            .map(|((xi, ci), s)| (xi - ci) / (0.5 * s))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let u = self.chart(x);
        self.exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * e.iter().zip(&u).map(|(&a, &ui)| ui.powi(a as i32)).product::<f64>())
            .sum()
    }

    /// `D^nu P(x)` in the original coordinates.
    pub fn derivative(&self, x: &[f64], nu: &[u32]) -> f64 {
        let u = self.chart(x);
        let mut total = 0.0;
        for (e, c) in self.exponents.iter().zip(&self.coeffs) {
            let mut term = *c;
            for i in 0..u.len() {
                if e[i] < nu[i] {
                    term = 0.0;
                    break;
                }
                let mut fall = 1.0;
                for j in 0..nu[i] {
                    fall *= (e[i] - j) as f64;
                }
                let scale = (0.5 * self.region.sides[i]).powi(-(nu[i] as i32));
                term *= fall * scale * u[i].powi((e[i] - nu[i]) as i32);
            }
            total += term;
        }
        total
    }
}

struct FitData {
    u: Vec<Vec<f64>>,
    v: Vec<f64>,
    w: Vec<f64>,
    vol: f64,
}

impl FitData {
    fn collect(phi: &GridFunction, region: &AxisBox) -> Result<(Self, AxisBox)> {
        let clipped = region
            .clip_unit()
            .ok_or_else(|| Error::invalid("region does not meet the unit box"))?;
        if clipped.sides.iter().any(|&s| s < phi.h() * (1.0 - 1e-12)) {
            return Err(Error::numerical("best_poly", "region smaller than one fine cell"));
        }
        let cells = region_cells(phi, &clipped);
        let c = clipped.center();
        let mut u = Vec::with_capacity(cells.len());
        let mut v = Vec::with_capacity(cells.len());
        let mut w = Vec::with_capacity(cells.len());
        for (flat, wt) in cells {
            let x = phi.center(flat);
            u.push(x.iter().zip(&c).zip(&clipped.sides).map(|((xi, ci), s)| (xi - ci) / (0.5 * s)).collect());
            v.push(phi.at(flat));
            w.push(wt);
        }
        Ok((Self { u, v, w, vol: phi.cell_volume() }, clipped))
    }

    fn error(&self, vals: &[f64], r: f64) -> f64 {
        let res = self.v.iter().zip(vals).map(|(a, b)| (a - b).abs());
        if r.is_infinite() {
            res.fold(0.0, f64::max)
        } else {
            let s: f64 = res.zip(&self.w).map(|(e, w)| w * e.powf(r)).sum();
            (self.vol * s).powf(1.0 / r)
        }
    }
}

struct Basis {
    exponents: Vec<Vec<u32>>,
    table: Vec<Vec<f64>>,
    /// Rows: cells, columns: tensor Legendre basis functions.
    design: DMatrix<f64>,
}

impl Basis {
    fn new(data: &FitData, n: usize, l: usize, mode: DegreeMode) -> Self {
        let exponents = exponent_set(n, l, mode);
        let deg = l - 1;
        let mut design = DMatrix::zeros(data.u.len(), exponents.len());
        let mut pv = vec![vec![0.0; l]; n];
        for (row, u) in data.u.iter().enumerate() {
            for i in 0..n {
                legendre_values(u[i], deg, &mut pv[i]);
            }
            for (col, e) in exponents.iter().enumerate() {
                design[(row, col)] = (0..n).map(|i| pv[i][e[i] as usize]).product();
            }
        }
        Self { exponents, table: legendre_table(deg), design }
    }

    fn values(&self, coef: &DVector<f64>) -> Vec<f64> {
        (&self.design * coef).iter().copied().collect()
    }

    /// Weighted least squares with per-row weights `omega`.
    fn wls(&self, data: &FitData, omega: &[f64]) -> DVector<f64> {
        let sq: Vec<f64> = omega.iter().map(|w| w.sqrt()).collect();
        let mut a = self.design.clone();
        for (row, s) in sq.iter().enumerate() {
            a.row_mut(row).scale_mut(*s);
        }
        let b = DVector::from_iterator(data.v.len(), data.v.iter().zip(&sq).map(|(v, s)| v * s));
        let svd = a.svd(true, true);
        let tol = 1e-13 * svd.singular_values.max().max(1e-300);
        svd.solve(&b, tol).unwrap_or_else(|_| DVector::zeros(self.exponents.len()))
    }

    fn to_monomial(&self, coef: &DVector<f64>) -> Vec<f64> {
        let mut mono = vec![0.0; self.exponents.len()];
        for (a, e) in self.exponents.iter().enumerate() {
            for (b, f) in self.exponents.iter().enumerate() {
                if f.iter().zip(e).any(|(fi, ei)| fi > ei) {
                    continue;
                }
                let factor: f64 = e.iter().zip(f).map(|(&ei, &fi)| self.table[ei as usize][fi as usize]).product();
                mono[b] += coef[a] * factor;
            }
        }
        mono
    }

    /// `r = 1` (`sup = false`) or `r = inf` (`sup = true`) as a linear program.
    fn lp(&self, data: &FitData, sup: bool) -> Option<DVector<f64>> {
        let p = self.exponents.len();
        let mut prob = Problem::new(OptimizationDirection::Minimize);
        let coef: Vec<_> = (0..p).map(|_| prob.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        let scale = data.v.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let t = sup.then(|| prob.add_var(1.0, (0.0, f64::INFINITY)));
        for (row, &v) in data.v.iter().enumerate() {
            let e = match t {
                Some(t) => t,
                None => prob.add_var(data.w[row], (0.0, f64::INFINITY)),
            };
            let mut lhs: Vec<_> = (0..p).map(|c| (coef[c], self.design[(row, c)])).collect();
            lhs.push((e, -1.0));
            prob.add_constraint(lhs.as_slice(), ComparisonOp::Le, v / scale);
            let mut lhs: Vec<_> = (0..p).map(|c| (coef[c], -self.design[(row, c)])).collect();
            lhs.push((e, -1.0));
            prob.add_constraint(lhs.as_slice(), ComparisonOp::Le, -v / scale);
        }
        let sol = prob.solve().ok()?;
        Some(DVector::from_iterator(p, coef.iter().map(|&c| sol[c] * scale)))
    }

    fn irls(&self, data: &FitData, r: f64, start: DVector<f64>) -> DVector<f64> {
        let mut best = start.clone();
        let mut best_err = data.error(&self.values(&start), r);
        let mut coef = start;
        let floor = 1e-12 * data.v.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut prev = best_err;
        for _ in 0..50 {
            let vals = self.values(&coef);
            let omega: Vec<f64> = data
                .v
                .iter()
                .zip(&vals)
                .zip(&data.w)
                .map(|((a, b), w)| w * (a - b).abs().max(floor).powf(r - 2.0))
                .collect();
            coef = self.wls(data, &omega);
            let err = data.error(&self.values(&coef), r);
            if err < best_err {
                best_err = err;
                best = coef.clone();
            }
            if (prev - err).abs() <= 1e-10 * prev.max(1e-300) {
                break;
            }
            prev = err;
        }
        best
    }
}

/// Almost-best polynomial of degree `< l` on `region` in the `L_r` metric.
pub fn best_poly(phi: &GridFunction, region: &AxisBox, l: usize, r: f64, mode: DegreeMode) -> Result<LocalPoly> {
    if l == 0 {
        return Err(Error::invalid("polynomial order l must be >= 1"));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("exponent r={r} must be positive")));
    }
    let (data, clipped) = FitData::collect(phi, region)?;
    let basis = Basis::new(&data, phi.dim(), l, mode);
    let ls = basis.wls(&data, &data.w);
    let (coef, a_const) = if r == 2.0 {
        (ls, 1.0)
    } else if r == 1.0 || r.is_infinite() {
        let lp = basis
            .lp(&data, r.is_infinite())
            .ok_or_else(|| Error::numerical("best_poly", "linear program failed"))?;
        (lp, 1.05)
    } else if r > 1.0 {
        (basis.irls(&data, r, ls), 1.05)
    } else {
        let start = basis.lp(&data, false).unwrap_or(ls);
        (basis.irls(&data, r, start), 1.25)
    };
    let error = data.error(&basis.values(&coef), r);
    let coeffs = basis.to_monomial(&coef);
    Ok(LocalPoly { region: clipped, order: l, mode, exponents: basis.exponents, coeffs, r, error, a_const })
}

pub fn best_poly_cube(phi: &GridFunction, cube: &DyadicCube, l: usize, r: f64, mode: DegreeMode) -> Result<LocalPoly> {
    if cube.level > phi.level() {
        return Err(Error::numerical("best_poly", "cube smaller than one fine cell"));
    }
    best_poly(phi, &cube_box(cube, 1.0), l, r, mode)
}

/// `E_l(phi, region)_r`, total-degree convention.
pub fn best_error(phi: &GridFunction, region: &AxisBox, l: usize, r: f64) -> Result<f64> {
    Ok(best_poly(phi, region, l, r, DegreeMode::Total)?.error)
}

/// Per-cube almost-best polynomials of a level, the piecewise polynomial `g_k`.
#[derive(Debug, Clone)]
pub struct PolyField {
    pub dim: usize,
    pub level: u32,
    /// Row-major over the level-`k` cubes of the unit box.
    pub polys: Vec<LocalPoly>,
    /// Shared constant: the largest certified constant of the pieces.
    pub a_const: f64,
}

impl PolyField {
    /// Piece owning `x` in the half-open tiling (clamped onto the box).
    pub fn piece(&self, x: &[f64]) -> &LocalPoly {
        let side = 1i64 << self.level;
        let flat = x.iter().fold(0usize, |acc, &xi| {
            let m = ((xi * side as f64).floor() as i64).clamp(0, side - 1);
            acc * side as usize + m as usize
        });
        &self.polys[flat]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.piece(x).eval(x)
    }

    /// `g_k` sampled at the fine cell centers of a grid of level `level`.
    pub fn to_grid(&self, level: u32) -> GridFunction {
        let g = GridFunction::zeros(self.dim, level);
        let values = (0..g.len()).map(|i| self.eval(&g.center(i))).collect();
        GridFunction::new(self.dim, level, values).expect("finite polynomial values")
    }
}

/// Coordinate-degree almost-best polynomials on every level-`k` cube.
pub fn almost_best_field(phi: &GridFunction, k: u32, l: usize, r: f64) -> Result<PolyField> {
    let cubes = cubes_at_level(phi.dim(), k);
    let polys: Vec<LocalPoly> = cubes
        .par_iter()
        .map(|c| best_poly_cube(phi, c, l, r, DegreeMode::Coordinate))
        .collect::<Result<_>>()?;
    let a_const = polys.iter().fold(1.0f64, |m, p| m.max(p.a_const));
    Ok(PolyField { dim: phi.dim(), level: k, polys, a_const })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;

    #[test]
    fn exponent_sets() {
        assert_eq!(exponent_set(2, 2, DegreeMode::Coordinate).len(), 4);
        assert_eq!(exponent_set(2, 2, DegreeMode::Total).len(), 3);
        assert_eq!(exponent_set(1, 3, DegreeMode::Total), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn polynomials_are_fitted_exactly() {
        let phi = sample(|x| 1.0 + x[0] - 2.0 * x[1] + 0.5 * x[0] * x[1], 2, 4).unwrap();
        let q = DyadicCube::new(1, vec![1, 0]);
        for r in [1.0, 1.5, 2.0, f64::INFINITY] {
            let p = best_poly_cube(&phi, &q, 2, r, DegreeMode::Coordinate).unwrap();
            assert!(p.error <= 1e-10, "r={r} err={}", p.error);
            let x = [0.7, 0.2];
            assert!((p.eval(&x) - (1.0 + 0.7 - 0.4 + 0.5 * 0.14)).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_fit_of_square() {
        let k = 10;
        let phi = sample(|x| x[0] * x[0], 1, k).unwrap();
        let q = DyadicCube::new(0, vec![0]);
        let p2 = best_poly_cube(&phi, &q, 1, 2.0, DegreeMode::Total).unwrap();
        assert!((p2.coeffs[0] - 1.0 / 3.0).abs() < 1e-6);
        assert!((p2.error - 2.0 / (3.0 * 5f64.sqrt())).abs() < 1e-5);
        let pinf = best_poly_cube(&phi, &q, 1, f64::INFINITY, DegreeMode::Total).unwrap();
        assert!((pinf.coeffs[0] - 0.5).abs() < 1e-3);
        assert!((pinf.error - 0.5).abs() < 1e-3);
    }

    #[test]
    fn derivatives_follow_chart() {
        let region = AxisBox::new(vec![0.25], vec![0.5]);
        // chart u = (x - 0.5) / 0.25; P = u^2
        let p = LocalPoly::from_coeffs(region, 3, DegreeMode::Total, vec![0.0, 0.0, 1.0]);
        assert!((p.eval(&[0.75]) - 1.0).abs() < 1e-15);
        assert!((p.derivative(&[0.75], &[1]) - 8.0).abs() < 1e-12);
        assert!((p.derivative(&[0.3], &[2]) - 32.0).abs() < 1e-12);
    }

    #[test]
    fn error_monotone_in_order_and_modes() {
        let phi = sample(|x| (4.0 * x[0]).sin() * (1.0 + x[1]).ln(), 2, 4).unwrap();
        let q = AxisBox::unit(2);
        let mut prev = f64::INFINITY;
        for l in 1..=4 {
            let e = best_poly(&phi, &q, l, 2.0, DegreeMode::Total).unwrap().error;
            let ec = best_poly(&phi, &q, l, 2.0, DegreeMode::Coordinate).unwrap().error;
            assert!(e <= prev + 1e-14 && ec <= e + 1e-14);
            prev = e;
        }
    }

    #[test]
    fn small_exponent_branch() {
        let phi = sample(|x| (x[0] - 0.3).abs(), 1, 6).unwrap();
        let p = best_poly(&phi, &AxisBox::unit(1), 2, 0.5, DegreeMode::Total).unwrap();
        let p1 = best_poly(&phi, &AxisBox::unit(1), 2, 1.0, DegreeMode::Total).unwrap();
        assert_eq!(p.a_const, 1.25);
        // the r=1 optimum is a feasible start, so the descent never does worse on it
        let start_err = {
            let vals: Vec<f64> = (0..phi.len()).map(|i| p1.eval(&phi.center(i))).collect();
            let s: f64 = vals.iter().zip(phi.values()).map(|(a, b)| (a - b).abs().sqrt()).sum();
            (s * phi.h()).powi(2)
        };
        assert!(p.error <= start_err * (1.0 + 1e-9));
    }

    #[test]
    fn field_reproduces_piecewise_polynomials() {
        let phi = sample(|x| if x[0] < 0.5 { 2.0 * x[0] } else { 3.0 - x[0] }, 1, 5).unwrap();
        let f = almost_best_field(&phi, 1, 2, 2.0).unwrap();
        let g = f.to_grid(5);
        for (a, b) in g.values().iter().zip(phi.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(f.a_const, 1.0);
        assert!(matches!(best_poly_cube(&phi, &DyadicCube::new(6, vec![0]), 1, 2.0, DegreeMode::Total), Err(Error::Numerical { .. })));
    }
}

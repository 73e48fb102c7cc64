//! Order-`l` differences with domain clipping, averaged differences, the cube
//! functional `delta^l_r` and the modulus of smoothness.
//!
//! Shifts run over the fine lattice `2^-K Z^n`, so for a piecewise-constant
//! function every integral becomes an exact finite sum over (cell, shift) pairs.

use crate::binomial;
use crate::geometry::{AxisBox, DyadicCube};
use crate::gridfn::GridFunction;

/// Order, exponent and the domain convention for a difference functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffParams {
    pub order: usize,
    pub r: f64,
}

/// Which domain clips the segment `[x, x + l h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffDomain {
    /// The whole unit box.
    Full,
    /// The region itself (`delta(Q, Q)`).
    Local,
}

/// Half-open per-axis cell ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl CellBox {
    pub fn whole(g: &GridFunction) -> Self {
        Self { lo: vec![0; g.dim()], hi: vec![g.side(); g.dim()] }
    }

    /// Cells whose centers lie in `region` (clipped to the box).
    pub fn of_region(g: &GridFunction, region: &AxisBox) -> Option<Self> {
        let c = region.clip_unit()?;
        let s = g.side() as f64;
        let mut lo = Vec::with_capacity(g.dim());
        let mut hi = Vec::with_capacity(g.dim());
        for (a, side) in c.lower.iter().zip(&c.sides) {
            // centers (i + 1/2)/s in [a, a + side)
            let first = (a * s - 0.5 - 1e-9).ceil() as i64;
            let last = ((a + side) * s - 0.5 - 1e-9).ceil() as i64;
            let (first, last) = (first.max(0), last.min(g.side()));
            if last <= first {
                return None;
            }
            lo.push(first);
            hi.push(last);
        }
        Some(Self { lo, hi })
    }

    pub fn of_cube(g: &GridFunction, cube: &DyadicCube) -> Self {
        let r = g.cube_cells(cube);
        Self { lo: r.iter().map(|p| p.0).collect(), hi: r.iter().map(|p| p.1).collect() }
    }

    pub fn count(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0) as usize).product()
    }
}

/// Signed binomial weights `C(l, j) (-1)^(l + j)`.
pub fn diff_weights(l: usize) -> Vec<f64> {
    (0..=l).map(|j| binomial(l, j) * if (l + j) % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// `Delta^l(h, [0,1]^n) g(x)` with cell lookup for the samples.
pub fn forward_diff(g: &GridFunction, h: &[f64], x: &[f64], l: usize) -> f64 {
    let end: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + l as f64 * b).collect();
    let inside = |p: &[f64]| p.iter().all(|&v| (0.0..=1.0).contains(&v));
    if !inside(x) || !inside(&end) {
        return 0.0;
    }
    let w = diff_weights(l);
    let mut acc = 0.0;
    let mut p = x.to_vec();
    for (j, wj) in w.iter().enumerate() {
        for i in 0..x.len() {
            p[i] = x[i] + j as f64 * h[i];
        }
        // the point 1.0 itself belongs to the last cell
        let v = g.eval(&p).or_else(|| {
            let q: Vec<f64> = p.iter().map(|&v| v.min(1.0 - 0.5 * g.h())).collect();
            g.eval(&q)
        });
        acc += wj * v.unwrap_or(0.0);
    }
    acc
}

/// Lattice version: `x` a cell index, `h` a cell offset, domain `dom`.
pub fn diff_cells(g: &GridFunction, x: &[i64], h: &[i64], l: usize, dom: &CellBox) -> f64 {
    let n = g.dim();
    for i in 0..n {
        let end = x[i] + l as i64 * h[i];
        if x[i] < dom.lo[i] || x[i] >= dom.hi[i] || end < dom.lo[i] || end >= dom.hi[i] {
            return 0.0;
        }
    }
    let w = diff_weights(l);
    let start = g.flat_index(x) as i64;
    let step = stride_offset(g, h);
    w.iter().enumerate().map(|(j, wj)| wj * g.at((start + j as i64 * step) as usize)).sum()
}

fn stride_offset(g: &GridFunction, h: &[i64]) -> i64 {
    h.iter().fold(0i64, |acc, &hi| acc * g.side() + hi)
}

/// Sum (or max for `r = inf`) of `|Delta^l(h, dom) g(x)|^r` over `x in xs` and lattice
/// shifts in `reach * I^n` (in cell units).
///
/// A shift `j` stands for the cell `(j - 1/2, j + 1/2)` of the `h` variable and is weighted by
/// its overlap with the shift box, which keeps the total shift mass equal to `(2 reach)^n`.
fn double_sum(g: &GridFunction, xs: &CellBox, dom: &CellBox, reach: f64, l: usize, r: f64) -> f64 {
    let n = g.dim();
    let hmax = ((reach - 0.5) - 1e-9).ceil().max(0.0) as i64;
    let axis_weight = |j: i64| (reach - (j.abs() as f64 - 0.5)).clamp(0.0, 1.0);
    let w = diff_weights(l);
    let li = l as i64;
    let side = g.side();
    let vals = g.values();
    let span = (2 * hmax + 1) as usize;
    let mut acc = 0.0f64;
    let mut h = vec![0i64; n];
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    'shifts: for code in 0..span.pow(n as u32) {
        let mut rest = code;
        for i in (0..n).rev() {
            h[i] = (rest % span) as i64 - hmax;
            rest /= span;
        }
        for i in 0..n {
            let a = xs.lo[i].max(dom.lo[i]).max(dom.lo[i] - li * h[i]);
            let b = xs.hi[i].min(dom.hi[i]).min(dom.hi[i] - li * h[i]);
            if b <= a {
                continue 'shifts;
            }
            lo[i] = a;
            hi[i] = b;
        }
        let step = h.iter().fold(0i64, |s, &hi| s * side + hi);
        let hw: f64 = h.iter().map(|&j| axis_weight(j)).product();
        if hw <= 0.0 {
            continue;
        }
        let mut x = lo.clone();
        loop {
            let start = x.iter().fold(0i64, |s, &xi| s * side + xi);
            let mut d = 0.0;
            for (j, wj) in w.iter().enumerate() {
                d += wj * vals[(start + j as i64 * step) as usize];
            }
            let d = d.abs();
            if r.is_infinite() {
                acc = acc.max(d);
            } else if d > 0.0 {
                acc += hw * d.powf(r);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    continue 'shifts;
                }
                axis -= 1;
                x[axis] += 1;
                if x[axis] < hi[axis] {
                    break;
                }
                x[axis] = lo[axis];
            }
        }
    }
    acc
}

/// Per-cell shift energy `S(x) = sum_h w_h |Delta^l(h, [0,1]^n) g(x)|^r` over the shift box
/// `reach * I^n` (cell units); `r = inf` stores `max_h |Delta|` instead.
pub fn shift_energy(g: &GridFunction, reach: f64, l: usize, r: f64) -> Vec<f64> {
    let n = g.dim();
    let side = g.side();
    let w = diff_weights(l);
    let li = l as i64;
    let vals = g.values();
    let hmax = ((reach - 0.5) - 1e-9).ceil().max(0.0) as i64;
    let axis_weight = |j: i64| (reach - (j.abs() as f64 - 0.5)).clamp(0.0, 1.0);
    let span = (2 * hmax + 1) as usize;
    let mut out = vec![0.0f64; g.len()];
    let mut h = vec![0i64; n];
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    'shifts: for code in 0..span.pow(n as u32) {
        let mut rest = code;
        for i in (0..n).rev() {
            h[i] = (rest % span) as i64 - hmax;
            rest /= span;
        }
        let hw: f64 = h.iter().map(|&j| axis_weight(j)).product();
        if hw <= 0.0 {
            continue;
        }
        for i in 0..n {
            lo[i] = 0i64.max(-li * h[i]);
            hi[i] = side.min(side - li * h[i]);
            if hi[i] <= lo[i] {
                continue 'shifts;
            }
        }
        let step = h.iter().fold(0i64, |s, &hi| s * side + hi);
        let mut x = lo.clone();
        loop {
            let start = x.iter().fold(0i64, |s, &xi| s * side + xi);
            let mut d = 0.0;
            for (j, wj) in w.iter().enumerate() {
                d += wj * vals[(start + j as i64 * step) as usize];
            }
            let d = d.abs();
            let slot = &mut out[start as usize];
            if r.is_infinite() {
                *slot = slot.max(d);
            } else if d > 0.0 {
                *slot += hw * d.powf(r);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    continue 'shifts;
                }
                axis -= 1;
                x[axis] += 1;
                if x[axis] < hi[axis] {
                    break;
                }
                x[axis] = lo[axis];
            }
        }
    }
    out
}

/// `delta^l_r(Q_{k,m}, [0,1]^n) g` for every cube of level `k`, row-major.
pub fn level_deltas(g: &GridFunction, k: u32, l: usize, r: f64) -> Vec<f64> {
    let side = (-(k as f64)).exp2();
    let energy = shift_energy(g, side / g.h(), l, r);
    let n = g.dim() as i32;
    crate::geometry::cubes_at_level(g.dim(), k)
        .iter()
        .map(|c| {
            let cells = g.cells_in(&g.cube_cells(c));
            if r.is_infinite() {
                cells.iter().map(|&i| energy[i]).fold(0.0, f64::max)
            } else {
                let sum: f64 = cells.iter().map(|&i| energy[i]).sum();
                (side.powi(-2 * n) * g.cell_volume().powi(2) * sum).powf(1.0 / r)
            }
        })
        .collect()
}

/// `Delta-bar^l_r(t, [0,1]^n) g(x)`: the `t^-n`-normalized `L_r` mean over `h in t I^n`.
pub fn avg_diff(g: &GridFunction, t: f64, x: &[f64], l: usize, r: f64) -> f64 {
    let s = g.side();
    let cell: Vec<i64> = x.iter().map(|&v| ((v * s as f64).floor() as i64).clamp(0, s - 1)).collect();
    avg_diff_cell(g, t, &cell, l, r)
}

/// [`avg_diff`] at a fine cell.
pub fn avg_diff_cell(g: &GridFunction, t: f64, cell: &[i64], l: usize, r: f64) -> f64 {
    let xs = CellBox { lo: cell.to_vec(), hi: cell.iter().map(|c| c + 1).collect() };
    let sum = double_sum(g, &xs, &CellBox::whole(g), t / g.h(), l, r);
    if r.is_infinite() {
        return sum;
    }
    let n = g.dim() as i32;
    (t.powi(-n) * g.cell_volume() * sum).powf(1.0 / r)
}

/// `delta^l_r(Q, Omega) g` for a cube-shaped region of side `side`; `cells` are the
/// fine cells of the region inside the box.
pub fn delta_cells(g: &GridFunction, cells: &CellBox, side: f64, l: usize, r: f64, mode: DiffDomain) -> f64 {
    let dom = match mode {
        DiffDomain::Full => CellBox::whole(g),
        DiffDomain::Local => cells.clone(),
    };
    let sum = double_sum(g, cells, &dom, side / g.h(), l, r);
    if r.is_infinite() {
        return sum;
    }
    let n = g.dim() as i32;
    (side.powi(-2 * n) * g.cell_volume().powi(2) * sum).powf(1.0 / r)
}

/// `delta^l_r(Q, Omega) g` for a dyadic cube.
pub fn delta_lr(g: &GridFunction, q: &DyadicCube, l: usize, r: f64, mode: DiffDomain) -> f64 {
    delta_cells(g, &CellBox::of_cube(g, q), q.side(), l, r, mode)
}

/// `delta^l_r(Q, Omega) g` for a cube-shaped box `Q` (clipped to the unit box, side
/// taken before clipping).
pub fn delta_box(g: &GridFunction, q: &AxisBox, l: usize, r: f64, mode: DiffDomain) -> f64 {
    match CellBox::of_region(g, q) {
        Some(cells) => delta_cells(g, &cells, q.sides[0], l, r, mode),
        None => 0.0,
    }
}

/// `omega_l(g, Q)_r`: max over lattice shifts of `||Delta^l(h, Q) g | L_r||`, at most
/// `h_count` shift magnitudes per axis.
pub fn modulus_cells(g: &GridFunction, cells: &CellBox, l: usize, r: f64, h_count: usize) -> f64 {
    let n = g.dim();
    // shifts with l|h_i| beyond the region width give identically zero differences
    let reach: Vec<i64> = (0..n).map(|i| (cells.hi[i] - cells.lo[i] - 1) / l as i64).collect();
    let axis_values: Vec<Vec<i64>> = reach
        .iter()
        .map(|&m| {
            let all: Vec<i64> = (-m..=m).collect();
            if all.len() <= h_count.max(1) {
                all
            } else {
                let c = h_count.max(2);
                let mut v: Vec<i64> = (0..c).map(|i| -m + ((2 * m) as f64 * i as f64 / (c - 1) as f64).round() as i64).collect();
                v.dedup();
                v
            }
        })
        .collect();
    let counts: Vec<usize> = axis_values.iter().map(|v| v.len()).collect();
    let total: usize = counts.iter().product();
    let mut best = 0.0f64;
    let mut h = vec![0i64; n];
    for code in 0..total {
        let mut rest = code;
        for i in (0..n).rev() {
            h[i] = axis_values[i][rest % counts[i]];
            rest /= counts[i];
        }
        // Delta(-h) is a reflected Delta(h): skip the mirrored half
        if let Some(first) = h.iter().find(|&&v| v != 0) {
            if *first < 0 {
                continue;
            }
        } else {
            continue;
        }
        let v = shift_norm(g, cells, &h, l, r);
        best = best.max(v);
    }
    best
}

/// `||Delta^l(h, Q) g | L_r||` for one lattice shift.
fn shift_norm(g: &GridFunction, cells: &CellBox, h: &[i64], l: usize, r: f64) -> f64 {
    let n = g.dim();
    let li = l as i64;
    let w = diff_weights(l);
    let side = g.side();
    let vals = g.values();
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    for i in 0..n {
        lo[i] = cells.lo[i].max(cells.lo[i] - li * h[i]);
        hi[i] = cells.hi[i].min(cells.hi[i] - li * h[i]);
        if hi[i] <= lo[i] {
            return 0.0;
        }
    }
    let step = h.iter().fold(0i64, |s, &hi| s * side + hi);
    let mut acc = 0.0f64;
    let mut x = lo.clone();
    loop {
        let start = x.iter().fold(0i64, |s, &xi| s * side + xi);
        let d: f64 = w.iter().enumerate().map(|(j, wj)| wj * vals[(start + j as i64 * step) as usize]).sum();
        if r.is_infinite() {
            acc = acc.max(d.abs());
        } else {
            acc += d.abs().powf(r);
        }
        let mut axis = n;
        loop {
            if axis == 0 {
                return if r.is_infinite() { acc } else { (acc * g.cell_volume()).powf(1.0 / r) };
            }
            axis -= 1;
            x[axis] += 1;
            if x[axis] < hi[axis] {
                break;
            }
            x[axis] = lo[axis];
        }
    }
}

/// `omega_l(g, Q)_r` for a dyadic cube.
pub fn modulus(g: &GridFunction, q: &DyadicCube, l: usize, r: f64, h_count: usize) -> f64 {
    modulus_cells(g, &CellBox::of_cube(g, q), l, r, h_count)
}

/// `omega_l(g, Q)_r` for a box region.
pub fn modulus_box(g: &GridFunction, q: &AxisBox, l: usize, r: f64, h_count: usize) -> f64 {
    CellBox::of_region(g, q).map_or(0.0, |c| modulus_cells(g, &c, l, r, h_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;

    #[test]
    fn forward_diff_examples() {
        let g = sample(|x| x[0] * x[0], 1, 8).unwrap();
        let h = 1.0 / 16.0;
        let x = 0.25 + 0.5 / 256.0;
        let d1 = forward_diff(&g, &[h], &[x], 1);
        assert!((d1 - ((x + h).powi(2) - x * x)).abs() < 1e-12);
        assert!((forward_diff(&g, &[h], &[x], 2) - 2.0 * h * h).abs() < 1e-12);
        assert_eq!(forward_diff(&g, &[0.3], &[0.5], 2), 0.0);
    }

    #[test]
    fn polynomials_are_annihilated() {
        let g = sample(|x| 1.0 + x[0] - 3.0 * x[1] + x[0] * x[1] + x[0] * x[0], 2, 5).unwrap();
        let dom = CellBox::whole(&g);
        for h in [[1i64, 0], [2, -1], [-3, 2]] {
            for x in [[10i64, 10], [15, 12]] {
                assert!(diff_cells(&g, &x, &h, 3, &dom).abs() < 1e-10);
            }
        }
        let q = DyadicCube::new(1, vec![0, 1]);
        assert!(delta_lr(&g, &q, 3, 2.0, DiffDomain::Full) < 1e-12);
        assert!(modulus(&g, &q, 3, 1.0, 64) < 1e-12);
    }

    #[test]
    fn averaged_difference_of_identity() {
        let k = 10;
        let g = sample(|x| x[0], 1, k).unwrap();
        let t = 1.0 / 32.0;
        let v = avg_diff(&g, t, &[0.5], 1, 2.0);
        assert!((v - t * (2.0f64 / 3.0).sqrt()).abs() < 1e-3 * t, "{v}");
        let vinf = avg_diff(&g, t, &[0.5], 1, f64::INFINITY);
        assert!((vinf - t).abs() <= g.h() + 1e-15);
        let c = sample(|_| 2.0, 1, 6).unwrap();
        assert_eq!(avg_diff(&c, 0.1, &[0.3], 2, 1.0), 0.0);
    }

    #[test]
    fn delta_brute_force_oracle() {
        let g = sample(|x| x[0], 1, 5).unwrap();
        let q = DyadicCube::new(0, vec![0]);
        let fast = delta_lr(&g, &q, 1, 2.0, DiffDomain::Full);
        let h = g.h();
        let mut s = 0.0;
        for xi in 0..32 {
            for j in -32i64..=32 {
                let x = (xi as f64 + 0.5) * h;
                let w = if j.abs() == 32 { 0.5 } else { 1.0 };
                s += w * forward_diff(&g, &[j as f64 * h], &[x], 1).powi(2) * h * h;
            }
        }
        assert!((fast - s.sqrt()).abs() < 1e-12);
        assert!(fast < (2.0f64 / 3.0).sqrt());
        let d1 = delta_lr(&g, &q, 1, 1.0, DiffDomain::Full);
        // power means with total weight 2 (the shift box has measure 2)
        assert!(d1 / 2.0 <= fast / 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn local_mode_clips_to_cube() {
        let g = sample(|x| if x[0] < 0.5 { 0.0 } else { 1.0 }, 1, 5).unwrap();
        let left = DyadicCube::new(1, vec![0]);
        assert_eq!(delta_lr(&g, &left, 1, 1.0, DiffDomain::Local), 0.0);
        assert!(delta_lr(&g, &left, 1, 1.0, DiffDomain::Full) > 0.0);
    }

    #[test]
    fn level_deltas_match_direct() {
        let g = sample(|x| (3.0 * x[0]).sin() * x[1], 2, 4).unwrap();
        for r in [1.0, 2.0, f64::INFINITY] {
            let fast = level_deltas(&g, 1, 2, r);
            for (c, v) in crate::geometry::cubes_at_level(2, 1).iter().zip(&fast) {
                let direct = delta_lr(&g, c, 2, r, DiffDomain::Full);
                assert!((direct - v).abs() <= 1e-12 * (1.0 + direct));
            }
        }
    }

    #[test]
    fn homogeneity() {
        let g = sample(|x| (5.0 * x[0]).sin(), 1, 6).unwrap();
        let q = DyadicCube::new(1, vec![1]);
        let a = delta_lr(&g, &q, 2, 1.5, DiffDomain::Local);
        let b = delta_lr(&g.scale(-3.0), &q, 2, 1.5, DiffDomain::Local);
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }
}

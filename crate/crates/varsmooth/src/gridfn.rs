//! Piecewise-constant functions on the uniform dyadic grid of the unit box.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{flatten, unflatten, AxisBox, DyadicCube};

/// Values at the `2^(n K)` finest cell centers, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    level: u32,
    values: Vec<f64>,
}

/// A quadrature norm together with its exponent (`inf` for the sup norm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrNorm {
    pub exponent: f64,
    pub value: f64,
}

impl GridFunction {
    pub fn new(dim: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} outside 1..=3")));
        }
        let expected = 1usize << (dim as u32 * level);
        if values.len() != expected {
            return Err(Error::CountMismatch { expected, found: values.len() });
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { position, value });
        }
        Ok(Self { dim, level, values })
    }

    pub fn zeros(dim: usize, level: u32) -> Self {
        Self { dim, level, values: vec![0.0; 1usize << (dim as u32 * level)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Finest level `K_max`.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cells per axis.
    pub fn side(&self) -> i64 {
        1i64 << self.level
    }

    /// Fine cell width `2^-K`.
    pub fn h(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<i64> {
        unflatten(flat, self.side(), self.dim)
    }

    pub fn flat_index(&self, idx: &[i64]) -> usize {
        flatten(idx, self.side())
    }

    pub fn in_range(&self, idx: &[i64]) -> bool {
        let s = self.side();
        idx.iter().all(|&i| (0..s).contains(&i))
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let h = self.h();
        self.multi_index(flat).iter().map(|&i| (i as f64 + 0.5) * h).collect()
    }

    pub fn get(&self, idx: &[i64]) -> Option<f64> {
        self.in_range(idx).then(|| self.values[self.flat_index(idx)])
    }

    pub fn at(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Value of the cell of the half-open tiling containing `x`, `None` outside the box.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let s = self.side() as f64;
        let idx: Vec<i64> = x.iter().map(|&xi| (xi * s).floor() as i64).collect();
        self.get(&idx)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dim: self.dim, level: self.level, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.dim, self.level), (other.dim, other.level), "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { dim: self.dim, level: self.level, values }
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// Cell-index ranges (inclusive start, exclusive end) covering a dyadic cube of level `k <= K`.
    pub fn cube_cells(&self, cube: &DyadicCube) -> Vec<(i64, i64)> {
        assert!(cube.level <= self.level, "cube finer than grid");
        let w = 1i64 << (self.level - cube.level);
        let s = self.side();
        cube.index.iter().map(|&m| ((m * w).clamp(0, s), ((m + 1) * w).clamp(0, s))).collect()
    }

    /// Flat indices of all fine cells inside the given per-axis ranges.
    pub fn cells_in(&self, ranges: &[(i64, i64)]) -> Vec<usize> {
        let mut out = Vec::new();
        if ranges.iter().any(|(a, b)| b <= a) {
            return out;
        }
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(self.flat_index(&idx));
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < ranges[axis].1 {
                    break;
                }
                idx[axis] = ranges[axis].0;
            }
        }
    }

    /// `L_r` norm over a dyadic cube, an exact finite sum.
    pub fn cube_norm(&self, cube: &DyadicCube, r: f64) -> f64 {
        let cells = self.cells_in(&self.cube_cells(cube));
        let vals = cells.iter().map(|&c| self.values[c]);
        lr_from_values(vals, self.cell_volume(), r)
    }
}

/// `(sum w |v|^r)^(1/r)` with uniform weight; `r = inf` gives the max.
pub fn lr_from_values(vals: impl Iterator<Item = f64>, weight: f64, r: f64) -> f64 {
    if r.is_infinite() {
        vals.fold(0.0, |m, v| m.max(v.abs()))
    } else {
        let s: f64 = vals.map(|v| v.abs().powf(r)).sum();
        (weight * s).powf(1.0 / r)
    }
}

/// Sample `f` at the finest cell centers.
pub fn sample(f: impl Fn(&[f64]) -> f64, dim: usize, level: u32) -> Result<GridFunction> {
    let g = GridFunction::zeros(dim, level);
    let values = (0..g.len()).map(|i| f(&g.center(i))).collect();
    GridFunction::new(dim, level, values)
}

/// Per-axis cell ranges and overlap fractions of `region` against the fine grid.
fn overlap_axes(g: &GridFunction, region: &AxisBox) -> Option<Vec<Vec<(i64, f64)>>> {
    let clipped = region.clip_unit()?;
    let h = g.h();
    let s = g.side();
    let mut axes = Vec::with_capacity(g.dim());
    for (lo, side) in clipped.lower.iter().zip(&clipped.sides) {
        let hi = lo + side;
        let a = ((lo / h).floor() as i64).clamp(0, s - 1);
        let b = ((hi / h).ceil() as i64).clamp(a + 1, s);
        let cells: Vec<(i64, f64)> = (a..b)
            .filter_map(|c| {
                let w = ((hi.min((c + 1) as f64 * h) - lo.max(c as f64 * h)) / h).max(0.0);
                (w > 0.0).then_some((c, w))
            })
            .collect();
        if cells.is_empty() {
            return None;
        }
        axes.push(cells);
    }
    Some(axes)
}

/// Midpoint-rule `L_r` norm of `g` over `region` intersected with the unit box.
pub fn lr_norm(g: &GridFunction, region: &AxisBox, r: f64) -> LrNorm {
    LrNorm { exponent: r, value: region_norm(g, region, r) }
}

/// Same as [`lr_norm`] returning the bare value.
pub fn region_norm(g: &GridFunction, region: &AxisBox, r: f64) -> f64 {
    let cells = region_cells(g, region);
    if r.is_infinite() {
        return cells.iter().fold(0.0, |m, &(c, _)| m.max(g.values[c].abs()));
    }
    let vol = g.cell_volume();
    let s: f64 = cells.iter().map(|&(c, w)| w * g.values[c].abs().powf(r)).sum();
    (vol * s).powf(1.0 / r)
}

/// Fine cells meeting `region` (clipped to the unit box) with their overlap fractions.
pub fn region_cells(g: &GridFunction, region: &AxisBox) -> Vec<(usize, f64)> {
    let Some(axes) = overlap_axes(g, region) else {
        return Vec::new();
    };
    let n = g.dim();
    let mut out = Vec::new();
    let mut pos = vec![0usize; n];
    let mut idx = vec![0i64; n];
    loop {
        let mut w = 1.0;
        for i in 0..n {
            let (c, wi) = axes[i][pos[i]];
            idx[i] = c;
            w *= wi;
        }
        out.push((g.flat_index(&idx), w));
        let mut axis = n;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            pos[axis] += 1;
            if pos[axis] < axes[axis].len() {
                break;
            }
            pos[axis] = 0;
        }
    }
}

fn format_values(out: &mut String, values: &[f64]) {
    for v in values {
        // shortest digits that read back to the same bits
        let _ = writeln!(out, "{v:e}");
    }
}

fn parse_values(body: &str, first_line: usize, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for (ln, line) in body.lines().enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { line: first_line + ln, msg: format!("bad number {tok:?}") })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { position: values.len(), value: v });
            }
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(Error::CountMismatch { expected, found: values.len() });
    }
    Ok(values)
}

/// Parse `key=value` tokens of a header line.
pub(crate) fn header_fields(line: &str) -> Result<Vec<(String, String)>> {
    line.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Header(format!("token {tok:?} is not key=value")))
        })
        .collect()
}

pub(crate) fn field<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    let (_, v) = fields
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::Header(format!("missing field {key}")))?;
    v.parse().map_err(|_| Error::Header(format!("bad value {v:?} for {key}")))
}

/// Split off the magic line and the header line.
pub(crate) fn split_header<'a>(text: &'a str, magic: &str) -> Result<(&'a str, &'a str)> {
    let mut parts = text.splitn(3, '\n');
    let first = parts.next().unwrap_or("").trim();
    if first != magic {
        return Err(Error::Header(format!("expected {magic}, found {first:?}")));
    }
    let header = parts.next().ok_or_else(|| Error::Header("missing header line".into()))?;
    Ok((header.trim(), parts.next().unwrap_or("")))
}

pub fn format_gridfn(g: &GridFunction) -> String {
    let mut out = format!("VSGF1\nn={} K={}\n", g.dim, g.level);
    format_values(&mut out, &g.values);
    out
}

pub fn parse_gridfn(text: &str) -> Result<GridFunction> {
    let (header, body) = split_header(text, "VSGF1")?;
    let fields = header_fields(header)?;
    if fields.iter().any(|(k, v)| k == "slab" && v != "0") {
        return Err(Error::Header("slab file where a plain grid function was expected".into()));
    }
    let n: usize = field(&fields, "n")?;
    let k: u32 = field(&fields, "K")?;
    if !(1..=3).contains(&n) || k > 16 {
        return Err(Error::Header(format!("unsupported n={n} K={k}")));
    }
    let values = parse_values(body, 3, 1usize << (n as u32 * k))?;
    GridFunction::new(n, k, values)
}

pub fn read_gridfn(path: impl AsRef<Path>) -> Result<GridFunction> {
    parse_gridfn(&std::fs::read_to_string(path)?)
}

pub fn write_gridfn(g: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, format_gridfn(g))?)
}

/// Function on the slab `[0,1]^n x (-1,1)`: `2^(nK)` x-cells times `2^Ky` y-cells,
/// y the fastest axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabFunction {
    pub dim: usize,
    pub level: u32,
    pub level_y: u32,
    pub values: Vec<f64>,
}

impl SlabFunction {
    pub fn new(dim: usize, level: u32, level_y: u32, values: Vec<f64>) -> Result<Self> {
        let expected = (1usize << (dim as u32 * level)) << level_y;
        if values.len() != expected {
            return Err(Error::CountMismatch { expected, found: values.len() });
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { position, value });
        }
        Ok(Self { dim, level, level_y, values })
    }

    pub fn ny(&self) -> usize {
        1usize << self.level_y
    }

    pub fn nx(&self) -> usize {
        1usize << (self.dim as u32 * self.level)
    }

    /// y spacing `2 / 2^Ky`.
    pub fn hy(&self) -> f64 {
        2.0 / self.ny() as f64
    }

    pub fn y_center(&self, j: usize) -> f64 {
        -1.0 + (j as f64 + 0.5) * self.hy()
    }

    pub fn at(&self, x_flat: usize, j: usize) -> f64 {
        self.values[x_flat * self.ny() + j]
    }

    /// Average of the two rows adjacent to `y = 0`, as a grid function in x.
    pub fn restrict_to_plane(&self) -> GridFunction {
        let j = self.ny() / 2;
        let values = (0..self.nx()).map(|x| 0.5 * (self.at(x, j - 1) + self.at(x, j))).collect();
        GridFunction { dim: self.dim, level: self.level, values }
    }
}

pub fn format_slab(f: &SlabFunction) -> String {
    let mut out = format!("VSGF1\nn={} K={} slab=1 Ky={}\n", f.dim, f.level, f.level_y);
    format_values(&mut out, &f.values);
    out
}

pub fn parse_slab(text: &str) -> Result<SlabFunction> {
    let (header, body) = split_header(text, "VSGF1")?;
    let fields = header_fields(header)?;
    let slab: u32 = field(&fields, "slab")?;
    if slab != 1 {
        return Err(Error::Header("slab=1 required".into()));
    }
    let n: usize = field(&fields, "n")?;
    let k: u32 = field(&fields, "K")?;
    let ky: u32 = field(&fields, "Ky")?;
    if !(1..=2).contains(&n) || k > 14 || ky > 16 || ky == 0 {
        return Err(Error::Header(format!("unsupported n={n} K={k} Ky={ky}")));
    }
    let values = parse_values(body, 3, (1usize << (n as u32 * k)) << ky)?;
    SlabFunction::new(n, k, ky, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_examples() {
        let g = sample(|_| 1.0, 1, 3).unwrap();
        assert_eq!(g.values(), &[1.0; 8]);
        let g = sample(|x| x[0], 1, 1).unwrap();
        assert_eq!(g.values(), &[0.25, 0.75]);
        let g = sample(|x| x[0] * x[1], 2, 1).unwrap();
        assert_eq!(g.values(), &[0.0625, 0.1875, 0.1875, 0.5625]);
        assert!(matches!(sample(|x| 1.0 / x[0].min(0.0), 1, 2), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn norm_examples() {
        let unit = AxisBox::unit(1);
        let one = sample(|_| 1.0, 1, 5).unwrap();
        assert!((region_norm(&one, &unit, 2.0) - 1.0).abs() < 1e-15);
        for k in [4u32, 6, 8] {
            let g = sample(|x| x[0], 1, k).unwrap();
            let err = (region_norm(&g, &unit, 2.0) - (1.0f64 / 3.0).sqrt()).abs();
            assert!(err < 4f64.powi(-(k as i32)), "K={k} err={err}");
            assert_eq!(region_norm(&g, &unit, f64::INFINITY), 1.0 - (-(k as f64) - 1.0).exp2());
        }
        let outside = AxisBox::new(vec![2.0], vec![1.0]);
        assert_eq!(region_norm(&one, &outside, 1.0), 0.0);
    }

    #[test]
    fn fractional_overlap() {
        let one = sample(|_| 1.0, 1, 2).unwrap();
        let b = AxisBox::new(vec![0.1], vec![0.3]);
        assert!((region_norm(&one, &b, 1.0) - 0.3).abs() < 1e-15);
        let g = sample(|x| x[0] + x[1], 2, 3).unwrap();
        let b = AxisBox::new(vec![-0.5, 0.3], vec![1.0, 2.0]);
        let direct = region_norm(&g, &b, 1.0);
        let clipped = region_norm(&g, &AxisBox::new(vec![0.0, 0.3], vec![0.5, 0.7]), 1.0);
        assert!((direct - clipped).abs() < 1e-15);
    }

    #[test]
    fn nesting_identity() {
        let g = sample(|x| (3.0 * x[0]).sin() + x[1], 2, 4).unwrap();
        let r = 1.5;
        for cube in crate::geometry::cubes_at_level(2, 2) {
            let parent = g.cube_norm(&cube, r).powf(r);
            let kids: f64 = cube.children().iter().map(|c| g.cube_norm(c, r).powf(r)).sum();
            assert!((parent - kids).abs() <= 1e-13 * parent.max(1.0));
        }
    }

    #[test]
    fn file_roundtrip_and_errors() {
        let g = sample(|x| (x[0] * 7.1).sin() * 1e-7 + 1.0 / 3.0, 2, 3).unwrap();
        assert_eq!(parse_gridfn(&format_gridfn(&g)).unwrap(), g);
        let short = "VSGF1\nn=1 K=2\n1 2 3\n";
        assert!(matches!(parse_gridfn(short), Err(Error::CountMismatch { expected: 4, found: 3 })));
        let nan = "VSGF1\nn=1 K=1\n1 NaN\n";
        assert!(matches!(parse_gridfn(nan), Err(Error::NonFinite { .. })));
        assert!(matches!(parse_gridfn("VSGF2\nn=1 K=1\n1 2\n"), Err(Error::Header(_))));
        assert!(matches!(parse_gridfn("VSGF1\nn=1\n1 2\n"), Err(Error::Header(_))));
    }

    #[test]
    fn slab_roundtrip() {
        let values: Vec<f64> = (0..4 * 8).map(|i| i as f64 * 0.1).collect();
        let s = SlabFunction::new(1, 2, 3, values).unwrap();
        let back = parse_slab(&format_slab(&s)).unwrap();
        assert_eq!(back, s);
        assert!(parse_gridfn(&format_slab(&s)).is_err());
        assert_eq!(s.restrict_to_plane().values()[0], 0.5 * (3.0 * 0.1 + 4.0 * 0.1));
    }
}

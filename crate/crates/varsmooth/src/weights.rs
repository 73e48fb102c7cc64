//! Weight sequences, their `p`-associated multiple sequences and the class
//! diagnostics (`X`, local `Y`, `A^loc_p`, the shell exponents `delta_1..3`).

use std::fmt::Write as _;

use crate::diffs::CellBox;
use crate::error::{Error, Result};
use crate::geometry::{ball_volume, cube_box, cubes_at_level, neighbors, unflatten, DyadicCube};
use crate::gridfn::{field, header_fields, split_header, GridFunction};

/// Constant allowed in the fitted class inequalities.
pub const CLASS_CONSTANT_CAP: f64 = 1e3;

/// Levels `0..=K` of strictly positive weights, all sampled on one fine grid.
#[derive(Debug, Clone)]
pub struct WeightSequence {
    p: f64,
    levels: Vec<GridFunction>,
}

impl WeightSequence {
    pub fn new(p: f64, levels: Vec<GridFunction>) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::invalid(format!("integrability exponent must be positive, got {p}")));
        }
        let Some(first) = levels.first() else {
            return Err(Error::invalid("empty weight sequence"));
        };
        let (dim, fine) = (first.dim(), first.level());
        if levels.len() > fine as usize + 1 {
            return Err(Error::invalid("more weight levels than the grid resolves"));
        }
        for t in &levels {
            if t.dim() != dim || t.level() != fine {
                return Err(Error::invalid("weight levels on different grids"));
            }
            if let Some(pos) = t.values().iter().position(|&v| v <= 0.0) {
                return Err(Error::invalid(format!("weight not positive at cell {pos}")));
            }
        }
        Ok(Self { p, levels })
    }

    /// `t_k = f(k, x)` sampled at cell centers.
    pub fn from_fn(dim: usize, grid_level: u32, max_level: u32, p: f64, f: impl Fn(u32, &[f64]) -> f64) -> Result<Self> {
        let levels = (0..=max_level)
            .map(|k| crate::gridfn::sample(|x| f(k, x), dim, grid_level))
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, levels)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, k: u32) -> &GridFunction {
        &self.levels[k as usize]
    }
}

/// `t_{k,m}` for `k = 0..=K` and every cube of level `k` in the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeq {
    dim: usize,
    p: f64,
    levels: Vec<Vec<f64>>,
}

impl MultiSeq {
    pub fn new(dim: usize, p: f64, levels: Vec<Vec<f64>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        if !(p > 0.0) {
            return Err(Error::invalid(format!("integrability exponent must be positive, got {p}")));
        }
        if levels.is_empty() {
            return Err(Error::invalid("multiple sequence without levels"));
        }
        for (k, lv) in levels.iter().enumerate() {
            let expected = 1usize << (k * dim);
            if lv.len() != expected {
                return Err(Error::CountMismatch { expected, found: lv.len() });
            }
            if let Some(pos) = lv.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid(format!("entry t[{k}][{pos}] = {} is not a positive number", lv[pos])));
            }
        }
        Ok(Self { dim, p, levels })
    }

    /// Build level by level from `f(k, m)`.
    pub fn from_fn(dim: usize, p: f64, max_level: u32, f: impl Fn(u32, &[i64]) -> f64) -> Result<Self> {
        let levels = (0..=max_level)
            .map(|k| cubes_at_level(dim, k).iter().map(|c| f(k, &c.index)).collect())
            .collect();
        Self::new(dim, p, levels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, k: u32) -> &[f64] {
        &self.levels[k as usize]
    }

    pub fn get(&self, k: u32, m: &[i64]) -> Option<f64> {
        let side = 1i64 << k;
        if k > self.max_level() || m.len() != self.dim || m.iter().any(|&v| !(0..side).contains(&v)) {
            return None;
        }
        Some(self.levels[k as usize][crate::geometry::flatten(m, side)])
    }

    /// Keep levels `0..=k`.
    pub fn truncate(&self, k: u32) -> MultiSeq {
        let keep = (k as usize + 1).min(self.levels.len());
        MultiSeq { dim: self.dim, p: self.p, levels: self.levels[..keep].to_vec() }
    }

    /// Entrywise `f(k, value)`.
    pub fn map(&self, f: impl Fn(u32, f64) -> f64) -> Result<MultiSeq> {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(k, lv)| lv.iter().map(|&v| f(k as u32, v)).collect())
            .collect();
        MultiSeq::new(self.dim, self.p, levels)
    }

    /// `2^(kn/p)`, with the convention `kn/p = 0` for `p = inf`.
    pub fn bar_factor(&self, k: u32) -> f64 {
        if self.p.is_infinite() {
            1.0
        } else {
            ((k as usize * self.dim) as f64 / self.p).exp2()
        }
    }
}

/// `t_{k,m} = ||t_k | L_p(Q_{k,m})||`.
pub fn associate(t: &WeightSequence) -> MultiSeq {
    let dim = t.levels[0].dim();
    let levels = (0..=t.max_level())
        .map(|k| {
            let g = t.level(k);
            cubes_at_level(dim, k).iter().map(|c| g.cube_norm(c, t.p)).collect()
        })
        .collect();
    MultiSeq { dim, p: t.p, levels }
}

/// Piecewise-constant `t-bar_k = 2^(kn/p) t_{k,m}` on `Q_{k,m}`, sampled at `grid_level`.
pub fn bar_sequence(ms: &MultiSeq, grid_level: u32) -> Result<WeightSequence> {
    if grid_level < ms.max_level() {
        return Err(Error::invalid("grid coarser than the multiple sequence"));
    }
    let levels = (0..=ms.max_level())
        .map(|k| {
            let f = ms.bar_factor(k);
            let lv = ms.level(k);
            let shift = grid_level - k;
            let side = 1i64 << k;
            let vals: Vec<f64> = (0..1usize << (grid_level as usize * ms.dim))
                .map(|flat| {
                    let idx = unflatten(flat, 1i64 << grid_level, ms.dim);
                    let m: Vec<i64> = idx.iter().map(|&i| i >> shift).collect();
                    f * lv[crate::geometry::flatten(&m, side)]
                })
                .collect();
            GridFunction::new(ms.dim, grid_level, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    WeightSequence::new(ms.p, levels)
}

/// Fitted exponent and constant of one class inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// Fitted slope on the `log2` scale.
    pub exponent: f64,
    /// Smallest constant making the inequality hold with that slope.
    pub constant: f64,
    /// Root-mean-square distance of the envelope from the fitted line.
    pub residual: f64,
}

/// Least-squares line through the per-gap maxima `(g, M(g))`, then the constant lifting the line
/// over every point.
pub(crate) fn fit_envelope(points: &[(f64, f64)]) -> ExponentFit {
    let n = points.len() as f64;
    if points.len() < 2 {
        let c = points.first().map_or(0.0, |p| p.1);
        return ExponentFit { exponent: 0.0, constant: c.exp2(), residual: 0.0 };
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let lift = points.iter().map(|p| p.1 - slope * p.0).fold(f64::NEG_INFINITY, f64::max);
    let residual = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    ExponentFit { exponent: slope, constant: lift.exp2(), residual }
}

/// Fitted parameters of the `X^{alpha_3}_{alpha, sigma, p}` conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub neighbor_ok: bool,
    pub lower_fit: ExponentFit,
    pub upper_fit: ExponentFit,
}

impl ClassReport {
    pub fn passes(&self) -> bool {
        self.lower_ok && self.upper_ok && self.neighbor_ok
    }
}

/// `(mean over children of v^s)^(1/s)`; `s = inf` is the max, `s = -inf` the min.
fn power_mean(vals: impl Iterator<Item = f64>, s: f64) -> f64 {
    if s == f64::INFINITY {
        return vals.fold(f64::NEG_INFINITY, f64::max);
    }
    if s == f64::NEG_INFINITY {
        return vals.fold(f64::INFINITY, f64::min);
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for v in vals {
        sum += v.powf(s);
        count += 1;
    }
    (sum / count as f64).powf(1.0 / s)
}

/// Flat indices of the level-`j` descendants of cube `m` at level `k`.
fn descendants(dim: usize, k: u32, m: &[i64], j: u32) -> Vec<usize> {
    let w = 1i64 << (j - k);
    let side = 1i64 << j;
    let count = (w as usize).pow(dim as u32);
    (0..count)
        .map(|off| {
            let o = unflatten(off, w, dim);
            let idx: Vec<i64> = m.iter().zip(&o).map(|(a, b)| a * w + b).collect();
            crate::geometry::flatten(&idx, side)
        })
        .collect()
}

/// Largest `|log2|` ratio between neighboring entries over all levels.
pub fn neighbor_exponent(ms: &MultiSeq) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..=ms.max_level() {
        let lv = ms.level(k);
        for c in cubes_at_level(ms.dim, k) {
            let here = lv[crate::geometry::flatten(&c.index, 1 << k)];
            for nb in neighbors(&c) {
                let there = lv[crate::geometry::flatten(&nb.index, 1 << k)];
                worst = worst.max((here / there).log2().abs());
            }
        }
    }
    worst
}

/// Evaluate the left sides of the two growth conditions over all `k <= j` and fit
/// `alpha_1, alpha_2` with their constants; `alpha_3` is the neighbor exponent.
pub fn check_x_class(ms: &MultiSeq, sigma1: f64, sigma2: f64) -> Result<ClassReport> {
    if !(sigma1 > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma exponents must be positive"));
    }
    let kmax = ms.max_level();
    let mut lower: Vec<(f64, f64)> = Vec::new();
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for gap in 0..=kmax {
        let (mut m1, mut m2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in 0..=kmax - gap {
            let j = k + gap;
            let fine = ms.level(j);
            let fj = ms.bar_factor(j);
            let fk = ms.bar_factor(k);
            for c in cubes_at_level(ms.dim, k) {
                let a = fk * ms.level(k)[crate::geometry::flatten(&c.index, 1 << k)];
                let kids = descendants(ms.dim, k, &c.index, j);
                let inv = power_mean(kids.iter().map(|&i| 1.0 / (fj * fine[i])), sigma1);
                let up = power_mean(kids.iter().map(|&i| fj * fine[i]), sigma2);
                m1 = m1.max((a * inv).log2());
                m2 = m2.max((up / a).log2());
            }
        }
        lower.push((gap as f64, m1));
        upper.push((gap as f64, m2));
    }
    let lower_fit = fit_envelope(&lower);
    let upper_fit = fit_envelope(&upper);
    let alpha3 = neighbor_exponent(ms);
    Ok(ClassReport {
        // L1 <= C1 2^(alpha1 (k - j)): the envelope slope is -alpha1
        alpha1: -lower_fit.exponent,
        alpha2: upper_fit.exponent,
        alpha3,
        c1: lower_fit.constant,
        c2: upper_fit.constant,
        sigma1,
        sigma2,
        lower_ok: lower_fit.constant <= CLASS_CONSTANT_CAP,
        upper_ok: upper_fit.constant <= CLASS_CONSTANT_CAP,
        neighbor_ok: alpha3.is_finite(),
        lower_fit,
        upper_fit,
    })
}

/// Pointwise (local `Y`-class) growth exponents of a weight sequence at dyadic points: the
/// `sigma = inf` form of the class conditions applied to the piecewise-constant sequence.
pub fn check_y_class(ms: &MultiSeq) -> Result<ClassReport> {
    // on a bar sequence the sup/inf modifications compare values cell by cell
    let bar = ms.map(|k, v| ms.bar_factor(k) * v)?;
    let pointwise = MultiSeq { p: f64::INFINITY, ..bar };
    check_x_class(&pointwise, f64::INFINITY, f64::INFINITY)
}

/// Outcome of a sampled `A^loc_p` check.
#[derive(Debug, Clone, PartialEq)]
pub struct AlocReport {
    pub constant: f64,
    pub worst_level: u32,
    pub worst_index: Vec<i64>,
    pub worst_dilation: f64,
}

/// Dilations of each dyadic cube used in the `A^loc_p` scan.
pub const ALOC_DILATIONS: [f64; 3] = [1.0, 1.5, 2.0];

/// Sampled supremum of the `A^loc_p` product (`p > 1`) or of the average-to-pointwise
/// ratio (`p = 1`) over dyadic cubes of side `<= a` and their dilations.
pub fn check_aloc_p(gamma: &GridFunction, p: f64, a: f64) -> Result<AlocReport> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::invalid(format!("A^loc_p needs p in [1, inf), got {p}")));
    }
    if gamma.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("weight must be positive"));
    }
    let dual = if p > 1.0 { 1.0 / (p - 1.0) } else { 0.0 };
    let mut best = AlocReport { constant: 0.0, worst_level: 0, worst_index: vec![], worst_dilation: 1.0 };
    for k in 0..=gamma.level() {
        for &dil in &ALOC_DILATIONS {
            if dil * (-(k as f64)).exp2() > a + 1e-12 {
                continue;
            }
            for c in cubes_at_level(gamma.dim(), k) {
                let Some(cells) = CellBox::of_region(gamma, &cube_box(&c, dil)) else { continue };
                let ranges: Vec<(i64, i64)> = cells.lo.iter().zip(&cells.hi).map(|(a, b)| (*a, *b)).collect();
                let idx = gamma.cells_in(&ranges);
                let count = idx.len() as f64;
                let mean = idx.iter().map(|&i| gamma.at(i)).sum::<f64>() / count;
                let value = if p > 1.0 {
                    let dm = idx.iter().map(|&i| gamma.at(i).powf(-dual)).sum::<f64>() / count;
                    mean * dm.powf(1.0 / dual)
                } else {
                    mean / idx.iter().map(|&i| gamma.at(i)).fold(f64::INFINITY, f64::min)
                };
                if value > best.constant {
                    best = AlocReport { constant: value, worst_level: k, worst_index: c.index.clone(), worst_dilation: dil };
                }
            }
        }
    }
    Ok(best)
}

/// Density `gamma^p` on `R^(n+d)`, the first `n` coordinates along the box.
pub enum ShellDensity {
    Constant(f64),
    /// `prod |x_i|^(a_i)` over all `n + d` coordinates.
    ProductPower(Vec<f64>),
    Field(Box<dyn Fn(&[f64]) -> f64 + Sync + Send>),
}

impl std::fmt::Debug for ShellDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShellDensity::Constant(c) => write!(f, "Constant({c})"),
            ShellDensity::ProductPower(a) => write!(f, "ProductPower({a:?})"),
            ShellDensity::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// `int_lo^hi |x|^a dx` for `a > -1`.
fn power_integral(lo: f64, hi: f64, a: f64) -> f64 {
    let prim = |x: f64| x.signum() * x.abs().powf(a + 1.0) / (a + 1.0);
    prim(hi) - prim(lo)
}

/// Radial samples per shell for quadrature.
pub const SHELL_RADIAL_POINTS: usize = 16;
const X_POINTS: usize = 4;
const ANGLE_POINTS: usize = 64;

/// `int_{Xi_{k,m}} gamma^p`.
pub fn shell_mass(density: &ShellDensity, cube: &DyadicCube, d: usize) -> Result<f64> {
    let n = cube.dim();
    let s = cube.side();
    let (inner, outer) = (0.5 * s, s);
    let annulus = if d == 0 { 1.0 } else { ball_volume(d) * (outer.powi(d as i32) - inner.powi(d as i32)) };
    let lower: Vec<f64> = cube.index.iter().map(|&m| m as f64 * s).collect();
    let value = match density {
        ShellDensity::Constant(c) => c * cube.measure() * annulus,
        ShellDensity::ProductPower(a) => {
            if a.len() != n + d {
                return Err(Error::invalid(format!("product weight needs {} exponents", n + d)));
            }
            if a.iter().any(|&e| e <= -1.0) {
                return Err(Error::invalid("product weight exponents must exceed -1"));
            }
            let xpart: f64 = (0..n).map(|i| power_integral(lower[i], lower[i] + s, a[i])).product();
            let ypart = match d {
                0 => 1.0,
                1 => 2.0 * power_integral(inner, outer, a[n]),
                _ => shell_quadrature(d, inner, outer, &|y: &[f64]| {
                    y.iter().zip(&a[n..]).map(|(v, e)| v.abs().powf(*e)).product()
                })?,
            };
            xpart * ypart
        }
        ShellDensity::Field(f) => {
            let h = s / X_POINTS as f64;
            let mut total = 0.0;
            let mut z = vec![0.0; n + d];
            for xi in 0..X_POINTS.pow(n as u32) {
                let o = unflatten(xi, X_POINTS as i64, n);
                for i in 0..n {
                    z[i] = lower[i] + (o[i] as f64 + 0.5) * h;
                }
                let x = z[..n].to_vec();
                let inner_val = if d == 0 {
                    f(&x)
                } else {
                    shell_quadrature(d, inner, outer, &|y: &[f64]| {
                        let mut p = x.clone();
                        p.extend_from_slice(y);
                        f(&p)
                    })?
                };
                total += inner_val * h.powi(n as i32);
            }
            total
        }
    };
    if !value.is_finite() || value < 0.0 {
        return Err(Error::numerical("shell quadrature", format!("mass {value} on cube {:?}", cube.index)));
    }
    Ok(value)
}

/// Midpoint quadrature over `{inner < |y| < outer}` in `R^d`, `d <= 2`.
fn shell_quadrature(d: usize, inner: f64, outer: f64, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let dr = (outer - inner) / SHELL_RADIAL_POINTS as f64;
    let mut total = 0.0;
    match d {
        1 => {
            for i in 0..SHELL_RADIAL_POINTS {
                let r = inner + (i as f64 + 0.5) * dr;
                total += (f(&[r]) + f(&[-r])) * dr;
            }
        }
        2 => {
            let dt = 2.0 * std::f64::consts::PI / ANGLE_POINTS as f64;
            for i in 0..SHELL_RADIAL_POINTS {
                let r = inner + (i as f64 + 0.5) * dr;
                for a in 0..ANGLE_POINTS {
                    let t = (a as f64 + 0.5) * dt;
                    total += f(&[r * t.cos(), r * t.sin()]) * r * dr * dt;
                }
            }
        }
        _ => return Err(Error::invalid(format!("shell quadrature supports d <= 2, got {d}"))),
    }
    Ok(total)
}

/// `gamma-hat_{k,m} = ||gamma | L_p(Xi_{k,m})||` for `k = 0..=max_level`.
pub fn generate_from_weight(density: &ShellDensity, n: usize, d: usize, p: f64, max_level: u32) -> Result<MultiSeq> {
    if !(p > 0.0) || p.is_infinite() {
        return Err(Error::invalid("generated sequences need finite p > 0"));
    }
    let mut levels = Vec::with_capacity(max_level as usize + 1);
    for k in 0..=max_level {
        let lv = cubes_at_level(n, k)
            .iter()
            .map(|c| shell_mass(density, c, d).map(|v| v.powf(1.0 / p)))
            .collect::<Result<Vec<_>>>()?;
        levels.push(lv);
    }
    MultiSeq::new(n, p, levels)
}

/// `t_{k,m} = 2^(ks) gamma-hat_{k,m}`: the product of a generated sequence with the bar form of
/// the constant smoothness `s_k = 2^(ks)`.
pub fn example_weight(gamma_hat: &MultiSeq, s: f64) -> Result<MultiSeq> {
    gamma_hat.map(|k, v| (k as f64 * s).exp2() * v)
}

/// Multiple sequence of `t_k == 2^(ks)`.
pub fn constant_smoothness(n: usize, p: f64, s: f64, max_level: u32) -> Result<MultiSeq> {
    let probe = MultiSeq::from_fn(n, p, max_level, |_, _| 1.0)?;
    probe.map(|k, _| (k as f64 * s).exp2() / probe.bar_factor(k))
}

/// Density with `gamma^p = prod |x_i|^(eps - 1)` on `R^(n+1)`.
pub fn singular_product_density(n: usize, eps: f64) -> ShellDensity {
    ShellDensity::ProductPower(vec![eps - 1.0; n + 1])
}

/// Density with `gamma^p = prod |x_i|^(p - 1 - eps)` on `R^(n+1)`.
pub fn vanishing_product_density(n: usize, p: f64, eps: f64) -> ShellDensity {
    ShellDensity::ProductPower(vec![p - 1.0 - eps; n + 1])
}

/// Shell exponents of a generated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaExponents {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub fit1: ExponentFit,
    pub fit2: ExponentFit,
}

/// Fit the child-sum decay, the boundary-slab concentration and the neighbor exponent.
pub fn estimate_deltas(ms: &MultiSeq, d: usize) -> Result<DeltaExponents> {
    if ms.max_level() < 2 {
        return Err(Error::invalid("at least 3 levels are needed to fit shell exponents"));
    }
    if d == 0 {
        return Err(Error::invalid("shell exponents need d >= 1"));
    }
    let p = ms.p();
    let n = ms.dim();
    let kmax = ms.max_level();
    let mut whole: Vec<(f64, f64)> = Vec::new();
    let mut slab: Vec<(f64, f64)> = Vec::new();
    for gap in 0..=kmax {
        let (mut mw, mut ms_) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in 0..=kmax - gap {
            let j = k + gap;
            let w = 1i64 << gap;
            for c in cubes_at_level(n, k) {
                let parent = ms.level(k)[crate::geometry::flatten(&c.index, 1 << k)].powf(p);
                let kids = descendants(n, k, &c.index, j);
                let pw: Vec<f64> = kids.iter().map(|&i| ms.level(j)[i].powf(p)).collect();
                let total: f64 = pw.iter().sum();
                mw = mw.max((total / parent).log2());
                for axis in 0..n {
                    for end in [0, w - 1] {
                        let part: f64 = (0..kids.len())
                            .filter(|&o| unflatten(o, w, n)[axis] == end)
                            .map(|o| pw[o])
                            .sum();
                        ms_ = ms_.max((part / total).log2());
                    }
                }
            }
        }
        whole.push((gap as f64, mw));
        slab.push((gap as f64, ms_));
    }
    let fit1 = fit_envelope(&whole);
    let fit2 = fit_envelope(&slab);
    Ok(DeltaExponents {
        delta1: -fit1.exponent / d as f64,
        // the slab holds a 2^-gap share of the parent volume
        delta2: -fit2.exponent,
        delta3: neighbor_exponent(ms),
        fit1,
        fit2,
    })
}

/// Partial sums of the nontriviality series.
#[derive(Debug, Clone, PartialEq)]
pub struct NontrivialReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Largest term ratio over the last third of the levels.
    pub tail_ratio: f64,
    /// Geometric estimate of the omitted tail relative to the total.
    pub relative_tail: f64,
    pub converges: bool,
}

/// Tail threshold relative to the extrapolated total.
pub const NONTRIVIAL_TAIL: f64 = 1e-8;

/// Terms `(int_Q 2^(-klp) t-bar_k^p)^(q/p)` on the unit cube and a geometric tail test.
///
/// The series counts as convergent when its late term ratios stay below one and the tail
/// extrapolated past a long horizon drops below `1e-8` of the total.
pub fn check_nontrivial(ms: &MultiSeq, l: usize, q: f64) -> NontrivialReport {
    let p = ms.p();
    let terms: Vec<f64> = (0..=ms.max_level())
        .map(|k| {
            let lv = ms.level(k);
            let base = if p.is_infinite() {
                (-(k as f64) * l as f64).exp2() * lv.iter().cloned().fold(0.0, f64::max)
            } else {
                ((-(k as f64) * l as f64 * p).exp2() * lv.iter().map(|v| v.powf(p)).sum::<f64>()).powf(1.0 / p)
            };
            if q.is_infinite() {
                base
            } else {
                base.powf(q)
            }
        })
        .collect();
    let mut partial = Vec::with_capacity(terms.len());
    let mut acc = 0.0f64;
    for &t in &terms {
        acc = if q.is_infinite() { acc.max(t) } else { acc + t };
        partial.push(acc);
    }
    let start = (2 * terms.len() / 3).max(1);
    let tail_ratio = (start..terms.len())
        .map(|k| terms[k] / terms[k - 1])
        .fold(0.0f64, f64::max);
    let last = *terms.last().unwrap_or(&0.0);
    let total = *partial.last().unwrap_or(&0.0);
    let (relative_tail, converges) = if q.is_infinite() {
        // sup norm: bounded unless the terms still grow
        let grows = tail_ratio > 1.0 + 1e-12;
        (if grows { f64::INFINITY } else { 0.0 }, !grows)
    } else if tail_ratio < 1.0 - 1e-9 {
        // continue the series over a few hundred more levels: sum_{i > H} last * rho^i
        let horizon = 256.0;
        let rho = tail_ratio;
        let remaining = last * rho.powf(horizon) / (1.0 - rho);
        let full = total + last * rho / (1.0 - rho);
        let rel = remaining / full;
        (rel, rel < NONTRIVIAL_TAIL)
    } else {
        (f64::INFINITY, false)
    };
    NontrivialReport { terms, partial_sums: partial, tail_ratio, relative_tail, converges }
}

/// `VSMS1` text form.
pub fn format_multiseq(ms: &MultiSeq) -> String {
    let mut out = format!("VSMS1\nn={} p={} K={}\n", ms.dim, ms.p, ms.max_level());
    for k in 0..=ms.max_level() {
        for (flat, v) in ms.level(k).iter().enumerate() {
            let _ = write!(out, "{k}");
            for m in unflatten(flat, 1 << k, ms.dim) {
                let _ = write!(out, " {m}");
            }
            let _ = writeln!(out, " {v:e}");
        }
    }
    out
}

pub fn parse_multiseq(text: &str) -> Result<MultiSeq> {
    let (header, body) = split_header(text, "VSMS1")?;
    let fields = header_fields(header)?;
    let n: usize = field(&fields, "n")?;
    let p: f64 = field(&fields, "p")?;
    let kmax: u32 = field(&fields, "K")?;
    if !(1..=3).contains(&n) || kmax > 12 {
        return Err(Error::Header(format!("unsupported n={n} K={kmax}")));
    }
    let mut levels: Vec<Vec<Option<f64>>> = (0..=kmax).map(|k| vec![None; 1usize << (k as usize * n)]).collect();
    for (ln, line) in body.lines().enumerate() {
        let line_no = ln + 3;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != n + 2 {
            return Err(Error::Parse { line: line_no, msg: format!("expected {} fields", n + 2) });
        }
        let bad = |t: &str| Error::Parse { line: line_no, msg: format!("bad field {t:?}") };
        let k: u32 = toks[0].parse().map_err(|_| bad(toks[0]))?;
        let m = toks[1..=n].iter().map(|t| t.parse::<i64>().map_err(|_| bad(t))).collect::<Result<Vec<_>>>()?;
        let v: f64 = toks[n + 1].parse().map_err(|_| bad(toks[n + 1]))?;
        if k > kmax || m.iter().any(|&x| !(0..1i64 << k).contains(&x)) {
            return Err(Error::Parse { line: line_no, msg: "index out of range".into() });
        }
        let slot = &mut levels[k as usize][crate::geometry::flatten(&m, 1 << k)];
        if slot.is_some() {
            return Err(Error::Parse { line: line_no, msg: "duplicate entry".into() });
        }
        *slot = Some(v);
    }
    let expected: usize = levels.iter().map(|l| l.len()).sum();
    let found: usize = levels.iter().map(|l| l.iter().filter(|v| v.is_some()).count()).sum();
    if found != expected {
        return Err(Error::CountMismatch { expected, found });
    }
    MultiSeq::new(n, p, levels.into_iter().map(|l| l.into_iter().map(|v| v.unwrap_or(0.0)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn associate_examples() {
        let ones = WeightSequence::from_fn(1, 8, 4, 2.0, |_, _| 1.0).unwrap();
        let ms = associate(&ones);
        for k in 0..=4 {
            assert!(ms.level(k).iter().all(|&v| close(v, (-(k as f64) / 2.0).exp2(), 1e-14)));
        }
        let s = 0.7;
        let scaled = WeightSequence::from_fn(1, 6, 3, 2.0, |k, _| (k as f64 * s).exp2()).unwrap();
        let ms = associate(&scaled);
        assert!(close(ms.level(3)[5], (3.0 * s - 1.5).exp2(), 1e-14));
        let lin = WeightSequence::from_fn(1, 12, 0, 2.0, |_, x| x[0]).unwrap();
        assert!(close(associate(&lin).level(0)[0], 1.0 / 3f64.sqrt(), 1e-6));
    }

    #[test]
    fn bar_then_associate_is_identity() {
        let ms = MultiSeq::from_fn(2, 1.5, 3, |k, m| 1.0 + k as f64 + 0.3 * m[0] as f64 + 0.1 * m[1] as f64).unwrap();
        let bar = bar_sequence(&ms, 4).unwrap();
        let back = associate(&bar);
        for k in 0..=3 {
            for (a, b) in back.level(k).iter().zip(ms.level(k)) {
                assert!(close(*a, *b, 1e-13));
            }
        }
        let ones = constant_smoothness(1, 2.0, 0.0, 3).unwrap();
        let bar = bar_sequence(&ones, 3).unwrap();
        assert!(bar.level(2).values().iter().all(|&v| close(v, 1.0, 1e-14)));
    }

    #[test]
    fn constant_weights_telescope() {
        let s = 1.3;
        let ms = constant_smoothness(1, 2.0, s, 6).unwrap();
        let rep = check_x_class(&ms, f64::INFINITY, 2.0).unwrap();
        assert!(close(rep.alpha1, s, 1e-12) && close(rep.alpha2, s, 1e-12));
        assert!(close(rep.c1, 1.0, 1e-12) && close(rep.c2, 1.0, 1e-12));
        assert!(rep.alpha3.abs() < 1e-12);
        assert!(rep.passes());
    }

    #[test]
    fn varying_constant_in_x_rates() {
        let rates = [0.5, 1.5, 1.0, 2.0, 0.5, 1.0];
        let mut c = vec![1.0];
        for r in rates {
            c.push(c.last().unwrap() * 2f64.powf(r));
        }
        let ms = MultiSeq::from_fn(1, f64::INFINITY, 6, |k, _| c[k as usize]).unwrap();
        let rep = check_y_class(&ms).unwrap();
        assert!(rep.c1 >= 1.0 && rep.c2 >= 1.0);
        assert!(rep.alpha1 <= 2.0 && rep.alpha2 >= 0.5);
    }

    #[test]
    fn outlier_raises_neighbor_exponent() {
        let mut ms = constant_smoothness(1, 2.0, 1.0, 4).unwrap();
        ms.levels[3][4] *= 2.0;
        assert!(neighbor_exponent(&ms) >= 1.0 - 1e-12);
        assert!(MultiSeq::new(1, 2.0, vec![vec![0.0]]).is_err());
    }

    #[test]
    fn aloc_examples() {
        let one = crate::gridfn::sample(|_| 1.0, 1, 6).unwrap();
        assert!(close(check_aloc_p(&one, 2.0, 1.0).unwrap().constant, 1.0, 1e-12));
        let lin = |k| crate::gridfn::sample(|x| x[0] + 0.1, 1, k).unwrap();
        let c6 = check_aloc_p(&lin(6), 2.0, 1.0).unwrap().constant;
        let c7 = check_aloc_p(&lin(7), 2.0, 1.0).unwrap().constant;
        assert!(c6 < 10.0 && (c7 - c6).abs() < 0.1 * c6);
        let sq = |k| crate::gridfn::sample(|x| x[0] * x[0], 1, k).unwrap();
        let a = check_aloc_p(&sq(5), 1.0, 1.0).unwrap().constant;
        let b = check_aloc_p(&sq(7), 1.0, 1.0).unwrap().constant;
        assert!(b > 10.0 * a);
    }

    #[test]
    fn generated_constant_weight() {
        for p in [1.0, 2.0] {
            let ms = generate_from_weight(&ShellDensity::Constant(1.0), 1, 1, p, 4).unwrap();
            for k in 0..=4 {
                let expect = (-2.0 * k as f64).exp2().powf(1.0 / p);
                assert!(ms.level(k).iter().all(|&v| close(v, expect, 1e-13)));
            }
            let de = estimate_deltas(&ms, 1).unwrap();
            assert!(close(de.delta1, 1.0, 1e-12));
            assert!(de.delta3.abs() < 1e-12);
        }
        let field = ShellDensity::Field(Box::new(|_| 1.0));
        let q = generate_from_weight(&field, 1, 1, 2.0, 3).unwrap();
        assert!(close(q.level(3)[2], (-6.0f64).exp2().sqrt(), 1e-12));
    }

    #[test]
    fn power_density_matches_quadrature() {
        let exact = ShellDensity::ProductPower(vec![1.0, 2.0]);
        let quad = ShellDensity::Field(Box::new(|z| z[0].abs() * z[1] * z[1]));
        let c = DyadicCube::new(2, vec![1]);
        let a = shell_mass(&exact, &c, 1).unwrap();
        let b = shell_mass(&quad, &c, 1).unwrap();
        assert!(close(a, b, 1e-2));
        let v = generate_from_weight(&vanishing_product_density(1, 2.0, 0.2), 1, 1, 2.0, 3).unwrap();
        assert!(v.level(3).iter().all(|x| x.is_finite() && *x > 0.0));
    }

    #[test]
    fn singular_weight_separates_classes() {
        let (n, p, l, eps) = (1, 2.0, 1.0, 0.1);
        let gh = generate_from_weight(&singular_product_density(n, eps), n, 1, p, 6).unwrap();
        let t = example_weight(&gh, l).unwrap();
        let x = check_x_class(&t, f64::INFINITY, p).unwrap();
        assert!(x.upper_ok && x.alpha2 < l, "{x:?}");
        let y = check_y_class(&t).unwrap();
        assert!(y.alpha2 >= l + n as f64 / (2.0 * p), "{y:?}");
    }

    #[test]
    fn nontrivial_examples() {
        let (l, q) = (2usize, 2.0);
        let conv = constant_smoothness(1, 2.0, 1.0, 8).unwrap();
        assert!(check_nontrivial(&conv, l, q).converges);
        let edge = constant_smoothness(1, 2.0, 2.0, 8).unwrap();
        assert!(!check_nontrivial(&edge, l, q).converges);
        let probe = constant_smoothness(1, 2.0, 0.0, 8).unwrap();
        let grow = probe.map(|k, v| v * (k as f64 * 2.0).exp2() * (k as f64 + 1.0)).unwrap();
        assert!(!check_nontrivial(&grow, l, q).converges);
    }

    #[test]
    fn multiseq_roundtrip() {
        let ms = MultiSeq::from_fn(2, 2.5, 2, |k, m| 0.1 + k as f64 + m[0] as f64 * 0.37 + m[1] as f64 / 3.0).unwrap();
        let text = format_multiseq(&ms);
        assert_eq!(parse_multiseq(&text).unwrap(), ms);
        let inf = constant_smoothness(1, f64::INFINITY, 1.0, 2).unwrap();
        assert_eq!(parse_multiseq(&format_multiseq(&inf)).unwrap(), inf);
        assert!(parse_multiseq("VSMS1\nn=1 p=2 K=1\n0 0 1.0\n1 0 2.0\n").is_err());
        assert!(parse_multiseq("VSMS1\nn=1 p=2 K=0\n0 0 -1\n").is_err());
    }
}

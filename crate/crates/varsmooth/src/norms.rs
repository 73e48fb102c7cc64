//! Besov-type quasi-norms of variable smoothness, spline approximation numbers,
//! the `N_1..N_4` functionals and the Hardy inequality for sequences.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::atomic;
use crate::diffs::{delta_box, level_deltas, modulus_box, shift_energy};
use crate::error::{Error, Result};
use crate::geometry::{cube_box, cubes_at_level, AxisBox, DyadicCube};
use crate::gridfn::{lr_from_values, GridFunction};
use crate::lq_sum;
use crate::polyfit::best_error;
use crate::splines::{bspline_eval, t_operator, SplineFn};
use crate::weights::{MultiSeq, WeightSequence};

/// Shift magnitudes per axis used for the modulus of smoothness.
pub const MODULUS_SHIFTS: usize = 64;

/// `(l, p, q, r)` and the dilation `c > 1` of the cube-based variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovParams {
    pub l: usize,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub c: f64,
}

impl BesovParams {
    pub fn new(l: usize, p: f64, q: f64, r: f64) -> Result<Self> {
        Self::with_dilation(l, p, q, r, 2.0)
    }

    pub fn with_dilation(l: usize, p: f64, q: f64, r: f64, c: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("difference order l must be at least 1"));
        }
        for (name, v) in [("p", p), ("q", q), ("r", r)] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("exponent {name} must be positive or inf, got {v}")));
            }
        }
        if !(c > 1.0) || c.is_infinite() {
            return Err(Error::invalid(format!("dilation c must exceed 1, got {c}")));
        }
        Ok(Self { l, p, q, r, c })
    }
}

/// Which quasi-norm a breakdown belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Bbar,
    Btilde,
    Seq,
    V2,
    V3,
    V4,
    N1,
    N2,
    N3,
    N4,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Bbar,
        Variant::Btilde,
        Variant::Seq,
        Variant::V2,
        Variant::V3,
        Variant::V4,
        Variant::N1,
        Variant::N2,
        Variant::N3,
        Variant::N4,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Bbar => "bbar",
            Variant::Btilde => "btilde",
            Variant::Seq => "seq",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
            Variant::V4 => "v4",
            Variant::N1 => "n1",
            Variant::N2 => "n2",
            Variant::N3 => "n3",
            Variant::N4 => "n4",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown norm variant {s:?}")))
    }
}

/// Per-level terms, the zero-level term and their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBreakdown {
    pub variant: Variant,
    /// `(k, term_k)` in ascending `k`.
    pub terms: Vec<(i64, f64)>,
    pub zero_term: f64,
    pub q: f64,
    pub total: f64,
}

impl NormBreakdown {
    pub fn new(variant: Variant, terms: Vec<(i64, f64)>, zero_term: f64, q: f64) -> Self {
        let total = lq_sum(terms.iter().map(|t| t.1), q) + zero_term;
        Self { variant, terms, zero_term, q, total }
    }

    /// `l_q` aggregate of the level terms plus the zero-level term.
    pub fn recompute(&self) -> f64 {
        lq_sum(self.terms.iter().map(|t| t.1), self.q) + self.zero_term
    }
}

/// Header row of the breakdown CSV.
pub const CSV_HEADER: &str = "variant,k,term,total";

/// Rows `variant,k,term,total`; the zero-level term is written as `k = -1`.
pub fn breakdown_rows(b: &NormBreakdown, out: &mut String) {
    let tag = b.variant.tag();
    let _ = writeln!(out, "{tag},-1,{:.16e},{:.16e}", b.zero_term, b.total);
    for (k, t) in &b.terms {
        let _ = writeln!(out, "{tag},{k},{t:.16e},{:.16e}", b.total);
    }
}

/// CSV with header for several breakdowns.
pub fn breakdowns_csv(items: &[NormBreakdown]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for b in items {
        breakdown_rows(b, &mut out);
    }
    out
}

fn check_dims(phi: &GridFunction, dim: usize, levels: u32) -> Result<()> {
    if phi.dim() != dim {
        return Err(Error::invalid(format!("function has n={} but weights have n={dim}", phi.dim())));
    }
    if levels > phi.level() {
        return Err(Error::invalid(format!("weights reach level {levels} beyond grid level {}", phi.level())));
    }
    Ok(())
}

/// `(sum_m t^p v^p)^(1/p)`, max for `p = inf`.
fn weighted_lp(t: &[f64], v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        t.iter().zip(v).map(|(a, b)| a * b).fold(0.0, f64::max)
    } else {
        t.iter().zip(v).map(|(a, b)| (a * b).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `(sum_m t^p_{0,m} ||phi|L_r(Q_{0,m})||^p)^(1/p)`: one cube on the unit box.
pub fn zero_level_term(phi: &GridFunction, t00: f64, r: f64) -> f64 {
    t00 * lr_from_values(phi.values().iter().copied(), phi.cell_volume(), r)
}

/// Weighted window sums (or maxima) over `x + half * I^n` in cell units, one axis at a time.
fn window_filter(vals: &[f64], dim: usize, side: i64, half: f64, max: bool) -> Vec<f64> {
    let reach = ((half - 0.5) - 1e-9).ceil().max(0.0) as i64;
    let weight = |j: i64| (half - (j.abs() as f64 - 0.5)).clamp(0.0, 1.0);
    let mut cur = vals.to_vec();
    let s = side as usize;
    for axis in 0..dim {
        let stride = s.pow((dim - 1 - axis) as u32);
        let mut next = vec![0.0; cur.len()];
        for (flat, slot) in next.iter_mut().enumerate() {
            let pos = ((flat / stride) % s) as i64;
            let mut acc = 0.0f64;
            for j in (-reach).max(-pos)..=reach.min(side - 1 - pos) {
                let v = cur[(flat as i64 + j * stride as i64) as usize];
                if max {
                    acc = acc.max(v);
                } else {
                    acc += weight(j) * v;
                }
            }
            *slot = acc;
        }
        cur = next;
    }
    cur
}

/// The norm built from averaged differences `Delta-bar^l_r(2^-k)`, levels `1..=K`.
pub fn norm_bbar(phi: &GridFunction, t: &WeightSequence, bp: &BesovParams) -> Result<NormBreakdown> {
    check_dims(phi, t.level(0).dim(), t.max_level())?;
    if t.level(0).level() != phi.level() {
        return Err(Error::invalid("weight grid and function grid differ"));
    }
    let n = phi.dim() as i32;
    let terms: Vec<(i64, f64)> = (1..=t.max_level())
        .into_par_iter()
        .map(|k| {
            let step = (-(k as f64)).exp2();
            let energy = shift_energy(phi, step / phi.h(), bp.l, bp.r);
            let avg: Vec<f64> = if bp.r.is_infinite() {
                energy
            } else {
                energy.iter().map(|e| (step.powi(-n) * phi.cell_volume() * e).powf(1.0 / bp.r)).collect()
            };
            let weighted = t.level(k).values().iter().zip(&avg).map(|(a, b)| a * b);
            (k as i64, lr_from_values(weighted, phi.cell_volume(), bp.p))
        })
        .collect();
    let t0 = lr_from_values(t.level(0).values().iter().copied(), phi.cell_volume(), bp.p);
    Ok(NormBreakdown::new(Variant::Bbar, terms, zero_level_term(phi, t0, bp.r), bp.q))
}

/// The norm built from `delta^l_r(x + 2^-k I^n)` over sliding windows, levels `1..=K`.
pub fn norm_btilde(phi: &GridFunction, t: &WeightSequence, bp: &BesovParams) -> Result<NormBreakdown> {
    check_dims(phi, t.level(0).dim(), t.max_level())?;
    if t.level(0).level() != phi.level() {
        return Err(Error::invalid("weight grid and function grid differ"));
    }
    let n = phi.dim() as i32;
    let terms: Vec<(i64, f64)> = (1..=t.max_level())
        .into_par_iter()
        .map(|k| {
            let half = (-(k as f64)).exp2();
            let side = 2.0 * half;
            let energy = shift_energy(phi, side / phi.h(), bp.l, bp.r);
            let window = window_filter(&energy, phi.dim(), phi.side(), half / phi.h(), bp.r.is_infinite());
            let delta: Vec<f64> = if bp.r.is_infinite() {
                window
            } else {
                window
                    .iter()
                    .map(|w| (side.powi(-2 * n) * phi.cell_volume().powi(2) * w).powf(1.0 / bp.r))
                    .collect()
            };
            let weighted = t.level(k).values().iter().zip(&delta).map(|(a, b)| a * b);
            (k as i64, lr_from_values(weighted, phi.cell_volume(), bp.p))
        })
        .collect();
    let t0 = lr_from_values(t.level(0).values().iter().copied(), phi.cell_volume(), bp.p);
    Ok(NormBreakdown::new(Variant::Btilde, terms, zero_level_term(phi, t0, bp.r), bp.q))
}

/// The cube-sum form `(sum_m t^p_{k,m} [delta^l_r(Q_{k,m}) phi]^p)^(1/p)`, levels `0..=K`.
pub fn norm_seq(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams) -> Result<NormBreakdown> {
    check_dims(phi, ms.dim(), ms.max_level())?;
    let terms: Vec<(i64, f64)> = (0..=ms.max_level())
        .into_par_iter()
        .map(|k| {
            let d = level_deltas(phi, k, bp.l, bp.r);
            (k as i64, weighted_lp(ms.level(k), &d, bp.p))
        })
        .collect();
    Ok(NormBreakdown::new(Variant::Seq, terms, zero_level_term(phi, ms.level(0)[0], bp.r), bp.q))
}

/// Per-cube local quantity of the dilated-cube variants.
pub fn cube_quantity(phi: &GridFunction, cube: &DyadicCube, bp: &BesovParams, variant: Variant) -> Result<f64> {
    let region = cube_box(cube, bp.c);
    let scale = if bp.r.is_infinite() { 1.0 } else { ((cube.level as usize * phi.dim()) as f64 / bp.r).exp2() };
    match variant {
        Variant::V2 => Ok(delta_box(phi, &region, bp.l, bp.r, crate::diffs::DiffDomain::Local)),
        Variant::V3 => {
            let clipped: AxisBox = region.clip_unit().ok_or_else(|| Error::invalid("dilated cube misses the box"))?;
            Ok(scale * best_error(phi, &clipped, bp.l, bp.r)?)
        }
        Variant::V4 => Ok(scale * modulus_box(phi, &region, bp.l, bp.r, MODULUS_SHIFTS)),
        _ => Err(Error::invalid(format!("{} is not a dilated-cube variant", variant.tag()))),
    }
}

/// Dilated-cube variants: `delta(cQ, cQ)`, `2^(kn/r) E_l(cQ)` and `2^(kn/r) omega_l(cQ)`.
pub fn norm_variant(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams, variant: Variant) -> Result<NormBreakdown> {
    check_dims(phi, ms.dim(), ms.max_level())?;
    let mut terms = Vec::new();
    for k in 0..=ms.max_level() {
        let cubes = cubes_at_level(phi.dim(), k);
        let vals = cubes
            .par_iter()
            .map(|c| cube_quantity(phi, c, bp, variant))
            .collect::<Result<Vec<_>>>()?;
        terms.push((k as i64, weighted_lp(ms.level(k), &vals, bp.p)));
    }
    Ok(NormBreakdown::new(variant, terms, zero_level_term(phi, ms.level(0)[0], bp.r), bp.q))
}

/// Any of the multiple-sequence based norms by tag.
pub fn norm_by_variant(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams, variant: Variant) -> Result<NormBreakdown> {
    match variant {
        Variant::Seq => norm_seq(phi, ms, bp),
        Variant::V2 | Variant::V3 | Variant::V4 => norm_variant(phi, ms, bp, variant),
        Variant::Bbar | Variant::Btilde => {
            let t = crate::weights::bar_sequence(ms, phi.level())?;
            if variant == Variant::Bbar {
                norm_bbar(phi, &t, bp)
            } else {
                norm_btilde(phi, &t, bp)
            }
        }
        Variant::N1 | Variant::N2 | Variant::N3 | Variant::N4 => {
            let nf = n_functionals(phi, ms, bp)?;
            Ok(match variant {
                Variant::N1 => nf.n1,
                Variant::N2 => nf.n2,
                Variant::N3 => nf.n3,
                _ => nf.n4,
            })
        }
    }
}

/// Weight `t_{k,m}` of the level-`k` cube holding each fine cell.
fn cell_weights(ms: &MultiSeq, phi: &GridFunction, k: u32) -> Vec<f64> {
    let shift = phi.level() - k;
    let lv = ms.level(k);
    (0..phi.len())
        .map(|flat| {
            let idx = phi.multi_index(flat);
            let m: Vec<i64> = idx.iter().map(|&i| i >> shift).collect();
            lv[crate::geometry::flatten(&m, 1 << k)]
        })
        .collect()
}

/// `(sum_m t^p_{k,m} ||phi - S|L_r(Q_{k,m})||^p)^(1/p)` with `S` sampled at cell centers.
pub fn spline_residual(phi: &GridFunction, s: &SplineFn, ms: &MultiSeq, p: f64, r: f64) -> f64 {
    let g = s.to_grid(phi.level());
    let diff = phi.sub(&g);
    let k = s.level;
    let norms: Vec<f64> = cubes_at_level(phi.dim(), k).iter().map(|c| diff.cube_norm(c, r)).collect();
    weighted_lp(ms.level(k), &norms, p)
}

/// Weighted least squares over level-`k` splines of the given degree with per-cell weights.
pub fn weighted_spline_fit(phi: &GridFunction, k: u32, degree: usize, weights: &[f64]) -> Result<SplineFn> {
    let n = phi.dim();
    let mut s = SplineFn::zeros(n, degree, k);
    let ncoef = s.len();
    let scale = (k as f64).exp2();
    let mut gram = DMatrix::<f64>::zeros(ncoef, ncoef);
    let mut rhs = DVector::<f64>::zeros(ncoef);
    let per = degree + 1;
    let mut cols = Vec::with_capacity(per.pow(n as u32));
    for flat in 0..phi.len() {
        let x = phi.center(flat);
        let base: Vec<i64> = x.iter().map(|&v| ((v * scale).floor() as i64).min((1 << k) - 1)).collect();
        cols.clear();
        for code in 0..per.pow(n as u32) {
            let mut rest = code;
            let mut m = vec![0i64; n];
            let mut val = 1.0;
            for i in (0..n).rev() {
                m[i] = base[i] - degree as i64 + (rest % per) as i64;
                rest /= per;
                val *= bspline_eval(degree, scale * x[i] - m[i] as f64);
            }
            if let Some(f) = s.flat_of(&m) {
                if val != 0.0 {
                    cols.push((f, val));
                }
            }
        }
        let w = weights[flat];
        let y = phi.at(flat);
        for &(a, va) in &cols {
            rhs[a] += w * va * y;
            for &(b, vb) in &cols {
                gram[(a, b)] += w * va * vb;
            }
        }
    }
    let diag_max = (0..ncoef).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if diag_max <= 0.0 {
        return Ok(s);
    }
    for i in 0..ncoef {
        // lifts the coefficients whose support only grazes the box
        gram[(i, i)] += 1e-13 * diag_max;
    }
    let sol = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14 * diag_max)
            .map_err(|e| Error::numerical("spline least squares", e.to_string()))?,
    };
    s.coeffs = sol.iter().copied().collect();
    if s.coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("spline least squares", "non-finite coefficients"));
    }
    Ok(s)
}

/// `s^l_{-1}, s^l_0, ..., s^l_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxNumbers {
    /// Entry `i` holds `s^l_{i-1}`.
    pub values: Vec<f64>,
    /// True when every entry came from the exact minimization.
    pub exact: bool,
}

impl ApproxNumbers {
    pub fn at(&self, k: i64) -> f64 {
        self.values[(k + 1) as usize]
    }
}

/// Spline approximation numbers: exact weighted least squares for `p = r = 2`, otherwise the
/// value attained by `T^{l-1}_k`, an upper bound for the infimum.
pub fn spline_approx_numbers(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams) -> Result<ApproxNumbers> {
    check_dims(phi, ms.dim(), ms.max_level())?;
    let exact = bp.p == 2.0 && bp.r == 2.0;
    let mut values = vec![zero_level_term(phi, ms.level(0)[0], bp.r)];
    let rest = (0..=ms.max_level())
        .into_par_iter()
        .map(|k| {
            let s = if exact {
                let w: Vec<f64> = cell_weights(ms, phi, k).iter().map(|t| t * t).collect();
                weighted_spline_fit(phi, k, bp.l - 1, &w)?
            } else {
                t_operator(phi, k, bp.l, bp.r)?
            };
            Ok(spline_residual(phi, &s, ms, bp.p, bp.r))
        })
        .collect::<Result<Vec<f64>>>()?;
    values.extend(rest);
    Ok(ApproxNumbers { values, exact })
}

/// `N_1` to `N_4` with their level breakdowns.
#[derive(Debug, Clone, PartialEq)]
pub struct NFunctionals {
    pub n1: NormBreakdown,
    pub n2: NormBreakdown,
    pub n3: NormBreakdown,
    pub n4: NormBreakdown,
}

/// `N_1` (approximation numbers), `N_2` (residuals of `T^{l-1}_k`), `N_4` (coefficient masses of
/// the canonical degree-`l` decomposition) and `N_3` (an upper bound for the infimum over
/// decompositions).
pub fn n_functionals(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams) -> Result<NFunctionals> {
    let s = spline_approx_numbers(phi, ms, bp)?;
    let n1_terms: Vec<(i64, f64)> = (0..s.values.len()).map(|i| (i as i64 - 1, s.values[i])).collect();
    let n1 = NormBreakdown::new(Variant::N1, n1_terms, 0.0, bp.q);

    let zero = zero_level_term(phi, ms.level(0)[0], bp.r);
    let n2_terms = (0..=ms.max_level())
        .into_par_iter()
        .map(|k| {
            let t = t_operator(phi, k, bp.l, bp.r)?;
            Ok((k as i64, spline_residual(phi, &t, ms, bp.p, bp.r)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n2 = NormBreakdown::new(Variant::N2, n2_terms, zero, bp.q);

    let series = atomic::decompose(phi, ms, bp)?;
    let canonical = atomic::coefficient_masses(&series, ms, bp.p);
    let n4 = NormBreakdown::new(Variant::N4, canonical.clone(), 0.0, bp.q);
    let mut n3 = NormBreakdown::new(Variant::N3, canonical, 0.0, bp.q);
    if bp.p == 2.0 && bp.q == 2.0 {
        let refined = atomic::min_mass_decomposition(&series, ms)?;
        let alt = NormBreakdown::new(Variant::N3, atomic::coefficient_masses(&refined, ms, bp.p), 0.0, bp.q);
        if alt.total < n3.total {
            n3 = alt;
        }
    }
    Ok(NFunctionals { n1, n2, n3, n4 })
}

/// Which Hardy bound is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardyBranch {
    /// `|b_k| = (sum_{j >= k} |a_j|^mu)^(1/mu)`, needs `beta > 0`.
    Tail,
    /// `|b_k| = 2^(-k lambda) (sum_{j <= k} 2^(j mu lambda) |a_j|^mu)^(1/mu)`, needs `lambda > beta`.
    Head,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Constant from summing the geometric shifts in `l_{q/mu}`.
    pub bound: f64,
    pub holds: bool,
}

/// `(sum 2^(q k beta) |x_k|^q)^(1/q)`.
fn weighted_lq(x: &[f64], q: f64, beta: f64) -> f64 {
    lq_sum(x.iter().enumerate().map(|(k, v)| (k as f64 * beta).exp2() * v.abs()), q)
}

/// Build `b` with equality in the hypothesis and compare both sides of the Hardy inequality.
pub fn hardy_check(a: &[f64], q: f64, mu: f64, beta: f64, lambda: f64, branch: HardyBranch) -> Result<HardyReport> {
    if !(q > 0.0) || !(mu > 0.0) || mu > q {
        return Err(Error::invalid(format!("need 0 < mu <= q, got mu={mu}, q={q}")));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty sequence"));
    }
    let b: Vec<f64> = match branch {
        HardyBranch::Tail => {
            if !(beta > 0.0) {
                return Err(Error::invalid("the tail bound needs beta > 0"));
            }
            let mut out = vec![0.0; a.len()];
            let mut acc = 0.0f64;
            for k in (0..a.len()).rev() {
                acc = if mu.is_infinite() { acc.max(a[k].abs()) } else { acc + a[k].abs().powf(mu) };
                out[k] = if mu.is_infinite() { acc } else { acc.powf(1.0 / mu) };
            }
            out
        }
        HardyBranch::Head => {
            if !(lambda > beta) || beta < 0.0 {
                return Err(Error::invalid("the head bound needs lambda > beta >= 0"));
            }
            let mut out = vec![0.0; a.len()];
            let mut acc = 0.0f64;
            for k in 0..a.len() {
                let v = (k as f64 * lambda).exp2() * a[k].abs();
                acc = if mu.is_infinite() { acc.max(v) } else { acc + v.powf(mu) };
                let s = if mu.is_infinite() { acc } else { acc.powf(1.0 / mu) };
                out[k] = (-(k as f64) * lambda).exp2() * s;
            }
            out
        }
    };
    let lhs = weighted_lq(&b, q, beta);
    let rhs = weighted_lq(a, q, beta);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let gap = match branch {
        HardyBranch::Tail => beta,
        HardyBranch::Head => lambda - beta,
    };
    let bound = if mu.is_infinite() { 1.0 } else { (1.0 - (-gap * mu).exp2()).powf(-1.0 / mu) };
    Ok(HardyReport { lhs, rhs, ratio, bound, holds: ratio <= bound * (1.0 + 1e-12) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;
    use crate::weights::{bar_sequence, constant_smoothness};

    fn setup(n: usize, k: u32, kw: u32, p: f64, s: f64) -> (MultiSeq, WeightSequence) {
        let ms = constant_smoothness(n, p, s, kw).unwrap();
        let t = bar_sequence(&ms, k).unwrap();
        (ms, t)
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let (ms, t) = setup(1, 6, 4, 2.0, 0.5);
        let bp = BesovParams::new(2, 2.0, 2.0, 2.0).unwrap();
        let z = GridFunction::zeros(1, 6);
        assert_eq!(norm_bbar(&z, &t, &bp).unwrap().total, 0.0);
        assert_eq!(norm_btilde(&z, &t, &bp).unwrap().total, 0.0);
        for v in [Variant::Seq, Variant::V2, Variant::V3, Variant::V4] {
            assert_eq!(norm_by_variant(&z, &ms, &bp, v).unwrap().total, 0.0);
        }
        let nf = n_functionals(&z, &ms, &bp).unwrap();
        assert_eq!(nf.n1.total + nf.n2.total + nf.n3.total + nf.n4.total, 0.0);
    }

    #[test]
    fn polynomials_leave_only_the_zero_term() {
        let (ms, _) = setup(1, 6, 4, 2.0, 0.5);
        let bp = BesovParams::new(2, 2.0, 2.0, 2.0).unwrap();
        let phi = sample(|x| 1.0 + 2.0 * x[0], 1, 6).unwrap();
        for v in [Variant::Seq, Variant::V2, Variant::V3, Variant::V4] {
            let b = norm_by_variant(&phi, &ms, &bp, v).unwrap();
            assert!((b.total - b.zero_term).abs() < 1e-9, "{v:?} {b:?}");
        }
    }

    #[test]
    fn homogeneity_and_recompute() {
        let (ms, t) = setup(1, 6, 4, 2.0, 0.5);
        let bp = BesovParams::new(2, 1.5, 1.0, 1.0).unwrap();
        let phi = sample(|x| (7.0 * x[0]).sin(), 1, 6).unwrap();
        let two = phi.scale(2.0);
        for f in [norm_bbar, norm_btilde] {
            let a = f(&phi, &t, &bp).unwrap();
            let b = f(&two, &t, &bp).unwrap();
            assert!((b.total - 2.0 * a.total).abs() < 1e-12 * b.total);
            assert!((a.recompute() - a.total).abs() < 1e-15 * a.total);
        }
        let a = norm_seq(&phi, &ms, &bp).unwrap();
        let b = norm_seq(&two, &ms, &bp).unwrap();
        assert!((b.total - 2.0 * a.total).abs() < 1e-12 * b.total);
    }

    #[test]
    fn bar_dominates_seq() {
        let (ms, t) = setup(1, 7, 4, 2.0, 0.5);
        let bp = BesovParams::new(2, 2.0, 2.0, 1.0).unwrap();
        let phi = sample(|x| (x[0] - 0.3).abs().sqrt(), 1, 7).unwrap();
        let seq = norm_seq(&phi, &ms, &bp).unwrap();
        let bar = norm_bbar(&phi, &t, &bp).unwrap();
        // level by level the Hoelder step holds with constant 1 for r <= p
        for ((_, a), (_, b)) in seq.terms.iter().skip(1).zip(&bar.terms) {
            assert!(*a <= b * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn locality_of_bump() {
        let bp = BesovParams::new(1, 2.0, 2.0, 2.0).unwrap();
        let phi = sample(|x| if (0.8..0.85).contains(&x[0]) { 1.0 } else { 0.0 }, 1, 7).unwrap();
        let d = level_deltas(&phi, 4, bp.l, bp.r);
        assert!(d[..10].iter().all(|&v| v == 0.0));
        assert!(d[12..14].iter().any(|&v| v > 0.0));
    }

    #[test]
    fn approx_numbers_vanish_on_splines() {
        let (ms, _) = setup(1, 7, 4, 2.0, 0.0);
        let bp = BesovParams::new(2, 2.0, 2.0, 2.0).unwrap();
        let s = SplineFn::from_fn(1, 1, 2, |m| (m[0] as f64 * 0.7).sin());
        let phi = s.to_grid(7);
        let a = spline_approx_numbers(&phi, &ms, &bp).unwrap();
        assert!(a.exact);
        for k in 2..=4 {
            assert!(a.at(k) < 1e-10, "{a:?}");
        }
        let rough = sample(|x| (9.0 * x[0]).sin(), 1, 7).unwrap();
        let b = spline_approx_numbers(&rough, &ms, &bp).unwrap();
        for k in 0..4 {
            assert!(b.at(k + 1) <= b.at(k) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn hardy_examples() {
        let a: Vec<f64> = (0..60).map(|k| (-2.0 * k as f64).exp2()).collect();
        let rep = hardy_check(&a, 1.0, 1.0, 1.0, 0.0, HardyBranch::Tail).unwrap();
        assert!((rep.lhs - 8.0 / 3.0).abs() < 1e-12);
        assert!((rep.rhs - 2.0).abs() < 1e-12);
        assert!((rep.ratio - 4.0 / 3.0).abs() < 1e-12 && rep.holds);
        let mut one = vec![0.0; 20];
        one[5] = 1.0;
        let r = hardy_check(&one, 2.0, 1.0, 1.0, 0.0, HardyBranch::Tail).unwrap();
        assert!(r.ratio <= r.bound);
        assert!(hardy_check(&a, 1.0, 1.0, 0.0, 0.0, HardyBranch::Tail).is_err());
        assert!(hardy_check(&a, 1.0, 2.0, 1.0, 0.0, HardyBranch::Tail).is_err());
        let h = hardy_check(&a, f64::INFINITY, 0.5, 1.0, 2.0, HardyBranch::Head).unwrap();
        assert!(h.holds);
    }

    #[test]
    fn csv_is_stable() {
        let b = NormBreakdown::new(Variant::Seq, vec![(0, 0.1), (1, 1.0 / 3.0)], 0.5, 2.0);
        let csv = breakdowns_csv(&[b.clone()]);
        assert!(csv.starts_with("variant,k,term,total\nseq,-1,5.0000000000000000e-1,"));
        assert_eq!(csv, breakdowns_csv(&[b]));
        assert_eq!("v3".parse::<Variant>().unwrap(), Variant::V3);
    }
}

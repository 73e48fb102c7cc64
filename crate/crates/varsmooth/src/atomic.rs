//! Spline series: the canonical decomposition, reconstruction and the level estimates
//! relating differences to approximation numbers.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{cubes_at_level, unflatten, DyadicCube};
use crate::gridfn::{field, header_fields, split_header, GridFunction};
use crate::lq_sum;
use crate::norms::{norm_seq, spline_approx_numbers, zero_level_term, BesovParams};
use crate::splines::{refine, subdivision_mask, t_operator, SplineFn};
use crate::weights::{check_x_class, ClassReport, DeltaExponents, MultiSeq};

/// `sum_k sum_m beta_{k,m} N_{k,m}` with one coefficient block per level `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSeries {
    pub dim: usize,
    pub degree: usize,
    pub levels: Vec<SplineFn>,
    /// Exponent `r` of the fits that produced the series, if any.
    pub source_r: Option<f64>,
}

impl SplineSeries {
    pub fn new(levels: Vec<SplineFn>) -> Result<Self> {
        let first = levels.first().ok_or_else(|| Error::invalid("empty spline series"))?;
        let (dim, degree) = (first.dim, first.degree);
        for (k, s) in levels.iter().enumerate() {
            if s.level != k as u32 || s.dim != dim || s.degree != degree {
                return Err(Error::invalid(format!("level {k} of the series has mismatched shape")));
            }
            if s.len() != SplineFn::per_axis(degree, s.level).pow(dim as u32) {
                return Err(Error::invalid(format!("level {k} has the wrong coefficient count")));
            }
        }
        Ok(Self { dim, degree, levels, source_r: None })
    }

    pub fn zeros(dim: usize, degree: usize, max_level: u32) -> Self {
        let levels = (0..=max_level).map(|k| SplineFn::zeros(dim, degree, k)).collect();
        Self { dim, degree, levels, source_r: None }
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, k: u32) -> &SplineFn {
        &self.levels[k as usize]
    }

    /// `V_J = sum_{k <= J} v_k` written on level `J`.
    pub fn partial_sum(&self, j: u32) -> SplineFn {
        let j = j.min(self.max_level());
        let mut acc = SplineFn::zeros(self.dim, self.degree, 0);
        for k in 0..=j {
            acc = if k == 0 { self.levels[0].clone() } else { refine(&acc, k) };
            if k > 0 {
                acc.add_assign(&self.levels[k as usize]);
            }
        }
        acc
    }

    pub fn eval(&self, x: &[f64], up_to: u32) -> f64 {
        self.levels.iter().take(up_to as usize + 1).map(|s| s.eval(x)).sum()
    }
}

/// Sample `V_J` at the cells of level `grid_level`.
pub fn reconstruct(s: &SplineSeries, up_to: u32, grid_level: u32) -> Result<GridFunction> {
    if up_to > s.max_level() {
        return Err(Error::invalid(format!("series stops at level {}, asked for {up_to}", s.max_level())));
    }
    Ok(s.partial_sum(up_to).to_grid(grid_level))
}

/// Canonical decomposition with degree-`l` atoms: `U_k = T^l_k(phi, r)`, `v_k = U_k - U_{k-1}`.
pub fn decompose(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams) -> Result<SplineSeries> {
    if ms.max_level() > phi.level() {
        return Err(Error::invalid("weights go deeper than the function grid"));
    }
    let us = (0..=ms.max_level())
        .map(|k| t_operator(phi, k, bp.l + 1, bp.r))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = Vec::with_capacity(us.len());
    for (k, u) in us.iter().enumerate() {
        if k == 0 {
            levels.push(u.clone());
        } else {
            levels.push(u.sub(&refine(&us[k - 1], k as u32)));
        }
    }
    let mut s = SplineSeries::new(levels)?;
    s.source_r = Some(bp.r);
    Ok(s)
}

/// `theta = min{1, p, r}`.
pub fn default_theta(p: f64, r: f64) -> f64 {
    1f64.min(p).min(r)
}

/// `sigma_1 = theta p'_theta` with `p_theta = p / theta`.
pub fn sigma1_for(p: f64, theta: f64) -> f64 {
    let pt = if p.is_infinite() { if theta.is_infinite() { 1.0 } else { f64::INFINITY } } else { p / theta };
    let conj = if pt <= 1.0 {
        f64::INFINITY
    } else if pt.is_infinite() {
        1.0
    } else {
        pt / (pt - 1.0)
    };
    theta * conj
}

#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub class: ClassReport,
    /// The class conditions behind the norm equivalence; a failure is a warning only.
    pub hypotheses_ok: bool,
    pub reconstruction_error: f64,
}

/// Check the class hypotheses and the `L_r` error of `V_K` against `phi`.
pub fn decompose_report(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams, s: &SplineSeries) -> Result<DecomposeReport> {
    let theta = default_theta(bp.p, bp.r);
    let class = check_x_class(ms, sigma1_for(bp.p, theta), bp.p)?;
    let n = phi.dim() as f64;
    let rinv = if bp.r.is_infinite() { 0.0 } else { 1.0 / bp.r };
    let hypotheses_ok =
        class.passes() && class.alpha1 > n * (1.0 / theta - rinv) && (bp.l as f64) > class.alpha2;
    let rec = reconstruct(s, s.max_level(), phi.level())?;
    let err = crate::gridfn::lr_from_values(phi.sub(&rec).values().iter().copied(), phi.cell_volume(), bp.r);
    Ok(DecomposeReport { class, hypotheses_ok, reconstruction_error: err })
}

/// Weight of coefficient `m`: the level cube nearest to its index.
fn coeff_weight(ms: &MultiSeq, k: u32, m: &[i64]) -> f64 {
    let side = 1i64 << k;
    let cm: Vec<i64> = m.iter().map(|&v| v.clamp(0, side - 1)).collect();
    ms.get(k, &cm).expect("clamped index lies in the level")
}

/// `(k, (sum_m t^p_{k,m} |beta_{k,m}|^p)^(1/p))` for each level present in both.
pub fn coefficient_masses(s: &SplineSeries, ms: &MultiSeq, p: f64) -> Vec<(i64, f64)> {
    let top = s.max_level().min(ms.max_level());
    (0..=top)
        .map(|k| {
            let lv = s.level(k);
            let it = lv.coeffs.iter().enumerate().map(|(f, &b)| coeff_weight(ms, k, &lv.index_of(f)) * b.abs());
            let mass = if p.is_infinite() { it.fold(0.0, f64::max) } else { it.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p) };
            (k as i64, mass)
        })
        .collect()
}

/// `l_q(l_p)` coefficient mass of a series.
pub fn series_mass(s: &SplineSeries, ms: &MultiSeq, p: f64, q: f64) -> f64 {
    lq_sum(coefficient_masses(s, ms, p).into_iter().map(|t| t.1), q)
}

/// Transpose of one refinement step: fine coefficients to the coarse index box.
fn refine_adjoint_once(fine: &SplineFn) -> SplineFn {
    let mask = subdivision_mask(fine.degree);
    let taps = mask.len();
    let mut out = SplineFn::zeros(fine.dim, fine.degree, fine.level - 1);
    let mut target = vec![0i64; fine.dim];
    for flat in 0..out.len() {
        let m = out.index_of(flat);
        let mut acc = 0.0;
        for code in 0..taps.pow(fine.dim as u32) {
            let mut rest = code;
            let mut w = 1.0;
            for i in (0..fine.dim).rev() {
                let tap = rest % taps;
                rest /= taps;
                target[i] = 2 * m[i] + tap as i64;
                w *= mask[tap];
            }
            acc += w * fine.coeff(&target);
        }
        out.coeffs[flat] = acc;
    }
    out
}

/// Adjoint of `refine(., fine.level)` from level `target`.
pub fn refine_adjoint(fine: &SplineFn, target: u32) -> SplineFn {
    let mut cur = fine.clone();
    while cur.level > target {
        cur = refine_adjoint_once(&cur);
    }
    cur
}

/// Among all series with the same `V_K` as `s`, the one minimizing `sum t^2 |beta|^2`
/// (conjugate gradients on the level-`K` multiplier).
pub fn min_mass_decomposition(s: &SplineSeries, ms: &MultiSeq) -> Result<SplineSeries> {
    let top = s.max_level();
    if ms.max_level() < top {
        return Err(Error::invalid("weights stop before the series"));
    }
    let target = s.partial_sum(top);
    let inv_w: Vec<Vec<f64>> = (0..=top)
        .map(|k| {
            let lv = s.level(k);
            (0..lv.len()).map(|f| coeff_weight(ms, k, &lv.index_of(f)).powi(-2)).collect()
        })
        .collect();
    let beta_from = |lambda: &SplineFn| -> Vec<SplineFn> {
        (0..=top)
            .map(|k| {
                let mut b = refine_adjoint(lambda, k);
                for (v, w) in b.coeffs.iter_mut().zip(&inv_w[k as usize]) {
                    *v *= w;
                }
                b
            })
            .collect()
    };
    let apply = |lambda: &SplineFn| -> SplineFn {
        let mut acc = SplineFn::zeros(s.dim, s.degree, top);
        for b in beta_from(lambda) {
            acc.add_assign(&refine(&b, top));
        }
        acc
    };
    let dot = |a: &SplineFn, b: &SplineFn| a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum::<f64>();
    let mut lambda = SplineFn::zeros(s.dim, s.degree, top);
    let mut res = target.clone();
    let mut dir = res.clone();
    let mut rr = dot(&res, &res);
    let stop = rr * 1e-26;
    for _ in 0..(4 * target.len()).max(50) {
        if rr <= stop || rr == 0.0 {
            break;
        }
        let ad = apply(&dir);
        let alpha = rr / dot(&dir, &ad);
        if !alpha.is_finite() {
            return Err(Error::numerical("min_mass_decomposition", "breakdown in conjugate gradients"));
        }
        for i in 0..lambda.len() {
            lambda.coeffs[i] += alpha * dir.coeffs[i];
            res.coeffs[i] -= alpha * ad.coeffs[i];
        }
        let next = dot(&res, &res);
        let beta = next / rr;
        rr = next;
        for i in 0..dir.len() {
            dir.coeffs[i] = res.coeffs[i] + beta * dir.coeffs[i];
        }
    }
    let mut out = SplineSeries::new(beta_from(&lambda))?;
    out.source_r = s.source_r;
    Ok(out)
}

/// Both sides of the convergence estimate for `V_k = partial sums` of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBound {
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Left side uses `2^(knp/r) ||phi - V_k||`, right side `2^(knp/theta) ||v_k||`, with `phi = V_K`.
pub fn series_norm_bound(s: &SplineSeries, ms: &MultiSeq, bp: &BesovParams, grid_level: u32) -> Result<SeriesBound> {
    let top = s.max_level();
    if ms.max_level() < top || grid_level < top {
        return Err(Error::invalid("weights or grid coarser than the series"));
    }
    let theta = default_theta(bp.p, bp.r);
    let n = s.dim as f64;
    let level_grids: Vec<GridFunction> = s.levels.iter().map(|v| v.to_grid(grid_level)).collect();
    let mut partial = GridFunction::zeros(s.dim, grid_level);
    let mut partials = Vec::with_capacity(level_grids.len());
    for g in &level_grids {
        partial = partial.add(g);
        partials.push(partial.clone());
    }
    let phi = partials.last().cloned().expect("nonempty series");
    let mut lhs_terms = Vec::new();
    let mut rhs_terms = Vec::new();
    for k in 0..=top {
        let cubes: Vec<DyadicCube> = cubes_at_level(s.dim, k);
        let t = ms.level(k);
        let tail = phi.sub(&partials[k as usize]);
        let scale = |e: f64| if e.is_infinite() { 1.0 } else { (k as f64 * n / e).exp2() };
        let sum = |g: &GridFunction, e: f64| {
            let it = cubes.iter().zip(t).map(|(c, tw)| tw * scale(e) * g.cube_norm(c, bp.r));
            if bp.p.is_infinite() { it.fold(0.0, f64::max) } else { it.map(|v| v.powf(bp.p)).sum::<f64>().powf(1.0 / bp.p) }
        };
        lhs_terms.push(sum(&tail, bp.r));
        rhs_terms.push(sum(&level_grids[k as usize], theta));
    }
    let lhs = lq_sum(lhs_terms, bp.q) + zero_level_term(&phi, ms.level(0)[0], bp.r);
    let rhs = lq_sum(rhs_terms, bp.q);
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
    Ok(SeriesBound { theta, lhs, rhs, ratio })
}

/// Which level estimate to test.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelMode {
    /// Degree `l-1` splines and the exponents of a generating weight.
    Generated { deltas: DeltaExponents, d: usize, eps: f64 },
    /// Degree `l` splines, exponent `l - alpha_2`.
    Associated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub exponent: f64,
    pub mu: f64,
    /// `(k, lhs, rhs, lhs / rhs)`.
    pub rows: Vec<(i64, f64, f64, f64)>,
    pub max_ratio: f64,
}

/// Per-level comparison of `(sum_m t^p [delta(Q_{k,m})]^p)^(1/p)` with the Hardy-type aggregate
/// of approximation numbers. The two terms `s_j` and `s_{j-1}` of the last step are merged by a max.
pub fn level_inequality_check(phi: &GridFunction, ms: &MultiSeq, bp: &BesovParams, alpha2: f64, mode: LevelMode) -> Result<LevelReport> {
    let mu = 1f64.min(bp.p).min(bp.r);
    let (exponent, spline_bp) = match &mode {
        LevelMode::Associated => ((bp.l as f64) - alpha2, BesovParams { l: bp.l + 1, ..*bp }),
        LevelMode::Generated { deltas, d, eps } => {
            if bp.p.is_infinite() || bp.r.is_infinite() {
                return Err(Error::invalid("the generated-weight estimate needs finite p and r"));
            }
            let d1 = deltas.delta1 - *eps;
            let d2 = deltas.delta2 - *eps;
            let lam = (bp.l as f64).min(bp.l as f64 - 1.0 + d2 / bp.p);
            (lam + *d as f64 * d1 / bp.p - alpha2, *bp)
        }
    };
    let s = spline_approx_numbers(phi, ms, &spline_bp)?;
    let lhs = norm_seq(phi, ms, bp)?;
    let mut rows = Vec::new();
    let mut max_ratio = 0.0f64;
    for &(k, left) in &lhs.terms {
        let mut acc = 0.0;
        for j in -1..=k {
            let sj = s.at(j).max(if j > -1 { s.at(j - 1) } else { 0.0 });
            acc += (j as f64 * mu * exponent).exp2() * sj.powf(mu);
        }
        let right = (-(k as f64) * exponent).exp2() * acc.powf(1.0 / mu);
        let ratio = if right > 0.0 { left / right } else if left > 0.0 { f64::INFINITY } else { 0.0 };
        max_ratio = max_ratio.max(ratio);
        rows.push((k, left, right, ratio));
    }
    Ok(LevelReport { exponent, mu, rows, max_ratio })
}

pub fn format_series(s: &SplineSeries) -> String {
    let mut out = format!("VSSS1\nn={} degree={} K={}\n", s.dim, s.degree, s.max_level());
    for lv in &s.levels {
        for (flat, b) in lv.coeffs.iter().enumerate() {
            let _ = write!(out, "{}", lv.level);
            for m in lv.index_of(flat) {
                let _ = write!(out, " {m}");
            }
            let _ = writeln!(out, " {b:e}");
        }
    }
    out
}

/// Entries not listed are zero; repeated entries are rejected.
pub fn parse_series(text: &str) -> Result<SplineSeries> {
    let (header, body) = split_header(text, "VSSS1")?;
    let fields = header_fields(header)?;
    let n: usize = field(&fields, "n")?;
    let degree: usize = field(&fields, "degree")?;
    let kmax: u32 = field(&fields, "K")?;
    if !(1..=3).contains(&n) || kmax > 12 || degree > 8 {
        return Err(Error::Header(format!("unsupported n={n} degree={degree} K={kmax}")));
    }
    let mut s = SplineSeries::zeros(n, degree, kmax);
    let mut seen: Vec<Vec<bool>> = s.levels.iter().map(|l| vec![false; l.len()]).collect();
    for (ln, line) in body.lines().enumerate() {
        let line_no = ln + 3;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: line_no, msg };
        if toks.len() != n + 2 {
            return Err(bad(format!("expected {} fields, found {}", n + 2, toks.len())));
        }
        let k: u32 = toks[0].parse().map_err(|_| bad(format!("bad level {:?}", toks[0])))?;
        if k > kmax {
            return Err(bad(format!("level {k} above K={kmax}")));
        }
        let m = toks[1..=n]
            .iter()
            .map(|t| t.parse::<i64>().map_err(|_| bad(format!("bad index {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let v: f64 = toks[n + 1].parse().map_err(|_| bad(format!("bad value {:?}", toks[n + 1])))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite coefficient {v}")));
        }
        let lv = &mut s.levels[k as usize];
        let flat = lv.flat_of(&m).ok_or_else(|| bad(format!("index {m:?} outside level {k}")))?;
        if std::mem::replace(&mut seen[k as usize][flat], true) {
            return Err(bad(format!("duplicate entry {k} {m:?}")));
        }
        lv.coeffs[flat] = v;
    }
    Ok(s)
}

/// Level-`k` cubes as unflattened indices, used by callers that iterate coefficient blocks.
pub fn level_indices(dim: usize, k: u32) -> Vec<Vec<i64>> {
    (0..1usize << (k as usize * dim)).map(|f| unflatten(f, 1 << k, dim)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sample;
    use crate::weights::constant_smoothness;

    fn bp(l: usize) -> BesovParams {
        BesovParams::new(l, 2.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn spline_round_trip() {
        let ms = constant_smoothness(1, 2.0, 0.5, 5).unwrap();
        let s = SplineFn::from_fn(1, 2, 3, |m| ((m[0] * 3) as f64).cos());
        let phi = s.to_grid(7);
        let series = decompose(&phi, &ms, &bp(2)).unwrap();
        let rec = reconstruct(&series, 5, 7).unwrap();
        let err = phi.sub(&rec).values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-9, "{err}");
        for k in 4..=5 {
            assert!(series.level(k).coeffs.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn polynomial_lives_on_level_zero() {
        let ms = constant_smoothness(2, 2.0, 0.5, 3).unwrap();
        let phi = sample(|x| x[0] * x[1] + x[0] * x[0], 2, 5).unwrap();
        let series = decompose(&phi, &ms, &bp(2)).unwrap();
        for k in 1..=3 {
            assert!(series.level(k).coeffs.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn adjoint_matches_refine() {
        let a = SplineFn::from_fn(2, 1, 1, |m| (m[0] + 2 * m[1]) as f64 * 0.3 + 1.0);
        let b = SplineFn::from_fn(2, 1, 3, |m| ((m[0] * 7 + m[1]) % 5) as f64 - 2.0);
        let lhs: f64 = refine(&a, 3).coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum();
        let rhs: f64 = refine_adjoint(&b, 1).coeffs.iter().zip(&a.coeffs).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn min_mass_keeps_function_and_lowers_mass() {
        let ms = constant_smoothness(1, 2.0, 1.0, 4).unwrap();
        let phi = sample(|x| (6.0 * x[0]).sin(), 1, 7).unwrap();
        let series = decompose(&phi, &ms, &bp(1)).unwrap();
        let best = min_mass_decomposition(&series, &ms).unwrap();
        let a = series.partial_sum(4);
        let b = best.partial_sum(4);
        assert!(a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| (x - y).abs() < 1e-9));
        assert!(series_mass(&best, &ms, 2.0, 2.0) <= series_mass(&series, &ms, 2.0, 2.0) * (1.0 + 1e-12));
    }

    #[test]
    fn series_format_round_trip() {
        let mut s = SplineSeries::zeros(2, 1, 2);
        s.levels[1].coeffs[3] = 0.25;
        s.levels[2].coeffs[0] = -1.5e-7;
        let text = format_series(&s);
        assert_eq!(parse_series(&text).unwrap(), s);
        let dup = format!("{text}2 -1 -1 1\n");
        assert!(parse_series(&dup).is_err());
    }

    #[test]
    fn single_level_bound() {
        let ms = constant_smoothness(1, 2.0, 0.5, 3).unwrap();
        let mut s = SplineSeries::zeros(1, 1, 3);
        s.levels[0].coeffs[1] = 1.0;
        let b = series_norm_bound(&s, &ms, &bp(1), 6).unwrap();
        assert!(b.ratio.is_finite() && b.ratio <= 2.0, "{b:?}");
    }

    #[test]
    fn level_check_associated_is_finite() {
        let ms = constant_smoothness(1, 2.0, 0.5, 5).unwrap();
        let phi = sample(|x| (x[0] - 0.4).abs(), 1, 7).unwrap();
        let rep = level_inequality_check(&phi, &ms, &bp(2), 0.5, LevelMode::Associated).unwrap();
        assert!(rep.max_ratio.is_finite() && rep.max_ratio < 1e3, "{rep:?}");
    }
}

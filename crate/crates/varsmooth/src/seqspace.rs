//! Mixed sequence spaces `l_q(beta l_p(w))` on finite truncations and their embeddings.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::weights::fit_envelope;

/// Levels `j = 1..=J` with outer weights `beta_j` and inner weights `w_{j,m}`, `m = 0..|M_j|`
/// ordered by increasing `|m|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqSpace {
    pub p: f64,
    pub q: f64,
    pub beta: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

/// Coefficients `a_{j,m}` shaped like a space.
pub type Bundle = Vec<Vec<f64>>;

fn lp(vals: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        vals.fold(0.0, |a, v| a.max(v.abs()))
    } else {
        vals.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl SeqSpace {
    pub fn new(p: f64, q: f64, beta: Vec<f64>, w: Vec<Vec<f64>>) -> Result<Self> {
        if !(p > 0.0) || !(q > 0.0) {
            return Err(Error::invalid(format!("exponents must be positive, got p={p}, q={q}")));
        }
        if beta.is_empty() || beta.len() != w.len() {
            return Err(Error::invalid("need one inner weight block per level"));
        }
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !beta.iter().copied().all(ok) || !w.iter().flatten().copied().all(ok) {
            return Err(Error::invalid("all weights must be positive and finite"));
        }
        if w.iter().any(|b| b.is_empty()) {
            return Err(Error::invalid("empty index set"));
        }
        Ok(Self { p, q, beta, w })
    }

    pub fn levels(&self) -> usize {
        self.beta.len()
    }

    pub fn truncate(&self, levels: usize) -> Self {
        let j = levels.min(self.levels());
        Self { p: self.p, q: self.q, beta: self.beta[..j].to_vec(), w: self.w[..j].to_vec() }
    }

    pub fn same_shape(&self, other: &SeqSpace) -> bool {
        self.levels() == other.levels() && self.w.iter().zip(&other.w).all(|(a, b)| a.len() == b.len())
    }
}

/// `(sum_j beta_j^q (sum_m w^p_{j,m} |a_{j,m}|^p)^(q/p))^(1/q)`.
pub fn seq_norm(a: &Bundle, sp: &SeqSpace) -> Result<f64> {
    if a.len() != sp.levels() || a.iter().zip(&sp.w).any(|(x, w)| x.len() != w.len()) {
        return Err(Error::invalid("bundle shape differs from the space"));
    }
    let blocks = a
        .iter()
        .zip(&sp.w)
        .zip(&sp.beta)
        .map(|((row, w), b)| b * lp(row.iter().zip(w).map(|(x, wi)| x * wi), sp.p));
    Ok(lp(blocks, sp.q))
}

/// `1 / max(0, 1/e2 - 1/e1)`, infinite when the bracket vanishes.
pub fn star_exponent(e1: f64, e2: f64) -> f64 {
    let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
    let d = inv(e2) - inv(e1);
    if d <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmbeddingOptions {
    /// Treat each `M_j` as a truncation of an infinite index set, which brings in the
    /// divergence condition on `w^1 / w^2` for `p* = inf`.
    pub infinite_index: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVerdict {
    pub p_star: f64,
    pub q_star: f64,
    /// `B_j = (beta^2_j / beta^1_j) ||w^2_j / w^1_j | l_{p*}||`.
    pub level_values: Vec<f64>,
    /// `l_{q*}` aggregate of the level values over the truncation.
    pub value: f64,
    /// Slope of `log2 B_j` over the second half of the levels.
    pub trend: f64,
    pub continuous: bool,
    /// Vanishing level values, required when `q* = inf`.
    pub level_limit: Option<bool>,
    /// Growth of `w^1 / w^2` in `|m|`, evaluated when `p* = inf`.
    pub index_limit: Option<bool>,
    pub compact: bool,
    /// Limits are inferred from trends over a finite truncation.
    pub asymptotic_inferred: bool,
}

/// Decay slope above which a level sequence counts as summable or bounded.
pub const TREND_TOLERANCE: f64 = 0.05;

fn quartile_means(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    let qn = (n / 4).max(1);
    let first = v[..qn].iter().sum::<f64>() / qn as f64;
    let last = v[n - qn..].iter().sum::<f64>() / qn as f64;
    (first, last)
}

fn slope(vals: &[f64]) -> f64 {
    if vals.len() < 2 {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, v)| (i as f64, v.max(1e-300).log2())).collect();
    fit_envelope(&pts).exponent
}

/// Continuity and compactness of `l_{q1}(beta^1 l_{p1}(w^1)) -> l_{q2}(beta^2 l_{p2}(w^2))`.
pub fn embedding_criterion(sp1: &SeqSpace, sp2: &SeqSpace, opts: EmbeddingOptions) -> Result<EmbeddingVerdict> {
    if !sp1.same_shape(sp2) {
        return Err(Error::invalid("spaces must share their index sets"));
    }
    let p_star = star_exponent(sp1.p, sp2.p);
    let q_star = star_exponent(sp1.q, sp2.q);
    let level_values: Vec<f64> = (0..sp1.levels())
        .map(|j| {
            let ratios = sp2.w[j].iter().zip(&sp1.w[j]).map(|(a, b)| a / b);
            sp2.beta[j] / sp1.beta[j] * lp(ratios, p_star)
        })
        .collect();
    let value = lp(level_values.iter().copied(), q_star);
    let half = level_values.len() / 2;
    let trend = slope(&level_values[half..]);
    let continuous = if q_star.is_infinite() { trend <= TREND_TOLERANCE } else { trend < -TREND_TOLERANCE };
    let level_limit = q_star.is_infinite().then(|| {
        let (first, last) = quartile_means(&level_values);
        last <= 0.5 * first && trend < 0.0
    });
    let index_limit = (p_star.is_infinite() && opts.infinite_index).then(|| {
        sp1.w.iter().zip(&sp2.w).all(|(w1, w2)| {
            let r: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a / b).collect();
            let (first, last) = quartile_means(&r);
            last >= 2.0 * first && slope(&r) > 0.0
        })
    });
    let compact = continuous && level_limit.unwrap_or(true) && index_limit.unwrap_or(true);
    Ok(EmbeddingVerdict {
        p_star,
        q_star,
        level_values,
        value,
        trend,
        continuous,
        level_limit,
        index_limit,
        compact,
        asymptotic_inferred: true,
    })
}

/// Bundle attaining the discrete Hoelder bound level by level and across levels.
fn extremal_bundle(sp1: &SeqSpace, sp2: &SeqSpace) -> Bundle {
    let p_star = star_exponent(sp1.p, sp2.p);
    let q_star = star_exponent(sp1.q, sp2.q);
    let mut blocks = Vec::with_capacity(sp1.levels());
    let mut level_vals = Vec::with_capacity(sp1.levels());
    for j in 0..sp1.levels() {
        let rho: Vec<f64> = sp2.w[j].iter().zip(&sp1.w[j]).map(|(a, b)| a / b).collect();
        // c_m = w^1 a_m; the maximizer is rho^(p*/p1), or the largest rho alone for p* = inf
        let c: Vec<f64> = if p_star.is_infinite() {
            let best = rho.iter().enumerate().fold(0, |bi, (i, v)| if *v > rho[bi] { i } else { bi });
            (0..rho.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
        } else {
            let e = if sp1.p.is_infinite() { 0.0 } else { p_star / sp1.p };
            rho.iter().map(|r| r.powf(e)).collect()
        };
        let a: Vec<f64> = c.iter().zip(&sp1.w[j]).map(|(ci, w)| ci / w).collect();
        let n1 = sp1.beta[j] * lp(a.iter().zip(&sp1.w[j]).map(|(x, w)| x * w), sp1.p);
        let n2 = sp2.beta[j] * lp(a.iter().zip(&sp2.w[j]).map(|(x, w)| x * w), sp2.p);
        level_vals.push(if n1 > 0.0 { n2 / n1 } else { 0.0 });
        blocks.push(a.into_iter().map(|x| x / n1).collect::<Vec<f64>>());
    }
    let scale: Vec<f64> = if q_star.is_infinite() {
        let best = level_vals.iter().enumerate().fold(0, |bi, (i, v)| if *v > level_vals[bi] { i } else { bi });
        (0..level_vals.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
    } else {
        let e = if sp1.q.is_infinite() { 0.0 } else { q_star / sp1.q };
        level_vals.iter().map(|b| b.powf(e)).collect()
    };
    blocks.into_iter().zip(scale).map(|(row, s)| row.into_iter().map(|x| x * s).collect()).collect()
}

fn ratio(a: &Bundle, sp1: &SeqSpace, sp2: &SeqSpace) -> f64 {
    let n1 = seq_norm(a, sp1).unwrap_or(0.0);
    if n1 > 0.0 {
        seq_norm(a, sp2).unwrap_or(0.0) / n1
    } else {
        0.0
    }
}

/// Largest `||a|2|| / ||a|1||` over single coordinates, the Hoelder extremal bundle and
/// `trials` random bundles (trial `t` draws from stream `t` of the seeded generator).
pub fn brute_force_operator_norm(sp1: &SeqSpace, sp2: &SeqSpace, trials: usize, seed: u64) -> Result<f64> {
    if !sp1.same_shape(sp2) {
        return Err(Error::invalid("spaces must share their index sets"));
    }
    let mut best = 0.0f64;
    for j in 0..sp1.levels() {
        for m in 0..sp1.w[j].len() {
            let single = sp2.beta[j] * sp2.w[j][m] / (sp1.beta[j] * sp1.w[j][m]);
            best = best.max(single);
        }
    }
    best = best.max(ratio(&extremal_bundle(sp1, sp2), sp1, sp2));
    let random = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let density: f64 = rng.gen_range(0.05..1.0);
            let a: Bundle = sp1
                .w
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|_| if rng.gen_bool(density) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                        .collect()
                })
                .collect();
            ratio(&a, sp1, sp2)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best.max(random))
}

pub fn format_seqspace(sp: &SeqSpace) -> String {
    let mut out = format!("VSQS1\n{} {} {}\n", sp.levels(), sp.p, sp.q);
    for (j, b) in sp.beta.iter().enumerate() {
        let _ = writeln!(out, "{} {b:e}", j + 1);
    }
    for (j, row) in sp.w.iter().enumerate() {
        for (m, w) in row.iter().enumerate() {
            let _ = writeln!(out, "{} {m} {w:e}", j + 1);
        }
    }
    out
}

/// Inner index sets are `0..|M_j|` with every entry listed once.
pub fn parse_seqspace(text: &str) -> Result<SeqSpace> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "VSQS1" => {}
        other => return Err(Error::Header(format!("expected VSQS1, found {:?}", other.map(|t| t.1)))),
    }
    let (_, head) = lines.next().ok_or_else(|| Error::Header("missing `J p q` line".into()))?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(Error::Header(format!("expected `J p q`, found {head:?}")));
    }
    let bad = |what: &str| Error::Header(format!("bad {what} in {head:?}"));
    let levels: usize = toks[0].parse().map_err(|_| bad("J"))?;
    let p: f64 = toks[1].parse().map_err(|_| bad("p"))?;
    let q: f64 = toks[2].parse().map_err(|_| bad("q"))?;
    if levels == 0 || levels > 4096 {
        return Err(Error::Header(format!("unsupported J={levels}")));
    }
    let mut beta: Vec<Option<f64>> = vec![None; levels];
    let mut w: Vec<Vec<(usize, f64)>> = vec![Vec::new(); levels];
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: ln + 1, msg };
        let j: usize = toks[0].parse().map_err(|_| err(format!("bad level {:?}", toks[0])))?;
        if j == 0 || j > levels {
            return Err(err(format!("level {j} outside 1..={levels}")));
        }
        let val: f64 = toks[toks.len() - 1].parse().map_err(|_| err("bad value".into()))?;
        match toks.len() {
            2 => {
                if beta[j - 1].replace(val).is_some() {
                    return Err(err(format!("duplicate beta for level {j}")));
                }
            }
            3 => {
                let m: usize = toks[1].parse().map_err(|_| err(format!("bad index {:?}", toks[1])))?;
                w[j - 1].push((m, val));
            }
            n => return Err(err(format!("expected 2 or 3 fields, found {n}"))),
        }
    }
    let beta = beta
        .into_iter()
        .enumerate()
        .map(|(j, b)| b.ok_or_else(|| Error::invalid(format!("missing beta for level {}", j + 1))))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(levels);
    for (j, mut entries) in w.into_iter().enumerate() {
        entries.sort_by_key(|e| e.0);
        if entries.iter().enumerate().any(|(i, e)| e.0 != i) {
            return Err(Error::invalid(format!("level {} must list indices 0.. exactly once", j + 1)));
        }
        rows.push(entries.into_iter().map(|e| e.1).collect());
    }
    SeqSpace::new(p, q, beta, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(p: f64, q: f64, levels: usize, size: usize, beta: impl Fn(usize) -> f64, w: impl Fn(usize, usize) -> f64) -> SeqSpace {
        let b = (1..=levels).map(&beta).collect();
        let ww = (1..=levels).map(|j| (0..size).map(|m| w(j, m)).collect()).collect();
        SeqSpace::new(p, q, b, ww).unwrap()
    }

    #[test]
    fn norm_examples() {
        let sp = space(2.0, 2.0, 3, 4, |_| 1.0, |_, _| 1.0);
        let zero: Bundle = vec![vec![0.0; 4]; 3];
        assert_eq!(seq_norm(&zero, &sp).unwrap(), 0.0);
        let mut a = zero.clone();
        a[1][2] = 3.0;
        a[2][0] = 4.0;
        assert!((seq_norm(&a, &sp).unwrap() - 5.0).abs() < 1e-14);
        let sp2 = space(1.0, f64::INFINITY, 3, 4, |j| j as f64, |_, m| 1.0 + m as f64);
        let mut e = zero;
        e[0][2] = 1.0;
        assert_eq!(seq_norm(&e, &sp2).unwrap(), 3.0);
    }

    #[test]
    fn decaying_ratio_is_compact() {
        let a = space(2.0, 2.0, 12, 8, |_| 1.0, |_, _| 1.0);
        let b = space(2.0, 2.0, 12, 8, |j| (-(j as f64)).exp2(), |_, _| 1.0);
        let v = embedding_criterion(&a, &b, EmbeddingOptions::default()).unwrap();
        assert!(v.continuous && v.compact);
        assert!((v.value - 0.5).abs() < 1e-12);
        let same = embedding_criterion(&a, &a, EmbeddingOptions::default()).unwrap();
        assert!(same.continuous && !same.compact && same.value == 1.0);
        let strict = embedding_criterion(&a, &b, EmbeddingOptions { infinite_index: true }).unwrap();
        assert!(!strict.compact);
    }

    #[test]
    fn smaller_q_diverges() {
        let a = space(2.0, 2.0, 12, 8, |_| 1.0, |_, _| 1.0);
        let b = space(2.0, 1.0, 12, 8, |_| 1.0, |_, _| 1.0);
        let v = embedding_criterion(&a, &b, EmbeddingOptions::default()).unwrap();
        assert!(!v.continuous);
        assert!((v.value - 12f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn brute_force_examples() {
        let a = space(1.5, 2.0, 6, 16, |j| j as f64, |j, m| 1.0 + (j * m) as f64 * 0.1);
        assert!((brute_force_operator_norm(&a, &a, 64, 3).unwrap() - 1.0).abs() < 1e-12);
        let mut b = a.clone();
        for row in &mut b.w {
            for v in row.iter_mut() {
                *v *= 3.0;
            }
        }
        assert!((brute_force_operator_norm(&a, &b, 64, 3).unwrap() - 3.0).abs() < 1e-12);
        let c = space(2.0, 1.0, 6, 16, |_| 1.0, |_, m| 1.0 / (1.0 + m as f64));
        let d = space(1.0, 0.5, 6, 16, |_| 1.0, |_, _| 1.0);
        let est = brute_force_operator_norm(&c, &d, 64, 3).unwrap();
        let crit = embedding_criterion(&c, &d, EmbeddingOptions::default()).unwrap();
        assert!(est <= crit.value * (1.0 + 1e-9), "{est} {}", crit.value);
        assert!(est >= 0.999 * crit.value);
        assert_eq!(est, brute_force_operator_norm(&c, &d, 64, 3).unwrap());
    }

    #[test]
    fn format_round_trip() {
        let sp = space(1.0, f64::INFINITY, 3, 2, |j| j as f64 * 0.5, |j, m| (j + m) as f64);
        let text = format_seqspace(&sp);
        assert_eq!(parse_seqspace(&text).unwrap(), sp);
        assert!(parse_seqspace("VSQS1\n1 2 2\n1 1\n").is_err());
    }
}

//! Seeded families of analytic test functions, sampled on any grid level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gridfn::{sample, GridFunction};

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    /// `amp * sin(2 pi <freq, x> + phase)`.
    Wave { freq: Vec<f64>, amp: f64, phase: f64 },
    /// `height` on `x_axis > at`.
    Jump { axis: usize, at: f64, height: f64 },
    /// `slope * |x_axis - at|`.
    Kink { axis: usize, at: f64, slope: f64 },
    /// `exp(1 - 1 / (1 - |x - center|^2 / radius^2))` inside the ball.
    Bump { center: Vec<f64>, radius: f64 },
}

impl Piece {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Piece::Wave { freq, amp, phase } => {
                let t: f64 = freq.iter().zip(x).map(|(f, v)| f * v).sum();
                amp * (std::f64::consts::TAU * t + phase).sin()
            }
            Piece::Jump { axis, at, height } => {
                if x[*axis] > *at {
                    *height
                } else {
                    0.0
                }
            }
            Piece::Kink { axis, at, slope } => slope * (x[*axis] - at).abs(),
            Piece::Bump { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c).powi(2)).sum::<f64>() / radius.powi(2);
                if d2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - d2)).exp()
                }
            }
        }
    }
}

/// Sum of pieces on `[0,1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Low-frequency waves plus a bump.
    Smooth,
    /// Waves plus a jump or a kink.
    PiecewiseSmooth,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(FamilyKind::Smooth),
            "piecewise" => Ok(FamilyKind::PiecewiseSmooth),
            _ => Err(Error::invalid(format!("unknown family kind {s:?}"))),
        }
    }
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.eval(x)).sum()
    }

    pub fn sample(&self, level: u32) -> Result<GridFunction> {
        sample(|x| self.eval(x), self.dim, level)
    }

    /// The smooth bump centered in the box.
    pub fn bump(dim: usize) -> Self {
        Self { dim, pieces: vec![Piece::Bump { center: vec![0.5; dim], radius: 0.45 }] }
    }

    pub fn random(dim: usize, kind: FamilyKind, rng: &mut impl Rng) -> Self {
        let mut pieces = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let freq = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            pieces.push(Piece::Wave { freq, amp: rng.gen_range(0.2..1.0), phase: rng.gen_range(0.0..std::f64::consts::TAU) });
        }
        match kind {
            FamilyKind::Smooth => {
                let center = (0..dim).map(|_| rng.gen_range(0.3..0.7)).collect();
                pieces.push(Piece::Bump { center, radius: rng.gen_range(0.2..0.5) });
            }
            FamilyKind::PiecewiseSmooth => {
                let axis = rng.gen_range(0..dim);
                let at = rng.gen_range(0.15..0.85);
                if rng.gen_bool(0.5) {
                    pieces.push(Piece::Jump { axis, at, height: rng.gen_range(0.5..1.5) });
                } else {
                    pieces.push(Piece::Kink { axis, at, slope: rng.gen_range(1.0..3.0) });
                }
            }
        }
        Self { dim, pieces }
    }
}

/// `count` functions drawn from one seeded stream.
pub fn family(dim: usize, count: usize, seed: u64, kind: FamilyKind) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| TestFunction::random(dim, kind, &mut rng)).collect()
}

/// Names like `smooth20` or `piecewise200`.
pub fn named_family(name: &str, dim: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let split = name.find(|c: char| c.is_ascii_digit()).ok_or_else(|| Error::invalid(format!("family {name:?} lacks a count")))?;
    let kind: FamilyKind = name[..split].parse()?;
    let count: usize = name[split..].parse().map_err(|_| Error::invalid(format!("bad family count in {name:?}")))?;
    if count == 0 || count > 10_000 {
        return Err(Error::invalid(format!("family size {count} out of range")));
    }
    Ok(family(dim, count, seed, kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_named() {
        let a = family(2, 5, 11, FamilyKind::PiecewiseSmooth);
        assert_eq!(a, family(2, 5, 11, FamilyKind::PiecewiseSmooth));
        assert_eq!(named_family("smooth20", 1, 3).unwrap().len(), 20);
        assert!(named_family("wiggly3", 1, 3).is_err());
        let b = TestFunction::bump(1);
        assert!((b.eval(&[0.5]) - 1.0).abs() < 1e-15);
        assert_eq!(b.eval(&[0.99]), 0.0);
    }
}

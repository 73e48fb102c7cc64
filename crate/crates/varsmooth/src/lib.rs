//! Computable machinery for Besov spaces of variable smoothness on the unit box.
//!
//! Functions live on uniform dyadic grids ([`gridfn::GridFunction`]); the
//! modules build up from dyadic geometry through differences, local polynomial
//! approximation and B-splines to the norm variants, atomic decompositions,
//! weight-class diagnostics, plane traces and sequence-space embeddings.

pub mod atomic;
pub mod cli;
pub mod diffs;
pub mod error;
pub mod family;
pub mod geometry;
pub mod gridfn;
pub mod norms;
pub mod polyfit;
pub mod seqspace;
pub mod splines;
pub mod suite;
pub mod traceext;
pub mod weights;

pub use error::{Error, Result};

/// `l_q` aggregation of nonnegative terms; `q = inf` is the maximum.
pub fn lq_sum(terms: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        return terms.into_iter().fold(0.0, f64::max);
    }
    let s: f64 = terms.into_iter().map(|t| t.powf(q)).sum();
    s.powf(1.0 / q)
}

/// Binomial coefficient as a float, exact for the small orders used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_sum_limits() {
        assert_eq!(lq_sum([3.0, 4.0], 2.0), 5.0);
        assert_eq!(lq_sum([3.0, 4.0], f64::INFINITY), 4.0);
        assert_eq!(lq_sum(std::iter::empty(), 1.0), 0.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
    }
}

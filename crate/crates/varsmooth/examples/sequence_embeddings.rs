//! Embedding criterion between weighted mixed sequence spaces, checked against brute force.
//! Writes both spaces as VSQS1 when given two paths.

use varsmooth::seqspace::{brute_force_operator_norm, embedding_criterion, format_seqspace, EmbeddingOptions, SeqSpace};

fn main() -> varsmooth::Result<()> {
    let levels = 10;
    let w: Vec<Vec<f64>> = (0..levels).map(|j| (0..16).map(|m| 1.0 + ((j * 16 + m) as f64).sin().abs()).collect()).collect();
    let a = SeqSpace::new(2.0, 2.0, vec![1.0; levels], w.clone())?;
    for (name, slope) in [("decaying", -1.0), ("growing", 1.0)] {
        let beta = (1..=levels).map(|j| (slope * j as f64).exp2()).collect();
        let b = SeqSpace::new(2.0, f64::INFINITY, beta, w.clone())?;
        let v = embedding_criterion(&a, &b, EmbeddingOptions::default())?;
        let brute = brute_force_operator_norm(&a, &b, 16, 1)?;
        println!("{name}: continuous {} compact {} value {:.4} brute force {:.4}", v.continuous, v.compact, v.value, brute);
        let mut paths = std::env::args().skip(1);
        if let (Some(pa), Some(pb)) = (paths.next(), paths.next()) {
            std::fs::write(&pa, format_seqspace(&a))?;
            std::fs::write(&pb, format_seqspace(&b))?;
        }
    }
    Ok(())
}

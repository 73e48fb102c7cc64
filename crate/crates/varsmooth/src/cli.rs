//! Batch runner behind the `varsmooth` binary.
//!
//! Every subcommand reads its inputs, writes CSV or a file format to `--out` (stdout by
//! default) and maps errors to exit codes: 1 for invalid configuration, 2 for numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atomic::{decompose, decompose_report, format_series, parse_series, reconstruct, SplineSeries};
use crate::error::{Error, Result};
use crate::family::{named_family, TestFunction};
use crate::gridfn::{format_slab, parse_gridfn, write_gridfn, GridFunction};
use crate::norms::{breakdowns_csv, hardy_check, n_functionals, norm_by_variant, spline_approx_numbers, BesovParams, HardyBranch, Variant};
use crate::seqspace::{brute_force_operator_norm, embedding_criterion, parse_seqspace, EmbeddingOptions};
use crate::suite;
use crate::traceext::{besov_extend, besov_trace, extension_mass, sobolev_energy, sobolev_extend, trace_mass, AveragingOp, PlaneSpec};
use crate::weights::{
    check_x_class, check_y_class, constant_smoothness, estimate_deltas, example_weight, generate_from_weight, parse_multiseq,
    singular_product_density, ClassReport, MultiSeq, ShellDensity,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "varsmooth", version, about = "Variable-smoothness Besov norms and spline decompositions on dyadic grids")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "VARSMOOTH_THREADS")]
    pub threads: Option<usize>,
    /// `key=value` file of defaults for the subcommand flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct BesovArgs {
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    /// Dilation of the cubes in the v2/v3/v4 variants.
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
}

impl BesovArgs {
    fn params(&self) -> Result<BesovParams> {
        BesovParams::with_dilation(self.l, self.p, self.q, self.r, self.c)
    }
}

#[derive(Debug, Args, Clone)]
pub struct WeightArgs {
    /// `const:s=S`, `power:a=A[,b=B][,s=S]`, `gamma:eps=E[,s=S]` or `file:PATH` (VSMS1).
    #[arg(long, default_value = "const:s=1")]
    pub weights: String,
    /// Highest weight level; defaults to the grid level, capped at 8.
    #[arg(long)]
    pub kmax: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Tail,
    Head,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norm breakdowns of a grid function for every variant.
    Norm {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        besov: BesovArgs,
        #[command(flatten)]
        weights: WeightArgs,
        /// Comma-separated subset such as `seq,v2`.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spread of pairwise norm ratios over a seeded function family.
    Equiv {
        /// `smoothN` or `piecewiseN`.
        #[arg(long, default_value = "smooth20")]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 7)]
        grid: u32,
        #[command(flatten)]
        besov: BesovArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_delimiter = ',', default_value = "seq,v2,v3,v4")]
        variants: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Canonical spline decomposition of a grid function, written as VSSS1.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        besov: BesovArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the hypotheses and round-trip report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sum a spline series onto a grid, written as VSGF1.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        grid: u32,
        /// Last level included; all levels by default.
        #[arg(long)]
        up_to: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted spline approximation numbers per level.
    Snumbers {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        besov: BesovArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// X-class and Y-class fits of a weight sequence.
    Weightclass {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        sigma1: f64,
        #[arg(long, default_value_t = 2.0)]
        sigma2: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shell exponents of a weight sequence.
    Deltas {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Codimension of the generating weight.
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both sides of the Hardy inequality for given or random sequences.
    Hardy {
        /// Whitespace-separated sequence; random sequences are drawn when absent.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 40)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Defaults to `beta + 1`.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value_t = BranchArg::Tail)]
        branch: BranchArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embedding criterion between two VSQS1 spaces, with a brute-force estimate.
    Embed {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        /// Treat the index sets as truncations of infinite ones.
        #[arg(long)]
        infinite_index: bool,
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace of a spline series onto the first `nprime` coordinates.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        nprime: usize,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extension of a spline series on a plane into `n` dimensions.
    Extend {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extension of a grid function into the slab `[0,1]^n x (-1,1)` and its energy.
    SobolevExt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Finest averaging level; defaults to one below the grid level.
        #[arg(long)]
        top: Option<u32>,
        #[arg(long, default_value_t = 8)]
        level_y: u32,
        /// Energy weight `|y|^alpha`.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Optional slab output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Acceptance checks; exits 2 when any of them fails.
    Suite {
        /// Subset of criterion ids; all by default.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
    },
}

fn parse_kv(body: &str) -> Result<Vec<(String, f64)>> {
    body.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::invalid(format!("expected key=value in {kv:?}")))?;
            let v: f64 = v.parse().map_err(|_| Error::invalid(format!("bad number in {kv:?}")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

fn take(kv: &[(String, f64)], key: &str, default: Option<f64>) -> Result<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .or(default)
        .ok_or_else(|| Error::invalid(format!("weight spec lacks {key}=")))
}

fn check_keys(kv: &[(String, f64)], allowed: &[&str]) -> Result<()> {
    match kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(Error::invalid(format!("unknown weight parameter {k:?}"))),
        None => Ok(()),
    }
}

/// Build a multiple sequence from a weight spec on `[0,1]^n`.
pub fn build_weights(spec: &str, n: usize, p: f64, kmax: u32) -> Result<MultiSeq> {
    let (kind, body) = spec.split_once(':').ok_or_else(|| Error::invalid(format!("weight spec {spec:?} lacks a kind")))?;
    match kind {
        "const" => {
            let kv = parse_kv(body)?;
            check_keys(&kv, &["s"])?;
            constant_smoothness(n, p, take(&kv, "s", None)?, kmax)
        }
        "power" => {
            let kv = parse_kv(body)?;
            check_keys(&kv, &["a", "b", "s"])?;
            let a = take(&kv, "a", None)?;
            let b = take(&kv, "b", Some(0.0))?;
            let mut exps = vec![a; n];
            exps.push(b);
            example_weight(&generate_from_weight(&ShellDensity::ProductPower(exps), n, 1, p, kmax)?, take(&kv, "s", Some(0.0))?)
        }
        "gamma" => {
            let kv = parse_kv(body)?;
            check_keys(&kv, &["eps", "s"])?;
            let eps = take(&kv, "eps", None)?;
            example_weight(&generate_from_weight(&singular_product_density(n, eps), n, 1, p, kmax)?, take(&kv, "s", Some(0.0))?)
        }
        "file" => {
            let ms = parse_multiseq(&read_text(Path::new(body))?)?;
            if ms.dim() != n {
                return Err(Error::invalid(format!("weight file has n={}, expected {n}", ms.dim())));
            }
            if ms.p() != p {
                return Err(Error::invalid(format!("weight file has p={}, expected {p}", ms.p())));
            }
            if ms.max_level() < kmax {
                return Err(Error::invalid(format!("weight file stops at level {}, need {kmax}", ms.max_level())));
            }
            Ok(ms.truncate(kmax))
        }
        _ => Err(Error::invalid(format!("unknown weight kind {kind:?}"))),
    }
}

fn weights_for(w: &WeightArgs, n: usize, p: f64, grid: u32) -> Result<MultiSeq> {
    let kmax = w.kmax.unwrap_or(grid.min(8));
    if kmax > grid {
        return Err(Error::invalid(format!("kmax {kmax} exceeds grid level {grid}")));
    }
    build_weights(&w.weights, n, p, kmax)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

fn read_series(path: &Path) -> Result<SplineSeries> {
    parse_series(&read_text(path)?)
}

fn e(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_variants(list: &[String]) -> Result<Vec<Variant>> {
    if list.is_empty() {
        return Ok(Variant::ALL.to_vec());
    }
    list.iter().map(|s| s.parse()).collect()
}

fn norm_csv(g: &GridFunction, ms: &MultiSeq, bp: &BesovParams, variants: &[Variant]) -> Result<String> {
    let mut out = Vec::new();
    let needs_n = variants.iter().any(|v| matches!(v, Variant::N1 | Variant::N2 | Variant::N3 | Variant::N4));
    let nf = if needs_n { Some(n_functionals(g, ms, bp)?) } else { None };
    for &v in variants {
        let b = match (v, &nf) {
            (Variant::N1, Some(nf)) => nf.n1.clone(),
            (Variant::N2, Some(nf)) => nf.n2.clone(),
            (Variant::N3, Some(nf)) => nf.n3.clone(),
            (Variant::N4, Some(nf)) => nf.n4.clone(),
            _ => norm_by_variant(g, ms, bp, v)?,
        };
        if !b.total.is_finite() {
            return Err(Error::numerical("norm", format!("{} evaluated to {}", v.tag(), b.total)));
        }
        out.push(b);
    }
    Ok(breakdowns_csv(&out))
}

fn class_row(out: &mut String, name: &str, c: &ClassReport) {
    let _ = writeln!(
        out,
        "{name},{},{},{},{},{},{},{},{},{},{}",
        e(c.alpha1),
        e(c.alpha2),
        e(c.alpha3),
        e(c.c1),
        e(c.c2),
        e(c.sigma1),
        e(c.sigma2),
        c.lower_ok,
        c.upper_ok,
        c.neighbor_ok
    );
}

fn opt_bool(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "na",
    }
}

fn read_sequences(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut seqs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {t:?}") }))
            .collect::<Result<Vec<_>>>()?;
        seqs.push(row);
    }
    if seqs.is_empty() {
        return Err(Error::invalid("no sequences in input"));
    }
    Ok(seqs)
}

fn mass_report(kind: &str, full: f64, plane: f64, ratio: f64) -> String {
    format!("quantity,full,plane,ratio\n{kind},{},{},{}\n", e(full), e(plane), e(ratio))
}

/// Run one parsed command.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Norm { input, besov, weights, variants, out } => {
            let g = parse_gridfn(&read_text(&input)?)?;
            let bp = besov.params()?;
            let ms = weights_for(&weights, g.dim(), bp.p, g.level())?;
            emit(&out, &norm_csv(&g, &ms, &bp, &parse_variants(&variants)?)?)?;
        }
        Command::Equiv { family, seed, dim, grid, besov, weights, variants, out } => {
            let funcs: Vec<TestFunction> = named_family(&family, dim, seed)?;
            let bp = besov.params()?;
            let ms = weights_for(&weights, dim, bp.p, grid)?;
            let vs = parse_variants(&variants)?;
            if vs.len() < 2 {
                return Err(Error::invalid("equiv needs at least two variants"));
            }
            let mut norms = Vec::with_capacity(funcs.len());
            for f in &funcs {
                let g = f.sample(grid)?;
                let row = vs.iter().map(|&v| Ok(norm_by_variant(&g, &ms, &bp, v)?.total)).collect::<Result<Vec<f64>>>()?;
                norms.push(row);
            }
            let mut text = String::from("variant_a,variant_b,min_ratio,max_ratio,spread\n");
            for a in 0..vs.len() {
                for b in a + 1..vs.len() {
                    let ratios: Vec<f64> = norms.iter().map(|n| n[a] / n[b]).collect();
                    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if !(lo > 0.0) || !hi.is_finite() {
                        return Err(Error::numerical("equiv", format!("degenerate ratio {}/{}", vs[a].tag(), vs[b].tag())));
                    }
                    let _ = writeln!(text, "{},{},{},{},{}", vs[a].tag(), vs[b].tag(), e(lo), e(hi), e(hi / lo));
                }
            }
            emit(&out, &text)?;
        }
        Command::Decompose { input, besov, weights, out, report } => {
            let g = parse_gridfn(&read_text(&input)?)?;
            let bp = besov.params()?;
            let ms = weights_for(&weights, g.dim(), bp.p, g.level())?;
            let s = decompose(&g, &ms, &bp)?;
            emit(&out, &format_series(&s))?;
            if let Some(path) = report {
                let rep = decompose_report(&g, &ms, &bp, &s)?;
                let mut text = String::from("hypotheses_ok,reconstruction_error\n");
                let _ = writeln!(text, "{},{}", rep.hypotheses_ok, e(rep.reconstruction_error));
                std::fs::write(path, text)?;
            }
        }
        Command::Reconstruct { input, grid, up_to, out } => {
            let s = read_series(&input)?;
            let g = reconstruct(&s, up_to.unwrap_or(s.max_level()), grid)?;
            match out {
                Some(path) => write_gridfn(&g, path)?,
                None => print!("{}", crate::gridfn::format_gridfn(&g)),
            }
        }
        Command::Snumbers { input, besov, weights, out } => {
            let g = parse_gridfn(&read_text(&input)?)?;
            let bp = besov.params()?;
            let ms = weights_for(&weights, g.dim(), bp.p, g.level())?;
            let s = spline_approx_numbers(&g, &ms, &bp)?;
            let mut text = String::from("k,s_k,exact\n");
            for (i, v) in s.values.iter().enumerate() {
                let _ = writeln!(text, "{},{},{}", i as i64 - 1, e(*v), s.exact);
            }
            emit(&out, &text)?;
        }
        Command::Weightclass { weights, dim, p, sigma1, sigma2, out } => {
            let ms = build_weights(&weights.weights, dim, p, weights.kmax.unwrap_or(6))?;
            let mut text = String::from("class,alpha1,alpha2,alpha3,c1,c2,sigma1,sigma2,lower_ok,upper_ok,neighbor_ok\n");
            class_row(&mut text, "x", &check_x_class(&ms, sigma1, sigma2)?);
            class_row(&mut text, "y", &check_y_class(&ms)?);
            emit(&out, &text)?;
        }
        Command::Deltas { weights, dim, p, d, out } => {
            let ms = build_weights(&weights.weights, dim, p, weights.kmax.unwrap_or(6))?;
            let de = estimate_deltas(&ms, d)?;
            let text = format!("delta1,delta2,delta3\n{},{},{}\n", e(de.delta1), e(de.delta2), e(de.delta3));
            emit(&out, &text)?;
        }
        Command::Hardy { input, count, len, seed, q, mu, beta, lambda, branch, out } => {
            let seqs = match input {
                Some(path) => read_sequences(&path)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..count).map(|_| (0..len.max(1)).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()
                }
            };
            let branch = match branch {
                BranchArg::Tail => HardyBranch::Tail,
                BranchArg::Head => HardyBranch::Head,
            };
            let lambda = lambda.unwrap_or(beta + 1.0);
            let mut text = String::from("index,lhs,rhs,ratio,bound,holds\n");
            for (i, a) in seqs.iter().enumerate() {
                let h = hardy_check(a, q, mu, beta, lambda, branch)?;
                if !h.lhs.is_finite() {
                    return Err(Error::numerical("hardy", format!("sequence {i} gave a non-finite left side")));
                }
                let _ = writeln!(text, "{i},{},{},{},{},{}", e(h.lhs), e(h.rhs), e(h.ratio), e(h.bound), h.holds);
            }
            emit(&out, &text)?;
        }
        Command::Embed { from, to, infinite_index, trials, seed, out } => {
            let a = parse_seqspace(&read_text(&from)?)?;
            let b = parse_seqspace(&read_text(&to)?)?;
            let v = embedding_criterion(&a, &b, EmbeddingOptions { infinite_index })?;
            let brute = brute_force_operator_norm(&a, &b, trials, seed)?;
            let mut text = String::from("p_star,q_star,value,trend,continuous,level_limit,index_limit,compact,asymptotic_inferred,brute_force\n");
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{}",
                e(v.p_star),
                e(v.q_star),
                e(v.value),
                e(v.trend),
                v.continuous,
                opt_bool(v.level_limit),
                opt_bool(v.index_limit),
                v.compact,
                v.asymptotic_inferred,
                e(brute)
            );
            emit(&out, &text)?;
        }
        Command::Trace { input, nprime, weights, p, q, out, report } => {
            let s = read_series(&input)?;
            let ps = PlaneSpec::new(s.dim, nprime)?;
            let tr = besov_trace(&s, &ps)?;
            emit(&out, &format_series(&tr))?;
            if let Some(path) = report {
                let ms = build_weights(&weights.weights, s.dim, p, weights.kmax.unwrap_or(s.max_level()))?;
                let m = trace_mass(&s, &ms, &ps, q)?;
                std::fs::write(path, mass_report("trace", m.full, m.plane, m.ratio))?;
            }
        }
        Command::Extend { input, n, weights, p, q, out, report } => {
            let s = read_series(&input)?;
            let ps = PlaneSpec::new(n, s.dim)?;
            let ext = besov_extend(&s, &ps)?;
            emit(&out, &format_series(&ext))?;
            if let Some(path) = report {
                let ms = build_weights(&weights.weights, n, p, weights.kmax.unwrap_or(s.max_level()))?;
                let m = extension_mass(&s, &ms, &ps, q)?;
                std::fs::write(path, mass_report("extension", m.full, m.plane, m.ratio))?;
            }
        }
        Command::SobolevExt { input, l, p, top, level_y, alpha, out } => {
            let g = parse_gridfn(&read_text(&input)?)?;
            let top = top.unwrap_or(g.level().saturating_sub(1));
            let ext = sobolev_extend(&g, &AveragingOp::new(l)?, top, level_y)?;
            let energy = sobolev_energy(&ext, l, p, |_, y| y.abs().powf(alpha))?;
            if !energy.is_finite() {
                return Err(Error::numerical("sobolev-ext", format!("energy evaluated to {energy}")));
            }
            if let Some(path) = out {
                std::fs::write(path, format_slab(&ext))?;
            }
            print!("energy\n{}\n", e(energy));
        }
        Command::Suite { criteria } => {
            let ids = if criteria.is_empty() { (1..=suite::CRITERIA).collect() } else { criteria };
            let mut all = true;
            for id in ids {
                let rep = suite::run(id)?;
                all &= rep.passed;
                println!("{}", rep.line());
            }
            return Ok(if all { EXIT_OK } else { EXIT_NUMERICAL });
        }
    }
    Ok(EXIT_OK)
}

/// Append `--key value` for every config entry the command line does not already set.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].split_once('=') {
        Some((_, p)) => p.to_string(),
        None => args.get(pos + 1).cloned().ok_or_else(|| Error::invalid("--config needs a path"))?,
    };
    let text = read_text(Path::new(&path))?;
    let mut merged = args.clone();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, msg: "expected key=value".into() })?;
        let flag = format!("--{}", k.trim().replace('_', "-"));
        if args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match v.trim() {
            "true" => merged.push(flag),
            "false" => {}
            v => merged.push(format!("{flag}={v}")),
        }
    }
    Ok(merged)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

/// Parse, configure the worker pool and run; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_INVALID;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_INVALID;
        }
        // a pool that already exists (repeated calls in one process) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_specs() {
        let c = build_weights("const:s=1.5", 1, 2.0, 3).unwrap();
        assert_eq!(c, constant_smoothness(1, 2.0, 1.5, 3).unwrap());
        assert!(build_weights("power:a=0.5,s=1", 2, 2.0, 2).is_ok());
        assert!(build_weights("gamma:eps=0.1", 1, 2.0, 2).is_ok());
        assert!(build_weights("const:t=1", 1, 2.0, 2).is_err());
        assert!(build_weights("wavy:s=1", 1, 2.0, 2).is_err());
        assert!(build_weights("const", 1, 2.0, 2).is_err());
    }

    #[test]
    fn config_merge_keeps_explicit_flags() {
        let dir = std::env::temp_dir().join(format!("varsmooth-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "# defaults\nl=3\nseed = 9\ninfinite_index=true\n").unwrap();
        let args: Vec<String> = ["varsmooth", "--config", path.to_str().unwrap(), "norm", "--l", "2"].iter().map(|s| s.to_string()).collect();
        let merged = merge_config(args).unwrap();
        assert!(!merged.contains(&"--l=3".to_string()));
        assert!(merged.contains(&"--seed=9".to_string()));
        assert!(merged.contains(&"--infinite-index".to_string()));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::numerical("op", "bad")), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::invalid("bad")), EXIT_INVALID);
        assert_eq!(main_with_args(vec!["varsmooth".into(), "bogus".into()]), EXIT_INVALID);
        assert_eq!(main_with_args(vec!["varsmooth".into(), "--help".into()]), EXIT_OK);
    }
}

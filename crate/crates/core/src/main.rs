//! Command-line front end. Every subcommand resolves its flags into a
//! config record, runs, writes its artifact plus a manifest echoing the
//! resolved config and library version, and exits 0 on success, 1 when a
//! verification ran and failed, 2 on configuration or usage errors.
//! `--manifest PATH` replays a previous run from its manifest; artifacts
//! reproduce byte-for-byte because every seed and tolerance is in the
//! config record.

use clap::{Parser, Subcommand, ValueEnum};
use levy_spde::error::{Error, Result};
use levy_spde::greens::{GreenFunction, Operator, TestFunction};
use levy_spde::noise::{pair_noise, sample_sas, sample_white_noise, GridSpec, StableParams};
use levy_spde::norms::{
    existence_verdict, heat_norm_closed, lalpha_norm_quadrature, wave1_norm_closed,
    wave2_norm_closed, NormResult,
};
use levy_spde::solutions::{fubini_check, generalized_pairing, mild_field, FubiniMode};
use levy_spde::stats::{cf_test, quantile_check};
use levy_spde::verify;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const CF_FREQS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Parser)]
#[command(
    name = "levy-spde",
    version,
    about = "Stable space-time noise, SPDE solutions, and their verification suite",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum Equation {
    Heat,
    Wave,
    Poisson,
}

impl Equation {
    fn op(self) -> Operator {
        match self {
            Equation::Heat => Operator::Heat,
            Equation::Wave => Operator::Wave,
            Equation::Poisson => Operator::Poisson,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Shared,
    Refine,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one stable white-noise realization and store its increments
    /// as little-endian f64, cells in row-major grid order.
    SampleNoise {
        /// Stability index in (0, 2)
        #[arg(long, required_unless_present = "manifest")]
        alpha: Option<f64>,
        /// Axes as comma-separated lo,hi,cells triples, time axis first
        #[arg(long, required_unless_present = "manifest")]
        grid: Option<String>,
        #[arg(long, required_unless_present = "manifest")]
        seed: Option<u64>,
        #[arg(long, default_value = "noise.bin")]
        out: PathBuf,
        /// Replay a previous run from its manifest
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Synthesize the mild-solution field at the grid's cell midpoints
    /// and write it as CSV.
    MildField {
        #[arg(long, value_enum, required_unless_present = "manifest")]
        equation: Option<Equation>,
        /// Spatial dimension
        #[arg(long, required_unless_present = "manifest")]
        d: Option<u32>,
        #[arg(long, required_unless_present = "manifest")]
        alpha: Option<f64>,
        #[arg(long, required_unless_present = "manifest")]
        grid: Option<String>,
        #[arg(long, required_unless_present = "manifest")]
        seed: Option<u64>,
        #[arg(long, default_value = "field.csv")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Pair the generalized solution with a bump test function derived
    /// from the grid (centered, radii a quarter of each extent).
    Pairing {
        #[arg(long, value_enum, required_unless_present = "manifest")]
        equation: Option<Equation>,
        #[arg(long, required_unless_present = "manifest")]
        d: Option<u32>,
        #[arg(long, required_unless_present = "manifest")]
        alpha: Option<f64>,
        #[arg(long, required_unless_present = "manifest")]
        grid: Option<String>,
        #[arg(long, required_unless_present = "manifest")]
        seed: Option<u64>,
        /// Relative tolerance for the kernel convolution quadrature
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value = "pairing.json")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Check the discrete stochastic Fubini identity and exit 1 if the
    /// two evaluations disagree beyond the mode's contract.
    FubiniCheck {
        #[arg(long, value_enum, required_unless_present = "manifest")]
        equation: Option<Equation>,
        #[arg(long, required_unless_present = "manifest")]
        d: Option<u32>,
        #[arg(long, required_unless_present = "manifest")]
        alpha: Option<f64>,
        /// Defaults to a small grid suited to the dimension
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, required_unless_present = "manifest")]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "shared")]
        mode: Mode,
        #[arg(long, default_value = "fubini.json")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Tabulate existence verdicts over ranges of dimension and alpha.
    VerdictTable {
        /// Restrict to one equation (default: all three)
        #[arg(long, value_enum)]
        equation: Option<Equation>,
        /// Single value or inclusive range like 1..6
        #[arg(long, default_value = "1..6")]
        d: String,
        /// Single value or range with step like 0.25..1.95:0.1
        #[arg(long, default_value = "0.25..1.95:0.1")]
        alpha: String,
        #[arg(long, default_value = "verdict-table.csv")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Compute the kernel's integrability norm by quadrature and compare
    /// it with the closed form where one exists; exit 1 on disagreement.
    Norms {
        #[arg(long, value_enum, required_unless_present = "manifest")]
        equation: Option<Equation>,
        #[arg(long, required_unless_present = "manifest")]
        d: Option<u32>,
        #[arg(long, required_unless_present = "manifest")]
        alpha: Option<f64>,
        /// Relative tolerance for the closed-form comparison
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value = "norms.json")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Characteristic-function and quantile tests of the stable sampler
    /// and of cell-indicator pairings; exit 1 if any test fails.
    CfSuite {
        #[arg(long, required_unless_present = "manifest")]
        alpha: Option<f64>,
        #[arg(long, required_unless_present = "manifest")]
        seed: Option<u64>,
        /// Sample count (at least 10000)
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value = "cf-suite.json")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run the acceptance battery, print one line per criterion, and
    /// write the reports as JSON; exit 1 if any criterion fails.
    ReproAll {
        /// Comma-separated criterion ids to run (default: all nine)
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        #[arg(long, default_value = "repro-all.json")]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
struct NoiseConfig {
    alpha: f64,
    grid: GridSpec,
    seed: u64,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct FieldConfig {
    equation: Operator,
    dim: u32,
    alpha: f64,
    grid: GridSpec,
    seed: u64,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct PairingConfig {
    equation: Operator,
    dim: u32,
    alpha: f64,
    grid: GridSpec,
    seed: u64,
    tol: Option<f64>,
    phi: TestFunction,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct FubiniConfig {
    equation: Operator,
    dim: u32,
    alpha: f64,
    grid: GridSpec,
    seed: u64,
    mode: FubiniMode,
    phi: TestFunction,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct VerdictConfig {
    equations: Vec<Operator>,
    dims: Vec<u32>,
    alphas: Vec<f64>,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct NormsConfig {
    equation: Operator,
    dim: u32,
    alpha: f64,
    tol: f64,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CfConfig {
    alpha: f64,
    n: usize,
    seed: u64,
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ReproConfig {
    only: Vec<u32>,
    out: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    version: &'a str,
    command: &'a str,
    config: &'a C,
}

#[derive(Deserialize)]
struct ManifestEnvelope {
    command: String,
    config: serde_json::Value,
}

fn main() {
    if let Err(e) = setup_threads() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

/// LEVY_SPDE_THREADS caps the global worker pool before any parallel
/// region starts.
fn setup_threads() -> Result<()> {
    match std::env::var("LEVY_SPDE_THREADS") {
        Ok(s) => {
            let n: usize = s.parse().map_err(|_| {
                Error::Param(format!(
                    "LEVY_SPDE_THREADS must be a positive integer, got {s:?}"
                ))
            })?;
            if n == 0 {
                return Err(Error::Param(
                    "LEVY_SPDE_THREADS must be a positive integer, got 0".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Param(format!("thread pool: {e}")))
        }
        Err(_) => Ok(()),
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::SampleNoise {
            alpha,
            grid,
            seed,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<NoiseConfig>(&m, "sample-noise")?,
                None => NoiseConfig {
                    alpha: alpha.expect("required by clap"),
                    grid: parse_grid(&grid.expect("required by clap"))?,
                    seed: seed.expect("required by clap"),
                    out,
                },
            };
            run_sample_noise(&cfg)
        }
        Command::MildField {
            equation,
            d,
            alpha,
            grid,
            seed,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<FieldConfig>(&m, "mild-field")?,
                None => FieldConfig {
                    equation: equation.expect("required by clap").op(),
                    dim: d.expect("required by clap"),
                    alpha: alpha.expect("required by clap"),
                    grid: parse_grid(&grid.expect("required by clap"))?,
                    seed: seed.expect("required by clap"),
                    out,
                },
            };
            run_mild_field(&cfg)
        }
        Command::Pairing {
            equation,
            d,
            alpha,
            grid,
            seed,
            tol,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<PairingConfig>(&m, "pairing")?,
                None => {
                    let grid = parse_grid(&grid.expect("required by clap"))?;
                    let phi = default_phi(&grid);
                    PairingConfig {
                        equation: equation.expect("required by clap").op(),
                        dim: d.expect("required by clap"),
                        alpha: alpha.expect("required by clap"),
                        grid,
                        seed: seed.expect("required by clap"),
                        tol,
                        phi,
                        out,
                    }
                }
            };
            run_pairing(&cfg)
        }
        Command::FubiniCheck {
            equation,
            d,
            alpha,
            grid,
            seed,
            mode,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<FubiniConfig>(&m, "fubini-check")?,
                None => {
                    let equation = equation.expect("required by clap").op();
                    let dim = d.expect("required by clap");
                    let grid = match grid {
                        Some(s) => parse_grid(&s)?,
                        None => default_grid(equation, dim)?,
                    };
                    let phi = default_phi(&grid);
                    FubiniConfig {
                        equation,
                        dim,
                        alpha: alpha.expect("required by clap"),
                        grid,
                        seed: seed.expect("required by clap"),
                        mode: match mode {
                            Mode::Shared => FubiniMode::SharedGrid,
                            Mode::Refine => FubiniMode::Refinement { levels: 4 },
                        },
                        phi,
                        out,
                    }
                }
            };
            run_fubini(&cfg)
        }
        Command::VerdictTable {
            equation,
            d,
            alpha,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<VerdictConfig>(&m, "verdict-table")?,
                None => VerdictConfig {
                    equations: match equation {
                        Some(e) => vec![e.op()],
                        None => vec![Operator::Heat, Operator::Wave, Operator::Poisson],
                    },
                    dims: parse_dims(&d)?,
                    alphas: parse_alphas(&alpha)?,
                    out,
                },
            };
            run_verdict_table(&cfg)
        }
        Command::Norms {
            equation,
            d,
            alpha,
            tol,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<NormsConfig>(&m, "norms")?,
                None => NormsConfig {
                    equation: equation.expect("required by clap").op(),
                    dim: d.expect("required by clap"),
                    alpha: alpha.expect("required by clap"),
                    tol,
                    out,
                },
            };
            run_norms(&cfg)
        }
        Command::CfSuite {
            alpha,
            seed,
            n,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<CfConfig>(&m, "cf-suite")?,
                None => CfConfig {
                    alpha: alpha.expect("required by clap"),
                    n,
                    seed: seed.expect("required by clap"),
                    out,
                },
            };
            run_cf_suite(&cfg)
        }
        Command::ReproAll {
            only,
            out,
            manifest,
        } => {
            let cfg = match manifest {
                Some(m) => load_config::<ReproConfig>(&m, "repro-all")?,
                None => ReproConfig { only, out },
            };
            run_repro_all(&cfg)
        }
    }
}

fn run_sample_noise(cfg: &NoiseConfig) -> Result<bool> {
    let noise = sample_white_noise(&cfg.grid, cfg.alpha, cfg.seed)?;
    let mut bytes = Vec::with_capacity(8 * noise.increments.len());
    for v in &noise.increments {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&cfg.out, bytes)?;
    write_manifest("sample-noise", cfg, &cfg.out)?;
    println!(
        "wrote {} ({} cells, little-endian f64)",
        cfg.out.display(),
        noise.increments.len()
    );
    Ok(true)
}

fn run_mild_field(cfg: &FieldConfig) -> Result<bool> {
    let g = GreenFunction::new(cfg.equation, cfg.dim)?;
    let noise = sample_white_noise(&cfg.grid, cfg.alpha, cfg.seed)?;
    let mut points = Vec::with_capacity(cfg.grid.cell_count() as usize);
    let mut p = vec![0.0; cfg.grid.dim()];
    for i in 0..cfg.grid.cell_count() {
        cfg.grid.midpoint(i, &mut p);
        points.push(p.clone());
    }
    let field = mild_field(&g, &noise, &points)?;
    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;
    std::fs::write(&cfg.out, csv)?;
    write_manifest("mild-field", cfg, &cfg.out)?;
    println!(
        "wrote {} ({} points)",
        cfg.out.display(),
        field.values.len()
    );
    Ok(true)
}

fn run_pairing(cfg: &PairingConfig) -> Result<bool> {
    let g = GreenFunction::new(cfg.equation, cfg.dim)?;
    let noise = sample_white_noise(&cfg.grid, cfg.alpha, cfg.seed)?;
    let value = generalized_pairing(&cfg.phi, &g, &noise, cfg.tol)?;
    let doc = serde_json::json!({ "value": value });
    write_json(&cfg.out, &doc)?;
    write_manifest("pairing", cfg, &cfg.out)?;
    println!("pairing value {value:.12e}, wrote {}", cfg.out.display());
    Ok(true)
}

fn run_fubini(cfg: &FubiniConfig) -> Result<bool> {
    let g = GreenFunction::new(cfg.equation, cfg.dim)?;
    let noise = sample_white_noise(&cfg.grid, cfg.alpha, cfg.seed)?;
    let report = fubini_check(&cfg.phi, &g, &noise, cfg.mode)?;
    let passed = if report.shared_grid {
        report.abs_diff <= 1e-9 * (1.0 + report.lhs.abs())
    } else {
        // the gap sequence may stall at most once
        let d = &report.level_diffs;
        let decreasing = d.windows(2).filter(|w| w[1] < w[0]).count();
        decreasing + 1 >= d.len().saturating_sub(1)
    };
    let doc = serde_json::json!({ "report": report, "passed": passed });
    write_json(&cfg.out, &doc)?;
    write_manifest("fubini-check", cfg, &cfg.out)?;
    println!(
        "fubini {}: lhs {:.6e} rhs {:.6e} |diff| {:.3e}, wrote {}",
        if passed { "agreed" } else { "DISAGREED" },
        report.lhs,
        report.rhs,
        report.abs_diff,
        cfg.out.display()
    );
    Ok(passed)
}

fn run_verdict_table(cfg: &VerdictConfig) -> Result<bool> {
    let mut csv = String::from("equation,d,alpha,mild,generalized,random_field\n");
    for &eq in &cfg.equations {
        for &d in &cfg.dims {
            for &alpha in &cfg.alphas {
                let v = existence_verdict(eq, d, alpha)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    eq,
                    d,
                    trim_float(alpha),
                    v.mild_exists,
                    v.generalized_exists,
                    v.random_field_exists
                ));
            }
        }
    }
    std::fs::write(&cfg.out, csv)?;
    write_manifest("verdict-table", cfg, &cfg.out)?;
    println!(
        "wrote {} ({} rows)",
        cfg.out.display(),
        cfg.equations.len() * cfg.dims.len() * cfg.alphas.len()
    );
    Ok(true)
}

fn run_norms(cfg: &NormsConfig) -> Result<bool> {
    let g = GreenFunction::new(cfg.equation, cfg.dim)?;
    let d = cfg.dim as usize;
    let closed: Option<NormResult> = match (cfg.equation, cfg.dim) {
        (Operator::Heat, _) => Some(heat_norm_closed(1.0, cfg.alpha, cfg.dim)?),
        (Operator::Wave, 1) => Some(wave1_norm_closed(1.0, cfg.alpha)?),
        (Operator::Wave, 2) => Some(wave2_norm_closed(1.0, cfg.alpha)?),
        _ => None,
    };
    let (domain, levels) = match cfg.equation {
        Operator::Poisson => (grid_box(&vec![(-2.0, 2.0); d])?, 6),
        Operator::Wave if cfg.dim == 2 => (strip_grid(1.0, 8.0, d)?, 6),
        _ => (strip_grid(1.0, 8.0, d)?, 5),
    };
    let mut shift = vec![0.0; g.coord_dim()];
    if cfg.equation != Operator::Poisson {
        shift[0] = 1.0;
    }
    let quad = lalpha_norm_quadrature(&g, &shift, cfg.alpha, &domain, levels)?;
    let (passed, rel_gap) = match &closed {
        Some(c) if c.diverged || quad.diverged => (c.diverged == quad.diverged, None),
        Some(c) => {
            let rel = (quad.value - c.value).abs() / c.value;
            (rel <= cfg.tol, Some(rel))
        }
        None => (true, None),
    };
    let doc = serde_json::json!({
        "closed": closed,
        "quadrature": quad,
        "rel_gap": rel_gap,
        "tol": cfg.tol,
        "passed": passed,
    });
    write_json(&cfg.out, &doc)?;
    write_manifest("norms", cfg, &cfg.out)?;
    match rel_gap {
        Some(r) => println!(
            "norms {}: rel gap {r:.3e} (tol {:.0e}), wrote {}",
            if passed { "agreed" } else { "DISAGREED" },
            cfg.tol,
            cfg.out.display()
        ),
        None => println!(
            "norms {}: quadrature {}, wrote {}",
            if passed { "agreed" } else { "DISAGREED" },
            if quad.diverged {
                "diverged"
            } else {
                "converged"
            },
            cfg.out.display()
        ),
    }
    Ok(passed)
}

fn run_cf_suite(cfg: &CfConfig) -> Result<bool> {
    if cfg.n < 10_000 {
        return Err(Error::Param(format!(
            "cf-suite needs at least 10000 samples, got {}",
            cfg.n
        )));
    }
    let direct = sample_sas(StableParams::new(cfg.alpha, 1.0)?, cfg.n, cfg.seed)?;
    let direct_report = cf_test(&direct, cfg.alpha, 1.0, &CF_FREQS, None)?.report(
        "sample_sas",
        serde_json::json!({ "alpha": cfg.alpha, "scale": 1.0, "seed": cfg.seed }),
    );
    let quantiles = quantile_check(&direct, cfg.alpha)?;

    // cell-indicator pairing law on a 2 x 2 unit grid: the left column has
    // volume 1/2, so the pairing is stable with scale (1/2)^{1/alpha}
    let grid = GridSpec::from_axes(&[(0.0, 1.0, 2), (0.0, 1.0, 2)])?;
    let m = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairings = Vec::with_capacity(m);
    for _ in 0..m {
        let noise = sample_white_noise(&grid, cfg.alpha, rng.gen::<u64>())?;
        pairings.push(pair_noise(&noise, |p| if p[0] < 0.5 { 1.0 } else { 0.0 })?);
    }
    let pair_report = cf_test(
        &pairings,
        cfg.alpha,
        0.5f64.powf(1.0 / cfg.alpha),
        &CF_FREQS,
        None,
    )?
    .report(
        "pair_noise",
        serde_json::json!({ "alpha": cfg.alpha, "cells": m, "seed": cfg.seed }),
    );
    let passed = direct_report.passed && pair_report.passed && quantiles.passed;
    let doc = serde_json::json!({
        "sample_sas": direct_report,
        "pairing": pair_report,
        "quantiles": quantiles,
        "passed": passed,
    });
    write_json(&cfg.out, &doc)?;
    write_manifest("cf-suite", cfg, &cfg.out)?;
    println!(
        "cf-suite {}: wrote {}",
        if passed { "passed" } else { "FAILED" },
        cfg.out.display()
    );
    Ok(passed)
}

fn run_repro_all(cfg: &ReproConfig) -> Result<bool> {
    let ids: Vec<u32> = if cfg.only.is_empty() {
        (1..=9).collect()
    } else {
        cfg.only.clone()
    };
    let mut reports = Vec::with_capacity(ids.len());
    let mut all = true;
    for &id in &ids {
        let r = verify::criterion(id)?;
        println!("{}", r.line());
        all &= r.passed;
        reports.push(r);
    }
    write_json(&cfg.out, &reports)?;
    write_manifest("repro-all", cfg, &cfg.out)?;
    println!(
        "{} of {} criteria passed, wrote {}",
        reports.iter().filter(|r| r.passed).count(),
        reports.len(),
        cfg.out.display()
    );
    Ok(all)
}

/// Axes triples "lo,hi,cells,lo,hi,cells,..." into a grid.
fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.is_empty() || !parts.len().is_multiple_of(3) {
        return Err(Error::Param(format!(
            "grid must be lo,hi,cells triples, got {} values",
            parts.len()
        )));
    }
    let mut axes = Vec::with_capacity(parts.len() / 3);
    for triple in parts.chunks(3) {
        let lo: f64 = parse_num(triple[0], "grid bound")?;
        let hi: f64 = parse_num(triple[1], "grid bound")?;
        let n: u64 = triple[2].trim().parse().map_err(|_| {
            Error::Param(format!(
                "grid cell count must be a positive integer, got {:?}",
                triple[2]
            ))
        })?;
        axes.push((lo, hi, n));
    }
    GridSpec::from_axes(&axes)
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Param(format!("{what} must be a number, got {s:?}")))
}

/// "3" or inclusive "1..6".
fn parse_dims(s: &str) -> Result<Vec<u32>> {
    match s.split_once("..") {
        Some((a, b)) => {
            let lo: u32 = a.trim().parse().map_err(|_| bad_range(s))?;
            let hi: u32 = b.trim().parse().map_err(|_| bad_range(s))?;
            if lo == 0 || hi < lo {
                return Err(bad_range(s));
            }
            Ok((lo..=hi).collect())
        }
        None => {
            let d: u32 = s.trim().parse().map_err(|_| bad_range(s))?;
            Ok(vec![d])
        }
    }
}

/// "1.5" or inclusive "0.25..1.95:0.1".
fn parse_alphas(s: &str) -> Result<Vec<f64>> {
    match s.split_once("..") {
        Some((a, rest)) => {
            let (b, step) = rest.split_once(':').ok_or_else(|| bad_range(s))?;
            let lo = parse_num(a, "alpha")?;
            let hi = parse_num(b, "alpha")?;
            let step = parse_num(step, "alpha step")?;
            if !(step > 0.0 && hi >= lo) {
                return Err(bad_range(s));
            }
            let count = ((hi - lo) / step + 1.5).floor() as usize;
            let mut out = Vec::with_capacity(count);
            for k in 0..count {
                let v = lo + k as f64 * step;
                if v > hi + 1e-12 {
                    break;
                }
                out.push(v);
            }
            Ok(out)
        }
        None => Ok(vec![parse_num(s, "alpha")?]),
    }
}

fn bad_range(s: &str) -> Error {
    Error::Param(format!(
        "range must be a single value, lo..hi, or lo..hi:step, got {s:?}"
    ))
}

/// Grid over a product of intervals, one cell per axis.
fn grid_box(axes: &[(f64, f64)]) -> Result<GridSpec> {
    let axes: Vec<(f64, f64, u64)> = axes.iter().map(|&(lo, hi)| (lo, hi, 1)).collect();
    GridSpec::from_axes(&axes)
}

fn strip_grid(t: f64, r: f64, d: usize) -> Result<GridSpec> {
    let mut axes = vec![(0.0, t, 1u64)];
    axes.extend(std::iter::repeat_n((-r, r, 1u64), d));
    GridSpec::from_axes(&axes)
}

/// Small default grid for fubini-check: 8 cells per axis in 1 + 1
/// dimensions, 4 per axis above that to keep the double sums cheap.
fn default_grid(equation: Operator, dim: u32) -> Result<GridSpec> {
    let n = if dim <= 1 { 8 } else { 4 };
    let mut axes = match equation {
        Operator::Poisson => Vec::new(),
        _ => vec![(0.0, 1.0, n)],
    };
    axes.extend(std::iter::repeat_n((-2.0, 2.0, n), dim as usize));
    GridSpec::from_axes(&axes)
}

/// Bump centered in the grid's box with radii a quarter of each extent.
fn default_phi(grid: &GridSpec) -> TestFunction {
    let center: Vec<f64> = (0..grid.dim())
        .map(|a| grid.origin[a] + 0.5 * grid.extent[a])
        .collect();
    let radii: Vec<f64> = (0..grid.dim()).map(|a| 0.25 * grid.extent[a]).collect();
    TestFunction::new(center, radii, 1.0).expect("grid axes are validated")
}

/// Shortest decimal form with at most 10 fractional digits, so lattice
/// values like 0.25 + k/10 print as written regardless of float noise.
fn trim_float(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_manifest<C: Serialize>(command: &str, config: &C, out: &Path) -> Result<()> {
    let m = Manifest {
        version: VERSION,
        command,
        config,
    };
    write_json(&manifest_path(out), &m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn load_config<C: DeserializeOwned>(path: &Path, expect: &str) -> Result<C> {
    let text = std::fs::read_to_string(path)?;
    let envelope: ManifestEnvelope = serde_json::from_str(&text)?;
    if envelope.command != expect {
        return Err(Error::Param(format!(
            "manifest is for {:?}, not {expect:?}",
            envelope.command
        )));
    }
    Ok(serde_json::from_value(envelope.config)?)
}

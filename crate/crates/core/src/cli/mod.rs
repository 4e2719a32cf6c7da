//! The `lswspec` command line.

pub mod io;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::adaptive::{equispaced_points, estimate_spectrum, AdaptiveConfig, ExactOracle, VarianceMode};
use crate::error::{domain, LswError, Result};
use crate::estimator::{quadratic_form, u_band, Averager, TimeInterval};
use crate::lsw::{max_levels, simulate, MIN_LEN};
use crate::montecarlo::{self, MonteCarloConfig};
use crate::periodogram::PeriodogramGrid;
use crate::rng::white_noise;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use crate::spec_file;
use crate::spectrum::SpectrumSpec;
use crate::wavelet::{check_delta_identity, check_inverse_rowsum, delta_partial_sum, AutocorrSystem, GramMatrix, Scale};

use io::*;
use manifest::{Command, Fault, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Largest scale count accepted by `identities`.
pub const MAX_IDENTITY_LEVELS: usize = 16;

#[derive(Debug, Parser)]
#[command(name = "lswspec", version, about = "Simulate locally stationary wavelet processes and estimate their spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Simulate a series from a spectrum file.
    Simulate(RunArgs),
    /// Adaptive spectrum estimates of a series.
    Estimate(RunArgs),
    /// Repeated simulation and estimation against the generating spectrum.
    Montecarlo(RunArgs),
    /// Self-checks of the wavelet identities and the estimator algebra.
    Identities(RunArgs),
    /// Rerun a command from a manifest written by an earlier run.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Exact,
    Plugin,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Spectrum file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Series CSV with a single column `x` (estimate).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Scales, e.g. `-1,-2`. Defaults: -1..-4 for estimate, -1 for montecarlo.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub scale: Vec<i32>,
    /// Number of equispaced target points.
    #[arg(long, default_value_t = montecarlo::DEFAULT_POINTS)]
    pub points: usize,
    /// Multiplier of the threshold constant.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub kt: Option<f64>,
    /// Shortest tested interval, in observations.
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub mt: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Regularization constant; derived from the data when absent.
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long, value_enum)]
    pub variance: Option<VarianceArg>,
    /// Stop at the first rejected candidate.
    #[arg(long)]
    pub sequential: bool,
    /// Use the plug-in variance without bias correction.
    #[arg(long)]
    pub no_debias: bool,
    /// Half-width of the running-mean baseline (montecarlo).
    #[arg(long)]
    pub baseline_bandwidth: Option<usize>,
    /// Scale count of the identity checks.
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    /// Also write the raw and corrected periodograms (estimate).
    #[arg(long)]
    pub dump_periodogram: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the one in the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunArgs {
    pub fn into_manifest(self, command: Command) -> RunManifest {
        let mut config = AdaptiveConfig::default();
        if let Some(v) = self.eta {
            config.eta_scale = v;
        }
        config.kt = self.kt.or(config.kt);
        if let Some(v) = self.delta {
            config.delta_points = v;
        }
        if let Some(v) = self.ratio {
            config.grid_ratio = v;
        }
        if let Some(v) = self.mt {
            config.mt = v;
        }
        if let Some(v) = self.window {
            config.window = v;
        }
        config.c2 = self.c2;
        config.variance = match self.variance {
            Some(VarianceArg::Exact) => VarianceMode::Exact,
            Some(VarianceArg::Plugin) | None => VarianceMode::Plugin,
        };
        config.sequential = self.sequential;
        config.debias = !self.no_debias;
        config.seed = self.seed;
        let scales = if !self.scale.is_empty() {
            self.scale
        } else if command == Command::Montecarlo {
            vec![-1]
        } else {
            vec![-1, -2, -3, -4]
        };
        RunManifest {
            command,
            spec: self.spec.map(absolute),
            input: self.input.map(absolute),
            seed: self.seed,
            t: self.t,
            reps: self.reps,
            out: self.out,
            scales,
            points: self.points,
            levels: self.levels,
            threads: self.threads,
            dump_periodogram: self.dump_periodogram,
            baseline_bandwidth: self.baseline_bandwidth,
            fault: self.inject_fault,
            config,
        }
    }
}

// Manifests must stay valid when replayed from another directory.
fn absolute(p: PathBuf) -> PathBuf {
    std::path::absolute(&p).unwrap_or(p)
}

pub fn exit_code(e: &LswError) -> i32 {
    match e {
        LswError::Numerical { .. } | LswError::Internal(_) => EXIT_NUMERICAL,
        LswError::Domain(_) | LswError::Parse { .. } | LswError::Config(_) | LswError::Input(_) | LswError::Resource(_) => EXIT_INPUT,
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let manifest = match cli.command {
        Cmd::Simulate(a) => a.into_manifest(Command::Simulate),
        Cmd::Estimate(a) => a.into_manifest(Command::Estimate),
        Cmd::Montecarlo(a) => a.into_manifest(Command::Montecarlo),
        Cmd::Identities(a) => a.into_manifest(Command::Identities),
        Cmd::Replay(a) => match RunManifest::read(&a.manifest) {
            Ok(mut m) => {
                if let Some(out) = a.out {
                    m.out = out;
                }
                if let Some(t) = a.threads {
                    m.threads = t;
                }
                m
            }
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
        },
    };
    match run(&manifest) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Writes the manifest, then the outputs of the command, into `m.out`.
/// Returns the exit code of a completed run.
pub fn run(m: &RunManifest) -> Result<i32> {
    m.validate()?;
    std::fs::create_dir_all(&m.out).map_err(|e| LswError::Input(format!("{}: {e}", m.out.display())))?;
    m.write(&m.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(m.threads)
        .build()
        .map_err(|e| LswError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match m.command {
        Command::Simulate => cmd_simulate(m),
        Command::Estimate => cmd_estimate(m),
        Command::Montecarlo => cmd_montecarlo(m),
        Command::Identities => cmd_identities(m),
    })
}

fn read_spec(m: &RunManifest) -> Result<SpectrumSpec> {
    let path = m.spec.as_deref().ok_or_else(|| LswError::Config(format!("{} needs --spec", m.command.name())))?;
    spec_file::read(path).map_err(|e| match e {
        LswError::Parse { line, column, message } => {
            LswError::Parse { line, column, message: format!("{}: {message}", path.display()) }
        }
        e => e,
    })
}

fn out_file(m: &RunManifest, name: &str) -> PathBuf {
    m.out.join(name)
}

fn scales_of(m: &RunManifest) -> Result<Vec<Scale>> {
    if m.scales.is_empty() {
        return Err(LswError::Config("no scales requested".into()));
    }
    m.scales.iter().map(|&j| Scale::new(j)).collect()
}

pub fn cmd_simulate(m: &RunManifest) -> Result<i32> {
    let spec = read_spec(m)?;
    let x = simulate(&spec, m.t, m.seed)?;
    write_series(&out_file(m, "series.csv"), &x.values)?;
    println!("simulate: wrote {} values to {}", x.len(), out_file(m, "series.csv").display());
    Ok(EXIT_OK)
}

pub fn cmd_estimate(m: &RunManifest) -> Result<i32> {
    let input = m.input.as_deref().ok_or_else(|| LswError::Config("estimate needs --input".into()))?;
    let x = read_series(input)?;
    if x.len() < MIN_LEN {
        return Err(domain(format!("series of length {} is below the minimum {MIN_LEN}", x.len())));
    }
    let t = x.len();
    let gram = crate::wavelet::gram_matrix(max_levels(t))?;
    let grid = PeriodogramGrid::new(&x, &gram)?;
    let scales = scales_of(m)?;
    for &s in &scales {
        grid.check_scale(s)?;
    }
    let oracle = match m.config.variance {
        VarianceMode::Exact => Some(ExactOracle::new(&read_spec(m)?, gram.levels(), t, &scales)?),
        VarianceMode::Plugin => None,
    };
    let z0s = equispaced_points(m.points);
    let per_scale = scales
        .par_iter()
        .map(|&s| estimate_spectrum(&grid, &[s], &z0s, &m.config, oracle.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let mut estimates = Vec::new();
    let mut intervals = Vec::new();
    for grid_est in &per_scale {
        for e in &grid_est.rows {
            estimates.push(EstimateRow {
                scale: e.scale.j(),
                z0: e.z0,
                shat: e.value,
                lo: e.selected.lo,
                hi: e.selected.hi,
                sigma2: e.sigma2,
            });
            intervals.extend(e.trace.iter().map(|r| IntervalRow {
                scale: e.scale.j(),
                z0: e.z0,
                r_lo: r.r.lo,
                r_hi: r.r.hi,
                u_lo: r.u.lo,
                u_hi: r.u.hi,
                statistic: r.statistic,
                threshold: r.threshold,
                rejected: r.rejected,
            }));
        }
    }
    write_rows(&out_file(m, "estimates.csv"), &estimates)?;
    write_rows(&out_file(m, "intervals.csv"), &intervals)?;
    if m.dump_periodogram {
        let rows: Vec<PeriodogramRow> = Scale::finest(grid.levels())
            .flat_map(|s| {
                let (raw, cor) = (grid.raw(s), grid.corrected(s));
                (0..t).map(move |k| PeriodogramRow { scale: s.j(), k, raw: raw[k], corrected: cor[k] })
            })
            .collect();
        write_rows(&out_file(m, "periodogram.csv"), &rows)?;
    }
    let c2 = per_scale.first().map_or(0.0, |g| g.c2);
    println!("estimate: T = {t}, {} scales x {} points, C^2 = {c2:.6e}", scales.len(), z0s.len());
    Ok(EXIT_OK)
}

pub fn cmd_montecarlo(m: &RunManifest) -> Result<i32> {
    let spec = read_spec(m)?;
    let scales = scales_of(m)?;
    if scales.len() != 1 {
        return Err(LswError::Config("montecarlo takes exactly one scale".into()));
    }
    let cfg = MonteCarloConfig {
        t: m.t,
        reps: m.reps,
        seed: m.seed,
        scale: scales[0],
        points: m.points,
        adaptive: m.config,
        baseline_bandwidth: m.baseline_bandwidth,
    };
    let report = montecarlo::run(&spec, &cfg)?;
    let rows: Vec<MonteCarloRow> =
        report.per_point.iter().map(|p| MonteCarloRow { z0: p.z0, median: p.median, q05: p.q05, q95: p.q95 }).collect();
    write_rows(&out_file(m, "montecarlo.csv"), &rows)?;
    write_rows(
        &out_file(m, "metrics.csv"),
        &[MetricsRow { mse: report.adaptive.mse, mad: report.adaptive.mad, runtime: report.runtime_seconds }],
    )?;
    write_rows(
        &out_file(m, "baseline.csv"),
        &[BaselineRow { bandwidth: report.baseline_bandwidth, mse: report.baseline.mse, mad: report.baseline.mad }],
    )?;
    println!(
        "montecarlo: {} reps, adaptive mse {:.4} mad {:.4}; running mean (b = {}) mse {:.4} mad {:.4}; {:.1} s",
        m.reps,
        report.adaptive.mse,
        report.adaptive.mad,
        report.baseline_bandwidth,
        report.baseline.mse,
        report.baseline.mad,
        report.runtime_seconds
    );
    Ok(EXIT_OK)
}

/// Runs the self-checks for `levels` scales.
pub fn identity_checks(levels: usize, seed: u64, fault: Option<Fault>) -> Result<Vec<IdentityRow>> {
    if levels == 0 || levels > MAX_IDENTITY_LEVELS {
        return Err(domain(format!("identity checks take 1..={MAX_IDENTITY_LEVELS} scales, got {levels}")));
    }
    let mut system = AutocorrSystem::haar(levels)?;
    if fault == Some(Fault::PsiSign) {
        let s = Scale::new(-1)?;
        let v = system.psi(s, 1);
        system.corrupt_entry(s, 1, -v);
    }
    let jj = format!("J={levels}");
    let mut rows = Vec::new();
    let mut push = |check: &str, parameter: String, residual: f64, tolerance: f64| {
        rows.push(IdentityRow { check: check.into(), parameter, residual, tolerance, pass: residual <= tolerance });
    };

    push("autocorrelation symmetry", jj.clone(), system.symmetry_residual(), 1e-15);
    let coarse = 1i64 << levels;
    let at_origin = (1.0 - delta_partial_sum(&system, 0) - (-(levels as f64)).exp2()).abs();
    push("delta identity at origin", jj.clone(), at_origin, 1e-12);
    let off: f64 = (1..coarse).map(|tau| delta_partial_sum(&system, tau).abs()).fold(0.0, f64::max);
    push("delta identity off origin", jj.clone(), off, (3.0 - levels as f64).exp2());
    let whole = check_delta_identity(&system, coarse);
    push("delta identity", format!("{jj} tau<={coarse}"), whole, (3.0 - levels as f64).exp2());

    let gram = GramMatrix::new(&system)?;
    push("Gram positive definite", jj.clone(), -gram.min_eigenvalue, 0.0);
    push("Gram inverse residual", jj.clone(), gram.inverse_residual, crate::wavelet::INVERSE_TOLERANCE);
    for (i, dev) in check_inverse_rowsum(&gram).into_iter().enumerate() {
        let j = Scale::from_index(i);
        // deviation of order 2^{j/2} 2^{-J/2}
        let bound = (j.j() as f64 / 2.0 - levels as f64 / 2.0).exp2();
        push("inverse row sum", format!("{jj} j={}", j.j()), dev, bound);
    }

    // X'UX against the prefix-sum average on random intervals and scales
    let t = 512;
    let small = crate::wavelet::gram_matrix(max_levels(t))?;
    let x = white_noise(seed, t);
    let grid = PeriodogramGrid::new(&x, &small)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let j = Scale::from_index(rng.next_u64() as usize % small.levels());
        let a = rng.next_u64() as usize % (t - 1);
        let b = a + 1 + rng.next_u64() as usize % (t - a);
        let r = TimeInterval::new(a, b.min(t), t)?;
        let q = Averager::new(&grid, j, 0.0, seed)?.q(&r);
        let xux = quadratic_form(&u_band(j, &r, t, &small)?, &x);
        worst = worst.max((xux - q).abs() / q.abs().max(1.0));
    }
    push("quadratic form", format!("{jj} T={t}"), worst, 1e-10);
    Ok(rows)
}

pub fn cmd_identities(m: &RunManifest) -> Result<i32> {
    let rows = identity_checks(m.levels, m.seed, m.fault)?;
    write_rows(&out_file(m, "identities.csv"), &rows)?;
    for r in &rows {
        println!("{} {} ({}): {:.3e} <= {:.3e}", if r.pass { "PASS" } else { "FAIL" }, r.check, r.parameter, r.residual, r.tolerance);
    }
    if rows.iter().all(|r| r.pass) {
        Ok(EXIT_OK)
    } else {
        let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
        eprintln!("identities failed: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}

/// Directory listing used to compare two runs: every file but the manifest.
pub fn output_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| LswError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n != manifest::MANIFEST_FILE))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_pass_and_fault_is_caught() {
        let rows = identity_checks(8, 1, None).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        let bad = identity_checks(8, 1, Some(Fault::PsiSign)).unwrap();
        let failed: Vec<_> = bad.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
        assert!(failed.contains(&"autocorrelation symmetry"));
    }

    #[test]
    fn identity_levels_are_bounded() {
        assert!(identity_checks(0, 1, None).is_err());
        assert!(identity_checks(MAX_IDENTITY_LEVELS + 1, 1, None).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&domain("x")), EXIT_INPUT);
        assert_eq!(exit_code(&LswError::Parse { line: 1, column: 2, message: String::new() }), EXIT_INPUT);
        assert_eq!(exit_code(&LswError::Numerical { message: String::new(), condition_number: 1.0 }), EXIT_NUMERICAL);
    }
}

//! Command-line front end: argument parsing, dispatch, and output files.
//!
//! Exit codes: 0 success, 1 runtime or model error, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use jumpem_core::diagnostics::{
    crossing_estimates, occupation_estimates, Sampling, DEFAULT_REFINEMENT,
};
use jumpem_core::output::write_atomic;
use jumpem_core::{
    fit_slope, run_convergence, sample_driver, simulate_em, simulate_transformed_em,
    CoefficientModel, ErrorNorm, StudyConfig, TimeGrid, TransformG,
};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn runtime(err: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: format!("error: {err}"),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "jumpem",
    version,
    about = "Euler-Maruyama for jump-diffusion SDEs with discontinuous drift"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Built-in model name (example1, example2) or path to a JSON model file
    #[arg(long)]
    model: String,
}

#[derive(Args, Debug)]
struct ParallelArg {
    /// Worker threads (default: available parallelism); results do not depend on it
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Tabulate G, its derivatives and the transformed coefficients, and check invariants
    TransformCheck {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        report: PathBuf,
        /// Number of uniform grid points (with --from/--to)
        #[arg(long, default_value_t = 2001, value_parser = clap::value_parser!(u32).range(2..))]
        points: u32,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        /// Random samples for the invariant checks
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u32).range(1..))]
        samples: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Simulate one Euler-Maruyama path
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_parser = parse_steps)]
        steps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Path index within the seed's family of streams
        #[arg(long, default_value_t = 0)]
        path: u64,
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also run the scheme for Z = G(X) and report Z and G^{-1}(Z)
        #[arg(long)]
        transformed: bool,
    },
    /// Coupled multi-level strong convergence study
    Converge {
        #[command(flatten)]
        model: ModelArg,
        /// log2 of the step counts: `a..b` (inclusive) or a list `a,b,c`
        #[arg(long, value_parser = parse_levels)]
        levels: Levels,
        #[arg(long, default_value_t = 4096, value_parser = parse_positive)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write a gnuplot script for the log-log error plot
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Use the maximum over shared grid nodes instead of the terminal value
        #[arg(long)]
        sup_error: bool,
        #[command(flatten)]
        parallel: ParallelArg,
    },
    /// Mean occupation time near a breakpoint for several band widths
    Occupation {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 1, value_parser = parse_positive)]
        zeta_index: usize,
        /// Comma-separated band half-widths
        #[arg(long, value_parser = parse_positive_f64, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_parser = parse_steps)]
        steps: usize,
        #[arg(long, default_value_t = 4096, value_parser = parse_positive)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REFINEMENT, value_parser = parse_steps)]
        refinement: usize,
        /// Override the model's initial value
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        parallel: ParallelArg,
    },
    /// Mean squared discontinuity-crossing statistic across step sizes
    Crossing {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 1, value_parser = parse_positive)]
        zeta_index: usize,
        /// log2 of the step counts: `a..b` (inclusive) or a list `a,b,c`
        #[arg(long, value_parser = parse_levels)]
        levels: Levels,
        #[arg(long, default_value_t = 4096, value_parser = parse_positive)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REFINEMENT, value_parser = parse_steps)]
        refinement: usize,
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        parallel: ParallelArg,
    },
}

/// Level exponents, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Levels(pub Vec<u32>);

impl Levels {
    pub fn step_counts(&self) -> Vec<usize> {
        self.0.iter().map(|&e| 1usize << e).collect()
    }
}

const MAX_LEVEL: u32 = 24;

fn parse_levels(s: &str) -> Result<Levels, String> {
    let exps: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| format!("bad level '{a}'"))?;
        let b: u32 = b.trim().parse().map_err(|_| format!("bad level '{b}'"))?;
        if a >= b {
            return Err(format!("level range {a}..{b} must satisfy a < b"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| format!("bad level '{p}'"))
            })
            .collect::<Result<_, _>>()?
    };
    if exps.len() < 2 || exps.windows(2).any(|w| w[0] >= w[1]) {
        return Err("levels must be strictly increasing with at least two entries".into());
    }
    if exps.iter().any(|&e| e > MAX_LEVEL) {
        return Err(format!("levels above {MAX_LEVEL} are not supported"));
    }
    Ok(Levels(exps))
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_steps(s: &str) -> Result<usize, String> {
    let n = parse_positive(s)?;
    if !n.is_power_of_two() {
        return Err(format!("{n} is not a power of two"));
    }
    Ok(n)
}

#[derive(Debug, Clone)]
pub enum Command {
    TransformCheck {
        report: PathBuf,
        points: usize,
        range: Option<(f64, f64)>,
        samples: usize,
        seed: u64,
    },
    Simulate {
        steps: usize,
        seed: u64,
        path: u64,
        out: PathBuf,
        transformed: bool,
    },
    Converge {
        levels: Levels,
        paths: usize,
        seed: u64,
        out: PathBuf,
        plot: Option<PathBuf>,
        sup_error: bool,
    },
    Occupation {
        zeta_index: usize,
        eps: Vec<f64>,
        steps: usize,
        sampling: Sampling,
        out: PathBuf,
    },
    Crossing {
        zeta_index: usize,
        levels: Levels,
        sampling: Sampling,
        out: PathBuf,
    },
}

/// A validated invocation with its model loaded.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: CoefficientModel,
    pub model_name: String,
    pub command: Command,
    pub threads: Option<usize>,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn load_model(source: &str, xi: Option<f64>) -> Result<(CoefficientModel, String), CliError> {
    let model = CoefficientModel::load(source)
        .map_err(|e| CliError::runtime(format!("cannot load model '{source}': {e}")))?;
    let name = Path::new(source)
        .file_stem()
        .map_or_else(|| source.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((xi.map_or(model.clone(), |x| model.with_xi(x)), name))
}

pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError {
        code: if e.use_stderr() { EXIT_USAGE } else { 0 },
        message: e.render().to_string(),
    })?;

    let (source, xi, threads, command) = match cli.command {
        CliCommand::TransformCheck {
            model,
            report,
            points,
            from,
            to,
            samples,
            seed,
        } => {
            let range = match (from, to) {
                (Some(a), Some(b)) if a < b => Some((a, b)),
                (None, None) => None,
                _ => {
                    return Err(usage(
                        "error: --from and --to must be given together with from < to",
                    ))
                }
            };
            let cmd = Command::TransformCheck {
                report,
                points: points as usize,
                range,
                samples: samples as usize,
                seed,
            };
            (model.model, None, None, cmd)
        }
        CliCommand::Simulate {
            model,
            steps,
            seed,
            path,
            xi,
            out,
            transformed,
        } => (
            model.model,
            xi,
            None,
            Command::Simulate {
                steps,
                seed,
                path,
                out,
                transformed,
            },
        ),
        CliCommand::Converge {
            model,
            levels,
            paths,
            seed,
            out,
            plot,
            sup_error,
            parallel,
        } => {
            if levels.0.len() < 3 {
                return Err(usage("error: --levels needs at least three levels"));
            }
            let cmd = Command::Converge {
                levels,
                paths,
                seed,
                out,
                plot,
                sup_error,
            };
            (model.model, None, parallel.threads, cmd)
        }
        CliCommand::Occupation {
            model,
            zeta_index,
            eps,
            steps,
            paths,
            seed,
            refinement,
            xi,
            out,
            parallel,
        } => {
            let sampling = Sampling::new(paths, seed).with_refinement(refinement);
            let cmd = Command::Occupation {
                zeta_index,
                eps,
                steps,
                sampling,
                out,
            };
            (model.model, xi, parallel.threads, cmd)
        }
        CliCommand::Crossing {
            model,
            zeta_index,
            levels,
            paths,
            seed,
            refinement,
            xi,
            out,
            parallel,
        } => {
            let sampling = Sampling::new(paths, seed).with_refinement(refinement);
            (
                model.model,
                xi,
                parallel.threads,
                Command::Crossing {
                    zeta_index,
                    levels,
                    sampling,
                    out,
                },
            )
        }
    };
    let (model, model_name) = load_model(&source, xi)?;
    Ok(RunConfig {
        model,
        model_name,
        command,
        threads: threads.map(|t| t as usize),
    })
}

/// Short decimal form: at most 12 significant decimals, trailing zeros removed.
fn fmt_short(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let digits = (11 - x.abs().log10().floor() as i32).clamp(0, 30) as usize;
    let s = format!("{x:.digits$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn zeta_at(model: &CoefficientModel, index: usize) -> Result<f64, CliError> {
    model
        .breakpoints()
        .get(index.wrapping_sub(1))
        .copied()
        .ok_or_else(|| {
            CliError::runtime(format!(
                "--zeta-index {index} out of range 1..={}",
                model.breakpoints().len()
            ))
        })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents.as_bytes())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn transform_check(
    cfg: &RunConfig,
    report: &Path,
    points: usize,
    range: Option<(f64, f64)>,
    samples: usize,
    seed: u64,
) -> Result<String, CliError> {
    let t = TransformG::build(&cfg.model).map_err(CliError::runtime)?;
    let mut xs: Vec<f64> = match range {
        Some((a, b)) => (0..points)
            .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
            .collect(),
        None => {
            let (a, b) = t.check_range();
            let mut xs: Vec<f64> = (0..points)
                .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
                .collect();
            // resolve each bump as well
            for &z in t.zetas() {
                xs.extend((0..=200).map(|i| z - 1.5 * t.c() + 3.0 * t.c() * i as f64 / 200.0));
            }
            xs
        }
    };
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let inv = t.check_invariants(samples, seed);
    let alphas: Vec<String> = t
        .alphas()
        .iter()
        .enumerate()
        .map(|(i, a)| format!("alpha_{}={}", i + 1, fmt_short(*a)))
        .collect();
    let status = if inv.passed() { "pass" } else { "FAIL" };
    let summary = format!(
        "model={} {} c={} invariants={status} samples={} monotonicity_violations={} max_roundtrip_error={:e} min_g_prime={} fixed_points_exact={} identity_outside_exact={} tilde_mu_lipschitz={}",
        cfg.model_name,
        alphas.join(" "),
        fmt_short(t.c()),
        inv.samples,
        inv.monotonicity_violations,
        inv.max_roundtrip_error,
        fmt_short(inv.min_g_prime),
        inv.fixed_points_exact,
        inv.identity_outside_exact,
        fmt_short(inv.tilde_mu_lipschitz),
    );

    let mut csv = String::new();
    writeln!(csv, "# {summary}").unwrap();
    writeln!(csv, "x,G,G_prime,G_second,tilde_mu,tilde_sigma,tilde_rho").unwrap();
    for x in xs {
        let z = t.g(x);
        writeln!(
            csv,
            "{x},{z},{},{},{},{},{}",
            t.g_prime(x),
            t.g_second(x),
            t.tilde_mu(z),
            t.tilde_sigma(z),
            t.tilde_rho(z)
        )
        .unwrap();
    }
    write(report, &csv)?;
    Ok(summary)
}

fn simulate(
    cfg: &RunConfig,
    steps: usize,
    seed: u64,
    path: u64,
    out: &Path,
    transformed: bool,
) -> Result<String, CliError> {
    let model = &cfg.model;
    let grid = TimeGrid::new(model.horizon(), steps).map_err(CliError::runtime)?;
    let driver = sample_driver(seed, path, grid, model.lambda());
    let x = simulate_em(model, grid, &driver).map_err(CliError::runtime)?;
    let mut csv = String::new();
    writeln!(
        csv,
        "# model={},seed={seed},path={path},steps={steps},xi={}",
        cfg.model_name,
        model.xi()
    )
    .unwrap();
    if transformed {
        let t = TransformG::build(model).map_err(CliError::runtime)?;
        let z = simulate_transformed_em(&t, grid, &driver).map_err(CliError::runtime)?;
        writeln!(csv, "t,X,Z,G_inv_Z").unwrap();
        for (k, (xv, zv)) in x.values().iter().zip(z.values()).enumerate() {
            writeln!(csv, "{},{xv},{zv},{}", grid.node(k), t.inverse(*zv)).unwrap();
        }
    } else {
        writeln!(csv, "t,X").unwrap();
        for (k, xv) in x.values().iter().enumerate() {
            writeln!(csv, "{},{xv}", grid.node(k)).unwrap();
        }
    }
    write(out, &csv)?;
    Ok(format!(
        "model={} steps={steps} seed={seed} X_T={}",
        cfg.model_name,
        x.terminal()
    ))
}

fn converge(
    cfg: &RunConfig,
    levels: &Levels,
    paths: usize,
    seed: u64,
    out: &Path,
    plot: Option<&Path>,
    sup_error: bool,
) -> Result<String, CliError> {
    let mut study = StudyConfig::new(
        cfg.model.clone(),
        cfg.model_name.clone(),
        levels.step_counts(),
        paths,
        seed,
    );
    if sup_error {
        study.norm = ErrorNorm::Sup;
    }
    let report = run_convergence(&study).map_err(CliError::runtime)?;
    write(out, &report.to_csv())?;
    if let Some(plot) = plot {
        write(plot, &report.gnuplot_script(&out.display().to_string()))?;
    }
    let slope = report
        .slope
        .map_or_else(|| "NaN".to_string(), |s| format!("{s:.4}"));
    Ok(format!(
        "model={} paths={paths} seed={seed} slope={slope}",
        cfg.model_name
    ))
}

fn occupation(
    cfg: &RunConfig,
    zeta_index: usize,
    eps: &[f64],
    steps: usize,
    sampling: Sampling,
    out: &Path,
) -> Result<String, CliError> {
    let zeta = zeta_at(&cfg.model, zeta_index)?;
    let grid = TimeGrid::new(cfg.model.horizon(), steps).map_err(CliError::runtime)?;
    let est =
        occupation_estimates(&cfg.model, grid, zeta, eps, sampling).map_err(CliError::runtime)?;
    let mut csv = String::new();
    writeln!(
        csv,
        "# model={},seed={},xi={},refinement={}",
        cfg.model_name,
        sampling.seed,
        cfg.model.xi(),
        sampling.refinement
    )
    .unwrap();
    writeln!(csv, "zeta,epsilon,steps,delta,estimate,stderr,paths").unwrap();
    for e in &est {
        writeln!(
            csv,
            "{},{},{steps},{},{},{},{}",
            e.zeta, e.epsilon, e.delta, e.mean_time, e.stderr, e.paths
        )
        .unwrap();
    }
    write(out, &csv)?;
    let parts: Vec<String> = est
        .iter()
        .map(|e| format!("eps={}:{:.6e}", e.epsilon, e.mean_time))
        .collect();
    Ok(format!(
        "model={} zeta={zeta} occupation {}",
        cfg.model_name,
        parts.join(" ")
    ))
}

fn crossing(
    cfg: &RunConfig,
    zeta_index: usize,
    levels: &Levels,
    sampling: Sampling,
    out: &Path,
) -> Result<String, CliError> {
    let zeta = zeta_at(&cfg.model, zeta_index)?;
    let grids = levels
        .step_counts()
        .into_iter()
        .map(|n| TimeGrid::new(cfg.model.horizon(), n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::runtime)?;
    let est = crossing_estimates(&cfg.model, &grids, zeta, sampling).map_err(CliError::runtime)?;
    let points: Vec<(f64, f64)> = est
        .iter()
        .filter(|e| e.mean_square > 0.0)
        .map(|e| (e.delta.log2(), e.mean_square.log2()))
        .collect();
    let slope = fit_slope(&points).map_or(f64::NAN, |(s, _)| s);
    let mut csv = String::new();
    writeln!(
        csv,
        "# model={},seed={},xi={},refinement={},slope={slope}",
        cfg.model_name,
        sampling.seed,
        cfg.model.xi(),
        sampling.refinement
    )
    .unwrap();
    writeln!(csv, "zeta,steps,delta,estimate,stderr,paths").unwrap();
    for (e, g) in est.iter().zip(&grids) {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            e.zeta,
            g.steps(),
            e.delta,
            e.mean_square,
            e.stderr,
            e.paths
        )
        .unwrap();
    }
    write(out, &csv)?;
    Ok(format!(
        "model={} zeta={zeta} crossing slope={slope:.4}",
        cfg.model_name
    ))
}

fn dispatch(cfg: &RunConfig) -> Result<String, CliError> {
    match &cfg.command {
        Command::TransformCheck {
            report,
            points,
            range,
            samples,
            seed,
        } => transform_check(cfg, report, *points, *range, *samples, *seed),
        Command::Simulate {
            steps,
            seed,
            path,
            out,
            transformed,
        } => simulate(cfg, *steps, *seed, *path, out, *transformed),
        Command::Converge {
            levels,
            paths,
            seed,
            out,
            plot,
            sup_error,
        } => converge(cfg, levels, *paths, *seed, out, plot.as_deref(), *sup_error),
        Command::Occupation {
            zeta_index,
            eps,
            steps,
            sampling,
            out,
        } => occupation(cfg, *zeta_index, eps, *steps, *sampling, out),
        Command::Crossing {
            zeta_index,
            levels,
            sampling,
            out,
        } => crossing(cfg, *zeta_index, levels, *sampling, out),
    }
}

/// Runs a parsed invocation and returns its one-line summary.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    match cfg.threads {
        None => dispatch(cfg),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?
            .install(|| dispatch(cfg)),
    }
}

/// Parses, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|cfg| run(&cfg));
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) if e.code == 0 => {
            print!("{}", e.message);
            0
        }
        Err(e) => {
            eprintln!("{}", e.message.trim_end());
            e.code
        }
    }
}

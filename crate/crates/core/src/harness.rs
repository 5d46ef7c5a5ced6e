//! Coupled multi-level convergence study.
//!
//! Every path draws one driver on the finest level and runs the scheme at all
//! levels from that same noise. The error estimate at level `k` is
//!
//! ```text
//! error(k) = mean(|X_T^(k) - X_T^(k-1)|^2)^(1/2)
//! ```
//!
//! and the convergence order is the least-squares slope of `log2 error(k)`
//! against `log2 delta(k)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::coeffs::CoefficientModel;
use crate::drivers::{sample_driver, LevelIncrements, TimeGrid};
use crate::error::{Error, Result};
use crate::euler::em_values;
use crate::output::write_atomic;
use crate::stats::{map_paths, mean_and_stderr};

pub const CSV_HEADER: &str = "level,steps,delta,error,stderr,log2_delta,log2_error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNorm {
    /// `|X_T^(k) - X_T^(k-1)|`.
    #[default]
    Terminal,
    /// Maximum over the nodes shared by both levels.
    Sup,
}

impl ErrorNorm {
    fn as_str(self) -> &'static str {
        match self {
            ErrorNorm::Terminal => "terminal",
            ErrorNorm::Sup => "sup",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "terminal" => Ok(ErrorNorm::Terminal),
            "sup" => Ok(ErrorNorm::Sup),
            _ => Err(Error::MalformedReport(format!("unknown error norm '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: CoefficientModel,
    pub model_name: String,
    /// Step counts, strictly increasing, each dividing the next.
    pub levels: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub norm: ErrorNorm,
}

impl StudyConfig {
    pub fn new(
        model: CoefficientModel,
        model_name: impl Into<String>,
        levels: Vec<usize>,
        paths: usize,
        seed: u64,
    ) -> Self {
        Self {
            model,
            model_name: model_name.into(),
            levels,
            paths,
            seed,
            norm: ErrorNorm::Terminal,
        }
    }

    /// Levels `2^lo ..= 2^hi`.
    pub fn power_levels(lo: u32, hi: u32) -> Vec<usize> {
        (lo..=hi).map(|e| 1usize << e).collect()
    }

    fn grids(&self) -> Result<Vec<TimeGrid>> {
        if self.levels.len() < 3 {
            return Err(Error::InvalidStudy(format!(
                "need at least 3 levels, got {}",
                self.levels.len()
            )));
        }
        if self.paths == 0 {
            return Err(Error::InvalidStudy("need at least one path".into()));
        }
        for w in self.levels.windows(2) {
            if w[0] >= w[1] || w[1] % w[0] != 0 {
                return Err(Error::Divisibility {
                    coarse: w[0],
                    fine: w[1],
                });
            }
        }
        self.levels
            .iter()
            .map(|&n| TimeGrid::new(self.model.horizon(), n))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    /// Position in the level list; level 0 has no error value.
    pub level: usize,
    pub steps: usize,
    pub delta: f64,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub records: Vec<LevelRecord>,
    /// `None` when fewer than two levels have a positive error.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub seed: u64,
    pub paths: usize,
    pub model_name: String,
    pub norm: ErrorNorm,
}

/// Ordinary least-squares line `y = slope x + intercept`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Squared level differences for one path, one per level after the first.
fn path_differences(config: &StudyConfig, grids: &[TimeGrid], path: u64) -> Result<Vec<f64>> {
    let finest = *grids.last().expect("validated");
    let driver = sample_driver(config.seed, path, finest, config.model.lambda());
    let mut increments: LevelIncrements = driver.increments_at_level(&finest)?;
    let mut values = vec![Vec::new(); grids.len()];
    for (j, grid) in grids.iter().enumerate().rev() {
        if increments.grid.steps() != grid.steps() {
            increments = increments.coarsen(increments.grid.steps() / grid.steps())?;
        }
        values[j] = em_values(&config.model, &increments);
    }
    Ok(values
        .windows(2)
        .map(|pair| {
            let (coarse, fine) = (&pair[0], &pair[1]);
            let d = match config.norm {
                ErrorNorm::Terminal => coarse.last().unwrap() - fine.last().unwrap(),
                ErrorNorm::Sup => {
                    let ratio = (fine.len() - 1) / (coarse.len() - 1);
                    coarse
                        .iter()
                        .enumerate()
                        .map(|(k, x)| (x - fine[k * ratio]).abs())
                        .fold(0.0, f64::max)
                }
            };
            d * d
        })
        .collect())
}

pub fn run_convergence(config: &StudyConfig) -> Result<ConvergenceReport> {
    let grids = config.grids()?;
    let per_path = map_paths(config.paths, |i| path_differences(config, &grids, i))?;

    let records: Vec<LevelRecord> = (1..grids.len())
        .map(|level| {
            let squares: Vec<f64> = per_path.iter().map(|row| row[level - 1]).collect();
            let (mean_sq, se_sq) = mean_and_stderr(&squares);
            let error = mean_sq.sqrt();
            // delta method for the square root
            let stderr = if error > 0.0 {
                se_sq / (2.0 * error)
            } else {
                0.0
            };
            LevelRecord {
                level,
                steps: grids[level].steps(),
                delta: grids[level].delta(),
                error,
                stderr,
            }
        })
        .collect();

    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.delta.log2(), r.error.log2()))
        .collect();
    let (slope, intercept) = match fit_slope(&points) {
        Ok((s, b)) => (Some(s), Some(b)),
        Err(_) => (None, None),
    };
    Ok(ConvergenceReport {
        records,
        slope,
        intercept,
        seed: config.seed,
        paths: config.paths,
        model_name: config.model_name.clone(),
        norm: config.norm,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::MalformedReport(format!("bad number '{s}'")))?;
    Ok((!v.is_nan()).then_some(v))
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# seed={},paths={},model={},slope={},intercept={},norm={}",
            self.seed,
            self.paths,
            self.model_name,
            fmt_opt(self.slope),
            fmt_opt(self.intercept),
            self.norm.as_str()
        )
        .unwrap();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.level,
                r.steps,
                r.delta,
                r.error,
                r.stderr,
                r.delta.log2(),
                r.error.log2()
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::MalformedReport(msg.to_string());
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| bad("missing metadata line"))?;
        let field = |key: &str| -> Result<&str> {
            meta.split(',')
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| bad(&format!("missing metadata key '{key}'")))
        };
        let num =
            |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(&format!("bad number '{s}'"))) };
        let int = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| bad(&format!("bad integer '{s}'")))
        };

        if lines.next() != Some(CSV_HEADER) {
            return Err(bad("unexpected header"));
        }
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(bad(&format!("expected 7 columns in '{line}'")));
            }
            records.push(LevelRecord {
                level: int(cols[0])?,
                steps: int(cols[1])?,
                delta: num(cols[2])?,
                error: num(cols[3])?,
                stderr: num(cols[4])?,
            });
        }
        Ok(Self {
            records,
            slope: parse_opt(field("slope")?)?,
            intercept: parse_opt(field("intercept")?)?,
            seed: field("seed")?.parse().map_err(|_| bad("bad seed"))?,
            paths: int(field("paths")?)?,
            model_name: field("model")?.to_string(),
            norm: ErrorNorm::parse(field("norm")?)?,
        })
    }

    /// Gnuplot script plotting `log2 error` against `log2 delta` from `csv_name`,
    /// with a reference line of slope 1/2.
    pub fn gnuplot_script(&self, csv_name: &str) -> String {
        let anchor = self
            .records
            .first()
            .filter(|r| r.error > 0.0)
            .map_or(0.0, |r| r.error.log2() - 0.5 * r.delta.log2());
        format!(
            "set datafile separator ','\n\
             set key top left\n\
             set xlabel 'log2(delta)'\n\
             set ylabel 'log2(error)'\n\
             set key autotitle columnhead\n\
             ref(x) = 0.5 * x + {anchor}\n\
             plot ref(x) with lines dashtype 3 lc rgb 'black' title 'slope 1/2', \\\n\
             \x20    '{csv_name}' using 6:7 with linespoints lc rgb 'blue' title '{}'\n",
            self.model_name
        )
    }
}

pub fn emit_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_atomic(path, report.to_csv().as_bytes())
}

//! Batch front end: scenario files in, CSV or JSON tables out.

mod output;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use statbeam::beamform::{
    angle_profile, candidate_pair, grassmann_search, grassmann_search_weighted, optimal_high_snr,
    optimal_low_snr, optimal_single_user, optimize_alpha_beta, optimize_weighted, BeamIndex,
    BeamformerPair, Regime, PARAM_MAX,
};
use statbeam::density::{weighted_norm_cdf, WeightSpectrum};
use statbeam::linalg::GrassmannVector;
use statbeam::montecarlo::empirical_weighted_norm_cdf;
use statbeam::rates::{sum_rate, sum_rate_high_snr_limit};
use statbeam::specfun::h;
use statbeam::validate::{run_suite, SuiteConfig};
use statbeam::PositiveReal;

use output::Csv;
use scenario::{McSettings, Mode, Scenario, DEFAULT_SEED};

/// Fixed reference point of the candidate family, reported next to the optimum.
const BASELINE_ALPHA: f64 = 100.0;
const BASELINE_BETA: f64 = 15.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Malformed(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    ValidationFailed(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Malformed(_) => "malformed",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
            CliError::ValidationFailed(_) => "validation",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Malformed(_) | CliError::Io(_) => 1,
            CliError::ValidationFailed(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<statbeam::Error> for CliError {
    fn from(e: statbeam::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "statbeam", version, about = "Statistical beamforming for the two-user MISO downlink")]
struct Cli {
    /// Write `<subcommand>.csv` (or `.json`, `.txt`) into this directory instead of stdout
    #[arg(long, global = true, env = "STATBEAM_OUT")]
    out: Option<PathBuf>,
    /// Override the scenario or suite seed
    #[arg(long, global = true, env = "STATBEAM_SEED")]
    seed: Option<u64>,
    /// Override the Monte Carlo sample count
    #[arg(long, global = true, env = "STATBEAM_SAMPLES")]
    samples: Option<usize>,
    /// No progress output on stderr
    #[arg(long, global = true, env = "STATBEAM_QUIET")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and empirical CDF of the weighted norm of an isotropic beam
    Cdf {
        /// Eigenvalue sets, e.g. `2,1` `3,2,1`
        #[arg(long = "case", value_delimiter = ' ', num_args = 1..)]
        cases: Vec<String>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// The rate kernel h(x) on a log grid
    Hfunc {
        #[arg(long, default_value_t = 1e-3)]
        min: f64,
        #[arg(long, default_value_t = 1e3)]
        max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Sum-rate of the optimized family and reference designs across SNR
    Sumrate { scenario: PathBuf },
    /// Alignment of the candidate beams with the dominant eigenvectors
    Angles {
        scenario: PathBuf,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Weighted sum-rate of the optimized family against random search
    Weighted { scenario: PathBuf },
    /// Optimal pairs at the lowest, middle and highest SNR of the scenario
    Table1 { scenario: PathBuf },
    /// Run the acceptance suite
    Validate,
}

struct Ctx {
    out: Option<PathBuf>,
    seed: Option<u64>,
    samples: Option<usize>,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("statbeam: {msg}");
        }
    }

    fn emit(&self, name: &str, contents: &str) -> Result<(), CliError> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                let path = dir.join(name);
                std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                self.note(&format!("wrote {}", path.display()));
                Ok(())
            }
            None => {
                print!("{contents}");
                Ok(())
            }
        }
    }

    fn mc(&self, base: McSettings) -> McSettings {
        let mut mc = base;
        if let Some(seed) = self.seed {
            mc.seed = seed;
        }
        if let Some(n) = self.samples {
            mc.n_samples = n;
            mc.batch = mc.batch.map(|b| b.min(n.max(1)));
        }
        mc
    }

    fn scenario(&self, path: &Path) -> Result<Scenario, CliError> {
        let mut s = Scenario::load(path)?;
        s.file.mc = self.mc(s.file.mc);
        let s = Scenario::from_file(s.file)?;
        self.note(&format!("scenario {} seed={}", path.display(), s.file.mc.seed));
        Ok(s)
    }
}

fn rho(db: f64) -> Result<PositiveReal, CliError> {
    PositiveReal::from_db(db).map_err(|e| CliError::Malformed(e.to_string()))
}

fn parse_case(text: &str) -> Result<WeightSpectrum, CliError> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Malformed(format!("case {text:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    WeightSpectrum::new(values).map_err(|e| CliError::Malformed(format!("case {text:?}: {e}")))
}

fn cdf(ctx: &Ctx, cases: &[String], points: usize) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Malformed("need at least two points".into()));
    }
    let cases: Vec<String> = if cases.is_empty() {
        vec!["2,1".into(), "3,2,1".into(), "4,3,2,1".into()]
    } else {
        cases.to_vec()
    };
    let spectra = cases.iter().map(|c| parse_case(c)).collect::<Result<Vec<_>, _>>()?;
    let mc = ctx.mc(McSettings::default());
    mc.config()?;
    let config = json!({
        "cases": spectra.iter().map(|s| s.values().to_vec()).collect::<Vec<_>>(),
        "points": points,
        "mc": mc,
    });
    ctx.note(&format!("cdf seed={}", mc.seed));
    let mut csv = Csv::new(&config.to_string(), &["case", "y", "analytic", "empirical"]);
    for (k, spec) in spectra.iter().enumerate() {
        let (lo, hi) = (spec.bottom(), spec.top());
        let grid: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let case_mc = McSettings {
            seed: mc.seed.wrapping_add(k as u64),
            ..mc
        };
        let empirical = empirical_weighted_norm_cdf(spec, &case_mc.config()?, &grid);
        let label = spec
            .values()
            .iter()
            .map(|v| output::fmt_sig(*v))
            .collect::<Vec<_>>()
            .join("/");
        for (y, emp) in empirical {
            csv.labeled_row(&label, &[y, weighted_norm_cdf(spec, y)?, emp]);
        }
    }
    ctx.emit("cdf.csv", &csv.finish())
}

fn hfunc(ctx: &Ctx, min: f64, max: f64, points: usize) -> Result<(), CliError> {
    if !(min > 0.0 && max > min && points >= 2) {
        return Err(CliError::Malformed("need 0 < min < max and at least two points".into()));
    }
    let config = json!({ "min": min, "max": max, "points": points });
    let mut csv = Csv::new(&config.to_string(), &["x", "h"]);
    let (a, b) = (min.ln(), max.ln());
    for i in 0..points {
        let x = (a + (b - a) * i as f64 / (points - 1) as f64).exp();
        let x = PositiveReal::new(x)?;
        csv.row(&[x.get(), h(x)]);
    }
    ctx.emit("hfunc.csv", &csv.finish())
}

fn pair_sum(s: &Scenario, p: &BeamformerPair, rho: PositiveReal) -> Result<f64, CliError> {
    Ok(sum_rate(&s.sigma1, &s.sigma2, &p.w1, &p.w2, rho)?.sum)
}

fn search_seed(s: &Scenario, k: usize) -> u64 {
    s.file.mc.seed.wrapping_add(k as u64)
}

fn sumrate(ctx: &Ctx, s: &Scenario) -> Result<(), CliError> {
    let (s1, s2) = (&s.sigma1, &s.sigma2);
    let low = optimal_low_snr(s1, s2)?.pair;
    let (high, _) = optimal_high_snr(s1, s2)?;
    let baseline = candidate_pair(BASELINE_ALPHA, BASELINE_BETA, s1, s2)?;
    let mut csv = Csv::new(
        &s.to_json(),
        &["snr_db", "optimized", "low_snr_pair", "high_snr_pair", "grassmann_search", "fixed_baseline"],
    );
    for (k, &db) in s.file.snr_db.iter().enumerate() {
        let r = rho(db)?;
        let opt = optimize_alpha_beta(s1, s2, r)?;
        let gs = grassmann_search(s1, s2, r, s.file.mc.n_samples, search_seed(s, k))?;
        csv.row(&[
            db,
            opt.achieved,
            pair_sum(s, &low, r)?,
            pair_sum(s, &high, r)?,
            gs.achieved,
            pair_sum(s, &baseline, r)?,
        ]);
    }
    ctx.emit("sumrate.csv", &csv.finish())
}

fn angles(ctx: &Ctx, s: &Scenario, points: usize) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Malformed("need at least two points".into()));
    }
    let (a, b) = (1e-3f64.ln(), PARAM_MAX.ln());
    let params: Vec<f64> = std::iter::once(0.0)
        .chain((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()))
        .collect();
    let first = angle_profile(&s.sigma1, &s.sigma2, &params, BeamIndex::First)?;
    let second = angle_profile(&s.sigma1, &s.sigma2, &params, BeamIndex::Second)?;
    let mut csv = Csv::new(&s.to_json(), &["param", "cos_angle1", "cos_angle2"]);
    for ((t, c1), (_, c2)) in first.into_iter().zip(second) {
        csv.row(&[t, c1, c2]);
    }
    ctx.emit("angles.csv", &csv.finish())
}

fn weighted(ctx: &Ctx, s: &Scenario) -> Result<(), CliError> {
    let weights = s.objective()?;
    let mut csv = Csv::new(
        &s.to_json(),
        &["snr_db", "optimized", "grassmann_search", "user1", "user2"],
    );
    for (k, &db) in s.file.snr_db.iter().enumerate() {
        let r = rho(db)?;
        let opt = optimize_weighted(&s.sigma1, &s.sigma2, r, weights)?;
        let gs = grassmann_search_weighted(&s.sigma1, &s.sigma2, r, s.file.mc.n_samples, search_seed(s, k), weights)?;
        let per_user = sum_rate(&s.sigma1, &s.sigma2, &opt.pair.w1, &opt.pair.w2, r)?.per_user;
        csv.row(&[db, opt.achieved, gs.achieved, per_user[0], per_user[1]]);
    }
    ctx.emit("weighted.csv", &csv.finish())
}

fn beam_json(w: &GrassmannVector) -> Value {
    Value::Array(w.coords().iter().map(|z| json!([z.re, z.im])).collect())
}

fn pair_json(p: &BeamformerPair) -> (Value, Value) {
    (beam_json(&p.w1), beam_json(&p.w2))
}

fn table1(ctx: &Ctx, s: &Scenario) -> Result<(), CliError> {
    let grid = &s.file.snr_db;
    let (lo_db, mid_db, hi_db) = (grid[0], grid[grid.len() / 2], grid[grid.len() - 1]);
    let (s1, s2) = (&s.sigma1, &s.sigma2);
    let single = match s.file.mode {
        Mode::SingleUser1 => Some((s1, true)),
        Mode::SingleUser2 => Some((s2, false)),
        _ => None,
    };
    let (low, high, high_limit) = match single {
        Some((sigma, first)) => {
            let orient = |own: GrassmannVector, other: GrassmannVector| {
                if first {
                    BeamformerPair { w1: own, w2: other }
                } else {
                    BeamformerPair { w1: other, w2: own }
                }
            };
            let lo = optimal_single_user(sigma, Regime::Low)?;
            let hi = optimal_single_user(sigma, Regime::High)?;
            (orient(lo.own, lo.other), orient(hi.own, hi.other), hi.limit)
        }
        None => {
            let (pair, summary) = optimal_high_snr(s1, s2)?;
            (optimal_low_snr(s1, s2)?.pair, pair, Some(sum_rate_high_snr_limit(&summary)))
        }
    };
    let mid = if s.file.mode == Mode::Sumrate {
        optimize_alpha_beta(s1, s2, rho(mid_db)?)?
    } else {
        optimize_weighted(s1, s2, rho(mid_db)?, s.objective()?)?
    };
    let config: Value = serde_json::from_str(&s.to_json()).expect("scenario json");
    let entry = |db: f64, p: &BeamformerPair| {
        let (w1, w2) = pair_json(p);
        json!({ "snr_db": db, "w1": w1, "w2": w2 })
    };
    let mut intermediate = entry(mid_db, &mid.pair);
    intermediate["params"] = json!(mid.params);
    let mut high_entry = entry(hi_db, &high);
    high_entry["limit"] = json!(high_limit);
    let table = json!({
        "config": config,
        "low": entry(lo_db, &low),
        "intermediate": intermediate,
        "high": high_entry,
    });
    let text = serde_json::to_string_pretty(&table).expect("table serializes") + "\n";
    ctx.emit("table1.json", &text)
}

fn validate(ctx: &Ctx) -> Result<(), CliError> {
    let mut cfg = SuiteConfig {
        seed: ctx.seed.unwrap_or(DEFAULT_SEED),
        ..SuiteConfig::default()
    };
    if let Some(n) = ctx.samples {
        if n == 0 {
            return Err(CliError::Malformed("samples must be positive".into()));
        }
        cfg.rate_samples = n;
    }
    ctx.note(&format!("validate seed={}", cfg.seed));
    let report = run_suite(&cfg);
    ctx.emit("validate.txt", &report.render())?;
    if !ctx.quiet {
        eprint!("{}", report.render_timings());
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.id.to_string())
            .collect();
        Err(CliError::ValidationFailed(format!("criteria failed: {}", failed.join(","))))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        out: cli.out,
        seed: cli.seed,
        samples: cli.samples,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Cdf { cases, points } => cdf(&ctx, &cases, points),
        Command::Hfunc { min, max, points } => hfunc(&ctx, min, max, points),
        Command::Sumrate { scenario } => sumrate(&ctx, &ctx.scenario(&scenario)?),
        Command::Angles { scenario, points } => angles(&ctx, &ctx.scenario(&scenario)?, points),
        Command::Weighted { scenario } => weighted(&ctx, &ctx.scenario(&scenario)?),
        Command::Table1 { scenario } => table1(&ctx, &ctx.scenario(&scenario)?),
        Command::Validate => validate(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error kind={} reason={reason}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}

//! The simulation benchmark: for every seed, generate a two-regime data
//! set, fit all methods on the training days, locate the switch and score
//! the forecasts and coefficient estimates.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use regvar_core::analysis::{evaluate_model, frobenius_distance, support_recovery};
use regvar_core::regime::{cv_risk_curve, detect_switch, LambdaPolicy, RegimeOptions};
use regvar_core::simgen::{gen_dataset, GeneratorSpec, GeneratorTruth};
use regvar_core::solver::{Penalty, SolverConfig};
use regvar_core::varmodel::PiecewisePredictor;
use regvar_core::SparseMatrix;
use serde::{Deserialize, Serialize};

use crate::args::{PolicyArg, ReproduceArgs};
use crate::{io_error, methods, CliError};

pub const METHODS: [&str; 10] = [
    "OLS",
    "AR(1)",
    "AR(3)",
    "AR(5)",
    "HA",
    "PO",
    "LASSO",
    "Grp-LASSO",
    "RS-LASSO",
    "TS-LASSO",
];

const SUPPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub first_seed: u64,
    pub seeds: usize,
    pub p: usize,
    pub train_days: usize,
    pub test_days: usize,
    pub slots: usize,
    pub switch: usize,
    pub avg_degree: f64,
    pub folds: usize,
    pub lambda_policy: LambdaPolicy,
    pub raw_t: bool,
}

impl Settings {
    pub fn from_args(args: &ReproduceArgs) -> Self {
        Self {
            first_seed: args.seed,
            seeds: args.seeds,
            p: args.p,
            train_days: args.train_days,
            test_days: args.test_days,
            slots: args.slots,
            switch: args.switch,
            avg_degree: args.avg_degree,
            folds: args.folds,
            lambda_policy: policy(args.lambda_policy),
            raw_t: args.raw_t,
        }
    }

    pub fn generator(&self, seed: u64) -> GeneratorSpec {
        let spec = GeneratorSpec {
            p: self.p,
            n: self.train_days + self.test_days,
            slots: self.slots,
            switch_t: self.switch,
            avg_degree: self.avg_degree,
            seed,
            ..GeneratorSpec::default()
        };
        if self.raw_t {
            spec.with_raw_hours()
        } else {
            spec
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.seeds == 0 {
            return Err(CliError::Usage("--seeds must be at least 1".into()));
        }
        if self.train_days < self.folds || self.folds < 2 {
            return Err(CliError::Usage(format!(
                "need 2 <= folds <= train days, have folds={} and {} train days",
                self.folds, self.train_days
            )));
        }
        if self.test_days == 0 {
            return Err(CliError::Usage("--test-days must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn policy(arg: PolicyArg) -> LambdaPolicy {
    match arg {
        PolicyArg::Prepass => LambdaPolicy::Prepass,
        PolicyArg::Nested => LambdaPolicy::Nested,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub mse: f64,
    pub mae: f64,
    /// Mean Frobenius distance of the estimated transition matrices.
    pub frobenius: Option<f64>,
    /// Entrywise support recovery in percent.
    pub support_recovery: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub t_hat: usize,
    pub risk: Vec<f64>,
    pub methods: Vec<MethodScore>,
}

impl SeedResult {
    pub fn score(&self, method: &str) -> Option<&MethodScore> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mse_median: f64,
    pub mae_median: f64,
    pub mse_mean: f64,
    pub mae_mean: f64,
    pub frobenius_median: Option<f64>,
    pub support_recovery_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub settings: Settings,
    /// Seeds whose detected switch equals the generator's.
    pub switch_hits: usize,
    pub summary: Vec<MethodSummary>,
    pub seeds: Vec<SeedResult>,
}

impl SimReport {
    pub fn summary_of(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|m| m.method == method)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean distance and support recovery of each piece against the true
/// matrix of the slots it covers.
fn coefficient_scores(
    model: &PiecewisePredictor,
    truth: &GeneratorTruth,
) -> Result<(f64, f64), CliError> {
    let mut fd = Vec::new();
    let mut sr = Vec::new();
    let mut score = |est: &SparseMatrix, target: &SparseMatrix| -> Result<(), CliError> {
        fd.push(frobenius_distance(est, target)?);
        sr.push(support_recovery(est, target, SUPPORT_THRESHOLD)?);
        Ok(())
    };
    match model.method.as_str() {
        "rs_lasso" => {
            let left = model.pieces[0].first_lag();
            let right = model
                .pieces
                .get(1)
                .map_or_else(|| left.clone(), |p| p.first_lag());
            score(&left, &truth.a)?;
            score(&right, &truth.a_prime)?;
        }
        "ts_lasso" => {
            for piece in &model.pieces {
                score(&piece.first_lag(), truth.transition(piece.window.first))?;
            }
        }
        _ => score(&model.pieces[0].first_lag(), &truth.a)?,
    }
    Ok((mean(&fd), mean(&sr)))
}

/// Full pipeline for one seed.
pub fn run_seed(settings: &Settings, seed: u64) -> Result<SeedResult, CliError> {
    let (data, truth) = gen_dataset(&settings.generator(seed))?;
    let n = data.n_days();
    let train = data.select_days(0..settings.train_days);
    let test = data.select_days(settings.train_days..n);
    let config = SolverConfig {
        folds: settings.folds,
        seed,
        ..SolverConfig::default()
    };
    let mut options = RegimeOptions::lasso(config.clone());
    options.policy = settings.lambda_policy;

    let curve = cv_risk_curve(&train, &options, None)?;
    let t_hat = detect_switch(&curve);
    let prepass: Option<Vec<Penalty>> = (settings.lambda_policy == LambdaPolicy::Prepass)
        .then(|| curve.lambdas.iter().map(|&l| Penalty::lasso(l)).collect());

    let models: Vec<(&str, PiecewisePredictor, bool)> = vec![
        ("OLS", methods::ols(&train, &config)?, true),
        ("AR(1)", methods::ar(&train, 1)?, false),
        ("AR(3)", methods::ar(&train, 3)?, false),
        ("AR(5)", methods::ar(&train, 5)?, false),
        ("HA", methods::ha(&train)?, false),
        ("PO", methods::po(&train), false),
        (
            "LASSO",
            methods::lasso(&train, prepass.as_deref(), &config)?,
            true,
        ),
        ("Grp-LASSO", methods::group_lasso(&train, &config)?, true),
        (
            "RS-LASSO",
            methods::rs_lasso(&train, t_hat, &options, prepass.as_deref())?,
            true,
        ),
        ("TS-LASSO", methods::ts_lasso(&train, &config)?, true),
    ];
    let mut scores = Vec::with_capacity(models.len());
    for (name, model, sparse) in &models {
        let report = evaluate_model(model, &test, None)?;
        let (frobenius, support) = if *sparse {
            let (fd, sr) = coefficient_scores(model, &truth)?;
            (Some(fd), Some(sr))
        } else {
            (None, None)
        };
        scores.push(MethodScore {
            method: name.to_string(),
            mse: report.mse,
            mae: report.mae,
            frobenius,
            support_recovery: support,
        });
    }
    Ok(SeedResult {
        seed,
        t_hat,
        risk: curve.risk,
        methods: scores,
    })
}

pub fn summarize(settings: &Settings, seeds: Vec<SeedResult>) -> SimReport {
    let summary = METHODS
        .iter()
        .map(|&name| {
            let rows: Vec<&MethodScore> = seeds.iter().filter_map(|s| s.score(name)).collect();
            let pick = |f: &dyn Fn(&MethodScore) -> Option<f64>| -> Vec<f64> {
                rows.iter().filter_map(|r| f(r)).collect()
            };
            let mse = pick(&|r| Some(r.mse));
            let mae = pick(&|r| Some(r.mae));
            let fd = pick(&|r| r.frobenius);
            let sr = pick(&|r| r.support_recovery);
            MethodSummary {
                method: name.to_string(),
                mse_median: median(&mse),
                mae_median: median(&mae),
                mse_mean: mean(&mse),
                mae_mean: mean(&mae),
                frobenius_median: (!fd.is_empty()).then(|| median(&fd)),
                support_recovery_median: (!sr.is_empty()).then(|| median(&sr)),
            }
        })
        .collect();
    let switch_hits = seeds.iter().filter(|s| s.t_hat == settings.switch).count();
    SimReport {
        settings: settings.clone(),
        switch_hits,
        summary,
        seeds,
    }
}

/// Plain-text tables: forecast errors, coefficient recovery, detected
/// switch per seed.
pub fn render_table(report: &SimReport) -> String {
    let mut out = String::new();
    let s = &report.settings;
    let _ = writeln!(
        out,
        "p={} train={} test={} slots={} switch={} seeds={}..{}",
        s.p,
        s.train_days,
        s.test_days,
        s.slots,
        s.switch,
        s.first_seed,
        s.first_seed + s.seeds as u64 - 1
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>12} {:>12} {:>12}",
        "method", "MSE", "MAE", "MSE(mean)", "MAE(mean)"
    );
    for m in &report.summary {
        let _ = writeln!(
            out,
            "{:<10} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            m.method, m.mse_median, m.mae_median, m.mse_mean, m.mae_mean
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10} {:>12} {:>12}", "method", "Frobenius", "SR(%)");
    for m in &report.summary {
        if let (Some(fd), Some(sr)) = (m.frobenius_median, m.support_recovery_median) {
            let _ = writeln!(out, "{:<10} {:>12.4} {:>12.2}", m.method, fd, sr);
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10} {:>6}", "seed", "t_hat");
    for seed in &report.seeds {
        let _ = writeln!(out, "{:<10} {:>6}", seed.seed, seed.t_hat);
    }
    let _ = writeln!(
        out,
        "switch recovered in {}/{} seeds",
        report.switch_hits,
        report.seeds.len()
    );
    out
}

fn seed_path(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join("seeds").join(format!("seed_{seed}.json"))
}

#[derive(Serialize, Deserialize)]
struct SeedFile {
    settings: Settings,
    result: SeedResult,
}

/// A stored seed, if it was produced under the same settings.
fn load_seed(path: &Path, settings: &Settings) -> Option<SeedResult> {
    let text = std::fs::read_to_string(path).ok()?;
    let file: SeedFile = serde_json::from_str(&text).ok()?;
    (file.settings == *settings).then_some(file.result)
}

/// Runs every seed (in parallel), streaming each finished seed to
/// `<out_dir>/seeds/`. With `resume`, seeds already on disk are reused.
pub fn run_all(
    settings: &Settings,
    out_dir: &Path,
    resume: bool,
    verbose: bool,
) -> Result<SimReport, CliError> {
    settings.validate()?;
    settings
        .generator(settings.first_seed)
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let seeds_dir = out_dir.join("seeds");
    std::fs::create_dir_all(&seeds_dir).map_err(|e| io_error(&seeds_dir, e))?;
    let results: Vec<SeedResult> = (0..settings.seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = settings.first_seed + i;
            let path = seed_path(out_dir, seed);
            if resume {
                if let Some(done) = load_seed(&path, settings) {
                    return Ok(done);
                }
            }
            let start = std::time::Instant::now();
            let result = run_seed(settings, seed)?;
            let file = SeedFile {
                settings: settings.clone(),
                result,
            };
            let text = serde_json::to_string_pretty(&file)?;
            std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
            if verbose {
                eprintln!(
                    "seed {seed}: t_hat={} ({:.1} s)",
                    file.result.t_hat,
                    start.elapsed().as_secs_f64()
                );
            }
            Ok(file.result)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(summarize(settings, results))
}

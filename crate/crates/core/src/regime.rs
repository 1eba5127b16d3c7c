//! Two-regime predictors and cross-validated switch detection.
//!
//! For every candidate `t` the day window `1..=T` is cut into
//! `U_t = 1..=t` and `V_t = t+1..=T`, each fitted with its own `(b, A)`.
//! The risk of `t` is estimated by K-fold CV over whole days:
//! `R̂_{I,t} = (|I|·p)⁻¹ Σ_{i∈I} (‖Y_U − b̂ − ÂX_U‖² + ‖Y_V − b̂′ − Â′X_V‖²)`
//! and `R̂_t` is the mean over folds.
//!
//! Per fold, the centered Gram of every single slot is computed once; the
//! Gram of any window is then a prefix or suffix sum, so the whole
//! `(t, fold)` grid costs one solve per cell.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DayTensor;
use crate::linalg::SparseMatrix;
use crate::solver::{
    fold_assignment, DayRows, Gram, Penalty, PenaltyFamily, SolverConfig, SolverError,
};
use crate::varmodel::{
    build_rows, fit, select_penalties, solve_gram, DayPredictor, FitOptions, LinearPredictor,
    PenaltyChoice, PiecewisePredictor, SlotWindow, VarError,
};

#[derive(Debug, Error)]
pub enum RegimeError {
    #[error(transparent)]
    Model(#[from] VarError),
    #[error("too few days: {0}")]
    TooFewDays(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("risk curve: {0}")]
    Curve(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SolverError> for RegimeError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::TooFewDays(m) => RegimeError::TooFewDays(m),
            other => RegimeError::Model(VarError::Solver(other)),
        }
    }
}

/// Where the λ of every window fit comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// One CV pass on the full window; its per-line λ is reused everywhere.
    Prepass,
    /// λ re-selected by inner CV for every fold complement and window.
    Nested,
}

impl std::str::FromStr for LambdaPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prepass" => Ok(Self::Prepass),
            "nested" => Ok(Self::Nested),
            other => Err(format!("unknown lambda policy `{other}`")),
        }
    }
}

impl std::fmt::Display for LambdaPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Prepass => "prepass",
            Self::Nested => "nested",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeOptions {
    pub family: PenaltyFamily,
    pub alpha: f64,
    pub per_line: bool,
    pub policy: LambdaPolicy,
    pub config: SolverConfig,
}

impl RegimeOptions {
    pub fn lasso(config: SolverConfig) -> Self {
        Self {
            family: PenaltyFamily::Lasso,
            alpha: 1.0,
            per_line: true,
            policy: LambdaPolicy::Prepass,
            config,
        }
    }

    fn choice(&self) -> PenaltyChoice {
        PenaltyChoice::Cv {
            family: self.family,
            alpha: self.alpha,
            per_line: self.per_line,
        }
    }
}

/// `left` covers `1..=t_switch`, `right` covers the rest (absent at `T`).
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchPredictor {
    pub t_switch: usize,
    pub left: LinearPredictor,
    pub right: Option<LinearPredictor>,
}

impl SwitchPredictor {
    pub fn to_piecewise(&self) -> PiecewisePredictor {
        let mut pieces = vec![self.left.clone()];
        pieces.extend(self.right.clone());
        let t_switch = self.right.as_ref().map(|_| self.t_switch);
        PiecewisePredictor::new("rs_lasso", pieces, t_switch).expect("windows partition the day")
    }
}

impl DayPredictor for SwitchPredictor {
    fn predict_day(&self, day: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
        self.to_piecewise().predict_day(day)
    }
}

/// Per-line penalties from CV on the full window.
pub fn prepass_penalties(
    train: &DayTensor,
    options: &RegimeOptions,
) -> Result<Vec<Penalty>, RegimeError> {
    let rows = build_rows(train, SlotWindow::full(train.n_slots()), 1)?;
    Ok(select_penalties(&rows, &options.choice(), &options.config)?)
}

/// Fits the two windows split at `t`. `penalties` overrides the policy.
pub fn fit_switch(
    train: &DayTensor,
    t: usize,
    options: &RegimeOptions,
    penalties: Option<&[Penalty]>,
) -> Result<SwitchPredictor, RegimeError> {
    let horizon = train.n_slots().saturating_sub(1);
    if t == 0 || t > horizon {
        return Err(VarError::WindowTooShort(format!("switch {t} outside 1..={horizon}")).into());
    }
    let prepass;
    let penalties = match (penalties, options.policy) {
        (Some(p), _) => Some(p),
        (None, LambdaPolicy::Prepass) => {
            prepass = prepass_penalties(train, options)?;
            Some(prepass.as_slice())
        }
        (None, LambdaPolicy::Nested) => None,
    };
    let fit_window = |w: SlotWindow| -> Result<LinearPredictor, RegimeError> {
        let choice = match penalties {
            Some(p) => PenaltyChoice::PerLine(p.to_vec()),
            None => options.choice(),
        };
        let (mut model, _) = fit(train, w, &FitOptions::new(choice, options.config.clone()))?;
        model.method = "rs_lasso".into();
        Ok(model)
    };
    let left = fit_window(SlotWindow::new(1, t)?)?;
    let right = if t < horizon {
        Some(fit_window(SlotWindow::new(t + 1, horizon)?)?)
    } else {
        None
    };
    Ok(SwitchPredictor {
        t_switch: t,
        left,
        right,
    })
}

/// CV risk of every candidate switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub t: Vec<usize>,
    /// `R̂_t`, the mean of `per_fold[i]`.
    pub risk: Vec<f64>,
    pub per_fold: Vec<Vec<f64>>,
    pub folds: usize,
    pub fold_sizes: Vec<usize>,
    pub policy: LambdaPolicy,
    /// Per-line λ of the pre-pass (empty for nested CV).
    pub lambdas: Vec<f64>,
}

impl RiskCurve {
    /// Fold sizes differ (the remainder was spread one per fold).
    pub fn unequal_folds(&self) -> bool {
        self.fold_sizes.windows(2).any(|w| w[0] != w[1])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t,risk_mean")?;
        for f in 1..=self.folds {
            write!(out, ",fold_{f}")?;
        }
        writeln!(out)?;
        for (i, t) in self.t.iter().enumerate() {
            write!(out, "{t},{:?}", self.risk[i])?;
            for v in &self.per_fold[i] {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self, RegimeError> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| RegimeError::Curve(e.to_string()))?
            .clone();
        if headers.len() < 3 || &headers[0] != "t" || &headers[1] != "risk_mean" {
            return Err(RegimeError::Curve(
                "header must be t,risk_mean,fold_1,...".into(),
            ));
        }
        let folds = headers.len() - 2;
        let mut curve = RiskCurve {
            t: Vec::new(),
            risk: Vec::new(),
            per_fold: Vec::new(),
            folds,
            fold_sizes: Vec::new(),
            policy: LambdaPolicy::Prepass,
            lambdas: Vec::new(),
        };
        for rec in reader.records() {
            let rec = rec.map_err(|e| RegimeError::Curve(e.to_string()))?;
            let num = |i: usize| -> Result<f64, RegimeError> {
                rec[i]
                    .parse()
                    .map_err(|_| RegimeError::Curve(format!("bad number `{}`", &rec[i])))
            };
            curve.t.push(
                rec[0]
                    .parse()
                    .map_err(|_| RegimeError::Curve(format!("bad t `{}`", &rec[0])))?,
            );
            curve.risk.push(num(1)?);
            curve
                .per_fold
                .push((2..rec.len()).map(num).collect::<Result<_, _>>()?);
        }
        Ok(curve)
    }
}

/// argmin of `R̂_t`; ties go to the largest `t`.
pub fn detect_switch(curve: &RiskCurve) -> usize {
    let mut best = 0;
    for i in 0..curve.risk.len() {
        if curve.risk[i] <= curve.risk[best] {
            best = i;
        }
    }
    curve.t[best]
}

struct FoldStats {
    /// Centered Gram of each predicted slot (group) on the training days.
    slot_grams: Vec<Gram>,
    /// Held-out rows centered by the training means, with their groups.
    held_x: DMatrix<f64>,
    held_y: DMatrix<f64>,
    held_group: Vec<usize>,
    held_days: usize,
    train_days: Vec<usize>,
}

fn fold_stats(rows: &DayRows, held_out: &[usize]) -> FoldStats {
    let mut train = vec![true; rows.n_days];
    for &d in held_out {
        train[d] = false;
    }
    let test: Vec<bool> = train.iter().map(|t| !t).collect();
    let means = rows.means(&train);
    let (xc, yc) = rows.centered(&train, &means);
    let train_groups: Vec<usize> = (0..rows.x.nrows())
        .filter(|&r| train[rows.day[r]])
        .map(|r| rows.group[r])
        .collect();
    let slot_grams = (0..rows.n_groups)
        .map(|g| {
            let idx: Vec<usize> = (0..train_groups.len())
                .filter(|&r| train_groups[r] == g)
                .collect();
            let x = xc.select_rows(idx.iter());
            let y = yc.select_rows(idx.iter());
            Gram::from_rows(&x, &y)
        })
        .collect();
    let (held_x, held_y) = rows.centered(&test, &means);
    let held_group = (0..rows.x.nrows())
        .filter(|&r| test[rows.day[r]])
        .map(|r| rows.group[r])
        .collect();
    FoldStats {
        slot_grams,
        held_x,
        held_y,
        held_group,
        held_days: held_out.len(),
        train_days: (0..rows.n_days).filter(|&d| train[d]).collect(),
    }
}

fn sum_grams(grams: &[Gram]) -> Gram {
    let mut total = Gram::zeros(grams[0].n_features(), grams[0].n_outputs());
    for g in grams {
        total.add_assign(g);
    }
    total
}

/// Held-out squared error of `a` on the rows whose group is in `groups`.
fn held_out_sse(stats: &FoldStats, a: &SparseMatrix, groups: std::ops::Range<usize>) -> f64 {
    let mut sse = 0.0;
    let dense = a.to_dense();
    for r in 0..stats.held_x.nrows() {
        if !groups.contains(&stats.held_group[r]) {
            continue;
        }
        let pred = &dense * stats.held_x.row(r).transpose();
        for k in 0..stats.held_y.ncols() {
            let e = stats.held_y[(r, k)] - pred[k];
            sse += e * e;
        }
    }
    sse
}

/// CV risk curve over the full day window.
pub fn cv_risk_curve(
    train: &DayTensor,
    options: &RegimeOptions,
    checkpoint: Option<&Path>,
) -> Result<RiskCurve, RegimeError> {
    let window = SlotWindow::full(train.n_slots());
    cv_risk_curve_window(train, window, options, None, checkpoint)
}

/// CV risk curve for switch candidates inside `window`: candidate `t`
/// splits it into `first..=t` and `t+1..=last` (`t = last` is no split).
pub fn cv_risk_curve_window(
    train: &DayTensor,
    window: SlotWindow,
    options: &RegimeOptions,
    penalties: Option<&[Penalty]>,
    checkpoint: Option<&Path>,
) -> Result<RiskCurve, RegimeError> {
    let config = &options.config;
    config.validate()?;
    let n = train.n_days();
    let p = train.n_sections();
    let folds = fold_assignment(n, config.folds, config.seed)?;
    let rows = build_rows(train, window, 1)?;
    let prepass: Vec<Penalty> = match (penalties, options.policy) {
        (Some(pen), _) => pen.to_vec(),
        (None, LambdaPolicy::Prepass) => select_penalties(&rows, &options.choice(), config)?,
        (None, LambdaPolicy::Nested) => Vec::new(),
    };
    let stats: Vec<FoldStats> = folds.par_iter().map(|f| fold_stats(&rows, f)).collect();
    let groups = window.len();

    let done = match checkpoint {
        Some(path) => read_checkpoint(path)?,
        None => HashMap::new(),
    };
    let log = match checkpoint {
        Some(path) => Some(Mutex::new(
            OpenOptions::new().create(true).append(true).open(path)?,
        )),
        None => None,
    };

    let cells: Vec<(usize, usize)> = (1..=groups)
        .flat_map(|split| (0..folds.len()).map(move |f| (split, f)))
        .collect();
    let risks: Vec<f64> = cells
        .par_iter()
        .map(|&(split, f)| -> Result<f64, RegimeError> {
            let t = window.first + split - 1;
            if let Some(&r) = done.get(&(t, f)) {
                return Ok(r);
            }
            let st = &stats[f];
            let mut sse = 0.0;
            for (range, lo, hi) in [
                (0..split, window.first, t),
                (split..groups, t + 1, window.last),
            ] {
                if range.is_empty() {
                    continue;
                }
                let gram = sum_grams(&st.slot_grams[range.clone()]);
                let pens = if prepass.is_empty() {
                    let sub = train.select_day_indices(&st.train_days);
                    let sub_rows = build_rows(&sub, SlotWindow::new(lo, hi)?, 1)?;
                    select_penalties(&sub_rows, &options.choice(), config)?
                } else {
                    prepass.clone()
                };
                let sol = solve_gram(&gram, &pens, None, config)?;
                sse += held_out_sse(st, &sol.a, range);
            }
            let risk = sse / (st.held_days as f64 * p as f64);
            if let Some(log) = &log {
                let mut file = log.lock().expect("checkpoint lock");
                writeln!(file, "{t},{f},{risk:?}")?;
                file.flush()?;
            }
            Ok(risk)
        })
        .collect::<Result<_, _>>()?;

    let k = folds.len();
    let mut curve = RiskCurve {
        t: window.slots().collect(),
        risk: Vec::with_capacity(groups),
        per_fold: Vec::with_capacity(groups),
        folds: k,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        policy: options.policy,
        lambdas: prepass.iter().map(|p| p.lambda).collect(),
    };
    for split in 0..groups {
        let per: Vec<f64> = risks[split * k..(split + 1) * k].to_vec();
        curve.risk.push(per.iter().sum::<f64>() / k as f64);
        curve.per_fold.push(per);
    }
    Ok(curve)
}

fn read_checkpoint(path: &Path) -> Result<HashMap<(usize, usize), f64>, RegimeError> {
    let mut out = HashMap::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    for (i, line) in lines.iter().enumerate() {
        match parse_cell(line) {
            Some((t, f, r)) => {
                out.insert((t, f), r);
            }
            // A torn final line from a crash is dropped and recomputed.
            None if i + 1 == lines.len() => {}
            None => return Err(RegimeError::Checkpoint(format!("line {}: `{line}`", i + 1))),
        }
    }
    Ok(out)
}

fn parse_cell(line: &str) -> Option<(usize, usize, f64)> {
    let mut parts = line.trim().split(',');
    let t = parts.next()?.parse().ok()?;
    let f = parts.next()?.parse().ok()?;
    let r = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((t, f, r))
}

/// Experimental greedy segmentation: repeatedly splits the segment whose
/// best CV split lowers its risk the most, up to `max_switches` times.
pub fn greedy_switches(
    train: &DayTensor,
    options: &RegimeOptions,
    max_switches: usize,
) -> Result<Vec<usize>, RegimeError> {
    let penalties = match options.policy {
        LambdaPolicy::Prepass => Some(prepass_penalties(train, options)?),
        LambdaPolicy::Nested => None,
    };
    let mut segments = vec![SlotWindow::full(train.n_slots())];
    let mut switches = Vec::new();
    while switches.len() < max_switches {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, seg) in segments.iter().enumerate() {
            if seg.len() < 2 {
                continue;
            }
            let curve = cv_risk_curve_window(train, *seg, options, penalties.as_deref(), None)?;
            let t = detect_switch(&curve);
            if t == seg.last {
                continue;
            }
            let gain = curve.risk[curve.risk.len() - 1] - curve.risk[t - seg.first];
            if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, i, t));
            }
        }
        let Some((_, i, t)) = best else { break };
        let seg = segments.remove(i);
        segments.insert(i, SlotWindow::new(t + 1, seg.last)?);
        segments.insert(i, SlotWindow::new(seg.first, t)?);
        switches.push(t);
    }
    switches.sort_unstable();
    Ok(switches)
}

//! Daily VAR predictors `Ŷ_t = b_t + A·X_t` assembled from per-line
//! solutions, the HA / PO / AR baselines, and moment-based oracles.
//!
//! Slots are indexed `0..=T` inside a day; a predictor's window lists the
//! predicted slots `t` (so slot `t − 1` is the input). Multi-lag models
//! stack `W_{t−1}, …, W_{t−H}` into the covariate, giving an `A` of shape
//! `p × pH`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DayTensor;
use crate::linalg::{solve_spd, SparseMatrix, SparseVector};
use crate::simgen::{gen_day_indexed, GeneratorTruth};
use crate::solver::{
    cv_select_lambda, fit_gram_line, fit_gram_lines, fit_group_lasso_gram, CvSelection, DayRows,
    Gram, GroupMeans, Penalty, PenaltyFamily, SolverConfig, SolverError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarError {
    #[error("window too short: {0}")]
    WindowTooShort(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training data has missing cells in the window ({0} missing); impute first")]
    Incomplete(usize),
    #[error("sigma is singular")]
    SingularSigma,
    #[error("no history for section {section} at slot {slot}")]
    NoHistory { section: String, slot: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Predicted slots `first..=last` (1-based; inputs are the previous slots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotWindow {
    pub first: usize,
    pub last: usize,
}

impl SlotWindow {
    pub fn new(first: usize, last: usize) -> Result<Self, VarError> {
        if first == 0 || last < first {
            return Err(VarError::WindowTooShort(format!("slots {first}..={last}")));
        }
        Ok(Self { first, last })
    }

    /// All predicted slots `1..=T` of a day with `slots = T + 1` columns.
    pub fn full(slots: usize) -> Self {
        Self {
            first: 1,
            last: slots.saturating_sub(1).max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.first..=self.last).contains(&t)
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

/// λ used by a fit, shared or per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda {
    Scalar(f64),
    PerLine(Vec<f64>),
}

impl Lambda {
    pub fn from_lines(lambdas: &[f64]) -> Self {
        match lambdas.first() {
            Some(&first) if lambdas.iter().all(|&l| l == first) => Lambda::Scalar(first),
            _ => Lambda::PerLine(lambdas.to_vec()),
        }
    }

    pub fn for_line(&self, k: usize) -> f64 {
        match self {
            Lambda::Scalar(v) => *v,
            Lambda::PerLine(v) => v[k],
        }
    }
}

/// `Ŷ_t = b_t + A·[W_{t−1}; …; W_{t−H}]` for `t` in `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub sections: Vec<String>,
    pub window: SlotWindow,
    pub lags: usize,
    /// `p × |window|`.
    pub b: DMatrix<f64>,
    /// `p × (p·lags)`.
    pub a: SparseMatrix,
    pub method: String,
    pub lambda: Lambda,
}

impl LinearPredictor {
    pub fn new(
        sections: Vec<String>,
        window: SlotWindow,
        lags: usize,
        b: DMatrix<f64>,
        a: SparseMatrix,
        method: impl Into<String>,
        lambda: Lambda,
    ) -> Result<Self, VarError> {
        let p = sections.len();
        if b.nrows() != p || b.ncols() != window.len() {
            return Err(VarError::ShapeMismatch(format!(
                "b is {}x{}, expected {p}x{}",
                b.nrows(),
                b.ncols(),
                window.len()
            )));
        }
        if a.rows() != p || a.cols() != p * lags {
            return Err(VarError::ShapeMismatch(format!(
                "A is {}x{}, expected {p}x{}",
                a.rows(),
                a.cols(),
                p * lags
            )));
        }
        if lags == 0 || window.first < lags {
            return Err(VarError::WindowTooShort(format!(
                "window starts at slot {} but needs {lags} lags",
                window.first
            )));
        }
        if b.iter().any(|v| !v.is_finite()) || a.entries().iter().any(|e| !e.2.is_finite()) {
            return Err(VarError::InvalidModel("non-finite coefficients".into()));
        }
        Ok(Self {
            sections,
            window,
            lags,
            b,
            a,
            method: method.into(),
            lambda,
        })
    }

    pub fn p(&self) -> usize {
        self.sections.len()
    }

    /// Stacked covariate `[W_{t−1}; …; W_{t−H}]` from a day matrix.
    pub fn covariate(&self, day: &DMatrix<f64>, t: usize) -> Vec<f64> {
        let p = self.p();
        let mut x = Vec::with_capacity(p * self.lags);
        for h in 1..=self.lags {
            x.extend(day.column(t - h).iter().copied());
        }
        x
    }

    pub fn predict_slot(&self, day: &DMatrix<f64>, t: usize) -> DVector<f64> {
        let ax = self.a.mul_vec(&self.covariate(day, t));
        DVector::from_fn(self.p(), |k, _| self.b[(k, t - self.window.first)] + ax[k])
    }

    fn check_day(&self, day: &DMatrix<f64>) -> Result<(), VarError> {
        if day.nrows() != self.p() || day.ncols() <= self.window.last {
            return Err(VarError::ShapeMismatch(format!(
                "day is {}x{}, model needs {}x{}+",
                day.nrows(),
                day.ncols(),
                self.p(),
                self.window.last + 1
            )));
        }
        Ok(())
    }

    /// Predictions for the window's slots, `p × |window|`.
    pub fn predict(&self, day: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
        self.check_day(day)?;
        let mut out = DMatrix::zeros(self.p(), self.window.len());
        for (c, t) in self.window.slots().enumerate() {
            out.set_column(c, &self.predict_slot(day, t));
        }
        Ok(out)
    }

    pub fn nonzeros_per_line(&self) -> Vec<usize> {
        self.a.row_nnz()
    }

    /// Square `p × p` coefficient matrix of the first lag.
    pub fn first_lag(&self) -> SparseMatrix {
        let p = self.p();
        let entries = self
            .a
            .entries()
            .iter()
            .filter(|e| e.1 < p)
            .copied()
            .collect();
        SparseMatrix::from_triplets(p, p, entries).expect("sub-matrix of a valid matrix")
    }
}

/// Anything that forecasts slots `1..=T` of a day from the day itself.
pub trait DayPredictor: Send + Sync {
    /// `p × T` predictions; column `c` is slot `c + 1`.
    fn predict_day(&self, day: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError>;
}

impl DayPredictor for LinearPredictor {
    fn predict_day(&self, day: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
        if self.window != SlotWindow::full(day.ncols()) {
            return Err(VarError::ShapeMismatch(format!(
                "window {}..={} does not cover slots 1..={}",
                self.window.first,
                self.window.last,
                day.ncols().saturating_sub(1)
            )));
        }
        self.predict(day)
    }
}

/// Disjoint windows covering `1..=T`, each with its own linear predictor
/// (regime-switch, slot-wise and AR models).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePredictor {
    pub method: String,
    pub pieces: Vec<LinearPredictor>,
    /// Last slot of the first regime for switch models.
    pub t_switch: Option<usize>,
}

impl PiecewisePredictor {
    pub fn new(
        method: impl Into<String>,
        mut pieces: Vec<LinearPredictor>,
        t_switch: Option<usize>,
    ) -> Result<Self, VarError> {
        let method = method.into();
        pieces.sort_by_key(|p| p.window.first);
        for piece in &mut pieces {
            piece.method.clone_from(&method);
        }
        let first = pieces
            .first()
            .ok_or_else(|| VarError::InvalidModel("no pieces".into()))?;
        if first.window.first != 1 {
            return Err(VarError::InvalidModel("pieces must start at slot 1".into()));
        }
        for w in pieces.windows(2) {
            if w[1].window.first != w[0].window.last + 1 {
                return Err(VarError::InvalidModel(
                    "piece windows must be contiguous".into(),
                ));
            }
            if w[1].sections != w[0].sections {
                return Err(VarError::InvalidModel("pieces disagree on sections".into()));
            }
        }
        Ok(Self {
            method,
            pieces,
            t_switch,
        })
    }

    pub fn single(model: LinearPredictor) -> Self {
        Self {
            method: model.method.clone(),
            pieces: vec![model],
            t_switch: None,
        }
    }

    pub fn sections(&self) -> &[String] {
        &self.pieces[0].sections
    }

    pub fn horizon(&self) -> usize {
        self.pieces.last().expect("nonempty").window.last
    }

    pub fn piece_for(&self, t: usize) -> Option<&LinearPredictor> {
        self.pieces.iter().find(|p| p.window.contains(t))
    }

    /// Multi-step rollout: slots after `observed` are replaced by the
    /// model's own one-step forecasts, in order.
    pub fn rollout(&self, day: &DMatrix<f64>, observed: usize) -> Result<DMatrix<f64>, VarError> {
        let mut work = day.clone();
        for t in observed + 1..day.ncols() {
            let piece = self
                .piece_for(t)
                .ok_or_else(|| VarError::ShapeMismatch(format!("no piece covers slot {t}")))?;
            piece.check_day(day)?;
            let v = piece.predict_slot(&work, t);
            work.set_column(t, &v);
        }
        Ok(work)
    }
}

impl DayPredictor for PiecewisePredictor {
    fn predict_day(&self, day: &DMatrix<f64>) -> Result<DMatrix<f64>, VarError> {
        let t = day.ncols().saturating_sub(1);
        if self.horizon() != t {
            return Err(VarError::ShapeMismatch(format!(
                "model covers slots 1..={}, day has 1..={t}",
                self.horizon()
            )));
        }
        let mut out = DMatrix::zeros(day.nrows(), t);
        for piece in &self.pieces {
            let pred = piece.predict(day)?;
            out.columns_mut(piece.window.first - 1, piece.window.len())
                .copy_from(&pred);
        }
        Ok(out)
    }
}

/// How λ is chosen for a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyChoice {
    Fixed(Penalty),
    /// One penalty per output line.
    PerLine(Vec<Penalty>),
    /// Per-day K-fold CV over the family's path.
    Cv {
        family: PenaltyFamily,
        alpha: f64,
        per_line: bool,
    },
}

impl PenaltyChoice {
    pub fn family(&self) -> PenaltyFamily {
        match self {
            PenaltyChoice::Fixed(p) => p.family,
            PenaltyChoice::PerLine(p) => p.first().map_or(PenaltyFamily::None, |p| p.family),
            PenaltyChoice::Cv { family, .. } => *family,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub penalty: PenaltyChoice,
    /// Restrict line `k` to its own (lagged) section.
    pub diagonal: bool,
    pub lags: usize,
    /// Rescale covariate columns to unit variance before solving.
    pub standardize: bool,
    pub config: SolverConfig,
}

impl FitOptions {
    pub fn new(penalty: PenaltyChoice, config: SolverConfig) -> Self {
        Self {
            penalty,
            diagonal: false,
            lags: 1,
            standardize: false,
            config,
        }
    }

    pub fn fixed(penalty: Penalty, config: SolverConfig) -> Self {
        Self::new(PenaltyChoice::Fixed(penalty), config)
    }

    pub fn cv_lasso(config: SolverConfig) -> Self {
        Self::new(
            PenaltyChoice::Cv {
                family: PenaltyFamily::Lasso,
                alpha: 1.0,
                per_line: true,
            },
            config,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub nonzeros: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Lines whose solver hit `max_iterations` before the KKT certificate.
    pub flagged: Vec<usize>,
    pub max_kkt_violation: f64,
    pub wall_time_secs: f64,
}

/// Method tag for a penalty family.
pub fn method_name(family: PenaltyFamily) -> &'static str {
    match family {
        PenaltyFamily::None => "ols",
        PenaltyFamily::Lasso => "lasso",
        PenaltyFamily::Ridge => "ridge",
        PenaltyFamily::ElasticNet => "elastic_net",
        PenaltyFamily::GroupLasso => "group_lasso",
    }
}

/// Regression rows `(X, Y)` of the window, one group per predicted slot.
pub fn build_rows(train: &DayTensor, window: SlotWindow, lags: usize) -> Result<DayRows, VarError> {
    let p = train.n_sections();
    if lags == 0 || window.first < lags || window.last >= train.n_slots() {
        return Err(VarError::WindowTooShort(format!(
            "window {}..={} with {lags} lags in a day of {} slots",
            window.first,
            window.last,
            train.n_slots()
        )));
    }
    let n = train.n_days();
    let m = n * window.len();
    let mut x = DMatrix::zeros(m, p * lags);
    let mut y = DMatrix::zeros(m, p);
    let mut day = Vec::with_capacity(m);
    let mut group = Vec::with_capacity(m);
    let mut missing = 0;
    let mut r = 0;
    for i in 0..n {
        for t in window.slots() {
            for k in 0..p {
                let v = train.raw(i, k, t);
                missing += usize::from(v.is_nan());
                y[(r, k)] = v;
                for h in 1..=lags {
                    let v = train.raw(i, k, t - h);
                    x[(r, (h - 1) * p + k)] = v;
                }
            }
            day.push(i);
            group.push(t - window.first);
            r += 1;
        }
    }
    missing += x.iter().filter(|v| v.is_nan()).count();
    if missing > 0 {
        return Err(VarError::Incomplete(missing));
    }
    Ok(DayRows {
        x,
        y,
        day,
        group,
        n_days: n,
        n_groups: window.len(),
    })
}

/// Per-line solution of a Gram system.
#[derive(Debug, Clone)]
pub struct GramSolution {
    /// `q × p` coefficients (outputs × features).
    pub a: SparseMatrix,
    pub iterations: Vec<usize>,
    pub flagged: Vec<usize>,
    pub max_kkt_violation: f64,
}

/// Solves all lines of a Gram system. With `diagonal = Some(lags)`, line
/// `k` only sees features `k, k + q, …`.
pub fn solve_gram(
    gram: &Gram,
    penalties: &[Penalty],
    diagonal: Option<usize>,
    config: &SolverConfig,
) -> Result<GramSolution, VarError> {
    let q = gram.n_outputs();
    let f = gram.n_features();
    if penalties
        .iter()
        .any(|p| p.family == PenaltyFamily::GroupLasso)
    {
        let lambda = penalties[0].lambda;
        let fit = fit_group_lasso_gram(gram, lambda, config, None)?;
        return Ok(GramSolution {
            a: fit.coef,
            iterations: vec![fit.iterations; q],
            flagged: if fit.converged {
                Vec::new()
            } else {
                (0..q).collect()
            },
            max_kkt_violation: fit.kkt_violation,
        });
    }
    let lines: Vec<(SparseVector, usize, bool, f64)> = match diagonal {
        None => fit_gram_lines(gram, penalties, config, None)?
            .into_iter()
            .map(|fit| (fit.coef, fit.iterations, fit.converged, fit.kkt_violation))
            .collect(),
        Some(lags) => (0..q)
            .into_par_iter()
            .map(|k| {
                let features: Vec<usize> = (0..lags).map(|h| k + h * q).collect();
                let sub = gram.restrict(&features, k);
                let fit = fit_gram_line(&sub, 0, &penalties[k], config, None)?;
                let mut dense = vec![0.0; f];
                for &(j, v) in fit.coef.entries() {
                    dense[features[j]] = v;
                }
                Ok((
                    SparseVector::from_dense(&dense),
                    fit.iterations,
                    fit.converged,
                    fit.kkt_violation,
                ))
            })
            .collect::<Result<_, SolverError>>()?,
    };
    let mut flagged = Vec::new();
    let mut iterations = Vec::with_capacity(q);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(q);
    for (k, (coef, it, ok, kkt)) in lines.into_iter().enumerate() {
        if !ok {
            flagged.push(k);
        }
        iterations.push(it);
        worst = worst.max(kkt);
        rows.push(coef);
    }
    Ok(GramSolution {
        a: SparseMatrix::from_rows(&rows, f),
        iterations,
        flagged,
        max_kkt_violation: worst,
    })
}

/// `b_g = Ȳ_g − A·X̄_g` for every group.
pub fn intercepts(a: &SparseMatrix, means: &GroupMeans) -> DMatrix<f64> {
    let (q, g) = (means.y.nrows(), means.y.ncols());
    let mut b = DMatrix::zeros(q, g);
    for c in 0..g {
        let xm: Vec<f64> = means.x.column(c).iter().copied().collect();
        let ax = a.mul_vec(&xm);
        for k in 0..q {
            b[(k, c)] = means.y[(k, c)] - ax[k];
        }
    }
    b
}

fn column_scales(rows: &DayRows) -> Vec<f64> {
    let all = vec![true; rows.n_days];
    let (gram, _) = rows.centered_gram(&all);
    let m = gram.rows.max(1) as f64;
    (0..gram.n_features())
        .map(|j| {
            let s = (gram.xx[(j, j)] / m).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

/// Fits a single-window predictor on complete training days.
pub fn fit(
    train: &DayTensor,
    window: SlotWindow,
    options: &FitOptions,
) -> Result<(LinearPredictor, FitReport), VarError> {
    let rows = build_rows(train, window, options.lags)?;
    fit_rows(&rows, train.sections().to_vec(), window, options)
}

/// [`fit`] on prebuilt rows, optionally with λ already chosen per line.
pub fn fit_rows(
    rows: &DayRows,
    sections: Vec<String>,
    window: SlotWindow,
    options: &FitOptions,
) -> Result<(LinearPredictor, FitReport), VarError> {
    let start = Instant::now();
    let q = rows.n_outputs();
    let scales = options.standardize.then(|| column_scales(rows));
    let scaled;
    let work = match &scales {
        Some(s) => {
            let mut r = rows.clone();
            for (j, &sj) in s.iter().enumerate() {
                r.x.column_mut(j).scale_mut(1.0 / sj);
            }
            scaled = r;
            &scaled
        }
        None => rows,
    };
    let penalties = select_penalties(work, &options.penalty, &options.config)?;
    let all = vec![true; work.n_days];
    let (gram, _) = work.centered_gram(&all);
    let diag = options.diagonal.then_some(options.lags);
    let sol = solve_gram(&gram, &penalties, diag, &options.config)?;
    let a = match &scales {
        Some(s) => {
            let entries = sol
                .a
                .entries()
                .iter()
                .map(|&(r, c, v)| (r, c, v / s[c]))
                .collect();
            SparseMatrix::from_triplets(sol.a.rows(), sol.a.cols(), entries)
                .map_err(VarError::InvalidModel)?
        }
        None => sol.a,
    };
    let means = rows.means(&all);
    let b = intercepts(&a, &means);
    let lambdas: Vec<f64> = penalties.iter().map(|p| p.lambda).collect();
    let method = method_name(options.penalty.family());
    let model = LinearPredictor::new(
        sections,
        window,
        options.lags,
        b,
        a,
        method,
        Lambda::from_lines(&lambdas),
    )?;
    debug_assert_eq!(model.p(), q);
    let report = FitReport {
        nonzeros: model.nonzeros_per_line(),
        lambdas,
        iterations: sol.iterations,
        flagged: sol.flagged,
        max_kkt_violation: sol.max_kkt_violation,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Per-line penalties for a choice (runs CV when asked).
pub fn select_penalties(
    rows: &DayRows,
    choice: &PenaltyChoice,
    config: &SolverConfig,
) -> Result<Vec<Penalty>, VarError> {
    let q = rows.n_outputs();
    Ok(match choice {
        PenaltyChoice::Fixed(p) => {
            p.validate()?;
            vec![*p; q]
        }
        PenaltyChoice::PerLine(pens) => {
            if pens.len() != q {
                return Err(VarError::ShapeMismatch(format!(
                    "{} penalties for {q} lines",
                    pens.len()
                )));
            }
            for p in pens {
                p.validate()?;
            }
            pens.clone()
        }
        PenaltyChoice::Cv {
            family,
            alpha,
            per_line,
        } => {
            let sel: CvSelection = cv_select_lambda(rows, *family, *alpha, *per_line, config)?;
            sel.lambdas
                .iter()
                .map(|&l| Penalty::new(*family, l, *alpha))
                .collect()
        }
    })
}

/// Historical average: the training mean at every (section, slot).
pub fn baseline_ha(train: &DayTensor) -> Result<LinearPredictor, VarError> {
    let (p, s) = (train.n_sections(), train.n_slots());
    let window = SlotWindow::full(s);
    let mut b = DMatrix::zeros(p, window.len());
    for k in 0..p {
        for t in window.slots() {
            let vals: Vec<f64> = (0..train.n_days())
                .filter_map(|i| train.value(i, k, t))
                .collect();
            if vals.is_empty() {
                return Err(VarError::NoHistory {
                    section: train.sections()[k].clone(),
                    slot: t,
                });
            }
            b[(k, t - 1)] = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }
    LinearPredictor::new(
        train.sections().to_vec(),
        window,
        1,
        b,
        SparseMatrix::zeros(p, p),
        "ha",
        Lambda::Scalar(0.0),
    )
}

/// Previous observation: slot `t` is predicted by slot `t − 1`.
pub fn baseline_po(sections: Vec<String>, slots: usize) -> LinearPredictor {
    let p = sections.len();
    let window = SlotWindow::full(slots);
    LinearPredictor::new(
        sections,
        window,
        1,
        DMatrix::zeros(p, window.len()),
        SparseMatrix::identity(p),
        "po",
        Lambda::Scalar(0.0),
    )
    .expect("identity model is well formed")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArReport {
    /// Sections whose lag design was rank deficient (HA fallback).
    pub flagged: Vec<usize>,
    /// Per section `(intercept, φ_1, …, φ_order)`; empty when flagged.
    pub coefficients: Vec<Vec<f64>>,
}

/// Per-section AR(order) on own lags within each day. Slots before
/// `order` have too few lags and use the historical average.
pub fn baseline_ar(
    train: &DayTensor,
    order: usize,
) -> Result<(PiecewisePredictor, ArReport), VarError> {
    let (p, s) = (train.n_sections(), train.n_slots());
    let t_max = s.saturating_sub(1);
    if order == 0 || t_max <= order {
        return Err(VarError::WindowTooShort(format!(
            "AR({order}) needs more than {order} predicted slots, have {t_max}"
        )));
    }
    let ha = baseline_ha(train)?;
    let window = SlotWindow::new(order, t_max)?;
    let mut triplets = Vec::new();
    let mut b = DMatrix::zeros(p, window.len());
    let mut flagged = Vec::new();
    let mut coefficients = Vec::with_capacity(p);
    for k in 0..p {
        // Rows (day i, slot t): y = W_{k,t}, x = (W_{k,t−1}, …, W_{k,t−order}).
        let mut xs: Vec<Vec<f64>> = Vec::new();
        let mut ys = Vec::new();
        for i in 0..train.n_days() {
            for t in window.slots() {
                let y = train.raw(i, k, t);
                let x: Vec<f64> = (1..=order).map(|h| train.raw(i, k, t - h)).collect();
                if y.is_finite() && x.iter().all(|v| v.is_finite()) {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        match ar_ols(&xs, &ys, order) {
            Some(coef) => {
                for c in 0..window.len() {
                    b[(k, c)] = coef[0];
                }
                for h in 0..order {
                    if coef[h + 1] != 0.0 {
                        triplets.push((k, h * p + k, coef[h + 1]));
                    }
                }
                coefficients.push(coef);
            }
            None => {
                flagged.push(k);
                for (c, t) in window.slots().enumerate() {
                    b[(k, c)] = ha.b[(k, t - 1)];
                }
                coefficients.push(Vec::new());
            }
        }
    }
    let a = SparseMatrix::from_triplets(p, p * order, triplets).map_err(VarError::InvalidModel)?;
    let method = format!("ar{order}");
    let ar = LinearPredictor::new(
        train.sections().to_vec(),
        window,
        order,
        b,
        a,
        method.clone(),
        Lambda::Scalar(0.0),
    )?;
    let mut pieces = Vec::new();
    if order > 1 {
        let head = SlotWindow::new(1, order - 1)?;
        pieces.push(LinearPredictor::new(
            train.sections().to_vec(),
            head,
            1,
            ha.b.columns(0, head.len()).into_owned(),
            SparseMatrix::zeros(p, p),
            "ha",
            Lambda::Scalar(0.0),
        )?);
    }
    pieces.push(ar);
    Ok((
        PiecewisePredictor::new(method, pieces, None)?,
        ArReport {
            flagged,
            coefficients,
        },
    ))
}

/// OLS with intercept; `None` when the centered lag design is singular.
fn ar_ols(xs: &[Vec<f64>], ys: &[f64], order: usize) -> Option<Vec<f64>> {
    if ys.len() <= order {
        return None;
    }
    let m = ys.len() as f64;
    let xm: Vec<f64> = (0..order)
        .map(|h| xs.iter().map(|x| x[h]).sum::<f64>() / m)
        .collect();
    let ym = ys.iter().sum::<f64>() / m;
    let mut g = DMatrix::zeros(order, order);
    let mut r = DMatrix::zeros(order, 1);
    for (x, &y) in xs.iter().zip(ys) {
        for a in 0..order {
            let xa = x[a] - xm[a];
            r[(a, 0)] += xa * (y - ym);
            for c in 0..order {
                g[(a, c)] += xa * (x[c] - xm[c]);
            }
        }
    }
    let phi = solve_spd(&g, &r)?;
    let intercept = ym - (0..order).map(|h| phi[(h, 0)] * xm[h]).sum::<f64>();
    let mut out = vec![intercept];
    out.extend(phi.iter().copied());
    Some(out)
}

/// First and second moments of `(X, Y)` with second moments summed over
/// the `T` slot pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentModel {
    /// `p × T`, column `t − 1` is `E[W_{t−1}]`.
    pub mean_x: DMatrix<f64>,
    /// `p × T`, column `t − 1` is `E[W_t]`.
    pub mean_y: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub c_yx: DMatrix<f64>,
}

/// `A* = C_YX Σ⁻¹`, `b*_t = E[Y_t] − A* E[X_t]`. The flag reports whether
/// the 1e-10 diagonal jitter was needed.
pub fn oracle_predictor(
    moments: &MomentModel,
    sections: Vec<String>,
) -> Result<(LinearPredictor, bool), VarError> {
    let p = moments.sigma.nrows();
    if sections.len() != p || moments.c_yx.shape() != (p, p) || moments.mean_x.nrows() != p {
        return Err(VarError::ShapeMismatch("moment dimensions disagree".into()));
    }
    let rhs = moments.c_yx.transpose();
    let eig = moments.sigma.clone().symmetric_eigenvalues();
    let top = eig.max();
    if !(top > 0.0) || eig.min() <= 1e-13 * top {
        return Err(VarError::SingularSigma);
    }
    let (at, jittered) = match solve_spd(&moments.sigma, &rhs) {
        Some(x) => (x, false),
        None => {
            let scale = top;
            let mut s = moments.sigma.clone();
            for j in 0..p {
                s[(j, j)] += 1e-10 * scale;
            }
            (solve_spd(&s, &rhs).ok_or(VarError::SingularSigma)?, true)
        }
    };
    let a = SparseMatrix::from_dense(&at.transpose());
    let t = moments.mean_x.ncols();
    let mut b = DMatrix::zeros(p, t);
    for c in 0..t {
        let xm: Vec<f64> = moments.mean_x.column(c).iter().copied().collect();
        let ax = a.mul_vec(&xm);
        for k in 0..p {
            b[(k, c)] = moments.mean_y[(k, c)] - ax[k];
        }
    }
    let model = LinearPredictor::new(
        sections,
        SlotWindow::new(1, t)?,
        1,
        b,
        a,
        "oracle",
        Lambda::Scalar(0.0),
    )?;
    Ok((model, jittered))
}

/// Monte Carlo excess-risk estimates with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessRisk {
    /// Paired `R(L) − R(L*)`.
    pub risk_gap: f64,
    pub risk_gap_se: f64,
    /// `p⁻¹ E‖L(X) − L*(X)‖²`.
    pub distance: f64,
    pub distance_se: f64,
    pub reps: usize,
}

/// Stream family for Monte Carlo days, disjoint from training days.
const MC_STREAM_OFFSET: u64 = 1 << 40;

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Both excess-risk estimates over `reps` fresh days drawn from `truth`
/// under `seed`.
pub fn excess_risk_mc(
    model: &dyn DayPredictor,
    oracle: &dyn DayPredictor,
    truth: &GeneratorTruth,
    reps: usize,
    seed: u64,
) -> Result<ExcessRisk, VarError> {
    let p = truth.p() as f64;
    let pairs: Vec<(f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let day = gen_day_indexed(truth, seed, MC_STREAM_OFFSET + i);
            let y = day.columns(1, day.ncols() - 1);
            let l = model.predict_day(&day)?;
            let ls = oracle.predict_day(&day)?;
            let gap = ((&y - &l).norm_squared() - (&y - &ls).norm_squared()) / p;
            let dist = (&l - &ls).norm_squared() / p;
            Ok((gap, dist))
        })
        .collect::<Result<_, VarError>>()?;
    let gaps: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    let dists: Vec<f64> = pairs.iter().map(|x| x.1).collect();
    let (risk_gap, risk_gap_se) = mean_se(&gaps);
    let (distance, distance_se) = mean_se(&dists);
    Ok(ExcessRisk {
        risk_gap,
        risk_gap_se,
        distance,
        distance_se,
        reps,
    })
}

/// Closed-form `p⁻¹ E‖L(X) − L*(X)‖²` for a full-window one-lag model.
pub fn excess_risk_exact(
    model: &LinearPredictor,
    oracle: &LinearPredictor,
    moments: &MomentModel,
) -> f64 {
    let p = model.p();
    let d = model.a.to_dense() - oracle.a.to_dense();
    let mut total = (&d * &moments.sigma * d.transpose()).trace();
    for c in 0..moments.mean_x.ncols() {
        let shift = model.b.column(c) - oracle.b.column(c) + &d * moments.mean_x.column(c);
        total += shift.norm_squared();
    }
    total / p as f64
}

/// Upper bound `p⁻¹{‖(A* − Â)Σ^{1/2}‖² + 2‖E(Y) − Ȳ‖² + 2‖Â(E(X) − X̄)‖²}`
/// on the excess risk of a centered fit with sample means `x_bar`, `y_bar`.
pub fn excess_risk_bound(
    model: &LinearPredictor,
    oracle: &LinearPredictor,
    moments: &MomentModel,
    x_bar: &DMatrix<f64>,
    y_bar: &DMatrix<f64>,
) -> f64 {
    let p = model.p();
    let ahat = model.a.to_dense();
    let d = oracle.a.to_dense() - &ahat;
    let quad = (&d * &moments.sigma * d.transpose()).trace();
    let ey = (&moments.mean_y - y_bar).norm_squared();
    let ax = (&ahat * (&moments.mean_x - x_bar)).norm_squared();
    (quad + 2.0 * ey + 2.0 * ax) / p as f64
}

/// Model file layout; see [`ModelFile::from_predictor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceFile {
    pub window: [usize; 2],
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub lags: usize,
    pub lambda: Lambda,
    /// Row-major `p × |window|`.
    pub b: Vec<Vec<f64>>,
    /// `[row, col, value]` sorted by `(row, col)`.
    #[serde(rename = "A")]
    pub a: Vec<(usize, usize, f64)>,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: String,
    pub sections: Vec<String>,
    #[serde(flatten)]
    pub first: PieceFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_switch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<PieceFile>,
    /// Further pieces of slot-wise or AR models.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<PieceFile>,
}

impl PieceFile {
    fn from_linear(m: &LinearPredictor) -> Self {
        Self {
            window: [m.window.first, m.window.last],
            lags: m.lags,
            lambda: m.lambda.clone(),
            b: m.b
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            a: m.a.entries().to_vec(),
        }
    }

    fn to_linear(&self, sections: &[String], method: &str) -> Result<LinearPredictor, VarError> {
        let p = sections.len();
        let window = SlotWindow::new(self.window[0], self.window[1])?;
        if self.b.len() != p || self.b.iter().any(|r| r.len() != window.len()) {
            return Err(VarError::InvalidModel(format!(
                "b must be {p}x{}",
                window.len()
            )));
        }
        let b = DMatrix::from_fn(p, window.len(), |k, c| self.b[k][c]);
        let a = SparseMatrix::from_triplets(p, p * self.lags, self.a.clone())
            .map_err(VarError::InvalidModel)?;
        LinearPredictor::new(
            sections.to_vec(),
            window,
            self.lags,
            b,
            a,
            method,
            self.lambda.clone(),
        )
    }
}

impl ModelFile {
    pub fn from_predictor(model: &PiecewisePredictor) -> Self {
        let mut pieces = model.pieces.iter().map(PieceFile::from_linear);
        let first = pieces.next().expect("nonempty");
        let rest: Vec<PieceFile> = pieces.collect();
        let (right, rest) = match model.t_switch {
            Some(_) if rest.len() == 1 => (rest.into_iter().next(), Vec::new()),
            _ => (None, rest),
        };
        Self {
            method: model.method.clone(),
            sections: model.sections().to_vec(),
            first,
            t_switch: model.t_switch,
            right,
            pieces: rest,
        }
    }

    pub fn into_predictor(self) -> Result<PiecewisePredictor, VarError> {
        let mut pieces = vec![self.first.to_linear(&self.sections, &self.method)?];
        if let Some(r) = &self.right {
            pieces.push(r.to_linear(&self.sections, &self.method)?);
        }
        for piece in &self.pieces {
            pieces.push(piece.to_linear(&self.sections, &self.method)?);
        }
        PiecewisePredictor::new(self.method, pieces, self.t_switch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VarError> {
        serde_json::from_str(text).map_err(|e| VarError::InvalidModel(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{gen_dataset, GeneratorSpec};
    use chrono::NaiveDate;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|k| format!("k{k}")).collect()
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        crate::simgen::synthetic_dates(n)
    }

    #[test]
    fn predict_hand_cases() {
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let m = LinearPredictor::new(
            names(2),
            SlotWindow::full(2),
            1,
            b,
            a,
            "x",
            Lambda::Scalar(0.0),
        )
        .unwrap();
        let day = DMatrix::from_column_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        assert_eq!(m.predict(&day).unwrap().as_slice(), &[5.0, 4.0]);

        let po = baseline_po(names(3), 4);
        let day = DMatrix::from_fn(3, 4, |k, t| (10 * k + t) as f64);
        let pred = po.predict_day(&day).unwrap();
        assert_eq!(pred, day.columns(0, 3).into_owned());

        let b = DMatrix::from_fn(3, 3, |k, t| (k + t) as f64);
        let zero = LinearPredictor::new(
            names(3),
            SlotWindow::full(4),
            1,
            b.clone(),
            SparseMatrix::zeros(3, 3),
            "x",
            Lambda::Scalar(0.0),
        )
        .unwrap();
        assert_eq!(zero.predict_day(&day).unwrap(), b);
        assert!(zero.predict(&DMatrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn ha_cases() {
        let mk = |vals: &[f64]| {
            let mats: Vec<DMatrix<f64>> = vals
                .iter()
                .map(|&v| DMatrix::from_element(1, 2, v))
                .collect();
            DayTensor::from_day_matrices(dates(vals.len()), names(1), &mats).unwrap()
        };
        assert_eq!(baseline_ha(&mk(&[50.0, 60.0])).unwrap().b[(0, 0)], 55.0);
        assert_eq!(baseline_ha(&mk(&[42.0])).unwrap().b[(0, 0)], 42.0);
        assert_eq!(baseline_ha(&mk(&[7.0, 7.0, 7.0])).unwrap().b[(0, 0)], 7.0);
    }

    #[test]
    fn ar1_recovers_noiseless_recursion() {
        let mats: Vec<DMatrix<f64>> = (0..6)
            .map(|i| {
                let mut w = vec![10.0 + 3.0 * i as f64];
                for t in 1..8 {
                    w.push(0.5 * w[t - 1] + 1.0);
                }
                DMatrix::from_row_slice(1, 8, &w)
            })
            .collect();
        let train = DayTensor::from_day_matrices(dates(6), names(1), &mats).unwrap();
        let (model, report) = baseline_ar(&train, 1).unwrap();
        assert!(report.flagged.is_empty());
        let c = &report.coefficients[0];
        assert!((c[0] - 1.0).abs() < 1e-8 && (c[1] - 0.5).abs() < 1e-8);
        let pred = model.predict_day(&mats[2]).unwrap();
        assert!((pred - mats[2].columns(1, 7)).amax() < 1e-8);
    }

    #[test]
    fn ar_constant_data_falls_back() {
        let mats = vec![DMatrix::from_element(2, 6, 30.0); 4];
        let train = DayTensor::from_day_matrices(dates(4), names(2), &mats).unwrap();
        let (model, report) = baseline_ar(&train, 3).unwrap();
        assert_eq!(report.flagged, vec![0, 1]);
        let pred = model.predict_day(&mats[0]).unwrap();
        assert!(pred.iter().all(|&v| v == 30.0));
    }

    #[test]
    fn ar_never_crosses_days() {
        // Day i is constant at i; an AR(2) on own lags within the day then
        // predicts a flat line, which a cross-day lag would break.
        let mats: Vec<DMatrix<f64>> = (0..5)
            .map(|i| {
                DMatrix::from_fn(1, 6, |_, t| {
                    i as f64 * 10.0 + if t % 2 == 0 { 0.0 } else { 1.0 }
                })
            })
            .collect();
        let train = DayTensor::from_day_matrices(dates(5), names(1), &mats).unwrap();
        let (model, _) = baseline_ar(&train, 2).unwrap();
        let day = &mats[3];
        let pred = model.predict_day(day).unwrap();
        for t in 2..6 {
            assert!((pred[(0, t - 1)] - day[(0, t)]).abs() < 1e-8, "slot {t}");
        }
    }

    fn noiseless_tensor(
        p: usize,
        n: usize,
        slots: usize,
    ) -> (DayTensor, DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_fn(p, p, |i, j| {
            if (i + 1) % p == j {
                0.6
            } else if i == j {
                0.2
            } else {
                0.0
            }
        });
        let b = DMatrix::from_fn(p, slots - 1, |k, t| k as f64 - 0.3 * t as f64);
        let mut rng = rand::SeedableRng::seed_from_u64(11);
        let mats: Vec<DMatrix<f64>> = (0..n)
            .map(|_| {
                use rand::Rng;
                let rng: &mut rand_chacha::ChaCha8Rng = &mut rng;
                let mut d = DMatrix::zeros(p, slots);
                for k in 0..p {
                    d[(k, 0)] = rng.gen_range(-5.0..5.0);
                }
                for t in 1..slots {
                    let v = b.column(t - 1) + &a * d.column(t - 1);
                    d.set_column(t, &v);
                }
                d
            })
            .collect();
        (
            DayTensor::from_day_matrices(dates(n), names(p), &mats).unwrap(),
            a,
            b,
        )
    }

    #[test]
    fn noiseless_ols_recovers_model() {
        let (train, a, b) = noiseless_tensor(5, 30, 4);
        let opts = FitOptions::fixed(Penalty::lasso(0.0), SolverConfig::default());
        let (m, report) = fit(&train, SlotWindow::full(4), &opts).unwrap();
        assert!(report.flagged.is_empty());
        assert!((m.a.to_dense() - &a).amax() < 1e-6);
        assert!((&m.b - &b).amax() < 1e-6);
        let opts = FitOptions::fixed(Penalty::none(), SolverConfig::default());
        let (m, _) = fit(&train, SlotWindow::full(4), &opts).unwrap();
        assert!((m.a.to_dense() - &a).amax() < 1e-6);
    }

    #[test]
    fn huge_lambda_gives_slot_means() {
        let (train, _, _) = noiseless_tensor(4, 12, 5);
        let opts = FitOptions::fixed(Penalty::lasso(1e12), SolverConfig::default());
        let (m, _) = fit(&train, SlotWindow::full(5), &opts).unwrap();
        assert_eq!(m.a.nnz(), 0);
        let ha = baseline_ha(&train).unwrap();
        assert!((&m.b - &ha.b).amax() < 1e-10);
    }

    #[test]
    fn centering_identity_and_normal_equations() {
        let spec = GeneratorSpec {
            p: 8,
            n: 40,
            avg_degree: 3.0,
            seed: 5,
            ..GeneratorSpec::default()
        };
        let (train, _) = gen_dataset(&spec).unwrap();
        let window = SlotWindow::full(train.n_slots());
        for pen in [Penalty::none(), Penalty::lasso(50.0), Penalty::ridge(10.0)] {
            let (m, _) = fit(
                &train,
                window,
                &FitOptions::fixed(pen, SolverConfig::default()),
            )
            .unwrap();
            // b̂_t = mean_i(Y_t − Â X_t)
            let ahat = m.a.to_dense();
            let mut resid_mean = DMatrix::zeros(8, window.len());
            for i in 0..train.n_days() {
                let d = train.day_matrix(i);
                for t in window.slots() {
                    let r = d.column(t) - &ahat * d.column(t - 1);
                    let mut col = resid_mean.column_mut(t - 1);
                    col += r / train.n_days() as f64;
                }
            }
            assert!((&m.b - resid_mean).amax() <= 1e-10);
            if pen.family == PenaltyFamily::None {
                let mut cross = DMatrix::zeros(8, 8);
                let mut scale: f64 = 0.0;
                for i in 0..train.n_days() {
                    let d = train.day_matrix(i);
                    let pred = m.predict(&d).unwrap();
                    for t in window.slots() {
                        let e = d.column(t) - pred.column(t - 1);
                        cross += &e * d.column(t - 1).transpose();
                        scale = scale.max(d.column(t - 1).amax() * e.amax());
                    }
                }
                let m_rows = (train.n_days() * window.len()) as f64;
                assert!((cross / m_rows).amax() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn diagonal_and_lagged_variants() {
        let (train, _, _) = noiseless_tensor(4, 20, 6);
        let mut opts = FitOptions::fixed(Penalty::lasso(0.01), SolverConfig::default());
        opts.diagonal = true;
        let (m, _) = fit(&train, SlotWindow::full(6), &opts).unwrap();
        assert!(m.a.entries().iter().all(|e| e.0 == e.1));
        opts.diagonal = false;
        opts.lags = 2;
        let (m, _) = fit(&train, SlotWindow::new(2, 5).unwrap(), &opts).unwrap();
        assert_eq!(m.a.cols(), 8);
        assert!(fit(&train, SlotWindow::full(6), &opts).is_err());
    }

    #[test]
    fn standardize_matches_plain_ols() {
        let (train, _, _) = noiseless_tensor(4, 20, 5);
        let w = SlotWindow::full(5);
        let plain = fit(
            &train,
            w,
            &FitOptions::fixed(Penalty::none(), SolverConfig::default()),
        )
        .unwrap()
        .0;
        let mut opts = FitOptions::fixed(Penalty::none(), SolverConfig::default());
        opts.standardize = true;
        let scaled = fit(&train, w, &opts).unwrap().0;
        assert!((plain.a.to_dense() - scaled.a.to_dense()).amax() < 1e-8);
        assert!((plain.b - scaled.b).amax() < 1e-7);
    }

    #[test]
    fn oracle_identity_and_exact_moments() {
        let m = MomentModel {
            mean_x: DMatrix::zeros(3, 2),
            mean_y: DMatrix::zeros(3, 2),
            sigma: DMatrix::identity(3, 3),
            c_yx: DMatrix::identity(3, 3),
        };
        let (o, jitter) = oracle_predictor(&m, names(3)).unwrap();
        assert!(!jitter);
        assert!((o.a.to_dense() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);

        let a = DMatrix::from_row_slice(2, 2, &[0.3, -0.7, 0.5, 0.1]);
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let m = MomentModel {
            mean_x: DMatrix::from_element(2, 1, 1.0),
            mean_y: DMatrix::from_element(2, 1, 2.0),
            c_yx: &a * &sigma,
            sigma,
        };
        let (o, _) = oracle_predictor(&m, names(2)).unwrap();
        assert!((o.a.to_dense() - &a).amax() < 1e-12);

        let singular = MomentModel {
            sigma: DMatrix::zeros(2, 2),
            ..m
        };
        assert_eq!(
            oracle_predictor(&singular, names(2)).unwrap_err(),
            VarError::SingularSigma
        );
    }

    #[test]
    fn model_file_round_trip() {
        let spec = GeneratorSpec {
            p: 6,
            n: 30,
            avg_degree: 2.0,
            seed: 1,
            ..GeneratorSpec::default()
        };
        let (train, _) = gen_dataset(&spec).unwrap();
        let opts = FitOptions::fixed(Penalty::lasso(30.0), SolverConfig::default());
        let (left, _) = fit(&train, SlotWindow::new(1, 11).unwrap(), &opts).unwrap();
        let (right, _) = fit(&train, SlotWindow::new(12, 19).unwrap(), &opts).unwrap();
        let model = PiecewisePredictor::new("rs_lasso", vec![left, right], Some(11)).unwrap();
        let text = ModelFile::from_predictor(&model).to_json();
        let back = ModelFile::from_json(&text)
            .unwrap()
            .into_predictor()
            .unwrap();
        assert_eq!(back, model);
        let (ar, _) = baseline_ar(&train, 3).unwrap();
        let text = ModelFile::from_predictor(&ar).to_json();
        assert_eq!(
            ModelFile::from_json(&text)
                .unwrap()
                .into_predictor()
                .unwrap(),
            ar
        );
        let single = PiecewisePredictor::single(baseline_ha(&train).unwrap());
        let text = ModelFile::from_predictor(&single).to_json();
        assert!(!text.contains("t_switch"));
        assert_eq!(
            ModelFile::from_json(&text)
                .unwrap()
                .into_predictor()
                .unwrap(),
            single
        );
    }

    #[test]
    fn rollout_matches_one_step_for_first_slot() {
        let (train, a, b) = noiseless_tensor(3, 10, 5);
        let (m, _) = fit(
            &train,
            SlotWindow::full(5),
            &FitOptions::fixed(Penalty::none(), SolverConfig::default()),
        )
        .unwrap();
        let model = PiecewisePredictor::single(m);
        let day = train.day_matrix(0);
        let rolled = model.rollout(&day, 0).unwrap();
        // Noiseless dynamics: the rollout reproduces the whole day.
        assert!((rolled - &day).amax() < 1e-6);
        let _ = (a, b);
    }
}

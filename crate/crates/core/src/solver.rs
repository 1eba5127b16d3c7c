//! Penalized multi-output least squares.
//!
//! Every objective uses the factor-2 penalty convention
//! `‖y − Xβ‖² + 2λ·pen(β)`, so `lambda_max = ‖Xᵀy‖_∞` for the lasso.
//!
//! The engines work on a shared [`Gram`] system (`XᵀX`, `XᵀY`, `YᵀY`):
//! all `p` line problems of a VAR fit share one design, so the Gram is
//! built once and each line only needs its column of `XᵀY`. Lasso and
//! elastic net run cyclic coordinate descent with an active-set inner loop
//! and a KKT certificate check; OLS and ridge are solved in closed form by
//! Cholesky; the column-grouped lasso runs block coordinate descent.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{solve_spd, SparseMatrix, SparseVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("design is rank deficient")]
    RankDeficient,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("too few days: {0}")]
    TooFewDays(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyFamily {
    None,
    Lasso,
    Ridge,
    ElasticNet,
    GroupLasso,
}

impl std::str::FromStr for PenaltyFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" | "ols" => Ok(Self::None),
            "lasso" => Ok(Self::Lasso),
            "ridge" => Ok(Self::Ridge),
            "elastic_net" | "elastic-net" | "enet" => Ok(Self::ElasticNet),
            "group_lasso" | "group-lasso" | "grp-lasso" => Ok(Self::GroupLasso),
            other => Err(format!("unknown penalty family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub family: PenaltyFamily,
    pub lambda: f64,
    /// ℓ1 share of the elastic-net mix; ignored by the other families.
    pub alpha: f64,
}

impl Penalty {
    pub fn none() -> Self {
        Self::new(PenaltyFamily::None, 0.0, 1.0)
    }
    pub fn lasso(lambda: f64) -> Self {
        Self::new(PenaltyFamily::Lasso, lambda, 1.0)
    }
    pub fn ridge(lambda: f64) -> Self {
        Self::new(PenaltyFamily::Ridge, lambda, 0.0)
    }
    pub fn elastic_net(lambda: f64, alpha: f64) -> Self {
        Self::new(PenaltyFamily::ElasticNet, lambda, alpha)
    }
    pub fn group_lasso(lambda: f64) -> Self {
        Self::new(PenaltyFamily::GroupLasso, lambda, 1.0)
    }

    pub fn new(family: PenaltyFamily, lambda: f64, alpha: f64) -> Self {
        Self {
            family,
            lambda,
            alpha,
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(SolverError::InvalidPenalty(format!(
                "lambda = {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SolverError::InvalidPenalty(format!(
                "alpha = {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Elastic net at the ends of its mixing range is the pure family.
    pub fn canonical(self) -> Self {
        match self.family {
            PenaltyFamily::ElasticNet if self.alpha == 1.0 => Self::lasso(self.lambda),
            PenaltyFamily::ElasticNet if self.alpha == 0.0 => Self::ridge(self.lambda),
            _ => self,
        }
    }

    /// Weights `(l1, l2)` of `2·l1·‖β‖₁ + 2·l2·‖β‖²`.
    pub fn weights(&self) -> (f64, f64) {
        match self.family {
            PenaltyFamily::None => (0.0, 0.0),
            PenaltyFamily::Lasso | PenaltyFamily::GroupLasso => (self.lambda, 0.0),
            PenaltyFamily::Ridge => (0.0, self.lambda),
            PenaltyFamily::ElasticNet => {
                (self.lambda * self.alpha, self.lambda * (1.0 - self.alpha))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Bound on the max coefficient change per sweep, relative to
    /// `max(1, max |β|)`; also the KKT certificate level `tol·(1+λ)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub lambda_grid_size: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    pub seed: u64,
    /// Keep the objective value after every sweep.
    #[serde(default)]
    pub record_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
            lambda_grid_size: 50,
            lambda_min_ratio: 1e-3,
            folds: 5,
            seed: 0,
            record_objective: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0) {
            return Err(SolverError::InvalidProblem(
                "tolerance must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidProblem(
                "max_iterations must be >= 1".into(),
            ));
        }
        if self.folds < 2 {
            return Err(SolverError::InvalidProblem("folds must be >= 2".into()));
        }
        if self.lambda_grid_size == 0
            || !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio <= 1.0)
        {
            return Err(SolverError::InvalidProblem("bad lambda grid".into()));
        }
        Ok(())
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// One output line regressed on a centered design.
#[derive(Debug, Clone)]
pub struct LineProblem {
    design: DMatrix<f64>,
    response: DVector<f64>,
}

impl LineProblem {
    /// Rejects designs or responses whose column means are not zero
    /// (relative to the data scale).
    pub fn new(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self, SolverError> {
        if design.nrows() != response.len() {
            return Err(SolverError::InvalidProblem(format!(
                "design has {} rows, response {}",
                design.nrows(),
                response.len()
            )));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem("non-finite entries".into()));
        }
        let m = design.nrows().max(1) as f64;
        let check = |col: nalgebra::DVectorView<f64>, what: &str| {
            let scale = col.amax().max(1.0);
            let mean = col.sum() / m;
            if mean.abs() > 1e-10 * scale {
                Err(SolverError::InvalidProblem(format!(
                    "{what} is not centered (mean {mean})"
                )))
            } else {
                Ok(())
            }
        };
        for j in 0..design.ncols() {
            check(design.column(j), &format!("design column {j}"))?;
        }
        check(response.column(0), "response")?;
        Ok(Self { design, response })
    }

    /// Centers the columns, then builds the problem.
    pub fn centered(
        mut design: DMatrix<f64>,
        mut response: DVector<f64>,
    ) -> Result<Self, SolverError> {
        let m = design.nrows().max(1) as f64;
        for mut col in design.column_iter_mut() {
            let mean = col.sum() / m;
            col.add_scalar_mut(-mean);
        }
        let mean = response.sum() / m;
        response.add_scalar_mut(-mean);
        Self::new(design, response)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }
    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }
    pub fn n_features(&self) -> usize {
        self.design.ncols()
    }

    pub fn gram(&self) -> Gram {
        let y = DMatrix::from_column_slice(self.response.len(), 1, self.response.as_slice());
        Gram::from_rows(&self.design, &y)
    }
}

/// Sufficient statistics of a multi-output least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    /// `XᵀX`, p × p.
    pub xx: DMatrix<f64>,
    /// `XᵀY`, p × q.
    pub xy: DMatrix<f64>,
    /// Column sums of squares of `Y`.
    pub yy: Vec<f64>,
    pub rows: usize,
}

impl Gram {
    pub fn zeros(p: usize, q: usize) -> Self {
        Self {
            xx: DMatrix::zeros(p, p),
            xy: DMatrix::zeros(p, q),
            yy: vec![0.0; q],
            rows: 0,
        }
    }

    pub fn from_rows(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Self {
        assert_eq!(x.nrows(), y.nrows());
        Self {
            xx: x.tr_mul(x),
            xy: x.tr_mul(y),
            yy: y.column_iter().map(|c| c.norm_squared()).collect(),
            rows: x.nrows(),
        }
    }

    pub fn add_assign(&mut self, other: &Gram) {
        self.xx += &other.xx;
        self.xy += &other.xy;
        for (a, b) in self.yy.iter_mut().zip(&other.yy) {
            *a += b;
        }
        self.rows += other.rows;
    }

    pub fn n_features(&self) -> usize {
        self.xx.nrows()
    }
    pub fn n_outputs(&self) -> usize {
        self.xy.ncols()
    }

    /// Restriction to a subset of features (for diagonal-structured fits).
    pub fn restrict(&self, features: &[usize], output: usize) -> Gram {
        let f = features.len();
        Gram {
            xx: DMatrix::from_fn(f, f, |a, b| self.xx[(features[a], features[b])]),
            xy: DMatrix::from_fn(f, 1, |a, _| self.xy[(features[a], output)]),
            yy: vec![self.yy[output]],
            rows: self.rows,
        }
    }

    /// `‖Xᵀy‖_∞` for output `k`.
    pub fn lambda_max(&self, k: usize) -> f64 {
        self.xy.column(k).amax()
    }
}

/// Result of one line fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub coef: SparseVector,
    /// Number of coordinate sweeps (0 for closed-form solves).
    pub iterations: usize,
    pub kkt_violation: f64,
    /// False when `max_iterations` ran out before the certificate held.
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Smallest λ with an all-zero lasso solution. Computed from the same
/// Gram statistics the solver uses, so `λ = lambda_max` gives exact zeros.
pub fn lambda_max(problem: &LineProblem) -> f64 {
    problem.gram().lambda_max(0)
}

/// Subgradient-condition violation of `beta`, computed from the design
/// residuals (independent of the Gram route used by the solver).
pub fn kkt_violation(problem: &LineProblem, beta: &SparseVector, penalty: &Penalty) -> f64 {
    let b = DVector::from_vec(beta.to_dense());
    let residual = &problem.response - &problem.design * &b;
    let grad = -(problem.design.transpose() * residual);
    let (l1, l2) = penalty.canonical().weights();
    kkt_from_gradient(grad.as_slice(), b.as_slice(), l1, l2)
}

fn kkt_from_gradient(grad: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    grad.iter()
        .zip(beta)
        .map(|(&g, &b)| {
            let g = g + 2.0 * l2 * b;
            if b != 0.0 {
                (g + l1 * b.signum()).abs()
            } else {
                (g.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Fits one line problem.
pub fn fit_line(
    problem: &LineProblem,
    penalty: &Penalty,
    config: &SolverConfig,
) -> Result<LineFit, SolverError> {
    let gram = problem.gram();
    fit_gram_line(&gram, 0, penalty, config, None)
}

/// Fits output `k` of a Gram system, optionally warm-started.
pub fn fit_gram_line(
    gram: &Gram,
    k: usize,
    penalty: &Penalty,
    config: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<LineFit, SolverError> {
    penalty.validate()?;
    let penalty = penalty.canonical();
    match penalty.family {
        PenaltyFamily::None | PenaltyFamily::Ridge => {
            let sol = closed_form(gram, penalty.weights().1, &[k])?;
            let beta: Vec<f64> = sol.column(0).iter().copied().collect();
            Ok(LineFit {
                coef: SparseVector::from_dense(&beta),
                iterations: 0,
                kkt_violation: 0.0,
                converged: true,
                objective_trace: Vec::new(),
            })
        }
        PenaltyFamily::Lasso | PenaltyFamily::ElasticNet => {
            let (l1, l2) = penalty.weights();
            let xy: Vec<f64> = gram.xy.column(k).iter().copied().collect();
            Ok(coordinate_descent(
                &gram.xx,
                &xy,
                gram.yy[k],
                l1,
                l2,
                penalty.lambda,
                config,
                warm,
            ))
        }
        PenaltyFamily::GroupLasso => Err(SolverError::InvalidPenalty(
            "group lasso couples lines; use fit_group_lasso".into(),
        )),
    }
}

/// `(XᵀX + 2·l2·I)⁻¹ XᵀY` for the selected outputs.
fn closed_form(gram: &Gram, l2: f64, outputs: &[usize]) -> Result<DMatrix<f64>, SolverError> {
    let p = gram.n_features();
    let mut a = gram.xx.clone();
    for j in 0..p {
        a[(j, j)] += 2.0 * l2;
    }
    // Degenerate (all-zero) columns are dropped and get coefficient 0.
    let degenerate = degenerate_columns(&gram.xx);
    let keep: Vec<usize> = (0..p).filter(|&j| !degenerate[j]).collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])]);
    let rhs = DMatrix::from_fn(keep.len(), outputs.len(), |i, c| {
        gram.xy[(keep[i], outputs[c])]
    });
    let sol = solve_spd(&sub, &rhs).ok_or(SolverError::RankDeficient)?;
    let mut out = DMatrix::zeros(p, outputs.len());
    for (i, &j) in keep.iter().enumerate() {
        for c in 0..outputs.len() {
            out[(j, c)] = sol[(i, c)];
        }
    }
    Ok(out)
}

fn max_diag(xx: &DMatrix<f64>) -> f64 {
    (0..xx.nrows()).map(|j| xx[(j, j)]).fold(0.0, f64::max)
}

/// Columns with (numerically) zero variance; their coefficients stay zero.
fn degenerate_columns(xx: &DMatrix<f64>) -> Vec<bool> {
    let floor = 1e-14 * max_diag(xx).max(f64::MIN_POSITIVE);
    (0..xx.nrows()).map(|j| !(xx[(j, j)] > floor)).collect()
}

fn objective(xy: &[f64], yy: f64, beta: &[f64], q: &[f64], l1: f64, l2: f64) -> f64 {
    let mut f = yy;
    for j in 0..beta.len() {
        if beta[j] != 0.0 {
            f += beta[j] * (q[j] - 2.0 * xy[j])
                + 2.0 * l1 * beta[j].abs()
                + 2.0 * l2 * beta[j] * beta[j];
        }
    }
    f
}

const INNER_SWEEPS: usize = 50;
const POLISH_AFTER: usize = 3;

fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Minimizer of the smooth objective on the face with fixed signed
/// support, or `None` if it is singular or leaves the face.
fn face_minimizer(
    xx: &DMatrix<f64>,
    xy: &[f64],
    pattern: &[(usize, bool)],
    l1: f64,
    l2: f64,
    p: usize,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let s = pattern.len();
    let g = DMatrix::from_fn(s, s, |a, b| {
        xx[(pattern[a].0, pattern[b].0)] + if a == b { 2.0 * l2 } else { 0.0 }
    });
    let rhs = DMatrix::from_fn(s, 1, |a, _| {
        let (j, pos) = pattern[a];
        xy[j] - if pos { l1 } else { -l1 }
    });
    let z = solve_spd(&g, &rhs)?;
    let mut beta = vec![0.0; p];
    for (a, &(j, pos)) in pattern.iter().enumerate() {
        let v = z[(a, 0)];
        if (v > 0.0) != pos || v == 0.0 {
            return None;
        }
        beta[j] = v;
    }
    let mut q = vec![0.0; p];
    for &(j, _) in pattern {
        let b = beta[j];
        axpy(q.as_mut_slice(), b, column(xx, j));
    }
    Some((beta, q))
}

/// Cyclic coordinate descent on the Gram form of
/// `‖y − Xβ‖² + 2·l1·‖β‖₁ + 2·l2·‖β‖²`.
#[allow(clippy::too_many_arguments)]
fn coordinate_descent(
    xx: &DMatrix<f64>,
    xy: &[f64],
    yy: f64,
    l1: f64,
    l2: f64,
    lambda: f64,
    config: &SolverConfig,
    warm: Option<&[f64]>,
) -> LineFit {
    let p = xy.len();
    let degenerate = degenerate_columns(xx);
    let mut beta: Vec<f64> = match warm {
        Some(w) => w
            .iter()
            .zip(&degenerate)
            .map(|(&v, &d)| if d { 0.0 } else { v })
            .collect(),
        None => vec![0.0; p],
    };
    // q = XᵀX β
    let mut q = vec![0.0; p];
    let recompute_q = |beta: &[f64], q: &mut [f64]| {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                axpy(q, b, column(xx, j));
            }
        }
    };
    recompute_q(&beta, &mut q);

    let kkt_level = config.tolerance * (1.0 + lambda);
    let mut trace = Vec::new();
    let slack = 1e-10 * (yy.abs() + 1.0);
    let mut last_obj = objective(xy, yy, &beta, &q, l1, l2);
    if config.record_objective {
        trace.push(last_obj);
    }

    let sweep = |coords: &mut dyn Iterator<Item = usize>, beta: &mut [f64], q: &mut [f64]| {
        let mut max_change: f64 = 0.0;
        for j in coords {
            if degenerate[j] {
                continue;
            }
            let d = xx[(j, j)];
            let old = beta[j];
            let r = xy[j] - q[j] + d * old;
            let new = soft_threshold(r, l1) / (d + 2.0 * l2);
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                axpy(q, delta, column(xx, j));
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    'outer: while iterations < config.max_iterations {
        let change = sweep(&mut (0..p), &mut beta, &mut q);
        iterations += 1;
        let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        recompute_q(&beta, &mut q);
        let obj = objective(xy, yy, &beta, &q, l1, l2);
        debug_assert!(
            obj <= last_obj + slack,
            "objective increased: {last_obj} -> {obj}"
        );
        last_obj = obj;
        if config.record_objective {
            trace.push(obj);
        }
        if change <= config.tolerance * scale {
            let grad: Vec<f64> = q.iter().zip(xy).map(|(a, b)| a - b).collect();
            kkt = kkt_from_gradient(&grad, &beta, l1, l2);
            if kkt <= kkt_level {
                converged = true;
                break;
            }
        }
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        // A few sweeps over the active set settle the signs; then jump to
        // the exact minimizer on that face if it keeps them.
        let mut polished = false;
        for inner in 0..INNER_SWEEPS {
            if iterations >= config.max_iterations {
                break 'outer;
            }
            let change = sweep(&mut active.iter().copied(), &mut beta, &mut q);
            iterations += 1;
            if config.record_objective {
                let obj = objective(xy, yy, &beta, &q, l1, l2);
                debug_assert!(
                    obj <= last_obj + slack,
                    "objective increased: {last_obj} -> {obj}"
                );
                last_obj = obj;
                trace.push(obj);
            }
            let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
            if change <= config.tolerance * scale * 0.1 {
                continue 'outer;
            }
            if !polished && inner + 1 >= POLISH_AFTER {
                polished = true;
                last_obj = objective(xy, yy, &beta, &q, l1, l2);
                let pattern: Vec<(usize, bool)> = active
                    .iter()
                    .filter(|&&j| beta[j] != 0.0)
                    .map(|&j| (j, beta[j] > 0.0))
                    .collect();
                if let Some((cand, cand_q)) = face_minimizer(xx, xy, &pattern, l1, l2, p) {
                    let cand_obj = objective(xy, yy, &cand, &cand_q, l1, l2);
                    if cand_obj <= last_obj {
                        beta = cand;
                        q = cand_q;
                        last_obj = cand_obj;
                        if config.record_objective {
                            trace.push(last_obj);
                        }
                        continue 'outer;
                    }
                }
            }
        }
    }
    if !converged {
        let grad: Vec<f64> = q.iter().zip(xy).map(|(a, b)| a - b).collect();
        kkt = kkt_from_gradient(&grad, &beta, l1, l2);
    }
    LineFit {
        coef: SparseVector::from_dense(&beta),
        iterations,
        kkt_violation: kkt,
        converged,
        objective_trace: trace,
    }
}

/// Fits all outputs of a Gram system, one penalty per output. Lines run
/// in parallel; OLS and ridge lines sharing a λ share one factorization.
pub fn fit_gram_lines(
    gram: &Gram,
    penalties: &[Penalty],
    config: &SolverConfig,
    warm: Option<&DMatrix<f64>>,
) -> Result<Vec<LineFit>, SolverError> {
    let q = gram.n_outputs();
    if penalties.len() != q {
        return Err(SolverError::InvalidProblem(format!(
            "{} penalties for {q} outputs",
            penalties.len()
        )));
    }
    for p in penalties {
        p.validate()?;
    }
    let canon: Vec<Penalty> = penalties.iter().map(|p| p.canonical()).collect();
    let mut out: Vec<Option<LineFit>> = vec![None; q];

    // Closed-form families, grouped by identical l2 weight.
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (k, p) in canon.iter().enumerate() {
        if matches!(p.family, PenaltyFamily::None | PenaltyFamily::Ridge) {
            let l2 = p.weights().1;
            match groups.iter_mut().find(|(w, _)| *w == l2) {
                Some((_, ks)) => ks.push(k),
                None => groups.push((l2, vec![k])),
            }
        } else if p.family == PenaltyFamily::GroupLasso {
            return Err(SolverError::InvalidPenalty(
                "group lasso couples lines; use fit_group_lasso".into(),
            ));
        }
    }
    for (l2, ks) in groups {
        let sol = closed_form(gram, l2, &ks)?;
        for (c, &k) in ks.iter().enumerate() {
            let beta: Vec<f64> = sol.column(c).iter().copied().collect();
            out[k] = Some(LineFit {
                coef: SparseVector::from_dense(&beta),
                iterations: 0,
                kkt_violation: 0.0,
                converged: true,
                objective_trace: Vec::new(),
            });
        }
    }

    let iterative: Vec<usize> = (0..q).filter(|&k| out[k].is_none()).collect();
    let fits: Vec<(usize, LineFit)> = iterative
        .par_iter()
        .map(|&k| {
            let w: Option<Vec<f64>> = warm.map(|w| w.column(k).iter().copied().collect());
            let fit =
                fit_gram_line(gram, k, &canon[k], config, w.as_deref()).expect("validated penalty");
            (k, fit)
        })
        .collect();
    for (k, fit) in fits {
        out[k] = Some(fit);
    }
    Ok(out
        .into_iter()
        .map(|f| f.expect("every line fitted"))
        .collect())
}

/// Result of a group-lasso fit.
#[derive(Debug, Clone)]
pub struct GroupFit {
    /// q × p coefficient matrix (outputs × inputs).
    pub coef: SparseMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_violation: f64,
    pub objective_trace: Vec<f64>,
}

/// Smallest λ at which the group lasso solution is zero:
/// `max_ℓ ‖(XᵀY)_{ℓ,·}‖₂`.
pub fn group_lambda_max(gram: &Gram) -> f64 {
    gram.xy.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Column-grouped lasso `‖Yc − A·Xc‖_F² + 2λ·Σ_ℓ ‖A_{·,ℓ}‖₂` with `Yc`
/// (q × m) and `Xc` (p × m) centered.
pub fn fit_group_lasso(
    yc: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<GroupFit, SolverError> {
    if yc.ncols() != xc.ncols() {
        return Err(SolverError::InvalidProblem(
            "Yc and Xc must have the same columns".into(),
        ));
    }
    let gram = Gram::from_rows(&xc.transpose(), &yc.transpose());
    fit_group_lasso_gram(&gram, lambda, config, None)
}

/// Block coordinate descent over the columns of `A` on a Gram system.
pub fn fit_group_lasso_gram(
    gram: &Gram,
    lambda: f64,
    config: &SolverConfig,
    warm: Option<&DMatrix<f64>>,
) -> Result<GroupFit, SolverError> {
    Penalty::group_lasso(lambda).validate()?;
    let p = gram.n_features();
    let q = gram.n_outputs();
    // c = (XᵀY)ᵀ, q × p.
    let c = gram.xy.transpose();
    let xx = &gram.xx;
    let degenerate = degenerate_columns(xx);
    let mut a = match warm {
        Some(w) => w.clone(),
        None => DMatrix::zeros(q, p),
    };
    for j in 0..p {
        if degenerate[j] {
            a.column_mut(j).fill(0.0);
        }
    }
    let mut m = &a * xx;
    let yy: f64 = gram.yy.iter().sum();
    let objective = |a: &DMatrix<f64>, m: &DMatrix<f64>| {
        let mut f = yy - 2.0 * a.dot(&c) + a.dot(m);
        for col in a.column_iter() {
            f += 2.0 * lambda * col.norm();
        }
        f
    };
    let mut trace = Vec::new();
    if config.record_objective {
        trace.push(objective(&a, &m));
    }

    let update = |l: usize, a: &mut DMatrix<f64>, m: &mut DMatrix<f64>| -> f64 {
        let d = xx[(l, l)];
        let r: DVector<f64> = c.column(l) - m.column(l) + a.column(l) * d;
        let norm = r.norm();
        let shrink = if norm > lambda {
            1.0 - lambda / norm
        } else {
            0.0
        };
        let new = r * (shrink / d);
        let delta: DVector<f64> = &new - a.column(l);
        let change = delta.amax();
        if change != 0.0 {
            a.set_column(l, &new);
            // m += delta ⊗ xx[l, ·]
            m.ger(1.0, &delta, &xx.row(l).transpose(), 1.0);
        }
        change
    };

    let kkt = |a: &DMatrix<f64>, m: &DMatrix<f64>| -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..p {
            if degenerate[l] {
                continue;
            }
            let g: DVector<f64> = c.column(l) - m.column(l);
            let an = a.column(l).norm();
            let v = if an > 0.0 {
                (g - a.column(l) * (lambda / an)).norm()
            } else {
                (g.norm() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    };

    let level = config.tolerance * (1.0 + lambda);
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    'outer: while iterations < config.max_iterations {
        let mut change: f64 = 0.0;
        for l in 0..p {
            if !degenerate[l] {
                change = change.max(update(l, &mut a, &mut m));
            }
        }
        iterations += 1;
        m = &a * xx;
        if config.record_objective {
            trace.push(objective(&a, &m));
        }
        let scale = a.amax().max(1.0);
        if change <= config.tolerance * scale {
            violation = kkt(&a, &m);
            if violation <= level {
                converged = true;
                break;
            }
        }
        let active: Vec<usize> = (0..p).filter(|&l| a.column(l).amax() > 0.0).collect();
        while iterations < config.max_iterations && !active.is_empty() {
            let mut change: f64 = 0.0;
            for &l in &active {
                change = change.max(update(l, &mut a, &mut m));
            }
            iterations += 1;
            if config.record_objective {
                trace.push(objective(&a, &m));
            }
            if change <= 0.1 * config.tolerance * a.amax().max(1.0) {
                continue 'outer;
            }
        }
    }
    if !converged {
        violation = kkt(&a, &m);
    }
    Ok(GroupFit {
        coef: SparseMatrix::from_dense(&a),
        iterations,
        converged,
        kkt_violation: violation,
        objective_trace: trace,
    })
}

/// Regression rows labelled by day and by centering group (slot).
///
/// Centering is per group over the selected days, so the intercept of each
/// group is profiled out exactly as in a per-slot intercept model.
#[derive(Debug, Clone)]
pub struct DayRows {
    /// m × p covariates.
    pub x: DMatrix<f64>,
    /// m × q outputs.
    pub y: DMatrix<f64>,
    pub day: Vec<usize>,
    pub group: Vec<usize>,
    pub n_days: usize,
    pub n_groups: usize,
}

/// Per-group means, p × G and q × G.
#[derive(Debug, Clone)]
pub struct GroupMeans {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl DayRows {
    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.y.ncols()
    }

    pub fn means(&self, include: &[bool]) -> GroupMeans {
        let (p, q, g) = (self.x.ncols(), self.y.ncols(), self.n_groups);
        let mut mx = DMatrix::zeros(p, g);
        let mut my = DMatrix::zeros(q, g);
        let mut counts = vec![0usize; g];
        for r in 0..self.x.nrows() {
            if !include[self.day[r]] {
                continue;
            }
            let grp = self.group[r];
            counts[grp] += 1;
            for j in 0..p {
                mx[(j, grp)] += self.x[(r, j)];
            }
            for k in 0..q {
                my[(k, grp)] += self.y[(r, k)];
            }
        }
        for grp in 0..g {
            let c = counts[grp].max(1) as f64;
            mx.column_mut(grp).scale_mut(1.0 / c);
            my.column_mut(grp).scale_mut(1.0 / c);
        }
        GroupMeans { x: mx, y: my }
    }

    /// Rows of the included days, centered with `means`.
    pub fn centered(&self, include: &[bool], means: &GroupMeans) -> (DMatrix<f64>, DMatrix<f64>) {
        let rows: Vec<usize> = (0..self.x.nrows())
            .filter(|&r| include[self.day[r]])
            .collect();
        let xc = DMatrix::from_fn(rows.len(), self.x.ncols(), |i, j| {
            self.x[(rows[i], j)] - means.x[(j, self.group[rows[i]])]
        });
        let yc = DMatrix::from_fn(rows.len(), self.y.ncols(), |i, k| {
            self.y[(rows[i], k)] - means.y[(k, self.group[rows[i]])]
        });
        (xc, yc)
    }

    /// Gram of the included days after per-group centering.
    pub fn centered_gram(&self, include: &[bool]) -> (Gram, GroupMeans) {
        let means = self.means(include);
        let (xc, yc) = self.centered(include, &means);
        (Gram::from_rows(&xc, &yc), means)
    }
}

/// Shuffles day indices under `seed` and cuts them into `folds`
/// contiguous groups whose sizes differ by at most one. Each fold is
/// returned sorted.
pub fn fold_assignment(
    n_days: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SolverError> {
    if folds < 2 || n_days < folds {
        return Err(SolverError::TooFewDays(format!(
            "{n_days} days cannot form {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n_days).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n_days / folds;
    let extra = n_days % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

/// Descending log-spaced grid from `top` to `top·min_ratio`.
pub fn lambda_grid(top: f64, config: &SolverConfig) -> Vec<f64> {
    let g = config.lambda_grid_size;
    if g == 1 || top == 0.0 {
        return vec![top; g.max(1)];
    }
    let log_ratio = config.lambda_min_ratio.ln();
    (0..g)
        .map(|i| top * (log_ratio * i as f64 / (g - 1) as f64).exp())
        .collect()
}

/// Outcome of cross-validated λ selection.
#[derive(Debug, Clone)]
pub struct CvSelection {
    /// Chosen λ for every output line.
    pub lambdas: Vec<f64>,
    /// Per line (or one shared entry): `(λ, mean held-out squared error)`.
    pub curves: Vec<Vec<(f64, f64)>>,
    pub per_line: bool,
}

fn path_top(gram: &Gram, family: PenaltyFamily, alpha: f64, k: usize) -> f64 {
    let top = gram.lambda_max(k);
    match family {
        PenaltyFamily::ElasticNet if alpha > 0.0 => top / alpha,
        _ => top,
    }
}

/// Index minimizing the curve; ties go to the larger λ (earlier index on
/// a descending grid).
fn argmin_prefer_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// K-fold cross-validation of λ over whole days.
///
/// The grid runs from the full-data `lambda_max` down to
/// `lambda_min_ratio · lambda_max`. Each fold refits on the remaining days
/// (re-centered on them) along the grid with warm starts and scores the
/// held-out days centered by the training means.
pub fn cv_select_lambda(
    rows: &DayRows,
    family: PenaltyFamily,
    alpha: f64,
    per_line: bool,
    config: &SolverConfig,
) -> Result<CvSelection, SolverError> {
    config.validate()?;
    if family == PenaltyFamily::GroupLasso {
        let (lambda, curve) = cv_select_group_lambda(rows, config)?;
        return Ok(CvSelection {
            lambdas: vec![lambda; rows.n_outputs()],
            curves: vec![curve],
            per_line: false,
        });
    }
    let q = rows.n_outputs();
    if family == PenaltyFamily::None {
        return Ok(CvSelection {
            lambdas: vec![0.0; q],
            curves: vec![Vec::new(); q],
            per_line,
        });
    }
    let folds = fold_assignment(rows.n_days, config.folds, config.seed)?;
    let (full, _) = rows.centered_gram(&vec![true; rows.n_days]);
    let tops: Vec<f64> = (0..q).map(|k| path_top(&full, family, alpha, k)).collect();
    let grids: Vec<Vec<f64>> = if per_line {
        tops.iter().map(|&t| lambda_grid(t, config)).collect()
    } else {
        let top = tops.iter().copied().fold(0.0, f64::max);
        vec![lambda_grid(top, config); q]
    };
    let g = config.lambda_grid_size;
    // sse[k][i]: held-out squared error of line k at grid point i.
    let mut sse = vec![vec![0.0; g]; q];
    let mut held_out_rows = 0usize;
    for fold in &folds {
        let mut train = vec![true; rows.n_days];
        for &d in fold {
            train[d] = false;
        }
        let test: Vec<bool> = train.iter().map(|t| !t).collect();
        let (gram, means) = rows.centered_gram(&train);
        let (xh, yh) = rows.centered(&test, &means);
        held_out_rows += xh.nrows();
        let fold_sse: Vec<Vec<f64>> = (0..q)
            .into_par_iter()
            .map(|k| line_path_sse(&gram, k, family, alpha, &grids[k], config, &xh, &yh))
            .collect::<Result<_, _>>()?;
        for k in 0..q {
            for i in 0..g {
                sse[k][i] += fold_sse[k][i];
            }
        }
    }
    let denom = held_out_rows.max(1) as f64;
    if per_line {
        let mut lambdas = Vec::with_capacity(q);
        let mut curves = Vec::with_capacity(q);
        for k in 0..q {
            let risk: Vec<f64> = sse[k].iter().map(|s| s / denom).collect();
            let best = argmin_prefer_first(&risk);
            lambdas.push(grids[k][best]);
            curves.push(grids[k].iter().copied().zip(risk).collect());
        }
        Ok(CvSelection {
            lambdas,
            curves,
            per_line,
        })
    } else {
        let risk: Vec<f64> = (0..g)
            .map(|i| sse.iter().map(|s| s[i]).sum::<f64>() / (denom * q as f64))
            .collect();
        let best = argmin_prefer_first(&risk);
        Ok(CvSelection {
            lambdas: vec![grids[0][best]; q],
            curves: vec![grids[0].iter().copied().zip(risk).collect()],
            per_line,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn line_path_sse(
    gram: &Gram,
    k: usize,
    family: PenaltyFamily,
    alpha: f64,
    grid: &[f64],
    config: &SolverConfig,
    xh: &DMatrix<f64>,
    yh: &DMatrix<f64>,
) -> Result<Vec<f64>, SolverError> {
    let y = yh.column(k);
    let mut warm: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let penalty = Penalty::new(family, lambda, alpha);
        let fit = fit_gram_line(gram, k, &penalty, config, warm.as_deref())?;
        let dense = fit.coef.to_dense();
        let mut sse = 0.0;
        for r in 0..xh.nrows() {
            let pred: f64 = fit
                .coef
                .entries()
                .iter()
                .map(|&(j, b)| b * xh[(r, j)])
                .sum();
            let e = y[r] - pred;
            sse += e * e;
        }
        out.push(sse);
        warm = Some(dense);
    }
    Ok(out)
}

/// Cross-validated λ for the group lasso (one λ shared by all lines).
pub fn cv_select_group_lambda(
    rows: &DayRows,
    config: &SolverConfig,
) -> Result<(f64, Vec<(f64, f64)>), SolverError> {
    config.validate()?;
    let folds = fold_assignment(rows.n_days, config.folds, config.seed)?;
    let (full, _) = rows.centered_gram(&vec![true; rows.n_days]);
    let grid = lambda_grid(group_lambda_max(&full), config);
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|fold| {
            let mut train = vec![true; rows.n_days];
            for &d in fold {
                train[d] = false;
            }
            let test: Vec<bool> = train.iter().map(|t| !t).collect();
            let (gram, means) = rows.centered_gram(&train);
            let (xh, yh) = rows.centered(&test, &means);
            let mut warm: Option<DMatrix<f64>> = None;
            let mut out = Vec::with_capacity(grid.len());
            for &lambda in &grid {
                let fit = fit_group_lasso_gram(&gram, lambda, config, warm.as_ref())?;
                let a = fit.coef.to_dense();
                let resid = &yh - &xh * a.transpose();
                out.push(resid.norm_squared());
                warm = Some(a);
            }
            Ok((out, xh.nrows()))
        })
        .collect::<Result<Vec<_>, SolverError>>()?
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    let rows_total: usize = folds
        .iter()
        .map(|f| {
            let set: std::collections::HashSet<_> = f.iter().collect();
            rows.day.iter().filter(|d| set.contains(d)).count()
        })
        .sum();
    let denom = (rows_total.max(1) * rows.n_outputs().max(1)) as f64;
    let risk: Vec<f64> = (0..grid.len())
        .map(|i| per_fold.iter().map(|f| f[i]).sum::<f64>() / denom)
        .collect();
    let best = argmin_prefer_first(&risk);
    Ok((grid[best], grid.into_iter().zip(risk).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn one_feature() -> LineProblem {
        LineProblem::new(
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![2.0, -2.0]),
        )
        .unwrap()
    }

    fn random_problem(m: usize, p: usize, seed: u64) -> LineProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m, p, |_, _| StandardNormal.sample(&mut rng));
        let beta = DVector::from_fn(p, |j, _| if j % 3 == 0 { 1.0 + j as f64 } else { 0.0 });
        let noise = DVector::from_fn(m, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.5 * z
        });
        let y = &x * beta + noise;
        LineProblem::centered(x, y).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn single_feature_closed_form() {
        let pb = one_feature();
        let cfg = SolverConfig::default();
        let fit = fit_line(&pb, &Penalty::lasso(2.0), &cfg).unwrap();
        assert!((fit.coef.get(0) - 1.0).abs() < 1e-12);
        let fit = fit_line(&pb, &Penalty::lasso(0.0), &cfg).unwrap();
        assert!((fit.coef.get(0) - 2.0).abs() < 1e-12);
        let fit = fit_line(&pb, &Penalty::lasso(lambda_max(&pb)), &cfg).unwrap();
        assert_eq!(fit.coef.nnz(), 0);
    }

    #[test]
    fn lambda_max_cases() {
        assert_eq!(lambda_max(&one_feature()), 4.0);
        let zero = LineProblem::new(
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::zeros(2),
        )
        .unwrap();
        assert_eq!(lambda_max(&zero), 0.0);
        // Orthonormal columns e1-e2 and e3-e4 scaled by 1/√2; Xᵀy = (3, −5).
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = DMatrix::from_row_slice(4, 2, &[s, 0.0, -s, 0.0, 0.0, s, 0.0, -s]);
        let y = &x * DVector::from_vec(vec![3.0, -5.0]);
        let pb = LineProblem::new(x, y).unwrap();
        assert!((lambda_max(&pb) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_cases() {
        let pb = one_feature();
        let beta = fit_line(&pb, &Penalty::lasso(2.0), &SolverConfig::default())
            .unwrap()
            .coef;
        assert!(kkt_violation(&pb, &beta, &Penalty::lasso(2.0)) < 1e-8);
        let lmax = lambda_max(&pb);
        let zero = SparseVector::zeros(1);
        assert!(
            (kkt_violation(&pb, &zero, &Penalty::lasso(lmax / 2.0)) - lmax / 2.0).abs() < 1e-12
        );
        let ols = SparseVector::from_dense(&[2.0]);
        assert_eq!(kkt_violation(&pb, &ols, &Penalty::lasso(0.0)), 0.0);
    }

    #[test]
    fn uncentered_problem_rejected() {
        let r = LineProblem::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
            DVector::from_vec(vec![1.0, -1.0]),
        );
        assert!(matches!(r, Err(SolverError::InvalidProblem(_))));
    }

    #[test]
    fn ols_rank_deficiency() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, -2.0, 0.0, 0.0]);
        let pb = LineProblem::new(x, DVector::from_vec(vec![1.0, -1.0, 0.0])).unwrap();
        assert_eq!(
            fit_line(&pb, &Penalty::none(), &SolverConfig::default()),
            Err(SolverError::RankDeficient)
        );
    }

    #[test]
    fn degenerate_column_gets_zero() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        let pb = LineProblem::new(x, DVector::from_vec(vec![1.0, -1.0, 0.0])).unwrap();
        let fit = fit_line(&pb, &Penalty::lasso(0.1), &SolverConfig::default()).unwrap();
        assert_eq!(fit.coef.get(1), 0.0);
        let ols = fit_line(&pb, &Penalty::none(), &SolverConfig::default()).unwrap();
        assert!((ols.coef.get(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn elastic_net_endpoints_match_pure_families() {
        let pb = random_problem(60, 8, 3);
        let cfg = SolverConfig::default();
        let lam = 0.3 * lambda_max(&pb);
        let a = fit_line(&pb, &Penalty::elastic_net(lam, 1.0), &cfg).unwrap();
        let b = fit_line(&pb, &Penalty::lasso(lam), &cfg).unwrap();
        assert_eq!(a.coef, b.coef);
        let a = fit_line(&pb, &Penalty::elastic_net(lam, 0.0), &cfg).unwrap();
        let b = fit_line(&pb, &Penalty::ridge(lam), &cfg).unwrap();
        assert_eq!(a.coef, b.coef);
    }

    #[test]
    fn elastic_net_interior_satisfies_kkt() {
        let pb = random_problem(80, 10, 4);
        let cfg = SolverConfig::default();
        let pen = Penalty::elastic_net(0.2 * lambda_max(&pb), 0.5);
        let fit = fit_line(&pb, &pen, &cfg).unwrap();
        assert!(fit.converged);
        assert!(kkt_violation(&pb, &fit.coef, &pen) <= 1e-8 * (1.0 + pen.lambda));
    }

    #[test]
    fn ridge_closed_form_matches_cd_limit() {
        // Ridge solution satisfies (XᵀX + 2λI)β = Xᵀy.
        let pb = random_problem(40, 5, 9);
        let lam = 3.0;
        let fit = fit_line(&pb, &Penalty::ridge(lam), &SolverConfig::default()).unwrap();
        let b = DVector::from_vec(fit.coef.to_dense());
        let lhs = pb.design().tr_mul(pb.design()) * &b + &b * (2.0 * lam);
        let rhs = pb.design().tr_mul(pb.response());
        assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let pb = random_problem(50, 12, 11);
        let cfg = SolverConfig {
            record_objective: true,
            ..SolverConfig::default()
        };
        let fit = fit_line(&pb, &Penalty::lasso(0.05 * lambda_max(&pb)), &cfg).unwrap();
        assert!(fit.objective_trace.len() > 1);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let pb = random_problem(70, 9, 5);
        let cfg = SolverConfig::default();
        let gram = pb.gram();
        let lmax = lambda_max(&pb);
        let cold = fit_gram_line(&gram, 0, &Penalty::lasso(0.05 * lmax), &cfg, None).unwrap();
        let start = fit_gram_line(&gram, 0, &Penalty::lasso(0.3 * lmax), &cfg, None).unwrap();
        let warm = fit_gram_line(
            &gram,
            0,
            &Penalty::lasso(0.05 * lmax),
            &cfg,
            Some(&start.coef.to_dense()),
        )
        .unwrap();
        for (a, b) in cold.coef.to_dense().iter().zip(warm.coef.to_dense()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn group_lasso_single_column_closed_form() {
        // Xc has one row with unit norm, so the unpenalized block solution
        // is z = Yc·Xcᵀ.
        let xc = DMatrix::from_row_slice(1, 4, &[0.5, -0.5, 0.5, -0.5]);
        let z = DVector::from_vec(vec![3.0, -4.0]);
        let yc = &z * xc.row(0);
        let cfg = SolverConfig::default();
        for lam in [0.0, 1.0, 2.5, 5.0, 7.0] {
            let fit = fit_group_lasso(&yc, &xc, lam, &cfg).unwrap();
            let shrink = (1.0 - lam / z.norm()).max(0.0);
            for k in 0..2 {
                assert!(
                    (fit.coef.get(k, 0) - shrink * z[k]).abs() < 1e-10,
                    "λ={lam}"
                );
            }
        }
    }

    #[test]
    fn group_lasso_zero_above_entry_point() {
        let pb = random_problem(40, 4, 2);
        let gram = pb.gram();
        let top = group_lambda_max(&gram);
        let fit = fit_group_lasso_gram(&gram, top, &SolverConfig::default(), None).unwrap();
        assert_eq!(fit.coef.nnz(), 0);
    }

    #[test]
    fn fold_assignment_partitions_days() {
        let folds = fold_assignment(11, 3, 7).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(folds, fold_assignment(11, 3, 7).unwrap());
        assert!(fold_assignment(2, 3, 0).is_err());
    }

    #[test]
    fn grid_is_log_spaced() {
        let cfg = SolverConfig {
            lambda_grid_size: 4,
            lambda_min_ratio: 1e-3,
            ..SolverConfig::default()
        };
        let g = lambda_grid(10.0, &cfg);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 10.0).abs() < 1e-12);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!((g[3] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn argmin_ties_go_to_first() {
        assert_eq!(argmin_prefer_first(&[1.0, 0.5, 0.5, 2.0]), 1);
        assert_eq!(argmin_prefer_first(&[0.0, 0.0]), 0);
    }
}

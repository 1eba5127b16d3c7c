//! Model builders shared by `fit` and `reproduce-sim`.

use regvar_core::regime::{fit_switch, RegimeOptions};
use regvar_core::solver::{Penalty, PenaltyFamily, SolverConfig};
use regvar_core::varmodel::{
    baseline_ar, baseline_ha, baseline_po, fit, FitOptions, PenaltyChoice, PiecewisePredictor,
    SlotWindow,
};
use regvar_core::DayTensor;

use crate::CliError;

pub fn ols(train: &DayTensor, config: &SolverConfig) -> Result<PiecewisePredictor, CliError> {
    let window = SlotWindow::full(train.n_slots());
    let (model, _) = fit(
        train,
        window,
        &FitOptions::fixed(Penalty::none(), config.clone()),
    )?;
    Ok(PiecewisePredictor::single(model))
}

/// Lasso with the given per-line penalties, or per-line CV when `None`.
pub fn lasso(
    train: &DayTensor,
    penalties: Option<&[Penalty]>,
    config: &SolverConfig,
) -> Result<PiecewisePredictor, CliError> {
    let window = SlotWindow::full(train.n_slots());
    let options = match penalties {
        Some(p) => FitOptions::new(PenaltyChoice::PerLine(p.to_vec()), config.clone()),
        None => FitOptions::cv_lasso(config.clone()),
    };
    let (model, _) = fit(train, window, &options)?;
    Ok(PiecewisePredictor::single(model))
}

/// Column-grouped lasso with one CV-selected λ.
pub fn group_lasso(
    train: &DayTensor,
    config: &SolverConfig,
) -> Result<PiecewisePredictor, CliError> {
    let window = SlotWindow::full(train.n_slots());
    let choice = PenaltyChoice::Cv {
        family: PenaltyFamily::GroupLasso,
        alpha: 1.0,
        per_line: false,
    };
    let (model, _) = fit(train, window, &FitOptions::new(choice, config.clone()))?;
    Ok(PiecewisePredictor::single(model))
}

/// One lasso per predicted slot, each fitted on the pairs `(W_{t−1}, W_t)`.
pub fn ts_lasso(train: &DayTensor, config: &SolverConfig) -> Result<PiecewisePredictor, CliError> {
    let horizon = train.n_slots().saturating_sub(1);
    let options = FitOptions::cv_lasso(config.clone());
    let mut pieces = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let (mut model, _) = fit(train, SlotWindow::new(t, t)?, &options)?;
        model.method = "ts_lasso".into();
        pieces.push(model);
    }
    Ok(PiecewisePredictor::new("ts_lasso", pieces, None)?)
}

pub fn rs_lasso(
    train: &DayTensor,
    t_switch: usize,
    options: &RegimeOptions,
    penalties: Option<&[Penalty]>,
) -> Result<PiecewisePredictor, CliError> {
    Ok(fit_switch(train, t_switch, options, penalties)?.to_piecewise())
}

pub fn ha(train: &DayTensor) -> Result<PiecewisePredictor, CliError> {
    Ok(PiecewisePredictor::single(baseline_ha(train)?))
}

pub fn ar(train: &DayTensor, order: usize) -> Result<PiecewisePredictor, CliError> {
    Ok(baseline_ar(train, order)?.0)
}

pub fn po(train: &DayTensor) -> PiecewisePredictor {
    PiecewisePredictor::single(baseline_po(train.sections().to_vec(), train.n_slots()))
}

//! Forecast metrics, coefficient-recovery scores, the influence criterion,
//! variable-section clustering and dependency-graph exports.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DayTensor;
use crate::linalg::SparseMatrix;
use crate::varmodel::{DayPredictor, LinearPredictor, VarError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite prediction for day {day}, section {section}, slot {slot}")]
    NonFinite {
        day: usize,
        section: usize,
        slot: usize,
    },
    #[error("descriptive features are identical for all sections")]
    DegenerateFeatures,
    #[error("nothing to evaluate: {0}")]
    Empty(String),
    #[error(transparent)]
    Model(#[from] VarError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// MSE and MAE over a set of cells; `None` when the set is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub cells: usize,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    sq: f64,
    abs: f64,
    n: usize,
}

impl Acc {
    fn push(&mut self, e: f64) {
        self.sq += e * e;
        self.abs += e.abs();
        self.n += 1;
    }

    fn pair(&self) -> ErrorPair {
        let n = self.n as f64;
        ErrorPair {
            mse: (self.n > 0).then(|| self.sq / n),
            mae: (self.n > 0).then(|| self.abs / n),
            cells: self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub sections: Vec<String>,
    pub mse: f64,
    pub mae: f64,
    pub per_day: Vec<ErrorPair>,
    pub per_slot: Vec<ErrorPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub mae: f64,
    pub cells: usize,
    /// One entry per day of the truth tensor.
    pub per_day: Vec<ErrorPair>,
    /// One entry per predicted slot `1..=T`.
    pub per_slot: Vec<ErrorPair>,
    pub subset: Option<SubsetReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `(MSE, MAE)` of two equal-length slices.
pub fn mse_mae(predictions: &[f64], truth: &[f64]) -> (f64, f64) {
    assert_eq!(predictions.len(), truth.len(), "length mismatch");
    let mut acc = Acc::default();
    for (p, t) in predictions.iter().zip(truth) {
        acc.push(p - t);
    }
    let pair = acc.pair();
    (pair.mse.unwrap_or(0.0), pair.mae.unwrap_or(0.0))
}

fn accumulate(
    predictions: &[DMatrix<f64>],
    truth: &DayTensor,
    sections: &[usize],
) -> Result<(Acc, Vec<Acc>, Vec<Acc>), AnalysisError> {
    let horizon = truth.n_slots() - 1;
    let mut total = Acc::default();
    let mut per_day = vec![Acc::default(); truth.n_days()];
    let mut per_slot = vec![Acc::default(); horizon];
    for (d, pred) in predictions.iter().enumerate() {
        for &k in sections {
            for t in 1..=horizon {
                let Some(obs) = truth.value(d, k, t) else {
                    continue;
                };
                let y = pred[(k, t - 1)];
                if !y.is_finite() {
                    return Err(AnalysisError::NonFinite {
                        day: d,
                        section: k,
                        slot: t,
                    });
                }
                let e = y - obs;
                total.push(e);
                per_day[d].push(e);
                per_slot[t - 1].push(e);
            }
        }
    }
    Ok((total, per_day, per_slot))
}

/// Scores `p × T` prediction matrices (column `c` is slot `c + 1`) against
/// the present cells of `truth`, optionally also on a section subset.
pub fn evaluate(
    predictions: &[DMatrix<f64>],
    truth: &DayTensor,
    subset: Option<&[usize]>,
) -> Result<EvalReport, AnalysisError> {
    let (p, slots) = (truth.n_sections(), truth.n_slots());
    if predictions.len() != truth.n_days() {
        return Err(AnalysisError::ShapeMismatch(format!(
            "{} prediction days for {} truth days",
            predictions.len(),
            truth.n_days()
        )));
    }
    if slots < 2 {
        return Err(AnalysisError::Empty("truth has no predicted slots".into()));
    }
    if let Some(bad) = predictions
        .iter()
        .find(|m| m.nrows() != p || m.ncols() != slots - 1)
    {
        return Err(AnalysisError::ShapeMismatch(format!(
            "prediction is {}x{}, expected {p}x{}",
            bad.nrows(),
            bad.ncols(),
            slots - 1
        )));
    }
    let all: Vec<usize> = (0..p).collect();
    let (total, per_day, per_slot) = accumulate(predictions, truth, &all)?;
    if total.n == 0 {
        return Err(AnalysisError::Empty("no present cells in truth".into()));
    }
    let overall = total.pair();
    let subset = match subset {
        None => None,
        Some(idx) => {
            if let Some(&k) = idx.iter().find(|&&k| k >= p) {
                return Err(AnalysisError::ShapeMismatch(format!(
                    "subset section {k} out of range"
                )));
            }
            let (t, d, s) = accumulate(predictions, truth, idx)?;
            let pair = t.pair();
            Some(SubsetReport {
                sections: idx.iter().map(|&k| truth.sections()[k].clone()).collect(),
                mse: pair.mse.unwrap_or(f64::NAN),
                mae: pair.mae.unwrap_or(f64::NAN),
                per_day: d.iter().map(Acc::pair).collect(),
                per_slot: s.iter().map(Acc::pair).collect(),
            })
        }
    };
    Ok(EvalReport {
        mse: overall.mse.unwrap_or(0.0),
        mae: overall.mae.unwrap_or(0.0),
        cells: total.n,
        per_day: per_day.iter().map(Acc::pair).collect(),
        per_slot: per_slot.iter().map(Acc::pair).collect(),
        subset,
    })
}

/// Predicts every day of `test` with `model` and scores it.
pub fn evaluate_model(
    model: &dyn DayPredictor,
    test: &DayTensor,
    subset: Option<&[usize]>,
) -> Result<EvalReport, AnalysisError> {
    let predictions = (0..test.n_days())
        .map(|d| model.predict_day(&test.day_matrix(d)))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate(&predictions, test, subset)
}

fn same_shape(a: &SparseMatrix, b: &SparseMatrix) -> Result<(), AnalysisError> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(AnalysisError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Percentage of entries on which the two supports agree.
pub fn support_recovery(
    estimated: &SparseMatrix,
    truth: &SparseMatrix,
    threshold: f64,
) -> Result<f64, AnalysisError> {
    same_shape(estimated, truth)?;
    let total = estimated.rows() * estimated.cols();
    if total == 0 {
        return Ok(100.0);
    }
    let support = |m: &SparseMatrix| -> Vec<(usize, usize)> {
        m.entries()
            .iter()
            .filter(|e| e.2.abs() > threshold)
            .map(|e| (e.0, e.1))
            .collect()
    };
    let (a, b) = (support(estimated), support(truth));
    // Both lists are sorted by (row, col); count the symmetric difference.
    let (mut i, mut j, mut differ) = (0, 0, 0usize);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                differ += 1;
                i += 1;
            }
            (Some(_), None) => {
                differ += 1;
                i += 1;
            }
            _ => {
                differ += 1;
                j += 1;
            }
        }
    }
    Ok(100.0 * (total - differ) as f64 / total as f64)
}

pub fn frobenius_distance(
    estimated: &SparseMatrix,
    truth: &SparseMatrix,
) -> Result<f64, AnalysisError> {
    same_shape(estimated, truth)?;
    let diff = estimated.to_dense() - truth.to_dense();
    Ok(diff.norm())
}

/// `C_ℓ`: the sum of the strictly positive coefficients any line puts on
/// section `ℓ`, over all lags.
pub fn influence(model: &LinearPredictor) -> Vec<f64> {
    influence_of(&model.a, model.p())
}

pub fn influence_of(a: &SparseMatrix, p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p];
    for &(_, col, v) in a.entries() {
        if v > 0.0 {
            c[col % p] += v;
        }
    }
    c
}

/// Sections ranked by influence, descending; ties by name.
pub fn rank_influence(sections: &[String], c: &[f64]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = sections.iter().cloned().zip(c.iter().copied()).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn write_influence_csv<W: Write>(
    ranked: &[(String, f64)],
    writer: W,
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["section", "influence"])?;
    for (s, v) in ranked {
        w.write_record([s.as_str(), &format!("{v:?}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Descriptive features per section: min, max, mean, std, q25, q50, q75.
pub const FEATURE_NAMES: [&str; 7] = ["min", "max", "mean", "std", "q25", "q50", "q75"];

const RESTARTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSections {
    /// Indices into the tensor's section list, increasing.
    pub indices: Vec<usize>,
    pub sections: Vec<String>,
    pub fraction: f64,
    /// Raw (unstandardized) features, one row per section.
    pub features: Vec<[f64; 7]>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn section_features(tensor: &DayTensor, section: usize) -> Option<[f64; 7]> {
    let mut v: Vec<f64> = (0..tensor.n_days())
        .flat_map(|d| (0..tensor.n_slots()).filter_map(move |t| tensor.value(d, section, t)))
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some([
        v[0],
        v[v.len() - 1],
        mean,
        var.sqrt(),
        quantile(&v, 0.25),
        quantile(&v, 0.5),
        quantile(&v, 0.75),
    ])
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's 2-means from the given initial centers; returns labels and inertia.
fn two_means(points: &[Vec<f64>], mut centers: [Vec<f64>; 2]) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, x) in points.iter().enumerate() {
            let l = usize::from(sq_dist(x, &centers[1]) < sq_dist(x, &centers[0]));
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| x)
                .collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..dim {
                center[d] = members.iter().map(|x| x[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(x, &l)| sq_dist(x, &centers[l]))
        .sum();
    (labels, inertia)
}

/// Clusters sections into two groups on standardized descriptive
/// statistics and returns the group with the larger mean std feature.
pub fn variable_sections(tensor: &DayTensor, seed: u64) -> Result<VariableSections, AnalysisError> {
    let p = tensor.n_sections();
    let features: Vec<[f64; 7]> = (0..p)
        .map(|k| {
            section_features(tensor, k).ok_or_else(|| {
                AnalysisError::Empty(format!(
                    "section `{}` has no observations",
                    tensor.sections()[k]
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    if p < 2 {
        return Err(AnalysisError::DegenerateFeatures);
    }
    // Work in name order so the result does not depend on section order.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| tensor.sections()[a].cmp(&tensor.sections()[b]));

    let mut columns = Vec::new();
    for f in 0..7 {
        let col: Vec<f64> = order.iter().map(|&k| features[k][f]).collect();
        let mean = col.iter().sum::<f64>() / p as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / p as f64).sqrt();
        let scale = mean.abs().max(1.0);
        if sd > 1e-12 * scale {
            columns.push(col.iter().map(|x| (x - mean) / sd).collect::<Vec<f64>>());
        }
    }
    if columns.is_empty() {
        return Err(AnalysisError::DegenerateFeatures);
    }
    let points: Vec<Vec<f64>> = (0..p)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let pick = sample(&mut rng, p, 2);
        let centers = [points[pick.index(0)].clone(), points[pick.index(1)].clone()];
        let (labels, inertia) = two_means(&points, centers);
        if best
            .as_ref()
            .is_none_or(|b| inertia < b.1 - 1e-12 * b.1.abs())
        {
            best = Some((labels, inertia));
        }
    }
    let (labels, _) = best.expect("at least one restart");
    let mean_std = |c: usize| {
        let v: Vec<f64> = (0..p)
            .filter(|&i| labels[i] == c)
            .map(|i| features[order[i]][3])
            .collect();
        if v.is_empty() {
            f64::NEG_INFINITY
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let chosen = usize::from(mean_std(1) > mean_std(0));
    let mut indices: Vec<usize> = (0..p)
        .filter(|&i| labels[i] == chosen)
        .map(|i| order[i])
        .collect();
    indices.sort_unstable();
    Ok(VariableSections {
        sections: indices
            .iter()
            .map(|&k| tensor.sections()[k].clone())
            .collect(),
        fraction: indices.len() as f64 / p as f64,
        indices,
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

/// Arcs `k → ℓ` for first-lag coefficients with `|Â_{kℓ}| ≥ min_abs_weight`,
/// sorted by `|weight|` descending, then by `(from, to)`.
pub fn export_edges(model: &LinearPredictor, min_abs_weight: f64) -> Vec<Edge> {
    edges_of(&model.first_lag(), &model.sections, min_abs_weight)
}

pub fn edges_of(a: &SparseMatrix, sections: &[String], min_abs_weight: f64) -> Vec<Edge> {
    let mut out: Vec<Edge> = a
        .entries()
        .iter()
        .filter(|e| e.2 != 0.0 && e.2.abs() >= min_abs_weight)
        .map(|&(r, c, w)| Edge {
            from: sections[r].clone(),
            to: sections[c].clone(),
            weight: w,
        })
        .collect();
    out.sort_by(|a, b| {
        b.weight
            .abs()
            .total_cmp(&a.weight.abs())
            .then_with(|| a.from.cmp(&b.from))
            .then_with(|| a.to.cmp(&b.to))
    });
    out
}

pub fn write_edges_csv<W: Write>(edges: &[Edge], writer: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["from", "to", "weight"])?;
    for e in edges {
        w.write_record([e.from.as_str(), e.to.as_str(), &format!("{:?}", e.weight)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn edges_to_json(edges: &[Edge]) -> String {
    serde_json::to_string_pretty(edges).expect("edges serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varmodel::{Lambda, SlotWindow};
    use chrono::NaiveDate;

    fn tensor(
        p: usize,
        slots: usize,
        days: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> DayTensor {
        named_tensor((0..p).map(|k| format!("s{k}")).collect(), slots, days, f)
    }

    fn named_tensor(
        sections: Vec<String>,
        slots: usize,
        days: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> DayTensor {
        let p = sections.len();
        let dates = (0..days)
            .map(|d| NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(d as u64))
            .collect();
        let mut values = Vec::new();
        for d in 0..days {
            for k in 0..p {
                for t in 0..slots {
                    values.push(f(d, k, t));
                }
            }
        }
        let n = values.len();
        DayTensor::new(dates, sections, slots, values, vec![true; n]).unwrap()
    }

    fn model(a: DMatrix<f64>) -> LinearPredictor {
        let p = a.nrows();
        LinearPredictor::new(
            (0..p).map(|k| format!("s{k}")).collect(),
            SlotWindow::full(3),
            1,
            DMatrix::zeros(p, 2),
            SparseMatrix::from_dense(&a),
            "test",
            Lambda::Scalar(0.0),
        )
        .unwrap()
    }

    #[test]
    fn hand_mse_mae() {
        assert_eq!(mse_mae(&[1.0, 2.0], &[1.0, 4.0]), (2.0, 1.0));
        assert_eq!(mse_mae(&[3.0, 5.0], &[3.0, 5.0]), (0.0, 0.0));
    }

    #[test]
    fn evaluate_breakdowns_average_back() {
        let truth = tensor(3, 5, 4, |d, k, t| (d * 7 + k * 3 + t) as f64);
        let preds: Vec<DMatrix<f64>> = (0..4)
            .map(|d| {
                DMatrix::from_fn(3, 4, |k, c| {
                    truth.raw(d, k, c + 1) + ((d + k + c) % 3) as f64 - 1.0
                })
            })
            .collect();
        let r = evaluate(&preds, &truth, Some(&[0, 2])).unwrap();
        let slot_mean = r.per_slot.iter().map(|e| e.mse.unwrap()).sum::<f64>() / 4.0;
        let day_mean = r.per_day.iter().map(|e| e.mae.unwrap()).sum::<f64>() / 4.0;
        assert!((slot_mean - r.mse).abs() < 1e-9);
        assert!((day_mean - r.mae).abs() < 1e-9);
        assert_eq!(r.cells, 48);
        assert_eq!(r.subset.as_ref().unwrap().sections, vec!["s0", "s2"]);
        let exact = evaluate(
            &(0..4)
                .map(|d| DMatrix::from_fn(3, 4, |k, c| truth.raw(d, k, c + 1)))
                .collect::<Vec<_>>(),
            &truth,
            None,
        )
        .unwrap();
        assert_eq!((exact.mse, exact.mae), (0.0, 0.0));
    }

    #[test]
    fn evaluate_skips_missing_cells() {
        let dates = vec![NaiveDate::from_ymd_opt(2021, 1, 1).unwrap()];
        let t = DayTensor::new(
            dates,
            vec!["a".into()],
            3,
            vec![0.0, 1.0, 4.0],
            vec![true, true, false],
        )
        .unwrap();
        let r = evaluate(&[DMatrix::from_row_slice(1, 2, &[2.0, 100.0])], &t, None).unwrap();
        assert_eq!((r.mse, r.mae, r.cells), (1.0, 1.0, 1));
        assert_eq!(r.per_slot[1].mse, None);
    }

    #[test]
    fn support_examples() {
        let a = SparseMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 3.0]));
        let b = SparseMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 2.0, 3.0]));
        assert_eq!(support_recovery(&a, &a, 1e-8).unwrap(), 100.0);
        assert_eq!(support_recovery(&a, &b, 1e-8).unwrap(), 75.0);
        assert_eq!(support_recovery(&b, &a, 1e-8).unwrap(), 75.0);
        let tiny = SparseMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 2.0, 3.0]));
        assert_eq!(support_recovery(&tiny, &a, 1e-8).unwrap(), 100.0);
    }

    #[test]
    fn frobenius_examples() {
        let i = SparseMatrix::identity(2);
        let z = SparseMatrix::zeros(2, 2);
        assert_eq!(frobenius_distance(&i, &i).unwrap(), 0.0);
        assert!((frobenius_distance(&i, &z).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            frobenius_distance(&z, &i).unwrap(),
            frobenius_distance(&i, &z).unwrap()
        );
        assert!(frobenius_distance(&i, &SparseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn influence_examples() {
        let m = model(DMatrix::from_row_slice(2, 2, &[0.5, -0.2, 0.3, 0.1]));
        let c = influence(&m);
        assert!((c[0] - 0.8).abs() < 1e-15 && (c[1] - 0.1).abs() < 1e-15);
        assert_eq!(
            influence(&model(DMatrix::from_element(2, 2, -1.0))),
            vec![0.0, 0.0]
        );
        assert_eq!(influence(&model(DMatrix::identity(3, 3))), vec![1.0; 3]);
        let ranked = rank_influence(&m.sections, &c);
        assert_eq!(ranked[0].0, "s0");
    }

    #[test]
    fn edges_examples() {
        let m = model(DMatrix::identity(3, 3));
        let e = export_edges(&m, 0.5);
        assert_eq!(e.len(), 3);
        assert!(e.iter().all(|e| e.from == e.to && e.weight == 1.0));
        assert!(export_edges(&m, 1.5).is_empty());
        let m = model(DMatrix::from_row_slice(2, 2, &[0.5, -0.7, 0.0, 0.5]));
        let e = export_edges(&m, 0.0);
        assert_eq!(e.len(), 3);
        assert_eq!(
            (e[0].from.as_str(), e[0].to.as_str(), e[0].weight),
            ("s0", "s1", -0.7)
        );
        assert_eq!((e[1].from.as_str(), e[1].to.as_str()), ("s0", "s0"));
        let mut buf = Vec::new();
        write_edges_csv(&e, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("from,to,weight\ns0,s1,-0.7\n"));
    }

    fn two_cluster(order: &[usize]) -> DayTensor {
        // Sections 2, 5 and 7 swing ten times wider than the others.
        let wide = [2, 5, 7];
        let names = order.iter().map(|k| format!("sec{k}")).collect();
        named_tensor(names, 12, 20, |d, i, s| {
            let k = order[i];
            let amp = if wide.contains(&k) { 10.0 } else { 1.0 };
            let wiggle = ((d * 31 + s * 17 + k * 7) % 13) as f64 / 6.0 - 1.0;
            60.0 + k as f64 * 0.1 + amp * wiggle
        })
    }

    #[test]
    fn variable_sections_finds_wide_cluster() {
        let order: Vec<usize> = (0..10).collect();
        let r = variable_sections(&two_cluster(&order), 0).unwrap();
        assert_eq!(r.sections, vec!["sec2", "sec5", "sec7"]);
        assert!((r.fraction - 0.3).abs() < 1e-12);
        let shuffled = [9, 2, 4, 0, 7, 1, 8, 5, 3, 6];
        let r2 = variable_sections(&two_cluster(&shuffled), 0).unwrap();
        let mut names = r2.sections.clone();
        names.sort();
        assert_eq!(names, r.sections);
        assert_eq!(variable_sections(&two_cluster(&order), 0).unwrap(), r);
    }

    #[test]
    fn identical_sections_are_degenerate() {
        let t = tensor(4, 5, 3, |d, _, s| (d + s) as f64);
        assert!(matches!(
            variable_sections(&t, 0),
            Err(AnalysisError::DegenerateFeatures)
        ));
    }
}

//! Seeded synthetic benchmark: sparse Erdős–Rényi coefficient matrices, a
//! quadratic intercept profile, Gaussian-mixture initial speeds and a
//! mid-day regime switch.
//!
//! Random streams are counter-based: every draw comes from a
//! `ChaCha8Rng` seeded with `spec.seed`, on stream 0 for `A`, stream 1 for
//! `A′` and stream `2 + i` for day `i`. Days can therefore be generated in
//! any order or in parallel with identical output.

use chrono::{Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DayTensor;
use crate::linalg::SparseMatrix;
use crate::varmodel::MomentModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("row {row} stayed empty after {attempts} draws")]
    DegenerateRow { row: usize, attempts: usize },
    #[error("invalid truth: {0}")]
    InvalidTruth(String),
}

/// Initial-speed mixture: `(weight, mean, standard deviation)`.
pub const MIXTURE: [(f64, f64, f64); 3] = [
    (0.25, 45.0, 0.1 * 45.0 / 2.0),
    (0.5, 72.0, 0.1 * 72.0 / 2.0),
    (0.25, 117.0, 0.1 * 117.0 / 2.0),
];

const MAX_ROW_ATTEMPTS: usize = 100;

pub fn mixture_mean() -> f64 {
    MIXTURE.iter().map(|(w, m, _)| w * m).sum()
}

pub fn mixture_variance() -> f64 {
    let mean = mixture_mean();
    MIXTURE
        .iter()
        .map(|(w, m, s)| w * (s * s + m * m))
        .sum::<f64>()
        - mean * mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub p: usize,
    pub n: usize,
    /// `T + 1` slots per day.
    pub slots: usize,
    pub switch_t: usize,
    pub avg_degree: f64,
    pub seed: u64,
    /// Slot `j` sits at clock hour `hour_start + hour_step · j`.
    pub hour_start: f64,
    pub hour_step: f64,
    /// Standard-normal innovations; off only for tests.
    pub noise: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            p: 100,
            n: 150,
            slots: 20,
            switch_t: 11,
            avg_degree: 8.0,
            seed: 0,
            hour_start: 15.0,
            hour_step: 0.25,
            noise: true,
        }
    }
}

impl GeneratorSpec {
    /// Literal reading of the intercept formula with integer slot indices.
    pub fn with_raw_hours(mut self) -> Self {
        self.hour_start = 0.0;
        self.hour_step = 1.0;
        self
    }

    /// Number of predicted slots `T`.
    pub fn horizon(&self) -> usize {
        self.slots.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let t = self.horizon();
        let fail = |m: String| Err(SimError::InvalidSpec(m));
        if self.p < 2 {
            return fail(format!("p = {} (need >= 2)", self.p));
        }
        if self.n < 1 {
            return fail("n must be >= 1".into());
        }
        if self.slots < 3 {
            return fail(format!("slots = {} (need >= 3)", self.slots));
        }
        if !(1..=t).contains(&self.switch_t) {
            return fail(format!("switch_t = {} outside 1..={t}", self.switch_t));
        }
        if !(self.avg_degree > 0.0 && self.avg_degree < self.p as f64) {
            return fail(format!("avg_degree = {} outside (0, p)", self.avg_degree));
        }
        if !self.hour_start.is_finite() || !self.hour_step.is_finite() {
            return fail("slot hours must be finite".into());
        }
        Ok(())
    }

    pub fn slot_hours(&self) -> Vec<f64> {
        (0..self.slots)
            .map(|j| self.hour_start + self.hour_step * j as f64)
            .collect()
    }
}

/// Intercept profile at clock hour `h`.
pub fn intercept_at(h: f64) -> f64 {
    -(6.25 - (h - 17.5) * (h - 17.5))
}

/// `p × T` intercepts; column `t` drives the transition into slot `t + 1`.
pub fn gen_intercepts(spec: &GeneratorSpec) -> DMatrix<f64> {
    let hours = spec.slot_hours();
    DMatrix::from_fn(spec.p, spec.horizon(), |_, t| intercept_at(hours[t]))
}

/// Erdős–Rényi support on off-diagonal entries with edge probability
/// `avg_degree / (p − 1)`, Uniform[−1, 1] values, unit-norm rows.
pub fn gen_coefficient_matrix<R: Rng>(
    p: usize,
    avg_degree: f64,
    rng: &mut R,
) -> Result<SparseMatrix, SimError> {
    let prob = (avg_degree / (p - 1) as f64).min(1.0);
    let mut triplets = Vec::new();
    for k in 0..p {
        let mut row = Vec::new();
        let mut attempts = 0;
        while row.is_empty() {
            if attempts == MAX_ROW_ATTEMPTS {
                return Err(SimError::DegenerateRow { row: k, attempts });
            }
            attempts += 1;
            for l in 0..p {
                if l == k {
                    continue;
                }
                if rng.gen::<f64>() < prob {
                    let v: f64 = rng.gen_range(-1.0..=1.0);
                    if v != 0.0 {
                        row.push((k, l, v));
                    }
                }
            }
        }
        triplets.extend(row);
    }
    let mut m = SparseMatrix::from_triplets(p, p, triplets).map_err(SimError::InvalidTruth)?;
    m.normalize_rows();
    Ok(m)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ground truth behind a generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTruth {
    pub b: DMatrix<f64>,
    pub a: SparseMatrix,
    pub a_prime: SparseMatrix,
    pub switch_t: usize,
    pub seed: u64,
    pub slot_hours: Vec<f64>,
    pub avg_degree: f64,
    pub noise: bool,
}

impl GeneratorTruth {
    pub fn from_spec(spec: &GeneratorSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let a = gen_coefficient_matrix(spec.p, spec.avg_degree, &mut stream_rng(spec.seed, 0))?;
        let a_prime =
            gen_coefficient_matrix(spec.p, spec.avg_degree, &mut stream_rng(spec.seed, 1))?;
        Ok(Self {
            b: gen_intercepts(spec),
            a,
            a_prime,
            switch_t: spec.switch_t,
            seed: spec.seed,
            slot_hours: spec.slot_hours(),
            avg_degree: spec.avg_degree,
            noise: spec.noise,
        })
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    /// `T`.
    pub fn horizon(&self) -> usize {
        self.b.ncols()
    }

    /// Matrix used for the transition into slot `t` (1-based).
    pub fn transition(&self, t: usize) -> &SparseMatrix {
        if t <= self.switch_t {
            &self.a
        } else {
            &self.a_prime
        }
    }

    /// `E[W_t]` for `t = 0..=T`, as a `p × (T + 1)` matrix.
    pub fn expected_means(&self) -> DMatrix<f64> {
        let (p, t) = (self.p(), self.horizon());
        DMatrix::from_fn(p, t + 1, |k, j| {
            if j == 0 {
                mixture_mean()
            } else {
                self.b[(k, j - 1)]
            }
        })
    }

    /// Exact first and second moments of `(X, Y) = (W_{0..T−1}, W_{1..T})`.
    pub fn moments(&self) -> MomentModel {
        let (p, t) = (self.p(), self.horizon());
        let means = self.expected_means();
        let noise_var = if self.noise { 1.0 } else { 0.0 };
        let mut cov = DMatrix::<f64>::identity(p, p) * mixture_variance();
        let mut sigma = DMatrix::zeros(p, p);
        let mut c_yx = DMatrix::zeros(p, p);
        for slot in 1..=t {
            let m = self.transition(slot).to_dense();
            let cross = &m * &cov;
            sigma += &cov;
            c_yx += &cross;
            cov = &cross * m.transpose() + DMatrix::<f64>::identity(p, p) * noise_var;
            cov = (&cov + cov.transpose()) * 0.5;
        }
        MomentModel {
            mean_x: means.columns(0, t).into_owned(),
            mean_y: means.columns(1, t).into_owned(),
            sigma,
            c_yx,
        }
    }

    /// Copy with both regimes replaced (used to build test scenarios).
    pub fn with_matrices(mut self, a: SparseMatrix, a_prime: SparseMatrix) -> Self {
        self.a = a;
        self.a_prime = a_prime;
        self
    }
}

fn sample_mixture<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut comp = MIXTURE[MIXTURE.len() - 1];
    for c in MIXTURE {
        acc += c.0;
        if u < acc {
            comp = c;
            break;
        }
    }
    Normal::new(comp.1, comp.2)
        .expect("valid mixture")
        .sample(rng)
}

/// One day `W_0..W_T` as a `p × (T + 1)` matrix.
pub fn gen_day<R: Rng>(truth: &GeneratorTruth, rng: &mut R) -> DMatrix<f64> {
    let (p, t) = (truth.p(), truth.horizon());
    let means = truth.expected_means();
    let mut day = DMatrix::zeros(p, t + 1);
    for k in 0..p {
        day[(k, 0)] = sample_mixture(rng);
    }
    for slot in 1..=t {
        let centered: Vec<f64> = (0..p)
            .map(|k| day[(k, slot - 1)] - means[(k, slot - 1)])
            .collect();
        let drift = truth.transition(slot).mul_vec(&centered);
        for k in 0..p {
            let eps: f64 = if truth.noise {
                StandardNormal.sample(rng)
            } else {
                0.0
            };
            day[(k, slot)] = truth.b[(k, slot - 1)] + drift[k] + eps;
        }
    }
    day
}

/// Day `index` of the stream family rooted at `seed`.
pub fn gen_day_indexed(truth: &GeneratorTruth, seed: u64, index: u64) -> DMatrix<f64> {
    gen_day(truth, &mut stream_rng(seed, 2 + index))
}

pub fn section_names(p: usize) -> Vec<String> {
    (0..p).map(|k| format!("s{k:03}")).collect()
}

pub fn synthetic_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    (0..n)
        .map(|i| {
            start
                .checked_add_days(Days::new(i as u64))
                .expect("date in range")
        })
        .collect()
}

/// Days `first..first + count` of the data set rooted at `truth.seed`.
pub fn gen_days(truth: &GeneratorTruth, first: u64, count: usize) -> Vec<DMatrix<f64>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| gen_day_indexed(truth, truth.seed, first + i))
        .collect()
}

pub fn gen_dataset(spec: &GeneratorSpec) -> Result<(DayTensor, GeneratorTruth), SimError> {
    let truth = GeneratorTruth::from_spec(spec)?;
    let days = gen_days(&truth, 0, spec.n);
    let tensor =
        DayTensor::from_day_matrices(synthetic_dates(spec.n), section_names(spec.p), &days)
            .map_err(|e| SimError::InvalidTruth(e.to_string()))?;
    Ok((tensor, truth))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub p: usize,
    pub slots: usize,
    pub switch_t: usize,
    pub seed: u64,
    pub avg_degree: f64,
    pub noise: bool,
    pub slot_hours: Vec<f64>,
    pub sections: Vec<String>,
    /// Row-major `p × T`.
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<(usize, usize, f64)>,
    #[serde(rename = "A_prime")]
    pub a_prime: Vec<(usize, usize, f64)>,
}

impl TruthFile {
    pub fn from_truth(truth: &GeneratorTruth) -> Self {
        Self {
            p: truth.p(),
            slots: truth.horizon() + 1,
            switch_t: truth.switch_t,
            seed: truth.seed,
            avg_degree: truth.avg_degree,
            noise: truth.noise,
            slot_hours: truth.slot_hours.clone(),
            sections: section_names(truth.p()),
            b: truth
                .b
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            a: truth.a.entries().to_vec(),
            a_prime: truth.a_prime.entries().to_vec(),
        }
    }

    pub fn into_truth(self) -> Result<GeneratorTruth, SimError> {
        let t = self.slots.saturating_sub(1);
        if self.b.len() != self.p || self.b.iter().any(|r| r.len() != t) {
            return Err(SimError::InvalidTruth(format!("b must be {}x{t}", self.p)));
        }
        let b = DMatrix::from_fn(self.p, t, |k, j| self.b[k][j]);
        let a =
            SparseMatrix::from_triplets(self.p, self.p, self.a).map_err(SimError::InvalidTruth)?;
        let a_prime = SparseMatrix::from_triplets(self.p, self.p, self.a_prime)
            .map_err(SimError::InvalidTruth)?;
        Ok(GeneratorTruth {
            b,
            a,
            a_prime,
            switch_t: self.switch_t,
            seed: self.seed,
            slot_hours: self.slot_hours,
            avg_degree: self.avg_degree,
            noise: self.noise,
        })
    }
}

/// Sample moments of `n` fresh days (used to check the exact moments).
pub fn sample_moments(days: &[DMatrix<f64>]) -> MomentModel {
    let p = days[0].nrows();
    let t = days[0].ncols() - 1;
    let n = days.len() as f64;
    let mut mean = DMatrix::zeros(p, t + 1);
    for d in days {
        mean += d;
    }
    mean /= n;
    let mut sigma = DMatrix::zeros(p, p);
    let mut c_yx = DMatrix::zeros(p, p);
    for d in days {
        for s in 0..t {
            let x: DVector<f64> = d.column(s) - mean.column(s);
            let y: DVector<f64> = d.column(s + 1) - mean.column(s + 1);
            sigma += &x * x.transpose();
            c_yx += &y * x.transpose();
        }
    }
    MomentModel {
        mean_x: mean.columns(0, t).into_owned(),
        mean_y: mean.columns(1, t).into_owned(),
        sigma: sigma / n,
        c_yx: c_yx / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_examples() {
        assert_eq!(intercept_at(17.5), -6.25);
        assert_eq!(intercept_at(15.0), 0.0);
        assert_eq!(intercept_at(20.0), 0.0);
        for d in [0.25, 1.0, 2.5] {
            assert_eq!(intercept_at(17.5 - d), intercept_at(17.5 + d));
        }
    }

    #[test]
    fn raw_hours_reach_large_values() {
        let spec = GeneratorSpec::default().with_raw_hours();
        let b = gen_intercepts(&spec);
        assert!(b.amax() > 250.0);
    }

    #[test]
    fn rows_have_unit_norm() {
        let m = gen_coefficient_matrix(50, 5.0, &mut stream_rng(3, 0)).unwrap();
        let mut norms = vec![0.0; 50];
        for &(r, c, v) in m.entries() {
            assert_ne!(r, c);
            norms[r] += v * v;
        }
        for n in norms {
            assert!((n.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_degree_matches_binomial() {
        let mut total = 0usize;
        for seed in 0..50 {
            total += gen_coefficient_matrix(100, 8.0, &mut stream_rng(seed, 0))
                .unwrap()
                .nnz();
        }
        let mean = total as f64 / (50.0 * 100.0);
        assert!((7.0..=9.0).contains(&mean), "mean degree {mean}");
    }

    #[test]
    fn coefficient_matrix_is_deterministic() {
        let a = gen_coefficient_matrix(30, 4.0, &mut stream_rng(9, 0)).unwrap();
        let b = gen_coefficient_matrix(30, 4.0, &mut stream_rng(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_mean_over_many_draws() {
        let mut rng = stream_rng(1, 5);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_mixture(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 76.5).abs() < 0.3, "{mean}");
        assert_eq!(mixture_mean(), 76.5);
    }

    #[test]
    fn noiseless_zero_dynamics_follow_intercepts() {
        let spec = GeneratorSpec {
            p: 4,
            avg_degree: 2.0,
            noise: false,
            ..GeneratorSpec::default()
        };
        let truth = GeneratorTruth::from_spec(&spec)
            .unwrap()
            .with_matrices(SparseMatrix::zeros(4, 4), SparseMatrix::zeros(4, 4));
        let day = gen_day(&truth, &mut stream_rng(0, 2));
        for t in 1..spec.slots {
            for k in 0..4 {
                assert_eq!(day[(k, t)], truth.b[(k, t - 1)]);
            }
        }
    }

    #[test]
    fn dataset_is_deterministic_and_shaped() {
        let spec = GeneratorSpec {
            p: 6,
            n: 5,
            avg_degree: 2.0,
            seed: 4,
            ..GeneratorSpec::default()
        };
        let (a, ta) = gen_dataset(&spec).unwrap();
        let (b, tb) = gen_dataset(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let one = gen_dataset(&GeneratorSpec { n: 1, ..spec }).unwrap().0;
        assert_eq!(one.n_days(), 1);
        assert_eq!(one.day_matrix(0).shape(), (6, 20));
        assert_eq!(one.day_matrix(0), a.day_matrix(0));
    }

    #[test]
    fn supports_are_independent() {
        let truth = GeneratorTruth::from_spec(&GeneratorSpec::default()).unwrap();
        assert_ne!(truth.a, truth.a_prime);
    }

    #[test]
    fn spec_validation() {
        let bad = GeneratorSpec {
            switch_t: 20,
            ..GeneratorSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = GeneratorSpec {
            avg_degree: 100.0,
            ..GeneratorSpec::default()
        };
        assert!(bad.validate().is_err());
        assert!(GeneratorSpec {
            slots: 2,
            ..GeneratorSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn exact_moments_match_sample_moments() {
        let spec = GeneratorSpec {
            p: 5,
            avg_degree: 2.0,
            seed: 2,
            slots: 6,
            switch_t: 3,
            ..GeneratorSpec::default()
        };
        let truth = GeneratorTruth::from_spec(&spec).unwrap();
        let exact = truth.moments();
        let sample = sample_moments(&gen_days(&truth, 0, 20_000));
        let rel = (&exact.sigma - &sample.sigma).amax() / exact.sigma.amax();
        assert!(rel < 0.05, "sigma relative error {rel}");
        let rel = (&exact.c_yx - &sample.c_yx).amax() / exact.c_yx.amax();
        assert!(rel < 0.05, "cross relative error {rel}");
        assert!((&exact.mean_y - &sample.mean_y).amax() < 0.5);
    }

    #[test]
    fn truth_file_round_trip() {
        let truth = GeneratorTruth::from_spec(&GeneratorSpec {
            p: 8,
            avg_degree: 3.0,
            ..GeneratorSpec::default()
        })
        .unwrap();
        let json = serde_json::to_string(&TruthFile::from_truth(&truth)).unwrap();
        let back: TruthFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_truth().unwrap(), truth);
    }
}

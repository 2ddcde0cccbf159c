//! Fitting orchestration: objectives, multi-start solves, outcome
//! classification and batch execution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{
    self, default_init, feasible, grad_raw, param_box, Family, ModelSpec, ParamVector, Sign,
};
use crate::optimizer::{self, minimize_box_with, SolveSettings, SolveStatus};
use crate::synth::ExperimentRecord;

/// Perturbed starts added to the deterministic initialization.
pub const EXTRA_STARTS: usize = 4;
const PERTURBATION_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("lambdas and values differ in length ({lambdas} vs {values})")]
    LengthMismatch { lambdas: usize, values: usize },
    #[error("noise scale factors must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("noise scale factor {value} at index {index} is below 1")]
    LambdaBelowOne { index: usize, value: f64 },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
}

/// Measurements `(λi, yi)` of one experiment repetition, ordered by `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSeries {
    lambdas: Vec<f64>,
    values: Vec<f64>,
}

impl ScaleSeries {
    pub fn new(lambdas: Vec<f64>, values: Vec<f64>) -> Result<Self, SeriesError> {
        if lambdas.len() != values.len() {
            return Err(SeriesError::LengthMismatch {
                lambdas: lambdas.len(),
                values: values.len(),
            });
        }
        for (i, (&l, &y)) in lambdas.iter().zip(&values).enumerate() {
            if !l.is_finite() || !y.is_finite() {
                return Err(SeriesError::NonFinite { index: i });
            }
            if l < 1.0 {
                return Err(SeriesError::LambdaBelowOne { index: i, value: l });
            }
            if i > 0 && l <= lambdas[i - 1] {
                return Err(SeriesError::NotIncreasing { index: i });
            }
        }
        Ok(Self { lambdas, values })
    }

    /// Sorts the pairs by `λ` before validating.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self, SeriesError> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lambdas, values) = pairs.into_iter().unzip();
        Self::new(lambdas, values)
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambdas.iter().copied().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    OptimizationFailed,
    NonFinitePrediction,
    Infeasible,
    InsufficientData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Closed-form QR least squares (polynomial family).
    ExactQr,
    /// Multi-start box-constrained limited-memory quasi-Newton.
    Lbfgsb,
    /// No solve was attempted.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub kind: SolverKind,
    pub settings: SolveSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: Option<ParamVector>,
    pub zne_estimate: Option<f64>,
    pub sse: Option<f64>,
    pub status: FitStatus,
    pub starts_used: usize,
    pub solver: SolverInfo,
}

impl FitResult {
    fn without_solution(spec: ModelSpec, status: FitStatus, settings: &SolveSettings) -> Self {
        Self {
            spec,
            params: None,
            zne_estimate: None,
            sse: None,
            status,
            starts_used: 0,
            solver: SolverInfo {
                kind: SolverKind::None,
                settings: *settings,
            },
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    /// The estimate of a converged fit.
    pub fn finite_estimate(&self) -> Option<f64> {
        if self.is_converged() {
            self.zne_estimate.filter(|v| v.is_finite())
        } else {
            None
        }
    }
}

fn sum_squares(spec: &ModelSpec, series: &ScaleSeries, values: &[f64], sign: f64) -> f64 {
    series
        .points()
        .map(|(l, y)| {
            let r = y - models::eval_raw(spec, values, sign, l);
            r * r
        })
        .sum()
}

/// Fits one model to one series.
///
/// Polynomials are solved exactly. The exponential families run the
/// box-constrained solver from the default start and `EXTRA_STARTS`
/// perturbed copies; the unbounded poly-exp additionally tries both signs.
/// Converged solves are preferred, then lowest SSE.
pub fn fit(series: &ScaleSeries, spec: &ModelSpec, settings: &SolveSettings, seed: u64) -> FitResult {
    if series.is_empty() {
        return FitResult::without_solution(*spec, FitStatus::InsufficientData, settings);
    }
    if !feasible(spec, series.len()) {
        return FitResult::without_solution(*spec, FitStatus::Infeasible, settings);
    }
    if spec.validate().is_err() {
        return FitResult::without_solution(*spec, FitStatus::OptimizationFailed, settings);
    }
    match spec.family {
        Family::Polynomial { degree } => fit_polynomial(series, spec, degree, settings),
        Family::Exponential { .. } | Family::PolyExp { .. } => {
            fit_iterative(series, spec, settings, seed)
        }
    }
}

fn fit_polynomial(
    series: &ScaleSeries,
    spec: &ModelSpec,
    degree: usize,
    settings: &SolveSettings,
) -> FitResult {
    let solved = if spec.bounded {
        optimizer::bounded_polynomial_fit(series, degree)
    } else {
        optimizer::ols_polynomial(series, degree)
    };
    let solver = SolverInfo {
        kind: SolverKind::ExactQr,
        settings: *settings,
    };
    let Ok(coeffs) = solved else {
        return FitResult {
            starts_used: 1,
            solver,
            ..FitResult::without_solution(*spec, FitStatus::OptimizationFailed, settings)
        };
    };
    let sse = sum_squares(spec, series, &coeffs, 1.0);
    let estimate = coeffs[0];
    let finite = sse.is_finite() && coeffs.iter().all(|c| c.is_finite());
    FitResult {
        spec: *spec,
        params: Some(ParamVector::new(coeffs)),
        zne_estimate: Some(estimate),
        sse: Some(sse),
        status: if finite {
            FitStatus::Converged
        } else {
            FitStatus::NonFinitePrediction
        },
        starts_used: 1,
        solver,
    }
}

struct Candidate {
    point: Vec<f64>,
    sign: Option<Sign>,
    sse: f64,
    converged: bool,
}

fn fit_iterative(series: &ScaleSeries, spec: &ModelSpec, settings: &SolveSettings, seed: u64) -> FitResult {
    let solver = SolverInfo {
        kind: SolverKind::Lbfgsb,
        settings: *settings,
    };
    let bounds = param_box(spec);
    let Ok(init) = default_init(spec, series) else {
        return FitResult::without_solution(*spec, FitStatus::InsufficientData, settings);
    };

    let mut starts = Vec::with_capacity(2 + EXTRA_STARTS);
    let mut first = init.values.clone();
    bounds.clamp(&mut first);
    starts.push(first);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free: Vec<usize> = bounds.free_indices().collect();
    for _ in 0..EXTRA_STARTS {
        let mut start = init.values.clone();
        for &i in &free {
            start[i] *= rng.random_range(PERTURBATION_RANGE.0..=PERTURBATION_RANGE.1);
        }
        bounds.clamp(&mut start);
        starts.push(start);
    }
    // The profiled start knows its sign; the others are tried with both.
    let mut profiled_sign = None;
    if let Some(profiled) = models::profiled_init(spec, series) {
        let mut start = profiled.values;
        bounds.clamp(&mut start);
        profiled_sign = profiled.sign;
        starts.push(start);
    }
    let profiled_index = (starts.len() > 1 + EXTRA_STARTS).then_some(1 + EXTRA_STARTS);

    let signs: Vec<Option<Sign>> = if spec.has_sign() {
        vec![Some(Sign::Plus), Some(Sign::Minus)]
    } else {
        vec![None]
    };

    let n = spec.param_len();
    let mut best: Option<Candidate> = None;
    let mut starts_used = 0;
    for sign in &signs {
        let sign_value = sign.map_or(1.0, Sign::value);
        for (i, start) in starts.iter().enumerate() {
            if Some(i) == profiled_index && profiled_sign.is_some() && profiled_sign != *sign {
                continue;
            }
            starts_used += 1;
            let mut model_grad = vec![0.0; n];
            let objective = |x: &[f64], g: &mut [f64]| -> f64 {
                g.iter_mut().for_each(|v| *v = 0.0);
                let mut sse = 0.0;
                for (l, y) in series.points() {
                    let m = grad_raw(spec, x, sign_value, l, &mut model_grad);
                    let r = y - m;
                    sse += r * r;
                    for (gj, dj) in g.iter_mut().zip(&model_grad) {
                        *gj -= 2.0 * r * dj;
                    }
                }
                sse
            };
            let Ok(outcome) = minimize_box_with(objective, start, &bounds, settings) else {
                continue;
            };
            if !outcome.objective.is_finite() || outcome.point.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let candidate = Candidate {
                converged: outcome.status == SolveStatus::Converged,
                sse: outcome.objective,
                point: outcome.point,
                sign: *sign,
            };
            let replace = match &best {
                None => true,
                Some(b) => {
                    (candidate.converged && !b.converged)
                        || (candidate.converged == b.converged && candidate.sse < b.sse)
                }
            };
            if replace {
                best = Some(candidate);
            }
        }
    }

    let Some(best) = best else {
        return FitResult {
            starts_used,
            solver,
            ..FitResult::without_solution(*spec, FitStatus::OptimizationFailed, settings)
        };
    };
    let sign_value = best.sign.map_or(1.0, Sign::value);
    let estimate = models::zero_noise_raw(spec, &best.point, sign_value);
    let status = if !estimate.is_finite() {
        FitStatus::NonFinitePrediction
    } else if best.converged {
        FitStatus::Converged
    } else {
        FitStatus::OptimizationFailed
    };
    FitResult {
        spec: *spec,
        params: Some(ParamVector {
            values: best.point,
            sign: best.sign,
        }),
        zne_estimate: Some(estimate),
        sse: Some(best.sse),
        status,
        starts_used,
        solver,
    }
}

/// Fits the bounded and unbounded variants of `family_spec` with the same
/// seed. The bounded flag of `family_spec` is ignored.
pub fn fit_pair(
    series: &ScaleSeries,
    family_spec: &ModelSpec,
    settings: &SolveSettings,
    seed: u64,
) -> (FitResult, FitResult) {
    let bounded = fit(series, &family_spec.with_bounded(true), settings, seed);
    let unbounded = fit(series, &family_spec.with_bounded(false), settings, seed);
    (bounded, unbounded)
}

/// 64-bit FNV-1a over `record_id ‖ spec_id ‖ master_seed (little endian)`.
pub fn derive_seed(master_seed: u64, record_id: &str, spec_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    record_id
        .as_bytes()
        .iter()
        .chain(spec_id.as_bytes())
        .chain(&master_seed.to_le_bytes())
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub record_id: String,
    pub spec_id: String,
    pub result: FitResult,
}

/// Fits every record against every spec, in parallel on the current rayon
/// pool. Output is sorted by record id, then spec id.
pub fn fit_batch(
    records: &[ExperimentRecord],
    specs: &[ModelSpec],
    settings: &SolveSettings,
    master_seed: u64,
) -> Vec<BatchItem> {
    let spec_ids: Vec<String> = specs.iter().map(ToString::to_string).collect();
    let mut items: Vec<BatchItem> = records
        .par_iter()
        .flat_map_iter(|record| {
            let series = record.series();
            specs.iter().zip(&spec_ids).map(move |(spec, spec_id)| {
                let result = match &series {
                    Ok(series) => fit(
                        series,
                        spec,
                        settings,
                        derive_seed(master_seed, &record.id, spec_id),
                    ),
                    Err(_) => FitResult::without_solution(*spec, FitStatus::InsufficientData, settings),
                };
                BatchItem {
                    record_id: record.id.clone(),
                    spec_id: spec_id.clone(),
                    result,
                }
            })
        })
        .collect();
    items.sort_by(|a, b| {
        a.record_id
            .cmp(&b.record_id)
            .then_with(|| a.spec_id.cmp(&b.spec_id))
    });
    items
}

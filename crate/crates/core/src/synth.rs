//! Synthetic benchmark generation.
//!
//! Ground-truth curves take the form
//! `E(λ) = a + (E0 - a) · exp(-k λ + q λ²)` with the ideal value `E0` drawn
//! per bin of the interval `[-1, 1]`. Measurements at each noise scale factor
//! are sampled as the mean of `shots` ±1 outcomes.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{derive_seed, ScaleSeries, SeriesError};

/// Upper end of the `λ` range over which curves must stay physical.
pub const MAX_SUPPORTED_LAMBDA: f64 = 5.0;
pub const MAX_REJECTION_ATTEMPTS: usize = 10_000;
pub const DEFAULT_ASYMPTOTE_RANGE: (f64, f64) = (-0.2, 0.2);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("no admissible curve for bin [{lo}, {hi}) in regime `{regime}` after {attempts} attempts")]
    RejectionExhausted {
        lo: f64,
        hi: f64,
        regime: String,
        attempts: usize,
    },
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueCurve {
    pub id: String,
    pub ideal: f64,
    pub asymptote: f64,
    pub decay_rate: f64,
    pub curvature: f64,
}

impl TrueCurve {
    pub fn eval(&self, lambda: f64) -> f64 {
        let exponent = -self.decay_rate * lambda + self.curvature * lambda * lambda;
        self.asymptote + (self.ideal - self.asymptote) * exponent.exp()
    }

    /// Whether `E(λ)` stays inside `[-1, 1]` for `λ ∈ [0, MAX_SUPPORTED_LAMBDA]`.
    ///
    /// `E` is monotone in the exponent, so only the exponent's extremes over
    /// the interval matter: the endpoints and the vertex of the parabola.
    pub fn is_physical(&self) -> bool {
        let exponent = |l: f64| -self.decay_rate * l + self.curvature * l * l;
        let mut candidates = vec![0.0, MAX_SUPPORTED_LAMBDA];
        if self.curvature != 0.0 {
            let vertex = self.decay_rate / (2.0 * self.curvature);
            if (0.0..=MAX_SUPPORTED_LAMBDA).contains(&vertex) {
                candidates.push(vertex);
            }
        }
        candidates
            .into_iter()
            .map(|l| self.asymptote + (self.ideal - self.asymptote) * exponent(l).exp())
            .all(|e| e.is_finite() && (-1.0..=1.0).contains(&e))
    }
}

/// A synthetic noise regime standing in for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: String,
    pub decay_rate: (f64, f64),
    pub curvature: (f64, f64),
}

impl Regime {
    pub fn mild() -> Self {
        Self {
            tag: "mild".into(),
            decay_rate: (0.05, 0.5),
            curvature: (-0.01, 0.01),
        }
    }

    pub fn harsh() -> Self {
        Self {
            tag: "harsh".into(),
            decay_rate: (0.5, 2.0),
            curvature: (-0.05, 0.05),
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "mild" => Some(Self::mild()),
            "harsh" => Some(Self::harsh()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub bin_width: f64,
    pub curves_per_bin: usize,
    pub lambda_sets: Vec<Vec<f64>>,
    pub repetitions: usize,
    pub shots: u64,
    pub regimes: Vec<Regime>,
    pub asymptote_range: (f64, f64),
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            bin_width: 0.05,
            curves_per_bin: 100,
            lambda_sets: vec![
                vec![1.0, 2.0, 3.0],
                vec![1.0, 3.0, 5.0],
                vec![1.0, 2.0, 3.0, 4.0, 5.0],
            ],
            repetitions: 10,
            shots: 10_000,
            regimes: vec![Regime::mild(), Regime::harsh()],
            asymptote_range: DEFAULT_ASYMPTOTE_RANGE,
            seed: 0,
        }
    }
}

impl BenchmarkConfig {
    pub fn bin_count(&self) -> Result<usize, SynthError> {
        let w = self.bin_width;
        if !(w > 0.0 && w <= 2.0) {
            return Err(SynthError::InvalidConfig(format!("bin width {w} not in (0, 2]")));
        }
        let count = (2.0 / w).round();
        if (count * w - 2.0).abs() > 1e-9 {
            return Err(SynthError::InvalidConfig(format!(
                "bin width {w} does not divide [-1, 1] evenly"
            )));
        }
        Ok(count as usize)
    }

    /// Half-open ideal-value interval of bin `index`.
    pub fn bin(&self, index: usize) -> Range<f64> {
        let lo = -1.0 + index as f64 * self.bin_width;
        lo..(lo + self.bin_width).min(1.0)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        self.bin_count()?;
        if self.curves_per_bin == 0 || self.repetitions == 0 || self.shots == 0 {
            return invalid("curves per bin, repetitions and shots must be positive");
        }
        if self.lambda_sets.is_empty() {
            return invalid("at least one lambda set is required");
        }
        for set in &self.lambda_sets {
            if let Err(e) = ScaleSeries::new(set.clone(), vec![0.0; set.len()]) {
                return invalid(&format!("lambda set {set:?}: {e}"));
            }
            if set.is_empty() {
                return invalid("empty lambda set");
            }
        }
        if self.regimes.is_empty() {
            return invalid("at least one regime is required");
        }
        for r in &self.regimes {
            let (k0, k1) = r.decay_rate;
            let (q0, q1) = r.curvature;
            if !(k0 > 0.0 && k0 <= k1 && k1.is_finite()) || !(q0 <= q1 && q0.is_finite() && q1.is_finite()) {
                return invalid(&format!("regime `{}` has an empty or invalid range", r.tag));
            }
        }
        let (a0, a1) = self.asymptote_range;
        if !(-1.0 <= a0 && a0 <= a1 && a1 <= 1.0) {
            return invalid("asymptote range must lie within [-1, 1]");
        }
        Ok(())
    }

    pub fn expected_record_count(&self) -> Result<usize, SynthError> {
        Ok(self.bin_count()?
            * self.curves_per_bin
            * self.regimes.len()
            * self.lambda_sets.len()
            * self.repetitions)
    }
}

/// One ZNE instance: measurements of one curve at one `λ` set for one
/// repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub curve_id: String,
    /// Free-form device or regime label.
    pub backend: String,
    pub lambdas: Vec<f64>,
    pub expectations: Vec<f64>,
    pub ideal: f64,
    pub repetition: u32,
    pub shots: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl ExperimentRecord {
    pub fn series(&self) -> Result<ScaleSeries, SeriesError> {
        ScaleSeries::new(self.lambdas.clone(), self.expectations.clone())
    }

    pub fn lambda_label(&self) -> String {
        lambda_label(&self.lambdas)
    }

    /// Qubit-count or circuit-width label, `-` when absent.
    pub fn width_label(&self) -> String {
        self.meta.get("width").cloned().unwrap_or_else(|| "-".into())
    }
}

pub fn lambda_label(lambdas: &[f64]) -> String {
    lambdas
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn sample_true_curve<R: Rng + ?Sized>(
    bin: Range<f64>,
    regime: &Regime,
    asymptote_range: (f64, f64),
    id: String,
    rng: &mut R,
) -> Result<TrueCurve, SynthError> {
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let ideal = if bin.start < bin.end {
            rng.random_range(bin.clone())
        } else {
            bin.start
        };
        let curve = TrueCurve {
            id: id.clone(),
            ideal,
            asymptote: rng.random_range(asymptote_range.0..=asymptote_range.1),
            decay_rate: rng.random_range(regime.decay_rate.0..=regime.decay_rate.1),
            curvature: rng.random_range(regime.curvature.0..=regime.curvature.1),
        };
        if curve.decay_rate > 0.0 && curve.is_physical() {
            return Ok(curve);
        }
    }
    Err(SynthError::RejectionExhausted {
        lo: bin.start,
        hi: bin.end,
        regime: regime.tag.clone(),
        attempts: MAX_REJECTION_ATTEMPTS,
    })
}

/// Mean of `shots` ±1 outcomes with expectation `true_value`.
pub fn shot_sample<R: Rng + ?Sized>(true_value: f64, shots: u64, rng: &mut R) -> f64 {
    let p = ((1.0 + true_value) / 2.0).clamp(0.0, 1.0);
    let k = Binomial::new(shots, p)
        .expect("probability clamped into [0, 1]")
        .sample(rng);
    2.0 * k as f64 / shots as f64 - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub curves: Vec<TrueCurve>,
    pub records: Vec<ExperimentRecord>,
}

/// Generates the full benchmark. Every curve and record draws from its own
/// ChaCha stream keyed by `(seed, id)`, so output does not depend on the
/// order or parallelism of generation.
pub fn generate_dataset(config: &BenchmarkConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let bins = config.bin_count()?;
    let jobs: Vec<(usize, &Regime, usize)> = config
        .regimes
        .iter()
        .flat_map(|r| (0..bins).flat_map(move |b| (0..config.curves_per_bin).map(move |c| (b, r, c))))
        .collect();

    let per_curve: Vec<(TrueCurve, Vec<ExperimentRecord>)> = jobs
        .par_iter()
        .map(|&(bin, regime, index)| {
            let curve_id = format!("{}-b{bin:03}-c{index:04}", regime.tag);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "curve", &curve_id));
            let curve = sample_true_curve(
                config.bin(bin),
                regime,
                config.asymptote_range,
                curve_id.clone(),
                &mut rng,
            )?;
            let mut records = Vec::with_capacity(config.lambda_sets.len() * config.repetitions);
            for (set_index, lambdas) in config.lambda_sets.iter().enumerate() {
                for rep in 0..config.repetitions {
                    let id = format!("{curve_id}-l{set_index}-r{rep:02}");
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "record", &id));
                    let expectations = lambdas
                        .iter()
                        .map(|&l| shot_sample(curve.eval(l), config.shots, &mut rng))
                        .collect();
                    records.push(ExperimentRecord {
                        id,
                        curve_id: curve_id.clone(),
                        backend: regime.tag.clone(),
                        lambdas: lambdas.clone(),
                        expectations,
                        ideal: curve.ideal,
                        repetition: rep as u32,
                        shots: config.shots,
                        meta: BTreeMap::new(),
                    });
                }
            }
            Ok((curve, records))
        })
        .collect::<Result<_, SynthError>>()?;

    let mut curves = Vec::with_capacity(per_curve.len());
    let mut records = Vec::new();
    for (curve, recs) in per_curve {
        curves.push(curve);
        records.extend(recs);
    }
    Ok(Dataset { curves, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Circuit {
    Ghz,
    WState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    AllX,
    AllZ,
}

/// Ideal expectation of the global Pauli strings on GHZ and W states.
pub fn ideal_registry_lookup(circuit: Circuit, observable: Observable) -> f64 {
    match (circuit, observable) {
        (Circuit::Ghz, _) => 1.0,
        (Circuit::WState, Observable::AllX) => 0.0,
        (Circuit::WState, Observable::AllZ) => -1.0,
    }
}

//! Extrapolation model families.
//!
//! Every family is evaluated as a function of the noise scale factor `λ`.
//! Parameter vectors use a fixed layout per family:
//!
//! | family              | layout                      |
//! |---------------------|-----------------------------|
//! | polynomial          | `θ0, θ1, …, θd`             |
//! | exponential         | `a, b, c`                   |
//! | bounded exponential | `a, ζ, c`                   |
//! | poly-exp            | `a, c0, c1, …, cd` + `sign` |
//! | bounded poly-exp    | `a, ζ, c1, …, cd`           |
//!
//! The bounded variants expose the zero-noise value `ζ` as a parameter so the
//! box `[-1, 1]` can be imposed on it directly. A fixed asymptote keeps its
//! slot in the layout and is pinned by the parameter box (`lower == upper`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ScaleSeries;
use crate::optimizer;

/// Smallest decay rate admitted for the bounded exponential (`c > 0`).
pub const MIN_DECAY_RATE: f64 = 1e-8;

const LOG_AMPLITUDE_CLAMP: f64 = 20.0;
const AMPLITUDE_FLOOR: f64 = 1e-12;
const INIT_EXPONENT_SLOPE: f64 = 0.1;
const PROFILE_MIN_SPAN: f64 = 1e-3;
/// Asymptote offsets `span · 10^(k / steps)` for `k` in this range.
const PROFILE_OFFSET_EXPONENTS: (i16, i16) = (-96, 64);
const PROFILE_STEPS_PER_DECADE: f64 = 32.0;
const PROFILE_REFINE_ITERATIONS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter layout mismatch: expected {expected} values, got {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("unbounded poly-exp parameters require a sign")]
    MissingSign,
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("cannot parse model spec `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

/// Large-noise asymptote handling for the exponential families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Asymptote {
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Polynomial { degree: usize },
    Exponential { asymptote: Asymptote },
    PolyExp { degree: usize, asymptote: Asymptote },
}

/// A model family plus its hyperparameters and the bounded flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub bounded: bool,
    /// Constrain `c >= MIN_DECAY_RATE` for the *unbounded* exponential as well.
    /// The bounded exponential always enforces it.
    pub positive_rate: bool,
}

impl ModelSpec {
    pub fn polynomial(degree: usize, bounded: bool) -> Self {
        Self {
            family: Family::Polynomial { degree },
            bounded,
            positive_rate: false,
        }
    }

    pub fn exponential(asymptote: Asymptote, bounded: bool) -> Self {
        Self {
            family: Family::Exponential { asymptote },
            bounded,
            positive_rate: false,
        }
    }

    pub fn poly_exp(degree: usize, asymptote: Asymptote, bounded: bool) -> Self {
        Self {
            family: Family::PolyExp { degree, asymptote },
            bounded,
            positive_rate: false,
        }
    }

    pub fn with_bounded(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }

    pub fn with_positive_rate(mut self, positive_rate: bool) -> Self {
        self.positive_rate = positive_rate;
        self
    }

    pub fn asymptote(&self) -> Option<Asymptote> {
        match self.family {
            Family::Polynomial { .. } => None,
            Family::Exponential { asymptote } | Family::PolyExp { asymptote, .. } => {
                Some(asymptote)
            }
        }
    }

    pub fn degree(&self) -> Option<usize> {
        match self.family {
            Family::Polynomial { degree } | Family::PolyExp { degree, .. } => Some(degree),
            Family::Exponential { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(0) = self.degree() {
            return Err(ModelError::InvalidSpec("degree must be at least 1".into()));
        }
        if let Some(Asymptote::Fixed(v)) = self.asymptote() {
            if !v.is_finite() {
                return Err(ModelError::InvalidSpec("fixed asymptote must be finite".into()));
            }
            if self.bounded && !(-1.0..=1.0).contains(&v) {
                return Err(ModelError::InvalidSpec(format!(
                    "fixed asymptote {v} lies outside [-1, 1] for a bounded model"
                )));
            }
        }
        Ok(())
    }

    /// Number of entries in the real-valued parameter vector.
    pub fn param_len(&self) -> usize {
        match self.family {
            Family::Polynomial { degree } => degree + 1,
            Family::Exponential { .. } => 3,
            // bounded: a, ζ, c1..cd; unbounded: a, c0..cd (sign kept apart)
            Family::PolyExp { degree, .. } => degree + 2,
        }
    }

    /// Whether the parameter vector carries a discrete sign.
    pub fn has_sign(&self) -> bool {
        matches!(self.family, Family::PolyExp { .. }) && !self.bounded
    }

    /// Count of parameters actually estimated from data.
    pub fn free_param_count(&self) -> usize {
        let fixed = |a: Asymptote| usize::from(matches!(a, Asymptote::Fixed(_)));
        match self.family {
            Family::Polynomial { degree } => degree + 1,
            Family::Exponential { asymptote } => 3 - fixed(asymptote),
            Family::PolyExp { degree, asymptote } => {
                let base = if self.bounded { degree + 2 } else { degree + 3 };
                base - fixed(asymptote)
            }
        }
    }

    /// Canonical spec string without the bounded flag; identifies the family
    /// shared by a bounded/unbounded pair.
    pub fn family_key(&self) -> String {
        let mut s = match self.family {
            Family::Polynomial { degree } => format!("poly:d={degree}"),
            Family::Exponential { asymptote } => format!("exp:a={}", AsymptoteFmt(asymptote)),
            Family::PolyExp { degree, asymptote } => {
                format!("polyexp:d={degree}:a={}", AsymptoteFmt(asymptote))
            }
        };
        if self.positive_rate && matches!(self.family, Family::Exponential { .. }) {
            s.push_str(":pos-rate");
        }
        s
    }

    /// Parses `family[:d=<int>][:a=<free|number>][:bounded|:unbounded]`.
    ///
    /// Without an explicit flag both arms are returned, bounded first.
    pub fn parse_arms(input: &str) -> Result<Vec<ModelSpec>, ModelError> {
        let (spec, flag) = parse_spec(input)?;
        let arms = match flag {
            Some(b) => vec![spec.with_bounded(b)],
            None => vec![spec.with_bounded(true), spec.with_bounded(false)],
        };
        for arm in &arms {
            arm.validate().map_err(|e| ModelError::Parse {
                input: input.to_string(),
                reason: e.to_string(),
            })?;
        }
        Ok(arms)
    }
}

struct AsymptoteFmt(Asymptote);

impl fmt::Display for AsymptoteFmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Asymptote::Free => f.write_str("free"),
            Asymptote::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = if self.bounded { "bounded" } else { "unbounded" };
        write!(f, "{}:{flag}", self.family_key())
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for ModelSpec {
    type Err = ModelError;

    /// Strict parse: the bounded/unbounded flag is required.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match parse_spec(s)? {
            (spec, Some(b)) => Ok(spec.with_bounded(b)),
            (_, None) => Err(ModelError::Parse {
                input: s.to_string(),
                reason: "missing `bounded` or `unbounded` flag".into(),
            }),
        }
    }
}

fn parse_spec(input: &str) -> Result<(ModelSpec, Option<bool>), ModelError> {
    let err = |reason: String| ModelError::Parse {
        input: input.to_string(),
        reason,
    };
    let mut parts = input.trim().split(':');
    let family = parts.next().unwrap_or_default();
    let mut degree: Option<usize> = None;
    let mut asymptote: Option<Asymptote> = None;
    let mut flag: Option<bool> = None;
    let mut positive_rate = false;
    for part in parts {
        if let Some(d) = part.strip_prefix("d=") {
            if degree.is_some() {
                return Err(err("duplicate degree".into()));
            }
            let d: usize = d.parse().map_err(|_| err(format!("bad degree `{d}`")))?;
            degree = Some(d);
        } else if let Some(a) = part.strip_prefix("a=") {
            if asymptote.is_some() {
                return Err(err("duplicate asymptote".into()));
            }
            asymptote = Some(parse_asymptote(a).ok_or_else(|| err(format!("bad asymptote `{a}`")))?);
        } else if part == "bounded" || part == "unbounded" {
            if flag.is_some() {
                return Err(err("duplicate bounded flag".into()));
            }
            flag = Some(part == "bounded");
        } else if part == "pos-rate" {
            positive_rate = true;
        } else {
            return Err(err(format!("unknown component `{part}`")));
        }
    }
    let family = match family {
        "poly" => {
            if asymptote.is_some() {
                return Err(err("polynomial takes no asymptote".into()));
            }
            Family::Polynomial {
                degree: degree.unwrap_or(1),
            }
        }
        "exp" => {
            if degree.is_some() {
                return Err(err("exponential takes no degree".into()));
            }
            Family::Exponential {
                asymptote: asymptote.unwrap_or(Asymptote::Free),
            }
        }
        "polyexp" => Family::PolyExp {
            degree: degree.unwrap_or(1),
            asymptote: asymptote.unwrap_or(Asymptote::Free),
        },
        other => return Err(err(format!("unknown family `{other}`"))),
    };
    if positive_rate && !matches!(family, Family::Exponential { .. }) {
        return Err(err("`pos-rate` applies to the exponential family only".into()));
    }
    let spec = ModelSpec {
        family,
        bounded: flag.unwrap_or(false),
        positive_rate,
    };
    spec.validate().map_err(|e| err(e.to_string()))?;
    Ok((spec, flag))
}

pub fn parse_asymptote(s: &str) -> Option<Asymptote> {
    if s.eq_ignore_ascii_case("free") {
        return Some(Asymptote::Free);
    }
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(Asymptote::Fixed(v))
}

/// Direction of the unbounded poly-exp exponential term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Sign>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, sign: None }
    }

    pub fn with_sign(values: Vec<f64>, sign: Sign) -> Self {
        Self {
            values,
            sign: Some(sign),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(*lo).min(*hi);
        }
    }

    /// Indices whose bounds do not coincide.
    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.lower[i] < self.upper[i])
    }
}

fn check_layout(spec: &ModelSpec, params: &ParamVector) -> Result<f64, ModelError> {
    let expected = spec.param_len();
    if params.values.len() != expected {
        return Err(ModelError::LayoutMismatch {
            expected,
            got: params.values.len(),
        });
    }
    if spec.has_sign() {
        params.sign.map(Sign::value).ok_or(ModelError::MissingSign)
    } else {
        Ok(1.0)
    }
}

/// `a + amplitude * e^exponent`, resolving `0 * ∞` to `a`.
#[inline]
fn decay_term(a: f64, amplitude: f64, exponent: f64) -> f64 {
    if amplitude == 0.0 {
        a
    } else {
        a + amplitude * exponent.exp()
    }
}

/// Polynomial `Σ coeffs[j] λ^j` by Horner's rule.
#[inline]
fn horner(coeffs: &[f64], lambda: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c)
}

/// Evaluates the model on a raw parameter slice. `sign` is ignored by
/// families without one. The layout is assumed to be correct.
pub(crate) fn eval_raw(spec: &ModelSpec, values: &[f64], sign: f64, lambda: f64) -> f64 {
    match (spec.family, spec.bounded) {
        (Family::Polynomial { .. }, _) => horner(values, lambda),
        (Family::Exponential { .. }, false) => decay_term(values[0], values[1], -values[2] * lambda),
        (Family::Exponential { .. }, true) => {
            decay_term(values[0], values[1] - values[0], -values[2] * lambda)
        }
        (Family::PolyExp { .. }, false) => decay_term(values[0], sign, horner(&values[1..], lambda)),
        (Family::PolyExp { .. }, true) => {
            // r(λ) = c1 λ + … + cd λ^d has no constant term.
            let r = lambda * horner(&values[2..], lambda);
            decay_term(values[0], values[1] - values[0], r)
        }
    }
}

/// Fills `out` with the gradient of the model with respect to `values` and
/// returns the model value.
pub(crate) fn grad_raw(
    spec: &ModelSpec,
    values: &[f64],
    sign: f64,
    lambda: f64,
    out: &mut [f64],
) -> f64 {
    match (spec.family, spec.bounded) {
        (Family::Polynomial { .. }, _) => {
            let mut p = 1.0;
            for g in out.iter_mut() {
                *g = p;
                p *= lambda;
            }
            horner(values, lambda)
        }
        (Family::Exponential { .. }, false) => {
            let (a, b, c) = (values[0], values[1], values[2]);
            let e = (-c * lambda).exp();
            out[0] = 1.0;
            out[1] = e;
            out[2] = if b == 0.0 { 0.0 } else { -b * lambda * e };
            decay_term(a, b, -c * lambda)
        }
        (Family::Exponential { .. }, true) => {
            let (a, zeta, c) = (values[0], values[1], values[2]);
            let amp = zeta - a;
            let e = (-c * lambda).exp();
            out[0] = 1.0 - e;
            out[1] = e;
            out[2] = if amp == 0.0 { 0.0 } else { -amp * lambda * e };
            decay_term(a, amp, -c * lambda)
        }
        (Family::PolyExp { .. }, false) => {
            let z = horner(&values[1..], lambda);
            let e = z.exp();
            out[0] = 1.0;
            let mut p = sign * e;
            for g in out[1..].iter_mut() {
                *g = p;
                p *= lambda;
            }
            decay_term(values[0], sign, z)
        }
        (Family::PolyExp { .. }, true) => {
            let (a, zeta) = (values[0], values[1]);
            let amp = zeta - a;
            let r = lambda * horner(&values[2..], lambda);
            let e = r.exp();
            out[0] = 1.0 - e;
            out[1] = e;
            let mut p = if amp == 0.0 { 0.0 } else { amp * e * lambda };
            for g in out[2..].iter_mut() {
                *g = p;
                p *= lambda;
            }
            decay_term(a, amp, r)
        }
    }
}

pub fn eval_model(spec: &ModelSpec, params: &ParamVector, lambda: f64) -> Result<f64, ModelError> {
    let sign = check_layout(spec, params)?;
    Ok(eval_raw(spec, &params.values, sign, lambda))
}

/// Analytic gradient of the model value with respect to the real parameters,
/// in layout order. The discrete sign is treated as a constant.
pub fn gradient(spec: &ModelSpec, params: &ParamVector, lambda: f64) -> Result<Vec<f64>, ModelError> {
    let sign = check_layout(spec, params)?;
    let mut out = vec![0.0; params.values.len()];
    grad_raw(spec, &params.values, sign, lambda, &mut out);
    Ok(out)
}

pub(crate) fn zero_noise_raw(spec: &ModelSpec, values: &[f64], sign: f64) -> f64 {
    match (spec.family, spec.bounded) {
        (Family::Polynomial { .. }, _) => values[0],
        (Family::Exponential { .. }, false) => values[0] + values[1],
        (Family::PolyExp { .. }, false) => decay_term(values[0], sign, values[1]),
        (_, true) => values[1],
    }
}

/// The extrapolated value `Ê(0)`.
pub fn zero_noise_value(spec: &ModelSpec, params: &ParamVector) -> Result<f64, ModelError> {
    let sign = check_layout(spec, params)?;
    Ok(zero_noise_raw(spec, &params.values, sign))
}

/// True iff the model has no more free parameters than data points.
pub fn feasible(spec: &ModelSpec, n_points: usize) -> bool {
    spec.free_param_count() <= n_points
}

pub fn param_box(spec: &ModelSpec) -> ParamBox {
    let mut bx = ParamBox::unbounded(spec.param_len());
    let pin_asymptote = |bx: &mut ParamBox, asymptote: Asymptote| match asymptote {
        Asymptote::Fixed(v) => {
            bx.lower[0] = v;
            bx.upper[0] = v;
        }
        Asymptote::Free if spec.bounded => {
            bx.lower[0] = -1.0;
            bx.upper[0] = 1.0;
        }
        Asymptote::Free => {}
    };
    match spec.family {
        Family::Polynomial { .. } => {
            if spec.bounded {
                bx.lower[0] = -1.0;
                bx.upper[0] = 1.0;
            }
        }
        Family::Exponential { asymptote } => {
            pin_asymptote(&mut bx, asymptote);
            if spec.bounded {
                bx.lower[1] = -1.0;
                bx.upper[1] = 1.0;
            }
            if spec.bounded || spec.positive_rate {
                bx.lower[2] = MIN_DECAY_RATE;
            }
        }
        Family::PolyExp { asymptote, .. } => {
            pin_asymptote(&mut bx, asymptote);
            if spec.bounded {
                bx.lower[1] = -1.0;
                bx.upper[1] = 1.0;
            }
        }
    }
    bx
}

/// Deterministic starting point for the iterative fit.
///
/// The zero-noise slot starts at the straight-line extrapolation through the
/// first two points, the asymptote at the last observation.
pub fn default_init(spec: &ModelSpec, series: &ScaleSeries) -> Result<ParamVector, ModelError> {
    let n = series.len();
    if n < 2 {
        return Err(ModelError::InsufficientData { needed: 2, got: n });
    }
    let lambdas = series.lambdas();
    let ys = series.values();
    let slope = (ys[1] - ys[0]) / (lambdas[1] - lambdas[0]);
    let intercept = ys[0] - slope * lambdas[0];
    let (y_first, y_last) = (ys[0], ys[n - 1]);
    let bx = param_box(spec);
    let clamp = |v: f64, i: usize| v.max(bx.lower[i]).min(bx.upper[i]);

    let asymptote_init = |asymptote: Asymptote| match asymptote {
        Asymptote::Fixed(v) => v,
        Asymptote::Free => clamp(y_last, 0),
    };

    let params = match spec.family {
        Family::Polynomial { degree } => {
            let theta0 = clamp(intercept, 0);
            let mut values = vec![0.0; degree + 1];
            values[0] = theta0;
            let shifted: Vec<f64> = ys.iter().map(|y| y - theta0).collect();
            if let Ok(rest) = optimizer::least_squares_no_intercept(lambdas, &shifted, degree) {
                values[1..].copy_from_slice(&rest);
            }
            ParamVector::new(values)
        }
        Family::Exponential { asymptote } => {
            let a = asymptote_init(asymptote);
            let c = clamp(1.0, 2);
            if spec.bounded {
                ParamVector::new(vec![a, clamp(intercept, 1), c])
            } else {
                ParamVector::new(vec![a, intercept - a, c])
            }
        }
        Family::PolyExp { degree, asymptote } => {
            let a = asymptote_init(asymptote);
            // Start with the exponential term shrinking when the data approach
            // the asymptote, growing otherwise.
            let c1 = if (y_last - a).abs() <= (y_first - a).abs() {
                -INIT_EXPONENT_SLOPE
            } else {
                INIT_EXPONENT_SLOPE
            };
            if spec.bounded {
                let mut values = vec![0.0; degree + 2];
                values[0] = a;
                values[1] = clamp(intercept, 1);
                values[2] = c1;
                ParamVector::new(values)
            } else {
                let sign = if a < y_first { Sign::Plus } else { Sign::Minus };
                let c0 = (y_first - a)
                    .abs()
                    .max(AMPLITUDE_FLOOR)
                    .ln()
                    .clamp(-LOG_AMPLITUDE_CLAMP, LOG_AMPLITUDE_CLAMP);
                let mut values = vec![0.0; degree + 2];
                values[0] = a;
                values[1] = c0;
                values[2] = c1;
                ParamVector::with_sign(values, sign)
            }
        }
    };
    Ok(params)
}

/// Data-driven start for the poly-exp families, or `None` when no
/// candidate asymptote leaves the data strictly on one side of it.
///
/// For a given asymptote the exponent polynomial is the weighted
/// least-squares fit of `ln|y - a|`, scored by its SSE in the original space. Free asymptotes are
/// scanned at geometric offsets beyond the data range and the best offset is
/// refined by golden-section search.
pub fn profiled_init(spec: &ModelSpec, series: &ScaleSeries) -> Option<ParamVector> {
    let Family::PolyExp { degree, asymptote } = spec.family else {
        return None;
    };
    let ys = series.values();
    if ys.len() < degree + 1 {
        return None;
    }
    let bx = param_box(spec);
    let best = match asymptote {
        Asymptote::Fixed(v) => profile_at(series, degree, v),
        Asymptote::Free => {
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(PROFILE_MIN_SPAN);
            let in_box = |a: f64| bx.lower[0] <= a && a <= bx.upper[0];
            let mut best: Option<Profile> = None;
            for (edge, dir) in [(lo, -1.0), (hi, 1.0)] {
                let at = |t: f64| {
                    let a = edge + dir * span * 10f64.powf(t / PROFILE_STEPS_PER_DECADE);
                    if in_box(a) {
                        profile_at(series, degree, a)
                    } else {
                        None
                    }
                };
                let score = |t: f64| at(t).map_or(f64::INFINITY, |p| p.sse);
                let grid: Vec<f64> = (PROFILE_OFFSET_EXPONENTS.0..=PROFILE_OFFSET_EXPONENTS.1)
                    .map(f64::from)
                    .collect();
                let scores: Vec<f64> = grid.iter().map(|&t| score(t)).collect();
                // The profile is multimodal; refine every grid-local minimum.
                for i in 0..grid.len() {
                    let left = if i > 0 { scores[i - 1] } else { f64::INFINITY };
                    let right = scores.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    // Plateaus are refined once, from their left end.
                    if !scores[i].is_finite() || scores[i] >= left || scores[i] > right {
                        continue;
                    }
                    let t = golden_section(score, grid[i] - 1.0, grid[i] + 1.0, PROFILE_REFINE_ITERATIONS);
                    for candidate in [at(t), at(grid[i])].into_iter().flatten() {
                        if best.as_ref().is_none_or(|b| candidate.sse < b.sse) {
                            best = Some(candidate);
                        }
                    }
                }
            }
            best
        }
    }?;

    let mut values = Vec::with_capacity(degree + 2);
    values.push(best.asymptote);
    if spec.bounded {
        let zeta = best.asymptote + best.side * best.coeffs[0].exp();
        values.push(zeta.clamp(bx.lower[1], bx.upper[1]));
        values.extend_from_slice(&best.coeffs[1..]);
        Some(ParamVector::new(values))
    } else {
        values.push(best.coeffs[0].clamp(-LOG_AMPLITUDE_CLAMP, LOG_AMPLITUDE_CLAMP));
        values.extend_from_slice(&best.coeffs[1..]);
        let sign = if best.side > 0.0 { Sign::Plus } else { Sign::Minus };
        Some(ParamVector::with_sign(values, sign))
    }
}

struct Profile {
    sse: f64,
    asymptote: f64,
    side: f64,
    coeffs: Vec<f64>,
}

fn profile_at(series: &ScaleSeries, degree: usize, a: f64) -> Option<Profile> {
    let ys = series.values();
    let side = (ys[0] - a).signum();
    if side == 0.0 || ys.iter().any(|y| (y - a).signum() != side) {
        return None;
    }
    // Weighting by |y - a| makes the log-space residual approximate the
    // original-space one.
    let weights: Vec<f64> = ys.iter().map(|y| (y - a).abs()).collect();
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let coeffs = optimizer::weighted_least_squares_polynomial(series.lambdas(), &logs, &weights, degree).ok()?;
    let sse: f64 = series
        .points()
        .map(|(l, y)| {
            let exponent: f64 = coeffs.iter().rev().fold(0.0, |acc, c| acc * l + c);
            (y - a - side * exponent.exp()).powi(2)
        })
        .sum();
    sse.is_finite().then_some(Profile {
        sse,
        asymptote: a,
        side,
        coeffs,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

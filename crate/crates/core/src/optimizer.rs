//! Box-constrained limited-memory quasi-Newton minimization and closed-form
//! polynomial least squares.
//!
//! [`minimize_box`] follows the L-BFGS-B scheme: a generalized Cauchy point
//! along the projected steepest-descent path of the quadratic model, a
//! subspace Newton step on the variables left free, and a Wolfe line search
//! on the resulting feasible direction. The problems solved here have a
//! handful of parameters, so the limited-memory matrix is formed densely.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ScaleSeries;
use crate::models::ParamBox;

const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH_EVALS: usize = 40;
const MAX_STEP: f64 = 1e10;
const EXTRAPOLATION_FACTOR: f64 = 4.0;
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("dimension mismatch: point has {point} entries, box has {bounds}")]
    DimensionMismatch { point: usize, bounds: usize },
    #[error("invalid box at index {index}: lower {lower} > upper {upper}")]
    InvalidBox { index: usize, lower: f64, upper: f64 },
    #[error("initial point lies outside the box at index {index}")]
    InitOutsideBox { index: usize },
    #[error("singular least-squares system (rank deficient design)")]
    Singular,
    #[error("need at least {needed} points for this degree, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub max_iterations: usize,
    /// Infinity norm of the projected gradient.
    pub gradient_tolerance: f64,
    pub objective_rel_tolerance: f64,
    /// History length of the limited-memory Hessian approximation.
    pub memory_pairs: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            objective_rel_tolerance: 1e-10,
            memory_pairs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    NonFinite,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub point: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Minimizes `objective` over `bounds` starting from `init`.
///
/// `gradient` must return a vector of the same length as its argument.
pub fn minimize_box<F, G>(
    objective: F,
    gradient: G,
    init: &[f64],
    bounds: &ParamBox,
    settings: &SolveSettings,
) -> Result<SolveOutcome, OptimizeError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    minimize_box_with(
        |x: &[f64], g: &mut [f64]| {
            g.copy_from_slice(&gradient(x));
            objective(x)
        },
        init,
        bounds,
        settings,
    )
}

/// Same as [`minimize_box`] with a fused objective/gradient callback that
/// writes the gradient into its second argument and returns the objective.
pub fn minimize_box_with<FG>(
    mut eval: FG,
    init: &[f64],
    bounds: &ParamBox,
    settings: &SolveSettings,
) -> Result<SolveOutcome, OptimizeError>
where
    FG: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = init.len();
    check_box(init, bounds)?;

    let mut x = init.to_vec();
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g);
    if !is_finite_eval(f, &g) {
        return Ok(SolveOutcome {
            point: x,
            objective: f,
            status: SolveStatus::NonFinite,
            iterations: 0,
        });
    }

    let mut memory = Memory::new(settings.memory_pairs.max(1), n);
    let mut scratch = Scratch::new(n);
    let mut cauchy = vec![0.0; n];
    let mut direction = vec![0.0; n];
    let mut iterations = 0;
    let status = loop {
        if projected_gradient_norm(&x, &g, bounds) <= settings.gradient_tolerance {
            break SolveStatus::Converged;
        }
        if iterations >= settings.max_iterations {
            break SolveStatus::MaxIterations;
        }

        let hessian = memory.matrix();
        cauchy_point(&x, &g, bounds, hessian, &mut scratch, &mut cauchy);
        subspace_minimum(&x, &g, &cauchy, bounds, hessian, &mut scratch, &mut direction);
        for (d, xi) in direction.iter_mut().zip(&x) {
            *d -= xi;
        }
        let slope = dot(&g, &direction);
        if !(slope < 0.0) {
            if memory.is_empty() {
                break SolveStatus::LineSearchFailure;
            }
            memory.clear();
            continue;
        }

        // Without curvature information the direction is the raw gradient,
        // so the first trial is normalised and steps stop at the target.
        let (first_step, max_step) = if memory.is_empty() {
            ((1.0 / norm(&direction)).min(1.0), 1.0)
        } else {
            (1.0, feasible_step(&x, &direction, bounds))
        };
        let search = line_search(&mut eval, &x, f, &direction, slope, first_step, max_step, bounds);
        let step = match search {
            Ok(step) => step,
            Err(nonfinite_only) => {
                if !memory.is_empty() {
                    memory.clear();
                    continue;
                }
                break if nonfinite_only {
                    SolveStatus::NonFinite
                } else {
                    SolveStatus::LineSearchFailure
                };
            }
        };
        iterations += 1;

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        memory.push(s, y);

        let decrease = f - step.f;
        let scale = f.abs().max(step.f.abs());
        x = step.x;
        g = step.g;
        f = step.f;
        if decrease <= settings.objective_rel_tolerance * scale {
            break SolveStatus::Converged;
        }
    };

    Ok(SolveOutcome {
        point: x,
        objective: f,
        status,
        iterations,
    })
}

fn check_box(init: &[f64], bounds: &ParamBox) -> Result<(), OptimizeError> {
    if init.len() != bounds.len() || bounds.upper.len() != bounds.lower.len() {
        return Err(OptimizeError::DimensionMismatch {
            point: init.len(),
            bounds: bounds.len(),
        });
    }
    for (i, (lo, hi)) in bounds.lower.iter().zip(&bounds.upper).enumerate() {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(OptimizeError::InvalidBox {
                index: i,
                lower: *lo,
                upper: *hi,
            });
        }
        if !(*lo <= init[i] && init[i] <= *hi) {
            return Err(OptimizeError::InitOutsideBox { index: i });
        }
    }
    Ok(())
}

fn is_finite_eval(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project(x: &mut [f64], bounds: &ParamBox) {
    bounds.clamp(x);
}

/// Infinity norm of `P(x - g) - x`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &ParamBox) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (xi, gi))| {
            let p = (xi - gi).max(bounds.lower[i]).min(bounds.upper[i]);
            (p - xi).abs()
        })
        .fold(0.0, f64::max)
}

/// Stored correction pairs; the implied matrix is the BFGS update of
/// `θ I` through every pair, oldest first. The matrix is cached and rebuilt
/// only after the pairs change.
struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    capacity: usize,
    hessian: DMatrix<f64>,
    bs: Vec<f64>,
    stale: bool,
}

impl Memory {
    fn new(capacity: usize, n: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
            hessian: DMatrix::identity(n, n),
            bs: vec![0.0; n],
            stale: false,
        }
    }

    fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn clear(&mut self) {
        self.pairs.clear();
        self.stale = true;
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        // Curvature condition; otherwise the update would lose definiteness.
        if !(sy > f64::EPSILON * yy) || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
        self.stale = true;
    }

    fn matrix(&mut self) -> &DMatrix<f64> {
        if !self.stale {
            return &self.hessian;
        }
        self.stale = false;
        let n = self.bs.len();
        let b = self.hessian.as_mut_slice();
        b.iter_mut().for_each(|v| *v = 0.0);
        let Some((s_last, y_last)) = self.pairs.back() else {
            for i in 0..n {
                b[i * n + i] = 1.0;
            }
            return &self.hessian;
        };
        let theta = dot(y_last, y_last) / dot(s_last, y_last);
        // Column-major n × n buffer.
        for i in 0..n {
            b[i * n + i] = theta;
        }
        let bs = &mut self.bs;
        for (s, y) in &self.pairs {
            bs.iter_mut().for_each(|v| *v = 0.0);
            for (column, sj) in b.chunks_exact(n).zip(s) {
                for (v, bij) in bs.iter_mut().zip(column) {
                    *v += bij * sj;
                }
            }
            let sbs = dot(s, bs);
            let ys = dot(y, s);
            if sbs > 0.0 && ys > 0.0 {
                for (column, (yj, bsj)) in b.chunks_exact_mut(n).zip(y.iter().zip(bs.iter())) {
                    let (yj, bsj) = (yj / ys, bsj / sbs);
                    for (bij, (yi, bsi)) in column.iter_mut().zip(y.iter().zip(bs.iter())) {
                        *bij += yi * yj - bsi * bsj;
                    }
                }
            }
        }
        &self.hessian
    }
}

/// First local minimizer of the quadratic model along the projected
/// steepest-descent path `P(x - t g)`.
fn cauchy_point(
    x: &[f64],
    g: &[f64],
    bounds: &ParamBox,
    hessian: &DMatrix<f64>,
    scratch: &mut Scratch,
    xc: &mut [f64],
) {
    let n = x.len();
    let Scratch {
        breaks,
        d,
        order,
        z,
        bd,
        ..
    } = scratch;
    d.fill(0.0);
    z.fill(0.0);
    for i in 0..n {
        let t = if g[i] < 0.0 {
            (x[i] - bounds.upper[i]) / g[i]
        } else if g[i] > 0.0 {
            (x[i] - bounds.lower[i]) / g[i]
        } else {
            f64::INFINITY
        };
        breaks[i] = t;
        if t > 0.0 {
            d[i] = -g[i];
        }
    }
    order.clear();
    order.extend((0..n).filter(|&i| breaks[i] > 0.0 && breaks[i].is_finite()));
    order.sort_by(|&a, &b| breaks[a].total_cmp(&breaks[b]).then(a.cmp(&b)));

    let mut t_old = 0.0;
    let mut next = 0;
    loop {
        bd.iter_mut().for_each(|v| *v = 0.0);
        for (column, dj) in hessian.as_slice().chunks_exact(n).zip(d.iter()) {
            for (v, hij) in bd.iter_mut().zip(column) {
                *v += hij * dj;
            }
        }
        let slope = dot(g, d) + dot(bd, z);
        let curvature = dot(bd, d);
        if slope >= 0.0 || d.iter().all(|&v| v == 0.0) {
            break;
        }
        let t_next = order.get(next).map_or(f64::INFINITY, |&i| breaks[i]);
        let dt = t_next - t_old;
        let dt_min = if curvature > 0.0 { -slope / curvature } else { f64::INFINITY };
        if dt_min < dt {
            for i in 0..n {
                z[i] += dt_min * d[i];
            }
            break;
        }
        if !t_next.is_finite() {
            // Non-convex model with no bound ahead; stay put.
            break;
        }
        for i in 0..n {
            z[i] += dt * d[i];
        }
        while next < order.len() && breaks[order[next]] <= t_next {
            let b = order[next];
            z[b] = if d[b] > 0.0 {
                bounds.upper[b] - x[b]
            } else {
                bounds.lower[b] - x[b]
            };
            d[b] = 0.0;
            next += 1;
        }
        t_old = t_next;
    }
    for ((c, a), b) in xc.iter_mut().zip(x).zip(z.iter()) {
        *c = a + b;
    }
    project(xc, bounds);
}

/// Newton step of the quadratic model over the variables not at a bound at
/// the Cauchy point, truncated to stay inside the box.
fn subspace_minimum(
    x: &[f64],
    g: &[f64],
    cauchy: &[f64],
    bounds: &ParamBox,
    hessian: &DMatrix<f64>,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    out.copy_from_slice(cauchy);
    let Scratch { free, du, l, .. } = scratch;
    free.clear();
    free.extend((0..x.len()).filter(|&i| bounds.lower[i] < cauchy[i] && cauchy[i] < bounds.upper[i]));
    if free.is_empty() {
        return;
    }
    let n = x.len();
    let k = free.len();
    let h = hessian.as_slice();
    du.clear();
    du.extend(free.iter().map(|&i| {
        let curvature: f64 = (0..n).map(|j| h[j * n + i] * (cauchy[j] - x[j])).sum();
        -(curvature + g[i])
    }));
    // Cholesky of the free-variable block, lower triangle, row-major.
    l.clear();
    l.resize(k * k, 0.0);
    for r in 0..k {
        for c in 0..=r {
            let mut v = h[free[c] * n + free[r]];
            for j in 0..c {
                v -= l[r * k + j] * l[c * k + j];
            }
            if r == c {
                if !(v > 0.0) {
                    return;
                }
                l[r * k + r] = v.sqrt();
            } else {
                l[r * k + c] = v / l[c * k + c];
            }
        }
    }
    for r in 0..k {
        let tail: f64 = (0..r).map(|j| l[r * k + j] * du[j]).sum();
        du[r] = (du[r] - tail) / l[r * k + r];
    }
    for r in (0..k).rev() {
        let tail: f64 = (r + 1..k).map(|j| l[j * k + r] * du[j]).sum();
        du[r] = (du[r] - tail) / l[r * k + r];
    }
    if du.iter().any(|v| !v.is_finite()) {
        return;
    }

    let mut alpha = 1.0_f64;
    for (k, &i) in free.iter().enumerate() {
        if du[k] > 0.0 {
            alpha = alpha.min((bounds.upper[i] - cauchy[i]) / du[k]);
        } else if du[k] < 0.0 {
            alpha = alpha.min((bounds.lower[i] - cauchy[i]) / du[k]);
        }
    }
    for (k, &i) in free.iter().enumerate() {
        out[i] += alpha * du[k];
    }
    project(out, bounds);
}

/// Buffers reused across iterations by the Cauchy and subspace steps.
struct Scratch {
    breaks: Vec<f64>,
    d: Vec<f64>,
    order: Vec<usize>,
    z: Vec<f64>,
    bd: Vec<f64>,
    free: Vec<usize>,
    du: Vec<f64>,
    l: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            breaks: vec![0.0; n],
            d: vec![0.0; n],
            order: Vec::with_capacity(n),
            z: vec![0.0; n],
            bd: vec![0.0; n],
            free: Vec::with_capacity(n),
            du: Vec::with_capacity(n),
            l: Vec::with_capacity(n * n),
        }
    }
}

struct Step {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Largest `α ≤ MAX_STEP` keeping `x + α d` inside the box.
fn feasible_step(x: &[f64], d: &[f64], bounds: &ParamBox) -> f64 {
    let mut alpha = MAX_STEP;
    for i in 0..x.len() {
        if d[i] > 0.0 {
            alpha = alpha.min((bounds.upper[i] - x[i]) / d[i]);
        } else if d[i] < 0.0 {
            alpha = alpha.min((bounds.lower[i] - x[i]) / d[i]);
        }
    }
    alpha.max(1.0)
}

/// Searches `α ∈ (0, max_step]` along `direction` for a point meeting the
/// sufficient-decrease and strong curvature conditions. Falls back to the
/// best sufficient-decrease point seen. `Err(true)` means every trial point
/// was non-finite.
fn line_search<FG>(
    eval: &mut FG,
    x: &[f64],
    f0: f64,
    direction: &[f64],
    slope0: f64,
    first_step: f64,
    max_step: f64,
    bounds: &ParamBox,
) -> Result<Step, bool>
where
    FG: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let alpha_max = max_step;
    let mut alpha = first_step.min(alpha_max);
    let (mut lo, mut f_lo, mut slope_lo) = (0.0, f0, slope0);
    let mut hi: Option<(f64, f64)> = None;
    let mut best: Option<Step> = None;
    let mut saw_finite = false;

    for _ in 0..MAX_LINE_SEARCH_EVALS {
        let mut xt: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + alpha * d).collect();
        project(&mut xt, bounds);
        let mut gt = vec![0.0; n];
        let ft = eval(&xt, &mut gt);

        if !is_finite_eval(ft, &gt) {
            hi = Some((alpha, f64::INFINITY));
        } else {
            saw_finite = true;
            let slope_t = dot(&gt, direction);
            if ft > f0 + ARMIJO_C1 * alpha * slope0 || ft >= f_lo {
                hi = Some((alpha, ft));
            } else {
                if slope_t.abs() <= -WOLFE_C2 * slope0 {
                    return Ok(Step { x: xt, f: ft, g: gt });
                }
                let better = best.as_ref().is_none_or(|b| ft < b.f);
                if better {
                    best = Some(Step {
                        x: xt.clone(),
                        f: ft,
                        g: gt.clone(),
                    });
                }
                if slope_t > 0.0 {
                    hi = Some((alpha, ft));
                } else {
                    lo = alpha;
                    f_lo = ft;
                    slope_lo = slope_t;
                    if hi.is_none() {
                        if alpha >= alpha_max {
                            break;
                        }
                        alpha = (EXTRAPOLATION_FACTOR * alpha).min(alpha_max);
                        continue;
                    }
                }
            }
        }

        let (a_hi, f_hi) = hi.expect("upper end is set on every path reaching interpolation");
        let width = a_hi - lo;
        if width <= f64::EPSILON * a_hi.max(1e-300) {
            break;
        }
        let mut next = lo + 0.5 * width;
        if f_hi.is_finite() {
            let denom = 2.0 * (f_hi - f_lo - slope_lo * width);
            if denom > 0.0 {
                let q = lo - slope_lo * width * width / denom;
                if q.is_finite() {
                    next = q.clamp(lo + 0.1 * width, a_hi - 0.1 * width);
                }
            }
        }
        alpha = next;
    }
    match best {
        Some(step) => Ok(step),
        None => Err(!saw_finite),
    }
}

/// Solves `min ‖A β − y‖²` by Householder QR.
fn least_squares(design: DMatrix<f64>, targets: &[f64]) -> Result<Vec<f64>, OptimizeError> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(OptimizeError::InsufficientData {
            needed: cols,
            got: rows,
        });
    }
    if cols == 0 {
        return Ok(Vec::new());
    }
    let qr = design.qr();
    let r = qr.r();
    let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * scale) {
        return Err(OptimizeError::Singular);
    }
    let mut rhs = DVector::from_column_slice(targets);
    qr.q_tr_mul(&mut rhs);
    let rhs = rhs.rows(0, cols).into_owned();
    let beta = r.solve_upper_triangular(&rhs).ok_or(OptimizeError::Singular)?;
    Ok(beta.iter().copied().collect())
}

fn vandermonde(lambdas: &[f64], first_power: usize, last_power: usize) -> DMatrix<f64> {
    let cols = last_power + 1 - first_power;
    DMatrix::from_fn(lambdas.len(), cols, |r, c| {
        lambdas[r].powi((first_power + c) as i32)
    })
}

/// Least-squares coefficients `(θ1, …, θd)` of `Σ θj λ^j` with no intercept.
pub fn least_squares_no_intercept(
    lambdas: &[f64],
    targets: &[f64],
    degree: usize,
) -> Result<Vec<f64>, OptimizeError> {
    if degree == 0 {
        return Ok(Vec::new());
    }
    least_squares(vandermonde(lambdas, 1, degree), targets)
}

/// Least-squares coefficients `(θ0, …, θd)` of `Σ θj λ^j`.
pub fn least_squares_polynomial(
    lambdas: &[f64],
    targets: &[f64],
    degree: usize,
) -> Result<Vec<f64>, OptimizeError> {
    least_squares(vandermonde(lambdas, 0, degree), targets)
}

/// [`least_squares_polynomial`] with residual `i` scaled by `weights[i]`.
pub fn weighted_least_squares_polynomial(
    lambdas: &[f64],
    targets: &[f64],
    weights: &[f64],
    degree: usize,
) -> Result<Vec<f64>, OptimizeError> {
    // Called hundreds of times per profiled start, so this avoids the
    // general dense path: Householder QR in one column-major buffer.
    let rows = lambdas.len();
    let cols = degree + 1;
    if rows < cols {
        return Err(OptimizeError::InsufficientData {
            needed: cols,
            got: rows,
        });
    }
    let mut a = vec![0.0; rows * (cols + 1)];
    for (r, ((&l, &t), &w)) in lambdas.iter().zip(targets).zip(weights).enumerate() {
        let mut power = w;
        for c in 0..cols {
            a[c * rows + r] = power;
            power *= l;
        }
        a[cols * rows + r] = t * w;
    }
    let mut diag = vec![0.0; cols];
    for k in 0..cols {
        let col = &a[k * rows + k..(k + 1) * rows];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = if col[0] > 0.0 { -norm } else { norm };
        diag[k] = alpha.abs();
        if norm == 0.0 {
            continue;
        }
        // v = x - alpha e1, stored in place of the column.
        a[k * rows + k] -= alpha;
        let vnorm2: f64 = a[k * rows + k..(k + 1) * rows].iter().map(|v| v * v).sum();
        for j in k + 1..=cols {
            let dot: f64 = (k..rows).map(|i| a[k * rows + i] * a[j * rows + i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                a[j * rows + i] -= f * a[k * rows + i];
            }
        }
        a[k * rows + k] = alpha;
    }
    let scale = diag.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) || diag.iter().any(|d| *d <= RANK_TOLERANCE * scale) {
        return Err(OptimizeError::Singular);
    }
    let mut beta = vec![0.0; cols];
    for k in (0..cols).rev() {
        let tail: f64 = (k + 1..cols).map(|j| a[j * rows + k] * beta[j]).sum();
        beta[k] = (a[cols * rows + k] - tail) / a[k * rows + k];
    }
    Ok(beta)
}

/// Unconstrained polynomial least squares, `(θ0, …, θd)`.
pub fn ols_polynomial(series: &ScaleSeries, degree: usize) -> Result<Vec<f64>, OptimizeError> {
    if series.len() < degree + 1 {
        return Err(OptimizeError::InsufficientData {
            needed: degree + 1,
            got: series.len(),
        });
    }
    least_squares_polynomial(series.lambdas(), series.values(), degree)
}

/// Exact least squares subject to `-1 <= θ0 <= 1`.
///
/// The problem is a convex quadratic with a single box-constrained
/// coordinate, so the minimizer either is the unconstrained one or has `θ0`
/// at the violated endpoint with the remaining coefficients refit.
pub fn bounded_polynomial_fit(series: &ScaleSeries, degree: usize) -> Result<Vec<f64>, OptimizeError> {
    let ols = ols_polynomial(series, degree)?;
    let intercept = ols[0];
    if (-1.0..=1.0).contains(&intercept) {
        return Ok(ols);
    }
    let pinned = intercept.clamp(-1.0, 1.0);
    let shifted: Vec<f64> = series.values().iter().map(|y| y - pinned).collect();
    let rest = least_squares_no_intercept(series.lambdas(), &shifted, degree)?;
    let mut out = Vec::with_capacity(degree + 1);
    out.push(pinned);
    out.extend(rest);
    Ok(out)
}

//! Predictor-corrector time stepping on a uniform grid.
//!
//! One corrector pass per step (P-E-C-E). Every scheme shares the first step;
//! from the second step on the memory integral is evaluated either on the
//! full grid (`Baseline`), on reduced nodes against the single kernel
//! (`SingleForm`, `α ≤ 1`), or on reduced nodes against the difference kernel
//! (`DiffForm`, `α ∈ (0,2)`).
//!
//! Right-hand side values at accepted grid points are memoized, so each
//! `(t_j, x_j)` pair costs one evaluation plus one per predictor. The
//! node-usage statistic `M` counts node *uses* per step; distinct evaluations
//! are reported separately.

use crate::mesh::{self, HeightAdvance, KernelForm, MeshError, NodeSet, SelectorConfig};
use crate::problem::{RhsError, TemperedIvp};
use crate::specfun;
use crate::weights::{self, WeightError, WeightMode};
use crate::{cast, cast_usize, Real};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Abort threshold of the divergence guard.
const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("right-hand side failed at step {step}: {source}")]
    Rhs { step: usize, source: RhsError },
    #[error("solution diverged at step {step} (|x| = {value:e} exceeds {DIVERGENCE_LIMIT:e})")]
    Diverged { step: usize, value: f64 },
}

/// Which predictor-corrector scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Full-grid memory sum, quadratic total cost.
    Baseline,
    /// Single-kernel form on reduced nodes, `α ≤ 1`.
    SingleForm,
    /// Difference-kernel form on reduced nodes, `α ∈ (0, 2)`.
    DiffForm,
}

/// Complete stepping configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<R: Real> {
    pub scheme: Scheme,
    pub selector: SelectorConfig<R>,
    pub h: R,
    /// Weight handling for the difference form; ignored elsewhere.
    pub weight_mode: WeightMode,
    /// Advance-formula reading for the single-kernel equal-height selector.
    pub height_advance: HeightAdvance,
}

impl<R: Real> SolverConfig<R> {
    pub fn new(scheme: Scheme, selector: SelectorConfig<R>, h: R) -> Self {
        Self {
            scheme,
            selector,
            h,
            weight_mode: WeightMode::Derived,
            height_advance: HeightAdvance::Derived,
        }
    }

    pub fn with_weight_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    pub fn with_height_advance(mut self, advance: HeightAdvance) -> Self {
        self.height_advance = advance;
        self
    }
}

/// Recommended increment `Δy`/`Δs` per scheme and `α` band, as a multiple of
/// `h`: close to `h` when the kernel is mild, larger for small `α` where the
/// single kernel flattens, much smaller than `h` for the difference kernel
/// below `α = 1`, and `10h` above it.
pub fn recommended_delta<R: Real>(scheme: Scheme, alpha: R, h: R) -> R {
    let a = alpha.to_f64().unwrap_or(0.5);
    let factor = match scheme {
        Scheme::Baseline => 1.0,
        Scheme::SingleForm => {
            if a < 0.3 {
                10.0
            } else if a < 0.6 {
                2.5
            } else {
                1.0
            }
        }
        Scheme::DiffForm => {
            if a > 1.0 {
                10.0
            } else if a < 0.3 {
                0.5
            } else if a < 0.6 {
                0.1
            } else {
                0.02
            }
        }
    };
    cast::<R>(factor) * h
}

/// Node-usage statistics of one solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeUsage {
    /// Quadrature node uses per target step (history nodes plus one for
    /// `t_{n+1}`), indexed by target step `1..=N`.
    pub per_step: Vec<usize>,
    /// Total node uses `M` over the whole run.
    pub total: usize,
    /// Distinct right-hand side evaluations actually performed.
    pub distinct_evals: usize,
}

/// Trajectory and bookkeeping of one solve.
#[derive(Debug, Clone)]
pub struct SolveResult<R: Real> {
    /// Grid times `t_0..t_N`.
    pub times: Vec<R>,
    /// Accepted values `x_0..x_N`.
    pub values: Vec<R>,
    /// Predictor values `x^{Pr}_1..x^{Pr}_N`.
    pub predictors: Vec<R>,
    pub node_usage: NodeUsage,
    pub wall_time: Duration,
}

/// Neumaier-compensated accumulator for the history sums, so weight
/// cancellation error stays below scheme error on long runs.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum<R> {
    sum: R,
    compensation: R,
}

impl<R: Real> NeumaierSum<R> {
    pub(crate) fn new() -> Self {
        Self {
            sum: R::zero(),
            compensation: R::zero(),
        }
    }

    pub(crate) fn add(&mut self, value: R) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> R {
        self.sum + self.compensation
    }
}

fn unit_weight<R: Real>(alpha: R, h: R) -> R {
    h.powf(alpha) / specfun::gamma(alpha + cast::<R>(2.0)).expect("alpha + 2 is off the poles")
}

/// First step of every scheme: rectangle predictor, trapezoidal corrector.
///
/// Returns `(x_1^{Pr}, x_1)`.
pub fn first_step<R: Real>(ivp: &TemperedIvp<R>, h: R) -> Result<(R, R), SolveError> {
    if !(h > R::zero() && h <= ivp.horizon()) {
        return Err(SolveError::InvalidConfig(format!(
            "step length {} outside (0, T]",
            h.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let f0 = ivp
        .eval_rhs(R::zero(), ivp.init_coeffs()[0])
        .map_err(|source| SolveError::Rhs { step: 0, source })?;
    first_step_given_f0(ivp, h, f0)
}

fn first_step_given_f0<R: Real>(ivp: &TemperedIvp<R>, h: R, f0: R) -> Result<(R, R), SolveError> {
    let alpha = ivp.alpha();
    let damp = (-ivp.lambda() * h).exp();
    let x0_t1 = ivp.x0(h);
    let pred = x0_t1
        + h.powf(alpha) / specfun::gamma(alpha + R::one()).expect("alpha + 1 is off the poles")
            * damp
            * f0;
    let f_pred = ivp
        .eval_rhs(h, pred)
        .map_err(|source| SolveError::Rhs { step: 1, source })?;
    let corr = x0_t1 + unit_weight(alpha, h) * (f_pred + alpha * damp * f0);
    Ok((pred, corr))
}

/// Shared predictor-corrector assembly for the single-kernel forms.
///
/// `w` are the history weights (last one bundling the corrector one-step
/// term), `b_last` the predictor weight on `f(t_n, x_n)`, `f_nodes` the
/// memoized right-hand side values at the history nodes.
fn single_kernel_pc<R: Real>(
    x0_next: R,
    unit: R,
    w: &[R],
    b_last: R,
    f_nodes: &[R],
    mut f_at_next: impl FnMut(R) -> Result<R, SolveError>,
) -> Result<(R, R), SolveError> {
    debug_assert_eq!(w.len(), f_nodes.len());
    let m = w.len() - 1;
    let mut shared = NeumaierSum::new();
    for i in 0..m {
        shared.add(w[i] * f_nodes[i]);
    }
    let mut pred_sum = shared;
    pred_sum.add(b_last * f_nodes[m]);
    let pred = x0_next + unit * pred_sum.total();
    let f_pred = f_at_next(pred)?;
    let mut corr_sum = shared;
    corr_sum.add(w[m] * f_nodes[m]);
    corr_sum.add(f_pred);
    let corr = x0_next + unit * corr_sum.total();
    Ok((pred, corr))
}

/// One step of the full-memory baseline scheme, `n ≥ 1`.
///
/// `f_grid[j]` must hold `f(t_j, x_j)` for `j = 0..=n`.
pub fn step_baseline<R: Real>(
    ivp: &TemperedIvp<R>,
    h: R,
    n: usize,
    f_grid: &[R],
) -> Result<(R, R), SolveError> {
    debug_assert!(f_grid.len() > n);
    let alpha = ivp.alpha();
    let t_next = cast_usize::<R>(n + 1) * h;
    let w = weights::weights_full(n, alpha, ivp.lambda(), h)?;
    let b_last = w.values[n] + (-ivp.lambda() * h).exp();
    single_kernel_pc(
        ivp.x0(t_next),
        unit_weight(alpha, h),
        &w.values,
        b_last,
        &f_grid[..=n],
        |pred| {
            ivp.eval_rhs(t_next, pred)
                .map_err(|source| SolveError::Rhs { step: n + 1, source })
        },
    )
}

/// One step of the single-kernel reduced-node scheme, `α ≤ 1`, `n ≥ 1`.
///
/// `f_nodes` holds `f(t_{n_i}, x_{n_i})` aligned with `nodes.indices`.
pub fn step_single_form<R: Real>(
    ivp: &TemperedIvp<R>,
    h: R,
    nodes: &NodeSet,
    f_nodes: &[R],
) -> Result<(R, R), SolveError> {
    let n = nodes.target_step;
    let alpha = ivp.alpha();
    let t_next = cast_usize::<R>(n + 1) * h;
    let (w, b_last) = weights::weights_single(nodes, alpha, ivp.lambda(), h)?;
    single_kernel_pc(
        ivp.x0(t_next),
        unit_weight(alpha, h),
        &w.values,
        b_last,
        f_nodes,
        |pred| {
            ivp.eval_rhs(t_next, pred)
                .map_err(|source| SolveError::Rhs { step: n + 1, source })
        },
    )
}

/// One step of the difference-kernel reduced-node scheme, `α ∈ (0,2)`,
/// `n ≥ 1`.
///
/// On top of the history sum the scheme adds `(α+1) e^{-λh} f(t_n, x_n)` in
/// the predictor and `α e^{-λh} f(t_n, x_n)` in the corrector, and the base
/// value is `x_n + x_0(t_{n+1}) - x_0(t_n)`.
pub fn step_diff_form<R: Real>(
    ivp: &TemperedIvp<R>,
    h: R,
    nodes: &NodeSet,
    x_n: R,
    f_nodes: &[R],
    mode: WeightMode,
) -> Result<(R, R), SolveError> {
    debug_assert_eq!(f_nodes.len(), nodes.len());
    let n = nodes.target_step;
    let alpha = ivp.alpha();
    let t_cur = cast_usize::<R>(n) * h;
    let t_next = cast_usize::<R>(n + 1) * h;
    let w = weights::weights_diff(nodes, alpha, ivp.lambda(), h, mode)?;
    let unit = unit_weight(alpha, h);
    let damp = (-ivp.lambda() * h).exp();
    let base = x_n + ivp.x0(t_next) - ivp.x0(t_cur);
    let m = w.values.len() - 1;

    let mut shared = NeumaierSum::new();
    for i in 0..m {
        shared.add(w.values[i] * f_nodes[i]);
    }
    let mut pred_sum = shared;
    pred_sum.add((w.values[m] + (alpha + R::one()) * damp) * f_nodes[m]);
    let pred = base + unit * pred_sum.total();
    let f_pred = ivp
        .eval_rhs(t_next, pred)
        .map_err(|source| SolveError::Rhs { step: n + 1, source })?;
    let mut corr_sum = shared;
    corr_sum.add((w.values[m] + alpha * damp) * f_nodes[m]);
    corr_sum.add(f_pred);
    let corr = base + unit * corr_sum.total();
    Ok((pred, corr))
}

fn validate_config<R: Real>(
    ivp: &TemperedIvp<R>,
    config: &SolverConfig<R>,
) -> Result<usize, SolveError> {
    if !(config.h > R::zero()) {
        return Err(SolveError::InvalidConfig("h must be positive".into()));
    }
    let ratio = (ivp.horizon() / config.h).to_f64().unwrap_or(f64::NAN);
    let n_steps = ratio.round();
    if !(n_steps >= 1.0) || (ratio - n_steps).abs() > 1e-6 * n_steps.max(1.0) {
        return Err(SolveError::InvalidConfig(format!(
            "T/h = {ratio} is not a whole number of steps"
        )));
    }
    match config.scheme {
        Scheme::SingleForm if ivp.alpha() > R::one() => Err(SolveError::InvalidConfig(
            "the single-kernel form requires alpha <= 1".into(),
        )),
        Scheme::DiffForm if ivp.alpha() > R::one() && !(ivp.lambda() > R::zero()) => {
            Err(SolveError::InvalidConfig(
                "the difference form requires lambda > 0 when alpha > 1".into(),
            ))
        }
        _ => Ok(n_steps as usize),
    }
}

/// Runs the configured scheme over `[0, T]` and collects the trajectory plus
/// node-usage statistics.
pub fn solve<R: Real>(
    ivp: &TemperedIvp<R>,
    config: &SolverConfig<R>,
) -> Result<SolveResult<R>, SolveError> {
    let n_steps = validate_config(ivp, config)?;
    let h = config.h;
    let started = Instant::now();

    let mut values = Vec::with_capacity(n_steps + 1);
    let mut predictors = Vec::with_capacity(n_steps);
    let mut per_step = Vec::with_capacity(n_steps);
    values.push(ivp.init_coeffs()[0]);

    // Lazy memo of f at accepted grid values.
    let mut f_grid: Vec<Option<R>> = vec![None; n_steps + 1];
    let mut distinct = 0usize;

    let f0 = ivp
        .eval_rhs(R::zero(), values[0])
        .map_err(|source| SolveError::Rhs { step: 0, source })?;
    f_grid[0] = Some(f0);
    let (pred, corr) = first_step_given_f0(ivp, h, f0)?;
    distinct += 2; // f(0, x_0) and the predictor evaluation
    guard(corr, 1)?;
    values.push(corr);
    predictors.push(pred);
    per_step.push(2);

    for n in 1..n_steps {
        let nodes = match config.scheme {
            Scheme::Baseline => mesh::select_full(n)?,
            Scheme::SingleForm => mesh::select_nodes(
                KernelForm::Single,
                &config.selector,
                n,
                h,
                ivp.alpha(),
                ivp.lambda(),
                config.height_advance,
            )?,
            Scheme::DiffForm => mesh::select_nodes(
                KernelForm::Diff,
                &config.selector,
                n,
                h,
                ivp.alpha(),
                ivp.lambda(),
                config.height_advance,
            )?,
        };
        // Memoized f at every history node.
        let mut f_nodes = Vec::with_capacity(nodes.len());
        for &j in &nodes.indices {
            let f = match f_grid[j] {
                Some(f) => f,
                None => {
                    let f = ivp
                        .eval_rhs(cast_usize::<R>(j) * h, values[j])
                        .map_err(|source| SolveError::Rhs { step: j, source })?;
                    f_grid[j] = Some(f);
                    distinct += 1;
                    f
                }
            };
            f_nodes.push(f);
        }
        let (pred, corr) = match config.scheme {
            Scheme::Baseline => step_baseline(ivp, h, n, &f_nodes)?,
            Scheme::SingleForm => step_single_form(ivp, h, &nodes, &f_nodes)?,
            Scheme::DiffForm => {
                step_diff_form(ivp, h, &nodes, values[n], &f_nodes, config.weight_mode)?
            }
        };
        distinct += 1; // predictor evaluation at t_{n+1}
        guard(pred, n + 1)?;
        guard(corr, n + 1)?;
        values.push(corr);
        predictors.push(pred);
        per_step.push(nodes.len() + 1);
    }

    let wall_time = started.elapsed();
    let total = per_step.iter().sum();
    let times = (0..=n_steps).map(|j| cast_usize::<R>(j) * h).collect();
    Ok(SolveResult {
        times,
        values,
        predictors,
        node_usage: NodeUsage {
            per_step,
            total,
            distinct_evals: distinct,
        },
        wall_time,
    })
}

fn guard<R: Real>(x: R, step: usize) -> Result<(), SolveError> {
    let magnitude = x.abs().to_f64().unwrap_or(f64::INFINITY);
    if !x.is_finite() || magnitude > DIVERGENCE_LIMIT {
        return Err(SolveError::Diverged {
            step,
            value: magnitude,
        });
    }
    Ok(())
}

//! Problem instances: the tempered fractional initial value problem
//!
//! ```text
//!     D^{α,λ} x(t) = f(t, x(t)),   d^k/dt^k (e^{λt} x(t))|_{t=0} = c_k,
//! ```
//!
//! for `k = 0, …, ⌈α⌉-1`, together with the three builtin benchmark problems
//! and their exact solutions.
//!
//! States are scalar. Vector-valued systems are out of scope; the natural
//! extension point is replacing the scalar state by a small vector type in
//! [`RhsFn`] and the solver.

use crate::specfun::{self, MlParams};
use crate::{cast, Real};
use std::sync::Arc;
use thiserror::Error;

/// Validation errors for problem construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("alpha must lie in (0, 2), got {0}")]
    AlphaOutOfRange(f64),
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("need {expected} initial coefficient(s) for this alpha, got {got}")]
    InitCoeffCount { expected: usize, got: usize },
    #[error("unknown builtin example id {0}, valid ids are 1, 2, 3")]
    UnknownExample(u32),
}

/// Failure while evaluating a right-hand side, e.g. a fractional power of a
/// negative quantity.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("right-hand side evaluation failed: {message}")]
pub struct RhsError {
    pub message: String,
}

impl RhsError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Right-hand side `f(t, x)`. Must be pure; this is a documented contract,
/// not enforced.
pub type RhsFn<R> = Arc<dyn Fn(R, R) -> Result<R, RhsError> + Send + Sync>;

/// A tempered fractional initial value problem on `[0, T]`.
///
/// Immutable after construction and cheap to clone; distinct solves may share
/// one instance across threads.
#[derive(Clone)]
pub struct TemperedIvp<R: Real> {
    alpha: R,
    lambda: R,
    horizon: R,
    init_coeffs: Vec<R>,
    rhs: RhsFn<R>,
}

impl<R: Real> TemperedIvp<R> {
    /// Validates and builds a problem instance.
    ///
    /// Requires `0 < alpha < 2`, `lambda ≥ 0`, `horizon > 0`, and exactly
    /// `⌈alpha⌉` initial coefficients (one for `α ≤ 1`, two for `α > 1`).
    pub fn new(
        alpha: R,
        lambda: R,
        horizon: R,
        init_coeffs: Vec<R>,
        rhs: RhsFn<R>,
    ) -> Result<Self, ProblemError> {
        if !(alpha > R::zero() && alpha < cast::<R>(2.0)) {
            return Err(ProblemError::AlphaOutOfRange(
                alpha.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(lambda >= R::zero()) {
            return Err(ProblemError::NegativeLambda(
                lambda.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(horizon > R::zero()) {
            return Err(ProblemError::NonPositiveHorizon(
                horizon.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let expected = if alpha <= R::one() { 1 } else { 2 };
        if init_coeffs.len() != expected {
            return Err(ProblemError::InitCoeffCount {
                expected,
                got: init_coeffs.len(),
            });
        }
        Ok(Self {
            alpha,
            lambda,
            horizon,
            init_coeffs,
            rhs,
        })
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    pub fn lambda(&self) -> R {
        self.lambda
    }

    pub fn horizon(&self) -> R {
        self.horizon
    }

    pub fn init_coeffs(&self) -> &[R] {
        &self.init_coeffs
    }

    /// Evaluates `f(t, x)`.
    pub fn eval_rhs(&self, t: R, x: R) -> Result<R, RhsError> {
        (self.rhs)(t, x)
    }

    /// The initial-history term `x_0(t) = Σ_k c_k e^{-λt} t^k / k!`.
    ///
    /// Meaningful for `0 ≤ t ≤ T`.
    pub fn x0(&self, t: R) -> R {
        debug_assert!(t >= R::zero() && t <= self.horizon);
        let damp = (-self.lambda * t).exp();
        let mut sum = R::zero();
        let mut t_pow_over_fact = R::one(); // t^k / k!
        for (k, &c) in self.init_coeffs.iter().enumerate() {
            if k > 0 {
                t_pow_over_fact = t_pow_over_fact * t / crate::cast_usize::<R>(k);
            }
            sum = sum + c * t_pow_over_fact;
        }
        damp * sum
    }
}

impl<R: Real> core::fmt::Debug for TemperedIvp<R> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TemperedIvp")
            .field("alpha", &self.alpha)
            .field("lambda", &self.lambda)
            .field("horizon", &self.horizon)
            .field("init_coeffs", &self.init_coeffs)
            .finish_non_exhaustive()
    }
}

/// A closed-form exact solution bundled with a benchmark problem.
///
/// Used for error measurement only; the solver never consults it.
#[derive(Clone)]
pub struct ExactSolution<R: Real> {
    value: Arc<dyn Fn(R) -> R + Send + Sync>,
    pub description: String,
}

impl<R: Real> ExactSolution<R> {
    pub fn new(value: Arc<dyn Fn(R) -> R + Send + Sync>, description: impl Into<String>) -> Self {
        Self {
            value,
            description: description.into(),
        }
    }

    pub fn eval(&self, t: R) -> R {
        (self.value)(t)
    }
}

impl<R: Real> core::fmt::Debug for ExactSolution<R> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ExactSolution")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

fn gamma_of<R: Real>(x: R) -> R {
    specfun::gamma(x).expect("argument stays off the gamma poles for admissible alpha")
}

/// Builds one of the three builtin benchmark problems, paired with its exact
/// solution.
///
/// * `1` — manufactured nonlinear problem whose solution
///   `e^{-λt}(t^8 - 3 t^{4+α/2} + (9/4) t^α)` has a smooth fractional
///   derivative; the right-hand side contains `(e^{λt}x)^{3/2}`, which fails
///   with an [`RhsError`] if the state drifts negative.
/// * `2` — linear problem with smooth solution `e^{-λt}(t² - t)` but a
///   right-hand side whose first derivative is unbounded at `t = 0`; the
///   forcing changes form across `α = 1`.
/// * `3` — fractional relaxation `D^{α,λ} x = -x` with solution
///   `e^{-λt} E_{α,1}(-t^α)`.
pub fn builtin_example<R: Real>(
    id: u32,
    alpha: R,
    lambda: R,
    horizon: R,
) -> Result<(TemperedIvp<R>, ExactSolution<R>), ProblemError> {
    let one = R::one();
    let two = cast::<R>(2.0);
    match id {
        1 => {
            let a1 = gamma_of(cast::<R>(9.0)) / gamma_of(cast::<R>(9.0) - alpha);
            let a2 = cast::<R>(3.0) * gamma_of(cast::<R>(5.0) + alpha / two)
                / gamma_of(cast::<R>(5.0) - alpha / two);
            let a3 = cast::<R>(2.25) * gamma_of(alpha + one);
            let al = alpha;
            let lam = lambda;
            let rhs: RhsFn<R> = Arc::new(move |t: R, x: R| {
                let half_alpha = al / two;
                let grown = (lam * t).exp() * x; // e^{λt} x
                if grown < R::zero() {
                    return Err(RhsError::new(format!(
                        "power 3/2 of negative value {} at t = {}",
                        grown.to_f64().unwrap_or(f64::NAN),
                        t.to_f64().unwrap_or(f64::NAN)
                    )));
                }
                let cube_base = cast::<R>(1.5) * t.powf(half_alpha) - t.powi(4);
                let bracket = a1 * t.powf(cast::<R>(8.0) - al) - a2 * t.powf(cast::<R>(4.0) - half_alpha)
                    + a3
                    + cube_base.powi(3)
                    - grown.powf(cast::<R>(1.5));
                Ok((-lam * t).exp() * bracket)
            });
            let init = if alpha <= one {
                vec![R::zero()]
            } else {
                vec![R::zero(), R::zero()]
            };
            let ivp = TemperedIvp::new(alpha, lambda, horizon, init, rhs)?;
            let al = alpha;
            let lam = lambda;
            let exact = ExactSolution::new(
                Arc::new(move |t: R| {
                    (-lam * t).exp()
                        * (t.powi(8) - cast::<R>(3.0) * t.powf(cast::<R>(4.0) + al / two)
                            + cast::<R>(2.25) * t.powf(al))
                }),
                "x(t) = e^{-lambda t} (t^8 - 3 t^{4+alpha/2} + (9/4) t^alpha)",
            );
            Ok((ivp, exact))
        }
        2 => {
            let c1 = two / gamma_of(cast::<R>(3.0) - alpha);
            let al = alpha;
            let lam = lambda;
            let rhs: RhsFn<R> = if alpha > one {
                Arc::new(move |t: R, x: R| {
                    let bracket = c1 * t.powf(two - al) - (lam * t).exp() * x + t * t - t;
                    Ok((-lam * t).exp() * bracket)
                })
            } else {
                let c2 = one / gamma_of(two - alpha);
                Arc::new(move |t: R, x: R| {
                    let bracket = c1 * t.powf(two - al) - c2 * t.powf(one - al)
                        - (lam * t).exp() * x
                        + t * t
                        - t;
                    Ok((-lam * t).exp() * bracket)
                })
            };
            let init = if alpha <= one {
                vec![R::zero()]
            } else {
                vec![R::zero(), -one]
            };
            let ivp = TemperedIvp::new(alpha, lambda, horizon, init, rhs)?;
            let lam = lambda;
            let exact = ExactSolution::new(
                Arc::new(move |t: R| (-lam * t).exp() * (t * t - t)),
                "x(t) = e^{-lambda t} (t^2 - t)",
            );
            Ok((ivp, exact))
        }
        3 => {
            let rhs: RhsFn<R> = Arc::new(move |_t: R, x: R| Ok(-x));
            let init = if alpha <= one {
                vec![one]
            } else {
                vec![one, R::zero()]
            };
            let ivp = TemperedIvp::new(alpha, lambda, horizon, init, rhs)?;
            let al = alpha;
            let lam = lambda;
            let exact = ExactSolution::new(
                Arc::new(move |t: R| {
                    let z = -t.powf(al);
                    let ml = specfun::mittag_leffler(&MlParams::new(al, one, z))
                        .expect("series converges for desk-scale t^alpha");
                    (-lam * t).exp() * ml
                }),
                "x(t) = e^{-lambda t} E_{alpha,1}(-t^alpha)",
            );
            Ok((ivp, exact))
        }
        other => Err(ProblemError::UnknownExample(other)),
    }
}

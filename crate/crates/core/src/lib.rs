//! Solver library and benchmark harness for tempered fractional ordinary
//! differential equations
//!
//! ```text
//!     D^{α,λ} x(t) = f(t, x(t)),    0 < t < T,   0 < α < 2,  λ ≥ 0,
//! ```
//!
//! where `D^{α,λ}` is the Caputo tempered fractional derivative. The equation
//! is solved through its Volterra integral reformulation with one-pass
//! predictor-corrector (P-E-C-E) time stepping on a uniform grid. The memory
//! integral over `[0, t_n]` is either evaluated on the full grid (quadratic
//! total cost in the number of steps) or on a reduced set of history nodes
//! chosen per step by equidistributing the kernel height or the kernel area,
//! which brings the total cost down to linear growth in time.
//!
//! Module map:
//!
//! * [`problem`] — problem instances, initial-history term, builtin benchmark
//!   problems with exact solutions.
//! * [`specfun`] — gamma and generalized Mittag-Leffler functions.
//! * [`kernel`] — the two memory kernels and their sign structure.
//! * [`mesh`] — history node selection (full, equal-height, equal-area).
//! * [`weights`] — product trapezoidal quadrature weights for both kernels.
//! * [`solver`] — the predictor-corrector schemes and node-usage accounting.
//! * [`rhs_expr`] — a small expression language for user-defined right-hand
//!   sides.
//! * [`bench`] — step-size sweeps, error/order tables, CSV output. The `tfode`
//!   binary wraps this module.
//!
//! Core numerics are generic over the scalar type through the [`Real`] trait;
//! the benchmark layer and the CLI work in `f64`.

pub mod bench;
pub mod kernel;
pub mod mesh;
pub mod problem;
pub mod rhs_expr;
pub mod solver;
pub mod specfun;
pub mod weights;

/// Scalar type the numerical kernels are generic over.
///
/// Implemented for `f32` and `f64` through the blanket impl. Test tolerances
/// throughout the crate assume `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + core::fmt::Debug
    + core::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FloatConst
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + num_traits::NumAssign
        + core::fmt::Debug
        + core::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Lossy conversion from an `f64` constant into the working scalar.
pub(crate) fn cast<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 constant must convert into the scalar type")
}

/// Conversion of a grid index or count into the working scalar.
pub(crate) fn cast_usize<R: Real>(n: usize) -> R {
    R::from_usize(n).expect("index must convert into the scalar type")
}

// `f64` instantiations of the main types, as used by `bench` and the CLI.
pub type TemperedIvp64 = problem::TemperedIvp<f64>;
pub type ExactSolution64 = problem::ExactSolution<f64>;
pub type MlParams64 = specfun::MlParams<f64>;
pub type SelectorConfig64 = mesh::SelectorConfig<f64>;
pub type WeightVector64 = weights::WeightVector<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type SolveResult64 = solver::SolveResult<f64>;

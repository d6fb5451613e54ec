//! Product trapezoidal quadrature weights for the memory integral, in units
//! of `h^α / Γ(α+2)`.
//!
//! On every node interval the smooth factor `e^{-λ(t_p-τ)} g(τ)` is replaced
//! by the linear interpolant of its endpoint values while the power kernel
//! `(t_p-τ)^{α-1}` is integrated exactly. With `A = p - n_j` and
//! `B = p - n_{j+1}` (in grid units) the two hat moments of one interval come
//! out as
//!
//! ```text
//!   left  = α A^α - (B/d)(A^α - B^α)         weight on g(t_{n_j})
//!   right = (A/d)(A^α - B^α) - α B^α         weight on g(t_{n_{j+1}})
//! ```
//!
//! with `d = A - B`. Power differences are evaluated through [`pow_diff`] to
//! limit cancellation between large close bases.

use crate::mesh::NodeSet;
use crate::{cast, cast_usize, Real};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("node set rejected: {0}")]
    BadNodeSet(String),
    #[error("target step must satisfy n >= 1, got {0}")]
    TargetStepTooSmall(usize),
    #[error("single-kernel weights need a node set starting at zero, got {0}")]
    NonZeroStart(usize),
}

/// Which integral form a weight vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightForm {
    Single,
    Diff,
    Full,
}

/// How the difference-form weights treat the last history node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Last-interval weights assembled from the defining integrals; the
    /// one-step corrector term stays outside and the stepping scheme adds it
    /// explicitly. Default.
    #[default]
    Derived,
    /// Keeps the transcribed bookkeeping that folds the one-step corrector
    /// term into the final history weight of the target kernel and lowers the
    /// shifted kernel's final weight by one. Retained for comparison runs.
    Literal,
}

/// Quadrature weights aligned with a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<R: Real> {
    pub values: Vec<R>,
    pub form: WeightForm,
    /// True when the last weight bundles the single-step corrector
    /// contribution `α e^{-λh}`, which the stepping scheme must then not add
    /// again.
    pub includes_last_bundle: bool,
}

/// `a^p - b^p` for `a ≥ b ≥ 0`, switching to `a^p (1 - (b/a)^p)` for large
/// bases where the direct difference loses digits.
fn pow_diff<R: Real>(a: R, b: R, p: R) -> R {
    let threshold = cast::<R>(1e4);
    if a > threshold && b > R::zero() {
        a.powf(p) * (R::one() - (b / a).powf(p))
    } else {
        a.powf(p) - b.powf(p)
    }
}

fn validate_nodes(nodes: &NodeSet) -> Result<(), WeightError> {
    if nodes.target_step < 1 {
        return Err(WeightError::TargetStepTooSmall(nodes.target_step));
    }
    nodes
        .validate()
        .map_err(|e| WeightError::BadNodeSet(e.to_string()))?;
    Ok(())
}

/// Weights `a_{0..m}` for the single-kernel form plus the predictor weight
/// `b = a_m + e^{-λh}` on `f(t_n, x_n)`.
///
/// The last weight `a_m` bundles the one-step corrector term `α e^{-λh}`;
/// the corrector adds only the unit-weight `f(t_{n+1}, ·)` term on top.
pub fn weights_single<R: Real>(
    nodes: &NodeSet,
    alpha: R,
    lambda: R,
    h: R,
) -> Result<(WeightVector<R>, R), WeightError> {
    validate_nodes(nodes)?;
    if nodes.start_index != 0 {
        return Err(WeightError::NonZeroStart(nodes.start_index));
    }
    let n = nodes.target_step;
    let idx = &nodes.indices;
    let m = idx.len() - 1;
    let one = R::one();
    let p = alpha + one;
    let decay = |k: usize| (-lambda * cast_usize::<R>(k) * h).exp();

    let mut values = Vec::with_capacity(m + 1);
    // First node: left hat of the first interval.
    let n1 = idx[1];
    let a_big = cast_usize::<R>(n + 1);
    let first = (cast_usize::<R>(n + 1 - n1).powf(p)
        - a_big.powf(alpha) * (a_big - p * cast_usize::<R>(n1)))
        / cast_usize::<R>(n1);
    values.push(decay(n + 1) * first);
    // Interior nodes: right hat of the interval before, left hat of the one
    // after, written as divided first differences of the power antiderivative.
    for i in 1..m {
        let b_prev = cast_usize::<R>(n + 1 - idx[i - 1]);
        let b_cur = cast_usize::<R>(n + 1 - idx[i]);
        let b_next = cast_usize::<R>(n + 1 - idx[i + 1]);
        let g_prev = cast_usize::<R>(idx[i] - idx[i - 1]);
        let g_next = cast_usize::<R>(idx[i + 1] - idx[i]);
        let val = pow_diff(b_prev, b_cur, p) / g_prev - pow_diff(b_cur, b_next, p) / g_next;
        values.push(decay(n + 1 - idx[i]) * val);
    }
    // Last node, with the bundled single-step corrector term.
    let reach = cast_usize::<R>(n + 1 - idx[m - 1]);
    let gap = cast_usize::<R>(n - idx[m - 1]);
    values.push(decay(1) * (reach.powf(p) - reach) / gap);

    let b_last = values[m] + decay(1);
    Ok((
        WeightVector {
            values,
            form: WeightForm::Single,
            includes_last_bundle: true,
        },
        b_last,
    ))
}

/// Full-mesh weights `d_{0..n}` for the single-kernel form.
pub fn weights_full<R: Real>(
    n: usize,
    alpha: R,
    lambda: R,
    h: R,
) -> Result<WeightVector<R>, WeightError> {
    if n < 1 {
        return Err(WeightError::TargetStepTooSmall(n));
    }
    let one = R::one();
    let p = alpha + one;
    let decay = |k: usize| (-lambda * cast_usize::<R>(k) * h).exp();
    let mut values = Vec::with_capacity(n + 1);
    let a_big = cast_usize::<R>(n + 1);
    values.push(decay(n + 1) * (cast_usize::<R>(n).powf(p) - a_big.powf(alpha) * (a_big - p)));
    for i in 1..=n {
        let far = cast_usize::<R>(n + 2 - i);
        let mid = cast_usize::<R>(n + 1 - i);
        let near = cast_usize::<R>(n - i);
        values.push(decay(n + 1 - i) * (pow_diff(far, mid, p) - pow_diff(mid, near, p)));
    }
    Ok(WeightVector {
        values,
        form: WeightForm::Full,
        includes_last_bundle: true,
    })
}

/// Difference-form weights aligned with a node set: for each node the weight
/// of the target kernel `(t_{n+1}-τ)^{α-1}` minus the weight of the shifted
/// kernel `(t_n-τ)^{α-1}`, each with its own exponential damping.
///
/// In [`WeightMode::Derived`] the result carries history contributions only;
/// the stepping scheme adds the explicit one-step terms `(α+1) e^{-λh}`
/// (predictor) and `α e^{-λh}` (corrector) on `f(t_n, x_n)`.
pub fn weights_diff<R: Real>(
    nodes: &NodeSet,
    alpha: R,
    lambda: R,
    h: R,
    mode: WeightMode,
) -> Result<WeightVector<R>, WeightError> {
    validate_nodes(nodes)?;
    let n = nodes.target_step;
    let idx = &nodes.indices;
    let m = idx.len() - 1;
    let one = R::one();
    let decay = |k: usize| (-lambda * cast_usize::<R>(k) * h).exp();

    let mut values = vec![R::zero(); m + 1];
    for j in 0..m {
        let d = cast_usize::<R>(idx[j + 1] - idx[j]);
        // (target kernel, +) then (shifted kernel, -)
        for (p_step, sign) in [(n + 1, one), (n, -one)] {
            let a = cast_usize::<R>(p_step - idx[j]);
            let b = cast_usize::<R>(p_step - idx[j + 1]);
            let diff = pow_diff(a, b, alpha);
            let left = alpha * a.powf(alpha) - b / d * diff;
            let right = a / d * diff - alpha * b.powf(alpha);
            values[j] = values[j] + sign * decay(p_step - idx[j]) * left;
            values[j + 1] = values[j + 1] + sign * decay(p_step - idx[j + 1]) * right;
        }
    }
    if mode == WeightMode::Literal {
        values[m] = values[m] + alpha * decay(1) + one;
    }
    Ok(WeightVector {
        values,
        form: WeightForm::Diff,
        includes_last_bundle: mode == WeightMode::Literal,
    })
}

//! The two memory kernels behind the history integral and the structural
//! quantities the mesh selection relies on.
//!
//! For a target step `t_{n+1} = t_n + h` the single-kernel form integrates
//! against `y(τ) = e^{-λ(t_{n+1}-τ)} (t_{n+1}-τ)^{α-1}` and the difference
//! form against `y(τ) = e^{-λ(t_{n+1}-τ)} (t_{n+1}-τ)^{α-1} -
//! e^{-λ(t_n-τ)} (t_n-τ)^{α-1}`. The difference kernel is negative on the
//! whole history for `α ∈ (0,1]` and changes sign at
//! `t_{n+1} - (α-1)/λ` for `α ∈ (1,2)`.

use crate::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("tau = {tau} outside the admissible range [0, {limit})")]
    TauOutOfRange { tau: f64, limit: f64 },
    #[error("sign switch point is defined only for alpha > 1 with lambda > 0")]
    SwitchPointUndefined,
}

/// Geometry of one target step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelContext<R: Real> {
    /// `t_{n+1}`.
    pub t_next: R,
    /// `t_n`.
    pub t_cur: R,
    pub alpha: R,
    pub lambda: R,
    /// Step length, `t_next - t_cur`.
    pub h: R,
}

impl<R: Real> KernelContext<R> {
    pub fn new(t_cur: R, h: R, alpha: R, lambda: R) -> Self {
        debug_assert!(h > R::zero());
        Self {
            t_next: t_cur + h,
            t_cur,
            alpha,
            lambda,
            h,
        }
    }
}

/// `y(τ) = e^{-λ(t_{n+1}-τ)} (t_{n+1}-τ)^{α-1}` for `0 ≤ τ < t_{n+1}`.
///
/// Diverges as `τ → t_{n+1}` when `α < 1`; quadrature callers only request
/// `τ ≤ t_n`.
pub fn kernel_single<R: Real>(ctx: &KernelContext<R>, tau: R) -> Result<R, KernelError> {
    if !(tau >= R::zero() && tau < ctx.t_next) {
        return Err(KernelError::TauOutOfRange {
            tau: tau.to_f64().unwrap_or(f64::NAN),
            limit: ctx.t_next.to_f64().unwrap_or(f64::NAN),
        });
    }
    let u = ctx.t_next - tau;
    Ok((-ctx.lambda * u).exp() * u.powf(ctx.alpha - R::one()))
}

/// Difference kernel
/// `e^{-λ(t_{n+1}-τ)} (t_{n+1}-τ)^{α-1} - e^{-λ(t_n-τ)} (t_n-τ)^{α-1}`
/// for `0 ≤ τ < t_n`.
pub fn kernel_diff<R: Real>(ctx: &KernelContext<R>, tau: R) -> Result<R, KernelError> {
    if !(tau >= R::zero() && tau < ctx.t_cur) {
        return Err(KernelError::TauOutOfRange {
            tau: tau.to_f64().unwrap_or(f64::NAN),
            limit: ctx.t_cur.to_f64().unwrap_or(f64::NAN),
        });
    }
    let one = R::one();
    let u = ctx.t_next - tau;
    let v = ctx.t_cur - tau;
    Ok((-ctx.lambda * u).exp() * u.powf(ctx.alpha - one)
        - (-ctx.lambda * v).exp() * v.powf(ctx.alpha - one))
}

/// Left end of the region where the difference kernel is positive,
/// `max(0, t_{n+1} - (α-1)/λ)`. Zero means the whole history lies in the
/// positive region.
///
/// Defined for `α > 1` and `λ > 0` only; for `α ∈ (0,1]` the difference
/// kernel is negative everywhere and no switch point exists.
pub fn positive_region_start<R: Real>(ctx: &KernelContext<R>) -> Result<R, KernelError> {
    if ctx.alpha <= R::one() || ctx.lambda <= R::zero() {
        return Err(KernelError::SwitchPointUndefined);
    }
    let start = ctx.t_next - (ctx.alpha - R::one()) / ctx.lambda;
    Ok(start.max(R::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_single_values() {
        let ctx = KernelContext::new(1.9_f64, 0.1, 1.0, 1.0);
        assert_relative_eq!(kernel_single(&ctx, 1.0).unwrap(), (-1.0_f64).exp());

        let ctx = KernelContext::new(1.9_f64, 0.1, 0.5, 1.0);
        assert_relative_eq!(kernel_single(&ctx, 1.0).unwrap(), (-1.0_f64).exp());

        let ctx = KernelContext::new(1.9_f64, 0.1, 0.2, 1.0);
        let expected = (-0.1_f64).exp() * 0.1_f64.powf(-0.8);
        assert_relative_eq!(kernel_single(&ctx, 1.9).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(kernel_single(&ctx, 1.9).unwrap(), 5.70914, max_relative = 1e-5);

        assert!(kernel_single(&ctx, 2.0).is_err());
        assert!(kernel_single(&ctx, -0.1).is_err());
    }

    #[test]
    fn kernel_single_increasing_for_small_alpha() {
        // Both factors grow toward the singular end when α ≤ 1.
        for &alpha in &[0.2, 0.5, 1.0] {
            let ctx = KernelContext::new(1.9_f64, 0.1, alpha, 0.5);
            let mut prev = kernel_single(&ctx, 0.0).unwrap();
            let mut tau = 0.002;
            while tau < 1.9 {
                let v = kernel_single(&ctx, tau).unwrap();
                assert!(v >= prev, "alpha={alpha} tau={tau}");
                prev = v;
                tau += 0.002;
            }
        }
    }

    #[test]
    fn kernel_diff_signs() {
        // α ∈ (0,1] with λ > 0: negative on the whole history.
        for &alpha in &[0.2, 0.8, 1.0] {
            for &lambda in &[0.5, 1.0, 5.0] {
                let ctx = KernelContext::new(1.9_f64, 0.1, alpha, lambda);
                for i in 0..1000 {
                    let tau = 1.9 * i as f64 / 1000.0;
                    assert!(kernel_diff(&ctx, tau).unwrap() < 0.0, "alpha={alpha} tau={tau}");
                }
            }
        }
        // α ∈ (1,2): positive past the switch point.
        let ctx = KernelContext::new(4.9_f64, 0.1, 1.2, 1.0);
        assert!(kernel_diff(&ctx, 4.85).unwrap() > 0.0);
        let start = positive_region_start(&ctx).unwrap();
        assert_relative_eq!(start, 4.8, max_relative = 1e-12);
        let mut tau = start + 1e-6;
        while tau < 4.9 {
            assert!(kernel_diff(&ctx, tau).unwrap() > 0.0, "tau={tau}");
            tau += 0.005;
        }

        let ctx = KernelContext::new(1.9_f64, 0.1, 0.8, 1.0);
        assert!(kernel_diff(&ctx, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn kernel_diff_lower_bound() {
        // y(τ) ≥ (t_n-τ)^{α-1} e^{-λ(t_{n+1}-τ)} (1 - e^{λh}).
        // The chain behind the bound needs (t_{n+1}-τ)^{α-1} ≥ (t_n-τ)^{α-1},
        // so it holds for α ≥ 1, the range where the negative kernel region
        // actually gets dropped.
        for &alpha in &[1.0, 1.4, 1.9] {
            let ctx = KernelContext::new(2.9_f64, 0.1, alpha, 1.0);
            for i in 0..1000 {
                let tau = 2.9 * i as f64 / 1000.0;
                let y = kernel_diff(&ctx, tau).unwrap();
                let bound = (2.9 - tau).powf(alpha - 1.0)
                    * (-(3.0 - tau)).exp()
                    * (1.0 - 0.1_f64.exp());
                assert!(
                    y >= bound - 1e-12 * bound.abs().max(1.0),
                    "alpha={alpha} tau={tau} y={y} bound={bound}"
                );
            }
        }
    }

    #[test]
    fn switch_point_cases() {
        let ctx = KernelContext::new(4.9_f64, 0.1, 1.8, 1.0);
        assert_relative_eq!(positive_region_start(&ctx).unwrap(), 4.2, max_relative = 1e-12);

        // Clamped to zero when the positive region covers everything.
        let ctx = KernelContext::new(0.0_f64, 0.1, 1.8, 1.0);
        assert_eq!(positive_region_start(&ctx).unwrap(), 0.0);

        let ctx = KernelContext::new(4.9_f64, 0.1, 0.8, 1.0);
        assert!(matches!(
            positive_region_start(&ctx),
            Err(KernelError::SwitchPointUndefined)
        ));
        let ctx = KernelContext::new(4.9_f64, 0.1, 1.5, 0.0);
        assert!(matches!(
            positive_region_start(&ctx),
            Err(KernelError::SwitchPointUndefined)
        ));
    }
}

//! Special functions used by the builtin problems and by the test oracles:
//! the gamma function and the generalized Mittag-Leffler function
//! `E_{α,β}(z) = Σ_{k≥0} z^k / Γ(αk + β)`.

use crate::{cast, Real};
use thiserror::Error;

/// Errors from special function evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    /// Gamma evaluated at a non-positive integer.
    #[error("gamma pole at non-positive integer argument {0}")]
    GammaPole(f64),
    /// `ln Γ` requested outside its real domain.
    #[error("ln-gamma requires a positive argument, got {0}")]
    LnGammaDomain(f64),
    /// The Mittag-Leffler series did not settle within the term budget.
    /// Signals an argument outside the desk-scale regime `|z| ≲ 50`.
    #[error("Mittag-Leffler series did not converge within {max_terms} terms")]
    NoConvergence { max_terms: usize },
    /// Parameter outside the admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
}

// Lanczos approximation, g = 7, n = 9 (Godfrey coefficients). Relative error
// below 1e-13 on the positive axis, which covers the spec'd 12 significant
// digits on (0, 20].
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

fn lanczos_sum<R: Real>(z: R) -> R {
    let mut sum = cast::<R>(LANCZOS_COEFFS[0]);
    for (i, &c) in LANCZOS_COEFFS[1..].iter().enumerate() {
        sum = sum + cast::<R>(c) / (z + crate::cast_usize::<R>(i + 1));
    }
    sum
}

fn is_non_positive_integer<R: Real>(x: R) -> bool {
    x <= R::zero() && x.fract() == R::zero()
}

/// Gamma function `Γ(x)` for real `x`.
///
/// Errors at the poles (non-positive integers); elsewhere uses the Lanczos
/// approximation with the reflection formula for `x < 0.5`.
pub fn gamma<R: Real>(x: R) -> Result<R, SpecFunError> {
    if is_non_positive_integer(x) {
        return Err(SpecFunError::GammaPole(x.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked<R: Real>(x: R) -> R {
    let half = cast::<R>(0.5);
    if x < half {
        // Γ(x) Γ(1-x) = π / sin(πx)
        R::PI() / ((R::PI() * x).sin() * gamma_unchecked(R::one() - x))
    } else {
        let z = x - R::one();
        let t = z + cast::<R>(LANCZOS_G) + half;
        let two_pi_sqrt = (R::PI() + R::PI()).sqrt();
        two_pi_sqrt * t.powf(z + half) * (-t).exp() * lanczos_sum(z)
    }
}

/// `ln Γ(x)` for `x > 0`, safe for large arguments where `Γ` itself overflows.
pub fn ln_gamma<R: Real>(x: R) -> Result<R, SpecFunError> {
    if x <= R::zero() {
        return Err(SpecFunError::LnGammaDomain(x.to_f64().unwrap_or(f64::NAN)));
    }
    let half = cast::<R>(0.5);
    if x < half {
        // ln Γ(x) = ln Γ(x+1) - ln x
        return Ok(ln_gamma(x + R::one())? - x.ln());
    }
    let z = x - R::one();
    let t = z + cast::<R>(LANCZOS_G) + half;
    let half_ln_two_pi = cast::<R>(0.918_938_533_204_672_74); // ln(2π)/2
    Ok(half_ln_two_pi + (z + half) * t.ln() - t + lanczos_sum(z).ln())
}

/// `1/Γ(x)`, entire in `x`; zero at the poles of `Γ`.
pub fn recip_gamma<R: Real>(x: R) -> R {
    if is_non_positive_integer(x) {
        R::zero()
    } else if x < cast::<R>(0.5) {
        // 1/Γ(x) = sin(πx) Γ(1-x) / π
        (R::PI() * x).sin() * gamma_unchecked(R::one() - x) / R::PI()
    } else {
        gamma_unchecked(x).recip()
    }
}

/// Arguments and termination controls for [`mittag_leffler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams<R: Real> {
    /// Series parameter `α`, must be positive.
    pub alpha: R,
    /// Series parameter `β`.
    pub beta: R,
    /// Argument `z`.
    pub z: R,
    /// Relative termination tolerance.
    pub tol: R,
    /// Term budget before reporting non-convergence.
    pub max_terms: usize,
}

impl<R: Real> MlParams<R> {
    /// Parameters with the default tolerance (`1e-15`) and term budget (`10000`).
    pub fn new(alpha: R, beta: R, z: R) -> Self {
        Self {
            alpha,
            beta,
            z,
            tol: cast(1e-15),
            max_terms: 10_000,
        }
    }
}

/// Generalized Mittag-Leffler function `E_{α,β}(z)` by direct series
/// summation.
///
/// Terms are accumulated until the current term magnitude stays below
/// `tol` times the running partial sum for two consecutive terms; the
/// two-term rule guards against the non-monotone leading terms. Intended for
/// the desk-scale regime `|z| ≲ 50`; outside it the term budget is exhausted
/// and an error is returned.
pub fn mittag_leffler<R: Real>(p: &MlParams<R>) -> Result<R, SpecFunError> {
    if !(p.alpha > R::zero()) {
        return Err(SpecFunError::InvalidParam("alpha must be positive"));
    }
    if !(p.tol > R::zero()) {
        return Err(SpecFunError::InvalidParam("tol must be positive"));
    }
    if p.max_terms == 0 {
        return Err(SpecFunError::InvalidParam("max_terms must be positive"));
    }
    if p.z == R::zero() {
        return Ok(recip_gamma(p.beta));
    }

    let ln_abs_z = p.z.abs().ln();
    let negative = p.z < R::zero();
    let mut sum = R::zero();
    let mut small_streak = 0usize;
    for k in 0..p.max_terms {
        let a = p.alpha * crate::cast_usize::<R>(k) + p.beta;
        let term = if a >= cast::<R>(0.5) {
            // z^k / Γ(a) in log space so large k neither overflows the power
            // nor the gamma factor.
            let magnitude = (crate::cast_usize::<R>(k) * ln_abs_z - ln_gamma(a)?).exp();
            if negative && k % 2 == 1 {
                -magnitude
            } else {
                magnitude
            }
        } else {
            // Only finitely many leading terms land here (a grows linearly).
            p.z.powi(k as i32) * recip_gamma(a)
        };
        if !term.is_finite() {
            return Err(SpecFunError::NoConvergence {
                max_terms: p.max_terms,
            });
        }
        if term.abs() <= p.tol * sum.abs() {
            small_streak += 1;
        } else {
            small_streak = 0;
        }
        sum = sum + term;
        if small_streak >= 2 {
            return Ok(sum);
        }
    }
    Err(SpecFunError::NoConvergence {
        max_terms: p.max_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(1.0_f64).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(
            gamma(0.5_f64).unwrap(),
            core::f64::consts::PI.sqrt(),
            max_relative = 1e-13
        );
        assert_relative_eq!(gamma(9.0_f64).unwrap(), 40_320.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(20.0_f64).unwrap(), 1.21645100408832e17, max_relative = 1e-12);
    }

    #[test]
    fn gamma_poles_error() {
        for x in [0.0, -1.0, -2.0, -17.0] {
            assert!(matches!(gamma(x), Err(SpecFunError::GammaPole(_))));
        }
        // Negative non-integers are fine: Γ(-0.5) = -2√π.
        assert_relative_eq!(
            gamma(-0.5_f64).unwrap(),
            -2.0 * core::f64::consts::PI.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gamma_recurrence() {
        // Γ(x+1) = x Γ(x) across (0, 10].
        let mut x = 0.1_f64;
        while x <= 10.0 + 1e-9 {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            x += 0.1;
        }
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.1_f64, 0.5, 1.0, 2.5, 10.0, 19.5] {
            assert_relative_eq!(
                ln_gamma(x).unwrap(),
                gamma(x).unwrap().ln(),
                max_relative = 1e-12,
                epsilon = 1e-13
            );
        }
        // Large argument where Γ itself would overflow.
        let big = ln_gamma(5000.0_f64).unwrap();
        assert!(big.is_finite() && big > 0.0);
        assert!(matches!(ln_gamma(-1.0), Err(SpecFunError::LnGammaDomain(_))));
    }

    #[test]
    fn ml_exponential_case() {
        // E_{1,1}(z) = e^z
        let v = mittag_leffler(&MlParams::new(1.0_f64, 1.0, 1.0)).unwrap();
        assert_relative_eq!(v, core::f64::consts::E, max_relative = 1e-14);
    }

    #[test]
    fn ml_zero_argument() {
        let v = mittag_leffler(&MlParams::new(0.5_f64, 1.0, 0.0)).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn ml_cosine_case() {
        // E_{2,1}(-z²) = cos z, so E_{2,1}(-1) = cos 1.
        let v = mittag_leffler(&MlParams::new(2.0_f64, 1.0, -1.0)).unwrap();
        assert_relative_eq!(v, 1.0_f64.cos(), max_relative = 1e-13);
    }

    #[test]
    fn ml_matches_exp_decay_at_alpha_one() {
        let mut t = 0.0_f64;
        while t <= 4.0 + 1e-12 {
            let v = mittag_leffler(&MlParams::new(1.0, 1.0, -t)).unwrap();
            assert_relative_eq!(v, (-t).exp(), max_relative = 1e-12, epsilon = 1e-14);
            t += 0.25;
        }
    }

    #[test]
    fn ml_alternating_bound() {
        // |E_{α,1}(z)| ≤ 1 for z < 0 and α ∈ (0, 1].
        for &alpha in &[0.1, 0.3, 0.5, 0.8, 1.0] {
            let mut z = -0.25_f64;
            while z >= -8.0 {
                let v = mittag_leffler(&MlParams::new(alpha, 1.0, z)).unwrap();
                assert!(v.abs() <= 1.0 + 1e-12, "alpha={alpha} z={z} v={v}");
                z -= 0.25;
            }
        }
    }

    #[test]
    fn ml_rejects_bad_params() {
        assert!(mittag_leffler(&MlParams::new(0.0_f64, 1.0, 1.0)).is_err());
        let mut p = MlParams::new(0.5_f64, 1.0, 1.0);
        p.tol = 0.0;
        assert!(mittag_leffler(&p).is_err());
    }

    #[test]
    fn ml_overflow_reports_nonconvergence() {
        let p = MlParams::new(0.2_f64, 1.0, 1.0e6);
        assert!(matches!(
            mittag_leffler(&p),
            Err(SpecFunError::NoConvergence { .. })
        ));
    }
}

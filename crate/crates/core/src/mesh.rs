//! History node selection for the memory integral of a target step.
//!
//! For step `t_{n+1}` the quadrature runs over reduced nodes
//! `τ_0 < τ_1 < … < τ_m = t_n` on the uniform grid. The next node is found by
//! advancing from the current one until the kernel height (equal-height rule)
//! or the kernel area (equal-area rule) grows by a prescribed increment
//! `Δ`, then flooring the candidate back onto the grid. Every advance is
//! clamped to at least one grid step and capped at `t_n`, so the selected
//! indices are strictly increasing and always end at `n`.
//!
//! Selection works in index space: a node is the integer `j` of `τ = j·h`,
//! and flooring an advance of `Δτ` reduces to integer arithmetic on
//! `⌊Δτ/h⌋`, which keeps repeated flooring free of floating-point drift.

use crate::kernel::{self, KernelContext};
use crate::{cast_usize, Real};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("target step must satisfy n >= 1, got {0}")]
    TargetStepTooSmall(usize),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("alpha = {alpha} outside ({low}, {high}] for this selector")]
    AlphaOutOfRange { alpha: f64, low: f64, high: f64 },
    #[error("lambda must be positive for the difference form with alpha > 1")]
    SwitchPointUndefined,
    #[error("node set invariant violated: {0}")]
    InvalidNodeSet(&'static str),
    #[error("step length must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// The history quadrature nodes selected for one target step.
///
/// `indices` are grid indices `n_0 < n_1 < … < n_m = n` with
/// `n_0 = start_index`. For the single-kernel form and for `α ≤ 1` the
/// history starts at zero; for the difference form with `α > 1` it starts at
/// the floored sign-switch point of the kernel and the region below it is
/// dropped from quadrature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    pub indices: Vec<usize>,
    pub target_step: usize,
    pub start_index: usize,
}

impl NodeSet {
    /// Number of history nodes (`m + 1`).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.indices.is_empty() {
            return Err(MeshError::InvalidNodeSet("empty node set"));
        }
        if self.indices[0] != self.start_index {
            return Err(MeshError::InvalidNodeSet("first index != start_index"));
        }
        if *self.indices.last().unwrap() != self.target_step {
            return Err(MeshError::InvalidNodeSet("last index != target step"));
        }
        if self.indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MeshError::InvalidNodeSet("indices not strictly increasing"));
        }
        Ok(())
    }
}

/// Which node selection rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    /// Every grid point, `n_i = i`.
    Full,
    /// Equal increments of the kernel value between consecutive nodes.
    EqualHeight,
    /// Equal kernel area between consecutive nodes.
    EqualArea,
}

/// Node selection rule plus its increment `Δ` (`Δy` for equal-height,
/// `Δs` for equal-area).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorConfig<R: Real> {
    pub kind: SelectorKind,
    pub delta: R,
}

impl<R: Real> SelectorConfig<R> {
    pub fn full() -> Self {
        Self {
            kind: SelectorKind::Full,
            delta: R::one(),
        }
    }

    pub fn equal_height(delta: R) -> Self {
        Self {
            kind: SelectorKind::EqualHeight,
            delta,
        }
    }

    pub fn equal_area(delta: R) -> Self {
        Self {
            kind: SelectorKind::EqualArea,
            delta,
        }
    }
}

/// Reading of the equal-height advance step for the single-kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeightAdvance {
    /// First-order Taylor step `Δτ = Δy / y'(τ_c)`, which carries the
    /// `(t_{n+1}-τ_c)^{2-α}` factor. Default.
    #[default]
    Derived,
    /// Alternative transcription with the exponent applied to the squared
    /// distance and no power factor. Kept for comparison runs only.
    Literal,
}

fn check_common<R: Real>(n: usize, h: R, delta: R) -> Result<(), MeshError> {
    if n < 1 {
        return Err(MeshError::TargetStepTooSmall(n));
    }
    if !(h > R::zero()) {
        return Err(MeshError::NonPositiveStep(h.to_f64().unwrap_or(f64::NAN)));
    }
    if !(delta > R::zero()) {
        return Err(MeshError::NonPositiveDelta(
            delta.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(())
}

fn check_alpha<R: Real>(alpha: R, high: f64) -> Result<(), MeshError> {
    if !(alpha > R::zero()) || alpha.to_f64().unwrap_or(f64::NAN) > high {
        return Err(MeshError::AlphaOutOfRange {
            alpha: alpha.to_f64().unwrap_or(f64::NAN),
            low: 0.0,
            high,
        });
    }
    Ok(())
}

/// Runs the advance/floor/cap loop in index space.
///
/// `advance(cur)` returns the proposed `Δτ` from node `cur`. A non-finite or
/// overshooting advance jumps straight to `t_n`; an advance below `h`
/// (including a negative one from a sign flip in the linearization) moves
/// exactly one grid step.
fn run_selection<R: Real>(
    n: usize,
    start: usize,
    h: R,
    mut advance: impl FnMut(usize) -> R,
) -> Vec<usize> {
    let mut indices = vec![start];
    let mut cur = start;
    while cur < n {
        let ratio = advance(cur) / h;
        let remaining = cast_usize::<R>(n - cur);
        if !ratio.is_finite() || ratio > remaining {
            indices.push(n);
            break;
        }
        let step = if ratio < R::one() {
            1
        } else {
            ratio.floor().to_usize().unwrap_or(1).max(1)
        };
        cur += step;
        indices.push(cur);
    }
    indices
}

/// The full uniform mesh `[0, 1, …, n]`.
pub fn select_full(n: usize) -> Result<NodeSet, MeshError> {
    if n < 1 {
        return Err(MeshError::TargetStepTooSmall(n));
    }
    Ok(NodeSet {
        indices: (0..=n).collect(),
        target_step: n,
        start_index: 0,
    })
}

/// Equal-height node selection for the single-kernel form, `α ∈ (0, 1]`.
pub fn select_height_single<R: Real>(
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
    dy: R,
) -> Result<NodeSet, MeshError> {
    select_height_single_with(n, h, alpha, lambda, dy, HeightAdvance::Derived)
}

/// Equal-height selection with an explicit advance-formula reading.
pub fn select_height_single_with<R: Real>(
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
    dy: R,
    formula: HeightAdvance,
) -> Result<NodeSet, MeshError> {
    check_common(n, h, dy)?;
    check_alpha(alpha, 1.0)?;
    let one = R::one();
    let two = one + one;
    let t_next = cast_usize::<R>(n + 1) * h;
    let indices = run_selection(n, 0, h, |cur| {
        let u = t_next - cast_usize::<R>(cur) * h;
        match formula {
            HeightAdvance::Derived => {
                dy * (lambda * u).exp() * u.powf(two - alpha) / ((one - alpha) + lambda * u)
            }
            HeightAdvance::Literal => {
                dy * (lambda * u * u).exp() / ((one - alpha) + lambda * u)
            }
        }
    });
    Ok(NodeSet {
        indices,
        target_step: n,
        start_index: 0,
    })
}

/// Equal-area node selection for the single-kernel form, `α ∈ (0, 1]`.
///
/// The area condition is solved with the power factor frozen at the current
/// node, giving the advance `Δτ = Δs (t_{n+1}-τ_c)^{1-α} e^{λ(t_{n+1}-τ_c)}`.
pub fn select_area_single<R: Real>(
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
    ds: R,
) -> Result<NodeSet, MeshError> {
    check_common(n, h, ds)?;
    check_alpha(alpha, 1.0)?;
    let one = R::one();
    let t_next = cast_usize::<R>(n + 1) * h;
    let indices = run_selection(n, 0, h, |cur| {
        let u = t_next - cast_usize::<R>(cur) * h;
        ds * u.powf(one - alpha) * (lambda * u).exp()
    });
    Ok(NodeSet {
        indices,
        target_step: n,
        start_index: 0,
    })
}

/// Start index for the difference form: 0 for `α ≤ 1`, otherwise the floored
/// sign-switch point clamped to `[0, n-1]`.
fn diff_start_index<R: Real>(
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
) -> Result<usize, MeshError> {
    if alpha <= R::one() {
        return Ok(0);
    }
    if !(lambda > R::zero()) {
        return Err(MeshError::SwitchPointUndefined);
    }
    let t_cur = cast_usize::<R>(n) * h;
    let ctx = KernelContext::new(t_cur, h, alpha, lambda);
    let switch = kernel::positive_region_start(&ctx).expect("alpha > 1 and lambda > 0 checked");
    let floored = (switch / h).floor();
    let start = floored.to_usize().unwrap_or(0);
    Ok(start.min(n - 1))
}

/// Signed increment for the difference form: the kernel is negative for
/// `α ∈ (0,1]`, so the increment flips sign there.
fn diff_signed_delta<R: Real>(alpha: R, delta: R) -> R {
    if alpha <= R::one() {
        -delta
    } else {
        delta
    }
}

/// Equal-height node selection for the difference form, `α ∈ (0, 2)`.
pub fn select_height_diff<R: Real>(
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
    dy: R,
) -> Result<NodeSet, MeshError> {
    check_common(n, h, dy)?;
    check_alpha(alpha, 2.0 - f64::EPSILON)?;
    let start = diff_start_index(n, h, alpha, lambda)?;
    let one = R::one();
    let signed = diff_signed_delta(alpha, dy);
    let t_next = cast_usize::<R>(n + 1) * h;
    let e_h = (lambda * h).exp();
    // d/dτ of e^{-λw}w^{α-1} at distance w, divided by e^{-λw}.
    let slope = |w: R| lambda * w.powf(alpha - one) - (alpha - one) * w.powf(alpha - one - one);
    let indices = run_selection(n, start, h, |cur| {
        let u = t_next - cast_usize::<R>(cur) * h;
        let v = u - h;
        signed * (lambda * u).exp() / (slope(u) - e_h * slope(v))
    });
    Ok(NodeSet {
        indices,
        target_step: n,
        start_index: start,
    })
}

/// Equal-area node selection for the difference form, `α ∈ (0, 2)`.
pub fn select_area_diff<R: Real>(
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
    ds: R,
) -> Result<NodeSet, MeshError> {
    check_common(n, h, ds)?;
    check_alpha(alpha, 2.0 - f64::EPSILON)?;
    let start = diff_start_index(n, h, alpha, lambda)?;
    let one = R::one();
    let signed = diff_signed_delta(alpha, ds);
    let t_next = cast_usize::<R>(n + 1) * h;
    let e_h = (lambda * h).exp();
    let indices = run_selection(n, start, h, |cur| {
        let u = t_next - cast_usize::<R>(cur) * h;
        let v = u - h;
        signed * (lambda * u).exp() / (u.powf(alpha - one) - e_h * v.powf(alpha - one))
    });
    Ok(NodeSet {
        indices,
        target_step: n,
        start_index: start,
    })
}

/// Whether the selection is for the single-kernel or the difference form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    Single,
    Diff,
}

/// Dispatches to the right selector for a form and configuration.
pub fn select_nodes<R: Real>(
    form: KernelForm,
    selector: &SelectorConfig<R>,
    n: usize,
    h: R,
    alpha: R,
    lambda: R,
    height_advance: HeightAdvance,
) -> Result<NodeSet, MeshError> {
    match (form, selector.kind) {
        (_, SelectorKind::Full) => select_full(n),
        (KernelForm::Single, SelectorKind::EqualHeight) => {
            select_height_single_with(n, h, alpha, lambda, selector.delta, height_advance)
        }
        (KernelForm::Single, SelectorKind::EqualArea) => {
            select_area_single(n, h, alpha, lambda, selector.delta)
        }
        (KernelForm::Diff, SelectorKind::EqualHeight) => {
            select_height_diff(n, h, alpha, lambda, selector.delta)
        }
        (KernelForm::Diff, SelectorKind::EqualArea) => {
            select_area_diff(n, h, alpha, lambda, selector.delta)
        }
    }
}

/// Writes node placements as CSV with columns
/// `step,node_index,node_time,kernel_value` for figure-style inspection.
///
/// One row per history node per target step `n = 1 … n_max`. The kernel value
/// is the respective form's kernel at the node; where it is singular (the
/// difference kernel at `τ = t_n` for `α < 1`) the field is left empty.
pub fn write_nodes_csv<R: Real, W: Write>(
    out: &mut W,
    form: KernelForm,
    selector: &SelectorConfig<R>,
    n_max: usize,
    h: R,
    alpha: R,
    lambda: R,
) -> std::io::Result<()> {
    writeln!(out, "step,node_index,node_time,kernel_value")?;
    for n in 1..=n_max {
        let nodes = select_nodes(form, selector, n, h, alpha, lambda, HeightAdvance::Derived)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        let t_cur = cast_usize::<R>(n) * h;
        let ctx = KernelContext::new(t_cur, h, alpha, lambda);
        for &j in &nodes.indices {
            let tau = cast_usize::<R>(j) * h;
            let value = match form {
                KernelForm::Single => kernel::kernel_single(&ctx, tau).ok(),
                KernelForm::Diff => kernel::kernel_diff(&ctx, tau).ok(),
            }
            .filter(|v| v.is_finite());
            match value {
                Some(v) => writeln!(
                    out,
                    "{},{},{:e},{:e}",
                    n,
                    j,
                    tau.to_f64().unwrap_or(f64::NAN),
                    v.to_f64().unwrap_or(f64::NAN)
                )?,
                None => writeln!(
                    out,
                    "{},{},{:e},",
                    n,
                    j,
                    tau.to_f64().unwrap_or(f64::NAN)
                )?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_mesh() {
        assert_eq!(select_full(1).unwrap().indices, vec![0, 1]);
        assert_eq!(select_full(5).unwrap().indices, (0..=5).collect::<Vec<_>>());
        assert_eq!(select_full(9).unwrap().len(), 10);
        assert!(select_full(0).is_err());
    }

    #[test]
    fn height_single_clamp_and_jump_extremes() {
        // Tiny increment: the one-step clamp fires everywhere, full mesh.
        let nodes = select_height_single(19, 0.1_f64, 0.8, 1.0, 1e-12).unwrap();
        assert_eq!(nodes.indices, (0..=19).collect::<Vec<_>>());

        // Huge increment: single jump to t_n.
        let nodes = select_height_single(19, 0.1_f64, 0.8, 1.0, 1e12).unwrap();
        assert_eq!(nodes.indices, vec![0, 19]);
        let nodes = select_height_single(19, 0.1_f64, 0.8, 1.0, f64::INFINITY).unwrap();
        assert_eq!(nodes.indices, vec![0, 19]);
    }

    #[test]
    fn area_single_extremes() {
        let nodes = select_area_single(19, 0.1_f64, 0.8, 1.0, 1e12).unwrap();
        assert_eq!(nodes.indices, vec![0, 19]);
        let nodes = select_area_single(19, 0.1_f64, 0.8, 1.0, 1e-12).unwrap();
        assert_eq!(nodes.indices, (0..=19).collect::<Vec<_>>());
    }

    #[test]
    fn height_single_gaps_taper_toward_target() {
        // The kernel steepens toward t_n, so node gaps shrink there.
        let nodes = select_height_single(19, 0.1_f64, 0.2, 1.0, 0.1).unwrap();
        nodes.validate().unwrap();
        let gaps: Vec<usize> = nodes.indices.windows(2).map(|w| w[1] - w[0]).collect();
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0], "gaps not non-increasing: {gaps:?}");
        }
        assert!(gaps[0] > 1, "expected a coarse far-field jump: {gaps:?}");
    }

    #[test]
    fn area_single_node_count_monotone_in_delta() {
        let mut prev_len = usize::MAX;
        let mut ds = 0.01_f64;
        while ds <= 1.0 + 1e-12 {
            let nodes = select_area_single(19, 0.1_f64, 0.8, 1.0, ds).unwrap();
            nodes.validate().unwrap();
            assert!(nodes.len() <= prev_len, "ds={ds}");
            prev_len = nodes.len();
            ds += 0.01;
        }
    }

    #[test]
    fn height_diff_big_delta_two_nodes() {
        // Start at the floored kernel switch point, one jump to t_n.
        let nodes = select_height_diff(9, 0.1_f64, 1.2, 1.0, 1.0).unwrap();
        assert_eq!(nodes.indices, vec![8, 9]);
        assert_eq!(nodes.start_index, 8);
    }

    #[test]
    fn diff_alpha_below_one_extremes() {
        let nodes = select_height_diff(9, 0.1_f64, 0.5, 1.0, f64::INFINITY).unwrap();
        assert_eq!(nodes.indices, vec![0, 9]);
        let nodes = select_area_diff(9, 0.1_f64, 0.8, 1.0, 1e-12).unwrap();
        assert_eq!(nodes.indices, (0..=9).collect::<Vec<_>>());
    }

    #[test]
    fn diff_start_clamps() {
        // Positive region covers the whole history: start at zero.
        let nodes = select_area_diff(4, 0.1_f64, 1.8, 1.0, 1e12).unwrap();
        assert_eq!(nodes.start_index, 0);
        assert_eq!(nodes.indices, vec![0, 4]);

        // Switch point inside the last subinterval: clamped to n-1.
        let nodes = select_height_diff(4, 0.25_f64, 1.2, 1.0, 1e12).unwrap();
        assert_eq!(nodes.start_index, 3);
        assert_eq!(nodes.indices, vec![3, 4]);
    }

    #[test]
    fn diff_form_errors() {
        assert!(matches!(
            select_height_diff(9, 0.1_f64, 1.2, 0.0, 1.0),
            Err(MeshError::SwitchPointUndefined)
        ));
        assert!(matches!(
            select_height_diff(9, 0.1_f64, 1.2, 1.0, 0.0),
            Err(MeshError::NonPositiveDelta(_))
        ));
        assert!(matches!(
            select_height_diff(0, 0.1_f64, 1.2, 1.0, 1.0),
            Err(MeshError::TargetStepTooSmall(0))
        ));
        assert!(select_height_single(9, 0.1_f64, 1.2, 1.0, 1.0).is_err());
        // λ = 0 is fine for the difference form when α ≤ 1.
        assert!(select_height_diff(9, 0.1_f64, 0.5, 0.0, 1.0).is_ok());
    }

    #[test]
    fn delta_to_zero_recovers_full_mesh() {
        for n in [1usize, 7, 40] {
            for &alpha in &[0.3, 1.0] {
                let a = select_height_single(n, 0.05_f64, alpha, 1.0, 1e-300).unwrap();
                let b = select_area_single(n, 0.05_f64, alpha, 1.0, 1e-300).unwrap();
                assert_eq!(a, select_full(n).unwrap());
                assert_eq!(b, select_full(n).unwrap());
            }
            let d = select_height_diff(n, 0.05_f64, 0.7, 1.0, 1e-300).unwrap();
            assert_eq!(d.indices, select_full(n).unwrap().indices);
        }
    }

    #[test]
    fn determinism() {
        let a = select_area_diff(57, 0.05_f64, 1.7, 2.0, 0.3).unwrap();
        let b = select_area_diff(57, 0.05_f64, 1.7, 2.0, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nodes_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_nodes_csv(
            &mut buf,
            KernelForm::Single,
            &SelectorConfig::equal_height(0.1_f64),
            5,
            0.1,
            0.5,
            1.0,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "step,node_index,node_time,kernel_value");
        assert!(text.lines().count() > 5);
        for line in text.lines().skip(1) {
            assert_eq!(line.matches(',').count(), 3);
        }
    }
}

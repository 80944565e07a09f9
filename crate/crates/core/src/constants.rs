//! Constant-picking for the two retention disciplines.
//!
//! The selection procedures need small explicit constants before they can
//! run: a moment scale `upsilon`, a slack `eps`, and a clipping level
//! `delta`. The defining inequalities leave room, so this module fixes one
//! deterministic choice: scan a fixed geometric grid for the slack, take the
//! clipping level as the smaller of a closed-form bound and a bisection
//! against the per-coordinate erasure polynomials, and certify every
//! inequality at the chosen values. All choices are pure functions of the
//! kernel and the targets, so reruns are bit-identical.

use crate::dice::LogMgf;
use crate::error::{CoreError, Result};
use crate::kernel::Kernel;
use crate::prob::Prob;
use crate::tradeoff::{self, feasible_thm5, PI_GRID_DEFAULT};

/// Slack grid: `0.25 * 0.93^t` for `t = 0..400`, scanned coarse-to-fine so
/// the first hit is the largest admissible grid value.
const EPS_GRID_START: f64 = 0.25;
const EPS_GRID_RATIO: f64 = 0.93;
const EPS_GRID_LEN: usize = 400;

/// Number of evaluation points when sweeping the erasure polynomials over
/// `[1e-300, delta]` on a log scale.
const DELTA_SWEEP_POINTS: usize = 400;

/// Floor of the clipping-level search.
const DELTA_FLOOR: f64 = 1e-300;

/// Constants for the recyclable discipline: survivors keep their history,
/// so the argument tracks a supermartingale of clipped powers
/// `(Z and delta)^eps` and needs the moment scale `upsilon`.
#[derive(Debug, Clone, Copy)]
pub struct RecyclableConstants {
    /// Moment scale; always an integer power of e.
    pub upsilon: f64,
    /// Its exact logarithm (the integer exponent).
    pub ln_upsilon: f64,
    /// Slack in the exponent comparisons.
    pub eps: f64,
    /// Clipping level for the erasure parameter.
    pub delta: f64,
}

/// Constants for the disposable discipline: survivors are re-validated each
/// round, so only the slack and the clipping level are needed.
#[derive(Debug, Clone, Copy)]
pub struct DisposableConstants {
    pub eps: f64,
    pub delta: f64,
}

/// `P{Y < 2 eps}` and the condition `l^eps * P{Y < 2 eps} < 1`, which keeps
/// the closed-form clipping bound positive.
fn mass_condition(lnl: f64, p_below: f64, eps: f64) -> bool {
    // Slightly deflated so the bound's numerator stays safely positive.
    eps * lnl + p_below.ln() < (-2e-9f64).ln_1p()
}

/// Closed-form clipping bound: the largest `delta` with
/// `l^eps * P{Y < 2 eps} + P{Y >= 2 eps} * delta^(eps^2) <= 1 - 1e-9`.
fn delta_closed_form(lnl: f64, p_below: f64, eps: f64) -> f64 {
    let a = (eps * lnl).exp() * p_below;
    let b = 1.0 - p_below;
    if b <= 0.0 {
        return 0.5;
    }
    let base = (1.0 - 1e-9 - a) / b;
    if base <= 0.0 {
        return 0.0;
    }
    (base.ln() / (eps * eps)).exp()
}

/// True when every coordinate's erasure polynomial stays within the slack of
/// its distance exponent over the whole interval `[1e-300, delta]`:
/// `ln eps_i(x) / ln x > d_i * exp(-eps)` for all grid `x` and all `i`.
fn delta_sweep_ok(kernel: &Kernel, distances: &[usize], eps: f64, delta: f64) -> Result<bool> {
    let ln_lo = DELTA_FLOOR.ln();
    let ln_hi = delta.ln();
    for k in 0..DELTA_SWEEP_POINTS {
        let ln_x = ln_hi + (ln_lo - ln_hi) * k as f64 / (DELTA_SWEEP_POINTS - 1) as f64;
        let x = Prob::from_ln(ln_x);
        for (i, &d) in distances.iter().enumerate() {
            let ratio = kernel.child_eps(i, x)?.ln() / ln_x;
            if ratio <= d as f64 * (-eps).exp() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The final clipping level: the closed-form bound capped at 1/2, then
/// lowered by bisection until the polynomial sweep accepts it.
fn pick_delta(kernel: &Kernel, lnl: f64, p_below: f64, eps: f64) -> Result<f64> {
    let closed = delta_closed_form(lnl, p_below, eps);
    if closed <= DELTA_FLOOR {
        return Err(CoreError::NoAdmissibleConstant(format!(
            "closed-form clipping bound collapsed to {closed} at slack {eps}"
        )));
    }
    let distances = kernel.partial_distances()?;
    let cand = closed.min(0.5);
    if delta_sweep_ok(kernel, &distances, eps, cand)? {
        return Ok(cand);
    }
    let (mut lo, mut hi) = (DELTA_FLOOR.ln(), cand.ln());
    if !delta_sweep_ok(kernel, &distances, eps, DELTA_FLOOR)? {
        return Err(CoreError::NoAdmissibleConstant(format!(
            "erasure polynomials violate the distance exponents even at {DELTA_FLOOR}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if delta_sweep_ok(kernel, &distances, eps, mid.exp())? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp())
}

/// Pick the recyclable-discipline constants for a kernel and scaling
/// exponent. Fails with `NoAdmissibleConstant` when the kernel's dice is too
/// weak (e.g. the identity kernel, whose dice never leaves zero).
pub fn pick_constants_recyclable(kernel: &Kernel, mu_star: f64) -> Result<RecyclableConstants> {
    let dice = kernel.dice()?;
    let lnl = (kernel.ell() as f64).ln();
    let target = -lnl / mu_star;

    // Moment scale: smallest integer power of e with E[upsilon^(-Y)] below
    // l^(-1/mu*).
    let j = (2..=20)
        .find(|&j| dice.ln_mgf(-(j as f64)) < target)
        .ok_or_else(|| {
            CoreError::NoAdmissibleConstant(format!(
                "no moment scale e^j, j <= 20, pushes E[exp(-jY)] below l^(-1/{mu_star})"
            ))
        })?;
    let ln_upsilon = j as f64;
    let neg_moment = dice.ln_mgf(-ln_upsilon);

    // Slack: largest grid value that leaves room both in the moment
    // inequality and in the small-dice mass condition.
    let eps = (0..EPS_GRID_LEN)
        .map(|t| EPS_GRID_START * EPS_GRID_RATIO.powi(t as i32))
        .find(|&eps| {
            neg_moment + 2.0 * eps * ln_upsilon < target
                && mass_condition(lnl, dice.prob_below(2.0 * eps), eps)
        })
        .ok_or_else(|| {
            CoreError::NoAdmissibleConstant(
                "no slack on the geometric grid satisfies the moment inequality".into(),
            )
        })?;

    let delta = pick_delta(kernel, lnl, dice.prob_below(2.0 * eps), eps)?;
    Ok(RecyclableConstants {
        upsilon: ln_upsilon.exp(),
        ln_upsilon,
        eps,
        delta,
    })
}

/// Pick the disposable-discipline constants for a kernel, scaling exponent,
/// and target pair. Requires the target to pass the feasibility scan with a
/// strictly positive margin, then chooses a slack small enough that the scan
/// still passes with the rate-function argument shifted by the slack and
/// with `mu_p` shrunk by it.
pub fn pick_constants_disposable(
    kernel: &Kernel,
    mu_star: f64,
    beta_p: f64,
    mu_p: f64,
) -> Result<DisposableConstants> {
    let dice = kernel.dice()?;
    let ell = kernel.ell() as u64;
    let lnl = (ell as f64).ln();
    let base = feasible_thm5(&dice, ell, mu_star, beta_p, mu_p, PI_GRID_DEFAULT);
    if !(base.feasible && base.margin > 0.0) {
        return Err(CoreError::Precondition(format!(
            "target ({beta_p}, {}) is outside the feasible region (margin {})",
            1.0 / mu_p,
            base.margin
        )));
    }

    let eps = (0..EPS_GRID_LEN)
        .map(|t| EPS_GRID_START * EPS_GRID_RATIO.powi(t as i32))
        .find(|&eps| {
            mass_condition(lnl, dice.prob_below(2.0 * eps), eps)
                && mu_p - eps > 0.0
                && tradeoff::slack_scan_margin(
                    &dice,
                    lnl,
                    mu_star,
                    beta_p,
                    mu_p,
                    PI_GRID_DEFAULT,
                    eps,
                ) > 0.0
                && tradeoff::slack_scan_margin(
                    &dice,
                    lnl,
                    mu_star,
                    beta_p,
                    mu_p - eps,
                    PI_GRID_DEFAULT,
                    eps,
                ) > 0.0
        })
        .ok_or_else(|| {
            CoreError::NoAdmissibleConstant(
                "no slack on the geometric grid keeps the scan feasible".into(),
            )
        })?;

    let delta = pick_delta(kernel, lnl, dice.prob_below(2.0 * eps), eps)?;
    Ok(DisposableConstants { eps, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use std::sync::Arc;

    #[test]
    fn arikan_recyclable_constants() {
        let kernel = Kernel::arikan();
        let c = pick_constants_recyclable(&kernel, 3.627).unwrap();
        assert_eq!(c.ln_upsilon, 2.0, "expected moment scale e^2");
        // The moment inequality with doubled slack must hold at the picks.
        let dice = kernel.dice().unwrap();
        let target = -(2.0f64).ln() / 3.627;
        assert!(dice.ln_mgf(-2.0) + 4.0 * c.eps < target);
        // The slack is the first grid value below the analytic cutoff
        // (ln(0.625) + 4 eps < -ln(2)/3.627 gives eps < 0.0698).
        assert!(c.eps > 0.060 && c.eps < 0.0698, "eps = {}", c.eps);
        // Closed-form clipping bound near 2.2e-5 is the binding one here.
        assert!(c.delta > 1.5e-5 && c.delta < 3.0e-5, "delta = {}", c.delta);
        // Certify the clipping inequality directly.
        let p_below = dice.prob_below(2.0 * c.eps);
        let lhs = (c.eps * (2.0f64).ln()).exp() * p_below
            + (1.0 - p_below) * (c.eps * c.eps * c.delta.ln()).exp();
        assert!(lhs <= 1.0, "clipping certificate failed: {lhs}");
        // And the polynomial sweep at the chosen level and below it.
        let d = kernel.partial_distances().unwrap();
        for x in [c.delta, c.delta / 2.0, c.delta / 1e3] {
            let p = Prob::from_lin(x);
            for (i, &di) in d.iter().enumerate() {
                let ratio = kernel.child_eps(i, p).unwrap().ln() / x.ln();
                assert!(ratio > di as f64 * (-c.eps).exp());
            }
        }
    }

    #[test]
    fn identity_kernel_has_no_constants() {
        let f2 = Arc::new(Field::prime(2).unwrap());
        let id = Kernel::new(f2, vec![vec![1, 0], vec![0, 1]], "identity").unwrap();
        assert!(matches!(
            pick_constants_recyclable(&id, 3.627),
            Err(CoreError::NoAdmissibleConstant(_))
        ));
    }

    #[test]
    fn reed_solomon_recyclable_constants() {
        let f4 = Arc::new(Field::of_order(4).unwrap());
        let rs = Kernel::reed_solomon(f4);
        let c = pick_constants_recyclable(&rs, 3.0).unwrap();
        assert!(c.upsilon >= (2.0f64).exp() - 1e-12);
        assert!(c.eps > 0.0 && c.delta > 0.0 && c.delta <= 0.5);
    }

    #[test]
    fn disposable_constants_cases() {
        let kernel = Kernel::arikan();
        let ok = pick_constants_disposable(&kernel, 3.627, 0.1, 10.0).unwrap();
        assert!(ok.eps > 0.0 && ok.delta > 0.0);
        // Beyond the exponent ceiling: infeasible target.
        assert!(matches!(
            pick_constants_disposable(&kernel, 3.627, 0.6, 10.0),
            Err(CoreError::Precondition(_))
        ));
        // Deep-rate corner still feasible.
        let deep = pick_constants_disposable(&kernel, 3.627, 0.45, 1000.0).unwrap();
        assert!(deep.eps > 0.0 && deep.delta > 0.0);
    }

    #[test]
    fn picks_are_deterministic() {
        let kernel = Kernel::arikan();
        let a = pick_constants_recyclable(&kernel, 3.627).unwrap();
        let b = pick_constants_recyclable(&kernel, 3.627).unwrap();
        assert_eq!(a.eps.to_bits(), b.eps.to_bits());
        assert_eq!(a.delta.to_bits(), b.delta.to_bits());
    }
}

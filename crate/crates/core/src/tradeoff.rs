//! Large-deviations machinery for the rate/error-probability tradeoff.
//!
//! The dice `Y` of a kernel controls how fast `ln(-ln Z)` grows along a
//! random tree path. Its Cramér function bounds the fraction of paths whose
//! dice-sums fall short, which is exactly what the feasibility predicates
//! quantify: a target pair (`beta_p`, `1/mu_p`) — error exponent and
//! capacity-gap exponent — is achievable when a one-parameter family of
//! linear constraints all sit strictly below the rate function. This module
//! evaluates those predicates, traces the achievable-region boundary two
//! independent ways (predicate scan and convex hull), and carries the
//! closed-form machinery for Reed-Solomon dice of size up to 2^30.

use rayon::prelude::*;

use crate::dice::LogMgf;
use crate::error::{CoreError, Result};

/// Default number of interior grid points when scanning the feasibility
/// parameter over [0, 1].
pub const PI_GRID_DEFAULT: usize = 1024;

/// Iterations of golden-section search in `cramer_eval`; the bracket shrinks
/// by 0.618 each round, so 120 rounds pin the optimum far below f64 noise.
const CRAMER_ITERS: usize = 120;

/// Rate function `L(y) = sup_{lambda<0} lambda*y - ln E[exp(lambda Y)]`.
///
/// Restricting to negative `lambda` makes `L` vanish for `y >= E[Y]` and
/// turns it into the exponent of the lower-tail Chernoff bound. Returns
/// `+inf` below the bottom of the support (the tail event is impossible).
pub fn cramer_eval(dice: &impl LogMgf, y: f64) -> f64 {
    if y >= dice.mean() {
        return 0.0;
    }
    let y0 = dice.y_min();
    if y < y0 {
        return f64::INFINITY;
    }
    // Work with the shifted objective lambda*(y-y0) - ln E[exp(lambda(Y-y0))]
    // so nothing cancels when the optimum runs off toward lambda = -inf.
    let gap = (y - y0).max(1e-9);
    let g = |lambda: f64| lambda * (y - y0) - dice.ln_mgf_shifted(lambda);
    let (mut a, mut b) = (-60.0 / gap, -1e-12);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..CRAMER_ITERS {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    gc.max(gd).max(0.0)
}

/// Closed form of the rate function for the classic 2x2 kernel, expressed in
/// bits: `1 + b*log2(b) + (1-b)*log2(1-b)` for `b <= 1/2`, zero above. The
/// numeric evaluator in natural units equals `ln(2)` times this at
/// `y = b*ln(2)`.
pub fn cramer_closed_arikan(beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(CoreError::Precondition(format!(
            "beta {beta} outside [0,1]"
        )));
    }
    if beta >= 0.5 {
        return Ok(0.0);
    }
    if beta == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 + beta * beta.log2() + (1.0 - beta) * (1.0 - beta).log2())
}

/// Chernoff bound `exp(-n L(y))` on `P{ (Y_1+..+Y_n)/n <= y }`.
pub fn chernoff_tail(dice: &impl LogMgf, n: u64, y: f64) -> f64 {
    assert!(n >= 1, "need at least one step");
    (-(n as f64) * cramer_eval(dice, y)).exp()
}

/// Outcome of a feasibility scan: the verdict plus the smallest margin
/// (rate-function value minus required value) seen over the grid. A positive
/// margin quantifies how far the target sits inside the region.
#[derive(Debug, Clone, Copy)]
pub struct Feasibility {
    pub feasible: bool,
    pub margin: f64,
}

/// Margin of the scan constraint at one grid value `pi`:
/// `L(beta_p*mu_p*lnl/(mu_p - pi*mu_star) + slack) - (1-pi)*lnl/(mu_p - pi*mu_star)`.
/// A nonpositive denominator with positive numerator is a hard failure
/// (reported as `-inf`); the `pi = 1` endpoint is handled by its limit.
/// The `slack` shifts the rate-function argument upward, which only makes
/// the constraint harder; the plain predicates use zero.
fn scan_margin_at(
    dice: &impl LogMgf,
    lnl: f64,
    mu_star: f64,
    beta_p: f64,
    mu_p: f64,
    pi: f64,
    slack: f64,
) -> f64 {
    let num = (1.0 - pi) * lnl;
    let den = mu_p - pi * mu_star;
    if pi >= 1.0 {
        return if den > 0.0 {
            cramer_eval(dice, beta_p * mu_p * lnl / den + slack)
        } else if den == 0.0 && beta_p == 0.0 {
            // mu_p = mu_star exactly: the constraint tends to
            // lnl/mu_star < L(0).
            cramer_eval(dice, slack) - lnl / mu_star
        } else {
            f64::NEG_INFINITY
        };
    }
    if den <= 0.0 {
        return f64::NEG_INFINITY;
    }
    cramer_eval(dice, beta_p * mu_p * lnl / den + slack) - num / den
}

/// Minimum scan margin over the grid with an additive argument slack;
/// exits early once the minimum is known to be nonpositive.
pub(crate) fn slack_scan_margin(
    dice: &impl LogMgf,
    lnl: f64,
    mu_star: f64,
    beta_p: f64,
    mu_p: f64,
    pi_grid: usize,
    slack: f64,
) -> f64 {
    let mut margin = f64::INFINITY;
    let interior = (1..=pi_grid).map(move |j| j as f64 / (pi_grid + 1) as f64);
    for pi in [0.0, 1.0].into_iter().chain(interior) {
        margin = margin.min(scan_margin_at(dice, lnl, mu_star, beta_p, mu_p, pi, slack));
        if margin <= 0.0 {
            return margin;
        }
    }
    margin
}

fn scan_feasible(
    dice: &impl LogMgf,
    lnl: f64,
    mu_star: f64,
    beta_p: f64,
    mu_p: f64,
    pi_grid: usize,
    pre_margin: f64,
) -> Feasibility {
    // Endpoints first inside the helper: they carry the usual binding
    // constraints, so infeasible targets exit after two evaluations.
    let margin = pre_margin.min(slack_scan_margin(
        dice, lnl, mu_star, beta_p, mu_p, pi_grid, 0.0,
    ));
    Feasibility {
        feasible: margin > 0.0,
        margin,
    }
}

/// Single-kernel achievability test for the target pair (`beta_p`, `1/mu_p`):
/// the zero-distance mass must beat `l^(-1/mu_star)` and the scan constraint
/// must hold strictly for every grid `pi`.
pub fn feasible_thm5(
    dice: &impl LogMgf,
    ell: u64,
    mu_star: f64,
    beta_p: f64,
    mu_p: f64,
    pi_grid: usize,
) -> Feasibility {
    assert!(mu_p > 0.0 && beta_p >= 0.0, "target pair out of range");
    let lnl = (ell as f64).ln();
    let p0 = dice.p_zero();
    let pre_margin = if p0 > 0.0 {
        -p0.ln() - lnl / mu_star
    } else {
        f64::INFINITY
    };
    if pre_margin <= 0.0 {
        return Feasibility {
            feasible: false,
            margin: pre_margin,
        };
    }
    scan_feasible(dice, lnl, mu_star, beta_p, mu_p, pi_grid, pre_margin)
}

/// Two-kernel achievability test: the rate-side kernel contributes only its
/// scaling exponent `mu_star_rat` and the externally checked zero-mass
/// condition `rate_p_zero_ok`; the error-side kernel contributes its dice.
pub fn feasible_thm6(
    dice_err: &impl LogMgf,
    ell: u64,
    mu_star_rat: f64,
    beta_p: f64,
    mu_p: f64,
    rate_p_zero_ok: bool,
) -> Feasibility {
    assert!(mu_p > 0.0 && beta_p >= 0.0, "target pair out of range");
    if !rate_p_zero_ok {
        return Feasibility {
            feasible: false,
            margin: f64::NEG_INFINITY,
        };
    }
    let lnl = (ell as f64).ln();
    scan_feasible(
        dice_err,
        lnl,
        mu_star_rat,
        beta_p,
        mu_p,
        PI_GRID_DEFAULT,
        f64::INFINITY,
    )
}

/// How a region polyline was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionMethod {
    /// Per-beta bisection on the feasibility predicate.
    PredicateScan,
    /// Convex hull of `(0, 1/mu_star)` with the rate-function epigraph.
    Hull,
}

/// Boundary of the achievable (`beta_p`, `1/mu_p`) region as a polyline with
/// strictly increasing `beta_p`.
#[derive(Debug, Clone)]
pub struct TradeoffRegion {
    pub points: Vec<(f64, f64)>,
    pub method: RegionMethod,
}

impl TradeoffRegion {
    /// Piecewise-linear interpolation of the boundary height; clamps to the
    /// end values outside the covered range.
    pub fn eval(&self, beta: f64) -> f64 {
        let pts = &self.points;
        if beta <= pts[0].0 {
            return pts[0].1;
        }
        if beta >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let j = pts.partition_point(|&(b, _)| b <= beta);
        let (b0, y0) = pts[j - 1];
        let (b1, y1) = pts[j];
        if b1 == b0 {
            return y0.min(y1);
        }
        y0 + (y1 - y0) * (beta - b0) / (b1 - b0)
    }
}

fn require_p_zero(dice: &impl LogMgf, ell: u64, mu_star: f64) -> Result<f64> {
    let lnl = (ell as f64).ln();
    let p0 = dice.p_zero();
    if p0 > 0.0 && -p0.ln() <= lnl / mu_star {
        return Err(CoreError::Precondition(format!(
            "P{{Y=0}} = {p0} is not below l^(-1/mu*) = {}",
            (-lnl / mu_star).exp()
        )));
    }
    Ok(lnl)
}

/// The supremal feasible `1/mu_p` for each `beta_p` in the grid, found by
/// 40-step bisection on the feasibility predicate.
pub fn region_boundary(
    dice: &(impl LogMgf + Sync),
    ell: u64,
    mu_star: f64,
    beta_grid: &[f64],
) -> Result<TradeoffRegion> {
    require_p_zero(dice, ell, mu_star)?;
    let top = 1.0 / mu_star;
    let feasible_at = |beta: f64, x: f64| {
        feasible_thm5(dice, ell, mu_star, beta, 1.0 / x, PI_GRID_DEFAULT).feasible
    };
    let points = beta_grid
        .par_iter()
        .map(|&beta| {
            if feasible_at(beta, top) {
                return (beta, top);
            }
            let (mut lo, mut hi) = (0.0f64, top);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if feasible_at(beta, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (beta, lo)
        })
        .collect();
    Ok(TradeoffRegion {
        points,
        method: RegionMethod::PredicateScan,
    })
}

/// The same boundary obtained the convex-geometry way: lower hull of the
/// anchor point `(0, 1/mu_star)` together with the curve
/// `beta -> L(beta*lnl)/lnl`. Agreement with [`region_boundary`] is the
/// cross-check that the two characterizations coincide.
pub fn region_hull(
    dice: &(impl LogMgf + Sync),
    ell: u64,
    mu_star: f64,
    beta_grid: &[f64],
) -> Result<TradeoffRegion> {
    let lnl = require_p_zero(dice, ell, mu_star)?;
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 1.0 / mu_star)];
    pts.extend(
        beta_grid
            .par_iter()
            .map(|&b| (b, cramer_eval(dice, b * lnl) / lnl))
            .collect::<Vec<_>>(),
    );
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(TradeoffRegion {
        points: hull,
        method: RegionMethod::Hull,
    })
}

/// The moving point traced by the scan constraint:
/// `(beta_p*mu_p/(mu_p - pi*mu_star), (1-pi)/(mu_p - pi*mu_star))`.
/// At `pi = 0` this is the target pair itself; at `pi = 1` it lands on the
/// horizontal axis.
pub fn q_point(beta_p: f64, mu_p: f64, mu_star: f64, pi: f64) -> (f64, f64) {
    let den = mu_p - pi * mu_star;
    (beta_p * mu_p / den, (1.0 - pi) / den)
}

/// Closed-form lower bound on the Reed-Solomon rate function:
/// `(lnl - y)(1 - 1/lnl) - ln(lnl)`.
pub fn rs_bound(ell: u64, y: f64) -> Result<f64> {
    let lnl = (ell as f64).ln();
    if lnl <= 1.0 {
        return Err(CoreError::Precondition(format!(
            "rs_bound needs ln(l) > 1, got l = {ell}"
        )));
    }
    Ok((lnl - y) * (1.0 - 1.0 / lnl) - lnl.ln())
}

/// The zero of [`rs_bound`] in `y`: `lnl - ln(lnl)/(1 - 1/lnl)`.
pub fn rs_ystar(ell: u64) -> Result<f64> {
    let lnl = (ell as f64).ln();
    if lnl <= 1.0 {
        return Err(CoreError::Precondition(format!(
            "rs_ystar needs ln(l) > 1, got l = {ell}"
        )));
    }
    Ok(lnl - lnl.ln() / (1.0 - 1.0 / lnl))
}

/// How many leading terms of `sum_d d^lambda` are summed exactly before the
/// Euler-Maclaurin tail takes over.
const RS_HEAD: usize = 256;

/// Dice of the Reed-Solomon kernel of size `l`: `Y = ln d` with `d` uniform
/// on `1..=l`. Stored in closed form so `l` can reach 2^30 — the moment sums
/// use an exact head plus an Euler-Maclaurin tail instead of materializing
/// the support.
#[derive(Debug, Clone)]
pub struct RsDice {
    ell: u64,
    ln_head: Vec<f64>,
    mean: f64,
}

impl RsDice {
    pub fn new(ell: u64) -> RsDice {
        assert!(ell >= 2, "dice need at least two faces");
        let ln_head: Vec<f64> = (1..=ell.min(RS_HEAD as u64))
            .map(|d| (d as f64).ln())
            .collect();
        let mean = if ell <= 1 << 16 {
            (1..=ell).map(|d| (d as f64).ln()).sum::<f64>() / ell as f64
        } else {
            // Stirling series for ln(l!)/l; remainder below 1e-21 here.
            let l = ell as f64;
            let ln_fact =
                l * l.ln() - l + 0.5 * (2.0 * std::f64::consts::PI * l).ln() + 1.0 / (12.0 * l)
                    - 1.0 / (360.0 * l.powi(3));
            ln_fact / l
        };
        RsDice { ell, ln_head, mean }
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    /// `sum_{d=a}^{b} d^lambda` by Euler-Maclaurin (integral, endpoint, and
    /// two correction terms); accurate to ~1e-15 absolute once `a` exceeds
    /// the exact head.
    fn tail_sum(lambda: f64, a: f64, b: f64) -> f64 {
        let t = lambda + 1.0;
        let integral = if t == 0.0 {
            (b / a).ln()
        } else {
            (t * a.ln()).exp() * (t * (b / a).ln()).exp_m1() / t
        };
        let f = |x: f64| (lambda * x.ln()).exp();
        let d1 = |x: f64| lambda * ((lambda - 1.0) * x.ln()).exp();
        let c3 = lambda * (lambda - 1.0) * (lambda - 2.0);
        let d3 = |x: f64| c3 * ((lambda - 3.0) * x.ln()).exp();
        let sum = integral + 0.5 * (f(a) + f(b)) + (d1(b) - d1(a)) / 12.0 - (d3(b) - d3(a)) / 720.0;
        sum.max(0.0)
    }
}

impl LogMgf for RsDice {
    fn ln_mgf(&self, lambda: f64) -> f64 {
        let mut s: f64 = self.ln_head.iter().map(|&ln_d| (lambda * ln_d).exp()).sum();
        if self.ell > RS_HEAD as u64 {
            s += RsDice::tail_sum(lambda, (RS_HEAD + 1) as f64, self.ell as f64);
        }
        s.ln() - (self.ell as f64).ln()
    }

    fn ln_mgf_shifted(&self, lambda: f64) -> f64 {
        self.ln_mgf(lambda) // y_min = ln 1 = 0
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn p_zero(&self) -> f64 {
        1.0 / self.ell as f64
    }

    fn y_min(&self) -> f64 {
        0.0
    }
}

/// Smallest `k <= 30` such that a Reed-Solomon error kernel of size `2^k`
/// makes the target pair pass the two-kernel feasibility scan with
/// rate-side exponent `mu_star_rat`. The target must lie inside the
/// reference triangle with vertices (0, 1/2), (0, 0), (1, 0).
pub fn choose_rs_parameters(beta_p: f64, mu_p: f64, mu_star_rat: f64) -> Result<(u32, f64)> {
    let inv = 1.0 / mu_p;
    if !(beta_p > 0.0 && inv > 0.0 && beta_p + 2.0 * inv < 1.0) {
        return Err(CoreError::Precondition(format!(
            "({beta_p}, {inv}) is not strictly inside the (0,1/2)-(0,0)-(1,0) triangle"
        )));
    }
    for k in 1..=30u32 {
        let dice = RsDice::new(1u64 << k);
        let f = feasible_thm6(&dice, 1u64 << k, mu_star_rat, beta_p, mu_p, true);
        if f.feasible {
            return Ok((k, f.margin));
        }
    }
    Err(CoreError::NoAdmissibleConstant(format!(
        "no Reed-Solomon size 2^k with k <= 30 makes ({beta_p}, {inv}) feasible at rate exponent {mu_star_rat}"
    )))
}
